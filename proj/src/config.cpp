#include "metrack/config.hpp"

#include "metrack/eval.hpp"

#include <charconv>
#include <cmath>
#include <functional>
#include <map>
#include <sstream>

namespace fs = std::filesystem;

namespace metrack {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::string num(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

double to_double(const std::string& v) {
    double out = 0.0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc() || res.ptr != v.data() + v.size() || !std::isfinite(out)) {
        throw InputError("expected a number, got '" + v + "'");
    }
    return out;
}

template <typename Int>
Int to_int(const std::string& v) {
    Int out = 0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
        throw InputError("expected a non-negative integer, got '" + v + "'");
    }
    return out;
}

bool to_bool(const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw InputError("expected true or false, got '" + v + "'");
}

std::string boolean(bool b) { return b ? "true" : "false"; }

BoundingBox to_box(const std::string& v) {
    std::vector<double> parts;
    std::stringstream ss(v);
    std::string tok;
    while (std::getline(ss, tok, ',')) parts.push_back(to_double(trim(tok)));
    if (parts.size() != 4) throw InputError("expected x,y,w,h, got '" + v + "'");
    if (!(parts[2] > 0.0) || !(parts[3] > 0.0)) {
        throw InputError("box width and height must be positive");
    }
    return {parts[0], parts[1], parts[2], parts[3]};
}

struct Field {
    std::string name;
    std::string description;
    std::function<void(RunConfig&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

// The structured_* keys only take effect when `structured = true`.
StructuredConfig& structured(RunConfig& c) { return c.structured_params; }

const StructuredConfig& structured_or_default(const RunConfig& c) {
    return c.tracker.structured ? *c.tracker.structured : c.structured_params;
}

const std::vector<Field>& fields() {
    static const std::vector<Field> table = {
        {"input_dir", "directory of numbered *.pgm / *.png frames",
         [](RunConfig& c, const std::string& v) { c.input_dir = v; },
         [](const RunConfig& c) { return c.input_dir.string(); }},
        {"init_box", "initial box x,y,w,h (top-left corner) in the first frame",
         [](RunConfig& c, const std::string& v) { c.init_box = to_box(v); },
         [](const RunConfig& c) {
             if (!c.init_box) return std::string();
             const BoundingBox& b = *c.init_box;
             return num(b.x) + "," + num(b.y) + "," + num(b.w) + "," + num(b.h);
         }},
        {"trajectory_out", "trajectory CSV (frame,x,y,w,h)",
         [](RunConfig& c, const std::string& v) { c.trajectory_out = v; },
         [](const RunConfig& c) { return c.trajectory_out.string(); }},
        {"diagnostics_out", "per-frame diagnostics JSON",
         [](RunConfig& c, const std::string& v) { c.diagnostics_out = v; },
         [](const RunConfig& c) { return c.diagnostics_out.string(); }},
        {"identities_out", "per-frame identification CSV (identify command)",
         [](RunConfig& c, const std::string& v) { c.identities_out = v; },
         [](const RunConfig& c) { return c.identities_out.string(); }},
        {"seed", "random seed; the --seed flag overrides it",
         [](RunConfig& c, const std::string& v) { c.tracker.rng_seed = to_int<std::uint64_t>(v); },
         [](const RunConfig& c) { return std::to_string(c.tracker.rng_seed); }},
        {"n_particles", "particles per frame",
         [](RunConfig& c, const std::string& v) { c.tracker.n_particles = to_int<int>(v); },
         [](const RunConfig& c) { return std::to_string(c.tracker.n_particles); }},
        {"sigma_x", "transition std-dev of the x centre (pixels)",
         [](RunConfig& c, const std::string& v) { c.tracker.sigma.x = to_double(v); },
         [](const RunConfig& c) { return num(c.tracker.sigma.x); }},
        {"sigma_y", "transition std-dev of the y centre (pixels)",
         [](RunConfig& c, const std::string& v) { c.tracker.sigma.y = to_double(v); },
         [](const RunConfig& c) { return num(c.tracker.sigma.y); }},
        {"sigma_scale", "transition std-dev of the scale",
         [](RunConfig& c, const std::string& v) { c.tracker.sigma.scale = to_double(v); },
         [](const RunConfig& c) { return num(c.tracker.sigma.scale); }},
        {"gamma_f", "foreground residual bandwidth",
         [](RunConfig& c, const std::string& v) { c.tracker.gamma_f = to_double(v); },
         [](const RunConfig& c) { return num(c.tracker.gamma_f); }},
        {"gamma_b", "background residual bandwidth",
         [](RunConfig& c, const std::string& v) { c.tracker.gamma_b = to_double(v); },
         [](const RunConfig& c) { return num(c.tracker.gamma_b); }},
        {"rho", "weight of the background term in the score",
         [](RunConfig& c, const std::string& v) { c.tracker.rho = to_double(v); },
         [](const RunConfig& c) { return num(c.tracker.rho); }},
        {"buffer_capacity", "samples kept per class buffer",
         [](RunConfig& c, const std::string& v) {
             c.tracker.sampler.capacity = to_int<std::size_t>(v);
         },
         [](const RunConfig& c) { return std::to_string(c.tracker.sampler.capacity); }},
        {"q_factor", "sampling weight base; a sample from frame t has weight q^t",
         [](RunConfig& c, const std::string& v) { c.tracker.sampler.q_factor = to_double(v); },
         [](const RunConfig& c) { return num(c.tracker.sampler.q_factor); }},
        {"triplets_per_frame", "triplets drawn for metric updates each frame",
         [](RunConfig& c, const std::string& v) {
             c.tracker.triplets_per_frame = to_int<std::size_t>(v);
         },
         [](const RunConfig& c) { return std::to_string(c.tracker.triplets_per_frame); }},
        {"pa_c", "passive-aggressive step bound C",
         [](RunConfig& c, const std::string& v) { c.tracker.pa.c_bound = to_double(v); },
         [](const RunConfig& c) { return num(c.tracker.pa.c_bound); }},
        {"metric_learning", "learn the metric online (false keeps M = I)",
         [](RunConfig& c, const std::string& v) { c.tracker.metric_learning = to_bool(v); },
         [](const RunConfig& c) { return boolean(c.tracker.metric_learning); }},
        {"structured", "run the structured overlap-ranking learner each frame",
         [](RunConfig& c, const std::string& v) {
             if (to_bool(v)) {
                 c.tracker.structured = c.structured_params;
             } else {
                 c.tracker.structured.reset();
             }
         },
         [](const RunConfig& c) { return boolean(c.tracker.structured.has_value()); }},
        {"structured_c", "step bound of the structured learner",
         [](RunConfig& c, const std::string& v) { structured(c).c_bound = to_double(v); },
         [](const RunConfig& c) { return num(structured_or_default(c).c_bound); }},
        {"structured_iterations", "constraint-generation rounds of the structured learner",
         [](RunConfig& c, const std::string& v) { structured(c).max_iterations = to_int<int>(v); },
         [](const RunConfig& c) { return std::to_string(structured_or_default(c).max_iterations); }},
        {"structured_candidates", "candidate boxes per structured round",
         [](RunConfig& c, const std::string& v) {
             structured(c).n_candidate_boxes = to_int<int>(v);
         },
         [](const RunConfig& c) {
             return std::to_string(structured_or_default(c).n_candidate_boxes);
         }},
        {"feature_mode", "hog405 or raw_pixels",
         [](RunConfig& c, const std::string& v) { c.tracker.feature_mode = parse_feature_mode(v); },
         [](const RunConfig& c) { return to_string(c.tracker.feature_mode); }},
        {"occlusion_factor", "flag a frame when its residual exceeds factor x rolling median",
         [](RunConfig& c, const std::string& v) { c.occlusion.factor = to_double(v); },
         [](const RunConfig& c) { return num(c.occlusion.factor); }},
        {"occlusion_window", "length of the rolling residual history",
         [](RunConfig& c, const std::string& v) { c.occlusion.window = to_int<std::size_t>(v); },
         [](const RunConfig& c) { return std::to_string(c.occlusion.window); }},
        {"occlusion_min_history", "history length needed before frames can be flagged",
         [](RunConfig& c, const std::string& v) {
             c.occlusion.min_history = to_int<std::size_t>(v);
         },
         [](const RunConfig& c) { return std::to_string(c.occlusion.min_history); }},
    };
    return table;
}

bool is_path_key(const std::string& key) {
    return key == "input_dir" || key == "trajectory_out" || key == "diagnostics_out" ||
           key == "identities_out";
}

}  // namespace

const std::vector<ConfigKey>& config_keys() {
    static const std::vector<ConfigKey> keys = [] {
        std::vector<ConfigKey> out;
        const RunConfig defaults;
        for (const Field& f : fields()) out.push_back({f.name, f.get(defaults), f.description});
        return out;
    }();
    return keys;
}

RunConfig parse_config(const std::string& text, const std::string& origin,
                       const fs::path& base_dir) {
    std::map<std::string, const Field*> by_name;
    for (const Field& f : fields()) by_name[f.name] = &f;

    RunConfig cfg;
    std::map<std::string, int> seen;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string body = trim(line);
        if (body.empty() || body.front() == '#') continue;
        const std::string where = origin + ":" + std::to_string(line_no);
        const auto eq = body.find('=');
        if (eq == std::string::npos) {
            throw InputError(where + ": expected 'key = value'");
        }
        const std::string key = trim(body.substr(0, eq));
        std::string value = trim(body.substr(eq + 1));
        const auto it = by_name.find(key);
        if (it == by_name.end()) {
            throw InputError(where + ": unknown key '" + key + "'");
        }
        if (const auto prev = seen.find(key); prev != seen.end()) {
            throw InputError(where + ": key '" + key + "' already set on line " +
                             std::to_string(prev->second));
        }
        seen[key] = line_no;
        if (is_path_key(key) && !value.empty() && fs::path(value).is_relative() &&
            !base_dir.empty()) {
            value = (base_dir / value).lexically_normal().string();
        }
        try {
            it->second->set(cfg, value);
        } catch (const InputError& e) {
            throw InputError(where + ": key '" + key + "': " + e.what());
        }
    }
    if (cfg.tracker.structured) cfg.tracker.structured = cfg.structured_params;
    try {
        cfg.tracker.validate();
        cfg.occlusion.validate();
    } catch (const InputError& e) {
        throw InputError(origin + ": " + e.what());
    }
    return cfg;
}

RunConfig load_config(const fs::path& path) {
    return parse_config(read_text_file(path), path.string(), path.parent_path());
}

std::string default_config_text() {
    std::string out = "# metrack run configuration\n";
    for (const ConfigKey& k : config_keys()) {
        out += "\n# " + k.description + "\n";
        if (k.default_value.empty()) {
            out += "# " + k.name + " =\n";
        } else {
            out += k.name + " = " + k.default_value + "\n";
        }
    }
    return out;
}

std::string format_config(const RunConfig& cfg) {
    std::string out;
    const bool has_structured = cfg.tracker.structured.has_value();
    for (const Field& f : fields()) {
        if (!has_structured && f.name.rfind("structured_", 0) == 0) continue;
        const std::string v = f.get(cfg);
        if (v.empty()) continue;
        out += f.name + " = " + v + "\n";
    }
    return out;
}

}  // namespace metrack
