#include "metrack/eval.hpp"

#include "metrack/metric.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace metrack {

double cle(const BoundingBox& pred, const BoundingBox& gt) {
    return std::hypot(pred.cx() - gt.cx(), pred.cy() - gt.cy());
}

SequenceReport summarize(const BoxSequence& preds, const BoxSequence& gt) {
    SequenceReport report;
    std::size_t successes = 0;
    double cle_sum = 0.0;
    double vor_sum = 0.0;
    for (const auto& [frame, pred] : preds) {
        const auto it = gt.find(frame);
        if (it == gt.end()) {
            ++report.frames_missing_gt;
            continue;
        }
        const FrameMetrics m{frame, cle(pred, it->second), vor_overlap(pred, it->second)};
        cle_sum += m.cle;
        vor_sum += m.vor;
        if (m.vor > kSuccessOverlap) ++successes;
        report.per_frame.push_back(m);
    }
    report.frames_evaluated = report.per_frame.size();
    if (report.frames_evaluated > 0) {
        const double n = static_cast<double>(report.frames_evaluated);
        report.mean_cle = cle_sum / n;
        report.mean_vor = vor_sum / n;
        report.success_rate = static_cast<double>(successes) / n;
    }
    return report;
}

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_commas(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) out.push_back(trim(field));
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

double parse_number(const std::string& tok, const std::string& where) {
    try {
        std::size_t used = 0;
        const double v = std::stod(tok, &used);
        if (used != tok.size() || !std::isfinite(v)) throw std::invalid_argument(tok);
        return v;
    } catch (const std::exception&) {
        throw InputError(where + ": not a number: '" + tok + "'");
    }
}

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

}  // namespace

BoxSequence parse_boxes_csv(const std::string& text, const std::string& origin) {
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    bool header_seen = false;
    BoxSequence out;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const std::string where = origin + ":" + std::to_string(line_no);
        const std::vector<std::string> fields = split_commas(line);
        if (!header_seen) {
            if (fields != std::vector<std::string>{"frame", "x", "y", "w", "h"}) {
                throw InputError(where + ": expected header 'frame,x,y,w,h'");
            }
            header_seen = true;
            continue;
        }
        if (fields.size() != 5) {
            throw InputError(where + ": expected 5 fields, got " + std::to_string(fields.size()));
        }
        const double f = parse_number(fields[0], where);
        if (f != std::floor(f)) throw InputError(where + ": frame index must be an integer");
        const auto frame = static_cast<std::int64_t>(f);
        if (!out.empty() && frame <= out.rbegin()->first) {
            throw InputError(where + ": frame indices must be strictly increasing");
        }
        out[frame] = BoundingBox{parse_number(fields[1], where), parse_number(fields[2], where),
                                 parse_number(fields[3], where), parse_number(fields[4], where)};
    }
    if (!header_seen) throw InputError(origin + ": missing header 'frame,x,y,w,h'");
    return out;
}

BoxSequence read_boxes_csv(const fs::path& path) {
    return parse_boxes_csv(read_text_file(path), path.string());
}

std::string format_boxes_csv(const BoxSequence& boxes) {
    std::string out = "frame,x,y,w,h\n";
    for (const auto& [frame, b] : boxes) {
        out += std::to_string(frame) + "," + fmt_double(b.x) + "," + fmt_double(b.y) + "," +
               fmt_double(b.w) + "," + fmt_double(b.h) + "\n";
    }
    return out;
}

void write_boxes_csv(const fs::path& path, const BoxSequence& boxes) {
    write_text_file(path, format_boxes_csv(boxes));
}

std::string report_json(const SequenceReport& report) {
    nlohmann::ordered_json j;
    j["frames_evaluated"] = report.frames_evaluated;
    j["frames_missing_gt"] = report.frames_missing_gt;
    j["mean_cle"] = report.mean_cle;
    j["mean_vor"] = report.mean_vor;
    j["success_rate"] = report.success_rate;
    return j.dump(2) + "\n";
}

std::string report_per_frame_csv(const SequenceReport& report) {
    std::string out = "frame,cle,vor\n";
    for (const FrameMetrics& m : report.per_frame) {
        out += std::to_string(m.frame) + "," + fmt_double(m.cle) + "," + fmt_double(m.vor) + "\n";
    }
    return out;
}

void write_text_file(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(path.parent_path(), ec);
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
    out.close();
    if (!out) throw IoError("failed writing " + path.string());
}

std::string read_text_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace metrack
