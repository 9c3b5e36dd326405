#include "metrack/cli.hpp"

#include "metrack/image.hpp"
#include "metrack/reservoir.hpp"
#include "metrack/synthetic.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>

namespace fs = std::filesystem;

namespace metrack::cli {

namespace {

BoundingBox required_init_box(const RunConfig& cfg) {
    if (!cfg.init_box) throw InputError("config key 'init_box' is required");
    return *cfg.init_box;
}

std::vector<fs::path> required_frames(const RunConfig& cfg) {
    if (cfg.input_dir.empty()) throw InputError("config key 'input_dir' is required");
    return list_frames(cfg.input_dir);
}

// Runs `body` and maps exceptions to exit codes.
int guarded(std::ostream& err, const std::function<void()>& body) {
    try {
        body();
        return kExitOk;
    } catch (const InputError& e) {
        err << "error: " << e.what() << "\n";
        return kExitInput;
    } catch (const NumericalError& e) {
        err << "numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const IoError& e) {
        err << "I/O error: " << e.what() << "\n";
        return kExitIo;
    } catch (const fs::filesystem_error& e) {
        err << "I/O error: " << e.what() << "\n";
        return kExitIo;
    }
}

std::string fixed(double v, int digits = 4) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

RunConfig load_with_seed(const fs::path& config_path, std::optional<std::uint64_t> seed) {
    RunConfig cfg = load_config(config_path);
    if (seed) cfg.tracker.rng_seed = *seed;
    return cfg;
}

}  // namespace

TrackOutcome run_tracking(const RunConfig& cfg) {
    const BoundingBox init_box = required_init_box(cfg);
    const std::vector<fs::path> frames = required_frames(cfg);

    const GrayFrame first = load_frame(frames.front());
    Tracker tracker = Tracker::init(first, init_box, cfg.tracker);

    TrackOutcome outcome;
    outcome.trajectory[0] = tracker.current_box();
    outcome.diagnostics.push_back(tracker.last_diagnostics());
    for (std::size_t i = 1; i < frames.size(); ++i) {
        const GrayFrame frame = load_frame(frames[i]);
        tracker.step(frame);
        outcome.trajectory[static_cast<std::int64_t>(i)] = tracker.current_box();
        outcome.diagnostics.push_back(tracker.last_diagnostics());
    }
    return outcome;
}

std::string diagnostics_json(const RunConfig& cfg, const TrackOutcome& outcome) {
    nlohmann::ordered_json j;
    j["feature_mode"] = to_string(cfg.tracker.feature_mode);
    j["seed"] = cfg.tracker.rng_seed;
    j["n_frames"] = outcome.diagnostics.size();
    nlohmann::ordered_json frames = nlohmann::ordered_json::array();
    for (const FrameDiagnostics& d : outcome.diagnostics) {
        nlohmann::ordered_json f;
        f["frame"] = d.frame_index;
        f["map_score"] = d.map_score;
        f["fg_size"] = d.fg_size;
        f["bg_size"] = d.bg_size;
        f["pa_updates"] = d.pa_updates;
        f["structured_constraints"] = d.structured_constraints;
        f["cache_fallbacks"] = d.cache_fallbacks;
        f["uniform_reweight"] = d.uniform_reweight;
        frames.push_back(std::move(f));
    }
    j["frames"] = std::move(frames);
    return j.dump(2) + "\n";
}

const std::string& IdentifyOutcome::final_label() const {
    if (frames.empty()) throw InputError("identification produced no frames");
    return class_ids.at(static_cast<std::size_t>(frames.back().class_index));
}

IdentifyOutcome run_identification(const RunConfig& cfg,
                                   const std::vector<TemplateClass>& classes) {
    if (classes.empty()) throw InputError("no template classes");
    const BoundingBox init_box = required_init_box(cfg);
    const std::vector<fs::path> frames = required_frames(cfg);

    IdentifyOutcome outcome;
    for (const TemplateClass& c : classes) outcome.class_ids.push_back(c.class_id());
    outcome.ledger = IdentityLedger::empty(static_cast<Eigen::Index>(classes.size()));
    OcclusionMonitor monitor(cfg.occlusion);

    std::optional<Tracker> tracker;
    for (std::size_t i = 0; i < frames.size(); ++i) {
        const GrayFrame frame = load_frame(frames[i]);
        if (!tracker) {
            tracker.emplace(Tracker::init(frame, init_box, cfg.tracker));
        } else {
            tracker->step(frame);
        }
        const BoundingBox box = tracker->current_box();
        const Vec y = featurize(frame, box, cfg.tracker.feature_mode);
        const MetricMatrix& metric = tracker->metric();

        Vec residuals(static_cast<Eigen::Index>(classes.size()));
        for (std::size_t k = 0; k < classes.size(); ++k) {
            residuals[static_cast<Eigen::Index>(k)] = class_residual(metric, classes[k], y);
        }
        outcome.ledger = accumulate(std::move(outcome.ledger), residuals, tracker->score(y));

        IdentityFrame f;
        f.frame = static_cast<std::int64_t>(i);
        f.class_index = classify(outcome.ledger);
        f.residual_best = residuals.minCoeff();
        f.occluded = monitor.observe(relative_residual(f.residual_best, metric, y));
        outcome.frames.push_back(f);
        outcome.trajectory[f.frame] = box;
    }
    return outcome;
}

std::string identities_csv(const IdentifyOutcome& outcome) {
    std::string out = "frame,class,residual_best,occluded\n";
    for (const IdentityFrame& f : outcome.frames) {
        out += std::to_string(f.frame) + "," +
               outcome.class_ids[static_cast<std::size_t>(f.class_index)] + "," +
               fixed(f.residual_best, 6) + "," + (f.occluded ? "1" : "0") + "\n";
    }
    return out;
}

int cmd_track(const fs::path& config_path, std::optional<std::uint64_t> seed, std::ostream& out,
              std::ostream& err) {
    return guarded(err, [&] {
        const RunConfig cfg = load_with_seed(config_path, seed);
        const TrackOutcome outcome = run_tracking(cfg);
        // Outputs are written only once the whole sequence has been tracked.
        write_boxes_csv(cfg.trajectory_out, outcome.trajectory);
        write_text_file(cfg.diagnostics_out, diagnostics_json(cfg, outcome));
        out << "tracked " << outcome.trajectory.size() << " frames -> "
            << cfg.trajectory_out.string() << "\n";
    });
}

int cmd_eval(const fs::path& trajectory_csv, const fs::path& gt_csv,
             const std::optional<fs::path>& report_out, const std::optional<fs::path>& per_frame_out,
             std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const BoxSequence preds = read_boxes_csv(trajectory_csv);
        const BoxSequence gt = read_boxes_csv(gt_csv);
        const SequenceReport report = summarize(preds, gt);
        const std::string json = report_json(report);
        out << json;
        if (report_out) write_text_file(*report_out, json);
        if (per_frame_out) write_text_file(*per_frame_out, report_per_frame_csv(report));
    });
}

int cmd_identify(const fs::path& config_path, const fs::path& templates_dir,
                 std::optional<std::uint64_t> seed, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const RunConfig cfg = load_with_seed(config_path, seed);
        const std::vector<TemplateClass> classes =
            load_template_classes(templates_dir, cfg.tracker.feature_mode);
        const IdentifyOutcome outcome = run_identification(cfg, classes);
        write_text_file(cfg.identities_out, identities_csv(outcome));
        std::size_t occluded = 0;
        for (const IdentityFrame& f : outcome.frames) occluded += f.occluded ? 1 : 0;
        out << "final label: " << outcome.final_label() << "\n";
        out << "occluded frames: " << occluded << " of " << outcome.frames.size() << "\n";
    });
}

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ns(Clock::time_point since) {
    return std::chrono::duration<double, std::nano>(Clock::now() - since).count();
}

std::string bench_sampling(const BenchOptions& opts) {
    constexpr int kStream = 200;
    constexpr std::size_t kCapacity = 20;
    const double qs[] = {1.0, 1.2, 1.6};
    std::string csv = "q,decile,first_frame,last_frame,inclusion_frequency,expected_uniform\n";
    Rng rng(opts.seed);
    const Vec dummy = Vec::Zero(1);
    for (double q : qs) {
        const SamplerConfig cfg{kCapacity, q};
        std::vector<double> hits(kStream, 0.0);
        for (int trial = 0; trial < opts.trials; ++trial) {
            SampleBuffer buffer(SampleLabel::Foreground, kCapacity);
            for (int t = 0; t < kStream; ++t) buffer.insert(dummy, t, cfg, rng);
            for (const BufferEntry& e : buffer.entries()) {
                hits[static_cast<std::size_t>(e.frame_index)] += 1.0;
            }
        }
        for (int d = 0; d < 10; ++d) {
            const int lo = d * kStream / 10;
            const int hi = (d + 1) * kStream / 10;
            double sum = 0.0;
            for (int t = lo; t < hi; ++t) sum += hits[static_cast<std::size_t>(t)];
            const double freq = sum / (static_cast<double>(hi - lo) * opts.trials);
            csv += fixed(q, 2) + "," + std::to_string(d) + "," + std::to_string(lo) + "," +
                   std::to_string(hi - 1) + "," + fixed(freq, 5) + "," +
                   fixed(static_cast<double>(kCapacity) / kStream, 5) + "\n";
        }
    }
    return csv;
}

Mat random_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Mat m(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c) {
        for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = normal(rng);
    }
    return m;
}

std::string bench_inverse(const BenchOptions& opts) {
    constexpr Eigen::Index kDim = 405;
    const Eigen::Index sizes[] = {50, 100, 200, 300};
    Rng rng(opts.seed);
    const MetricMatrix metric = MetricMatrix::identity(kDim);
    std::string csv = "n,online_ns,dense_ns,speedup\n";
    for (Eigen::Index n : sizes) {
        const Mat basis = random_matrix(kDim, n, rng);
        RegressionCache cache = RegressionCache::build(basis.leftCols(n - 1), metric, n);
        const Vec column = basis.col(n - 1);

        const int reps = 20;
        auto start = Clock::now();
        for (int r = 0; r < reps; ++r) {
            cache.append(metric, column);
            cache.remove(metric, n - 1);
        }
        // Each repetition is one append and one removal.
        const double online = elapsed_ns(start) / (2.0 * reps);

        start = Clock::now();
        double sink = 0.0;
        for (int r = 0; r < reps; ++r) {
            const Mat inv = symmetric_pseudo_inverse(metric_gram(basis, metric));
            sink += inv(0, 0);
        }
        const double dense = elapsed_ns(start) / reps;
        if (!std::isfinite(sink)) throw NumericalError("dense inverse benchmark diverged");
        csv += std::to_string(n) + "," + fixed(online, 0) + "," + fixed(dense, 0) + "," +
               fixed(dense / online, 2) + "\n";
    }
    return csv;
}

std::string bench_metric(const BenchOptions& opts) {
    const Eigen::Index dims[] = {64, 405, 1024};
    Rng rng(opts.seed);
    std::string csv = "dim,updates,active_updates,ns_per_update,updates_per_second\n";
    for (Eigen::Index d : dims) {
        MetricMatrix metric = MetricMatrix::identity(d);
        const int updates = d > 500 ? 200 : 1000;
        const Mat pool = random_matrix(d, 3 * updates, rng) / std::sqrt(static_cast<double>(d));
        int active = 0;
        const auto start = Clock::now();
        for (int i = 0; i < updates; ++i) {
            const Triplet t{pool.col(3 * i), pool.col(3 * i + 1), pool.col(3 * i + 2)};
            if (pa_update(metric, t, PAConfig{}).eta > 0.0) ++active;
        }
        const double ns = elapsed_ns(start) / updates;
        csv += std::to_string(d) + "," + std::to_string(updates) + "," + std::to_string(active) +
               "," + fixed(ns, 0) + "," + fixed(1e9 / ns, 1) + "\n";
    }
    return csv;
}

}  // namespace

int cmd_bench(const std::string& what, const BenchOptions& opts, std::ostream& out,
              std::ostream& err) {
    return guarded(err, [&] {
        std::string csv;
        if (what == "sampling") {
            if (opts.trials < 1) throw InputError("--trials must be >= 1");
            csv = bench_sampling(opts);
        } else if (what == "inverse") {
            csv = bench_inverse(opts);
        } else if (what == "metric") {
            csv = bench_metric(opts);
        } else {
            throw InputError("unknown bench target '" + what +
                             "' (expected sampling, inverse or metric)");
        }
        out << csv;
        if (opts.csv_out) write_text_file(*opts.csv_out, csv);
    });
}

int cmd_synth(const std::string& kind, const fs::path& out_dir, std::uint64_t seed,
              std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        if (kind == "tracking") {
            TranslationSequenceConfig cfg;
            cfg.seed = seed;
            const SyntheticSequence seq = make_translation_sequence(cfg);
            write_sequence(out_dir / "frames", seq);
            RunConfig run;
            run.tracker.rng_seed = seed;
            run.input_dir = "frames";
            run.init_box = seq.ground_truth.begin()->second;
            write_text_file(out_dir / "track.cfg", format_config(run));
            out << "wrote " << seq.frames.size() << " frames, groundtruth.csv and track.cfg to "
                << out_dir.string() << "\n";
        } else if (kind == "identify") {
            IdentifyFixtureConfig cfg;
            cfg.seed = seed;
            const IdentifyFixture fx = write_identify_fixture(out_dir, cfg);
            out << "wrote templates and " << fx.sequences.size() << " sequences to "
                << out_dir.string() << "\n";
        } else {
            throw InputError("unknown fixture kind '" + kind + "' (expected tracking or identify)");
        }
    });
}

namespace {

std::string config_key_help() {
    std::string text = "\nConfig keys (key = value, '#' starts a comment):\n";
    for (const ConfigKey& k : config_keys()) {
        text += "  " + k.name + " [" + (k.default_value.empty() ? "required" : k.default_value) +
                "]\n      " + k.description + "\n";
    }
    text += "Relative paths are resolved against the config file's directory.\n";
    return text;
}

}  // namespace

int run(int argc, char** argv) {
    CLI::App app{"Online metric-learning visual tracker"};
    app.require_subcommand(1);
    app.footer(
        "Exit codes: 0 ok, 1 input error, 2 numerical failure, 3 I/O error.");

    std::optional<std::uint64_t> seed;
    std::function<int()> action;

    fs::path config_path;
    auto* track = app.add_subcommand("track", "Track an object through a frame directory");
    track->add_option("-c,--config", config_path, "Run config file")->required();
    track->add_option("--seed", seed, "Random seed (overrides the config)");
    track->footer(config_key_help());
    track->callback([&] { action = [&] { return cmd_track(config_path, seed, std::cout, std::cerr); }; });

    fs::path traj_csv;
    fs::path gt_csv;
    std::optional<fs::path> report_out;
    std::optional<fs::path> per_frame_out;
    auto* eval = app.add_subcommand("eval", "Score a trajectory against ground truth");
    eval->add_option("-t,--trajectory", traj_csv, "Trajectory CSV (frame,x,y,w,h)")->required();
    eval->add_option("-g,--gt", gt_csv, "Ground-truth CSV (frame,x,y,w,h)")->required();
    eval->add_option("-o,--report", report_out, "Write the JSON report here");
    eval->add_option("--per-frame", per_frame_out, "Write per-frame frame,cle,vor CSV here");
    eval->add_option("--seed", seed, "Accepted for uniformity; evaluation is deterministic");
    eval->callback([&] {
        action = [&] {
            return cmd_eval(traj_csv, gt_csv, report_out, per_frame_out, std::cout, std::cerr);
        };
    });

    fs::path templates_dir;
    auto* identify =
        app.add_subcommand("identify", "Track, then identify the object against template classes");
    identify->add_option("-c,--config", config_path, "Run config file")->required();
    identify->add_option("-T,--templates", templates_dir, "Directory with one subdirectory per class")
        ->required();
    identify->add_option("--seed", seed, "Random seed (overrides the config)");
    identify->footer(config_key_help());
    identify->callback([&] {
        action = [&] { return cmd_identify(config_path, templates_dir, seed, std::cout, std::cerr); };
    });

    std::string bench_target;
    BenchOptions bench_opts;
    std::optional<fs::path> bench_out;
    auto* bench = app.add_subcommand("bench", "Micro-benchmarks: sampling, inverse or metric");
    bench->add_option("target", bench_target, "sampling | inverse | metric")->required();
    bench->add_option("-o,--out", bench_out, "Also write the CSV table here");
    bench->add_option("--trials", bench_opts.trials, "Monte-Carlo trials per q (sampling)");
    bench->add_option("--seed", seed, "Random seed");
    bench->callback([&] {
        action = [&] {
            bench_opts.seed = seed.value_or(0);
            bench_opts.csv_out = bench_out;
            return cmd_bench(bench_target, bench_opts, std::cout, std::cerr);
        };
    });

    std::string synth_kind;
    fs::path synth_out;
    auto* synth = app.add_subcommand("synth", "Write a synthetic fixture: tracking or identify");
    synth->add_option("kind", synth_kind, "tracking | identify")->required();
    synth->add_option("-o,--out", synth_out, "Output directory")->required();
    synth->add_option("--seed", seed, "Random seed");
    synth->callback([&] {
        action = [&] { return cmd_synth(synth_kind, synth_out, seed.value_or(0), std::cout, std::cerr); };
    });

    auto* config = app.add_subcommand("config", "Print a config file with every key at its default");
    config->callback([&] {
        action = [] {
            std::cout << default_config_text();
            return static_cast<int>(kExitOk);
        };
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitInput;
    }
    return action ? action() : static_cast<int>(kExitInput);
}

}  // namespace metrack::cli
