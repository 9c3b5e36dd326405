#include "metrack/cli.hpp"
#include "metrack/config.hpp"
#include "metrack/image.hpp"
#include "metrack/synthetic.hpp"

#include <doctest.h>

#include <sstream>

using namespace metrack;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("metrack_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

}  // namespace

TEST_CASE("config defaults are the published constants") {
    const RunConfig cfg = parse_config("", "empty");
    CHECK(cfg.tracker.n_particles == 200);
    CHECK(cfg.tracker.sigma.x == 10.0);
    CHECK(cfg.tracker.sigma.y == 10.0);
    CHECK(cfg.tracker.sigma.scale == 0.1);
    CHECK(cfg.tracker.gamma_f == 1.0);
    CHECK(cfg.tracker.gamma_b == 1.0);
    CHECK(cfg.tracker.rho == 0.1);
    CHECK(cfg.tracker.sampler.capacity == 300);
    CHECK(cfg.tracker.sampler.q_factor == 1.6);
    CHECK(cfg.tracker.triplets_per_frame == 500);
    CHECK_FALSE(cfg.tracker.structured.has_value());
    CHECK(cfg.occlusion.window == 30);
}

TEST_CASE("config parsing") {
    const RunConfig cfg = parse_config(
        "# comment\n"
        "input_dir = frames\n"
        "init_box = 1, 2, 30, 40\n"
        "rho = 0.25   \n"
        "structured_iterations = 3\n"
        "structured = true\n"
        "feature_mode = raw_pixels\n",
        "cfg", "/base");
    CHECK(cfg.input_dir == fs::path("/base/frames"));
    REQUIRE(cfg.init_box.has_value());
    CHECK(cfg.init_box->h == 40.0);
    CHECK(cfg.tracker.rho == 0.25);
    REQUIRE(cfg.tracker.structured.has_value());
    CHECK(cfg.tracker.structured->max_iterations == 3);
    CHECK(cfg.tracker.feature_mode == FeatureMode::RawPixels);

    // The default file lists structured_* keys but keeps the learner off.
    CHECK_FALSE(parse_config(default_config_text(), "defaults").tracker.structured.has_value());
    const RunConfig round = parse_config(format_config(cfg), "round");
    CHECK(round.tracker.structured->max_iterations == 3);
    CHECK(round.init_box == cfg.init_box);
}

TEST_CASE("config errors name the offending key and line") {
    auto message = [](const std::string& text) {
        try {
            parse_config(text, "run.cfg");
        } catch (const InputError& e) {
            return std::string(e.what());
        }
        return std::string();
    };
    CHECK(message("bogus = 1\n").find("run.cfg:1: unknown key 'bogus'") != std::string::npos);
    CHECK(message("\nrho = x\n").find("run.cfg:2: key 'rho'") != std::string::npos);
    CHECK(message("rho = 1\nrho = 2\n").find("already set") != std::string::npos);
    CHECK(message("novalue\n").find("expected 'key = value'") != std::string::npos);
    CHECK(message("n_particles = -3\n").find("n_particles") != std::string::npos);
    CHECK(message("q_factor = 0.5\n").find("q") != std::string::npos);
    CHECK(message("init_box = 1,2,3\n").find("init_box") != std::string::npos);
}

TEST_CASE("track command: outputs, determinism, and failure without partial output") {
    const fs::path dir = scratch_dir("track");
    TranslationSequenceConfig sc;
    sc.frames = 20;
    sc.width = 128;
    sc.height = 64;
    sc.start_y = 20;
    sc.seed = 4;
    const SyntheticSequence seq = make_translation_sequence(sc);
    write_sequence(dir / "frames", seq);

    RunConfig run;
    run.input_dir = "frames";
    run.init_box = seq.ground_truth.at(0);
    run.tracker.n_particles = 50;
    run.tracker.triplets_per_frame = 50;
    run.trajectory_out = "out/traj.csv";
    run.diagnostics_out = "out/diag.json";
    write_text_file(dir / "run.cfg", format_config(run));

    std::ostringstream out, err;
    REQUIRE(cli::cmd_track(dir / "run.cfg", std::nullopt, out, err) == cli::kExitOk);
    const BoxSequence traj = read_boxes_csv(dir / "out/traj.csv");
    CHECK(traj.size() == 20);
    const std::string first = read_text_file(dir / "out/traj.csv");
    CHECK(read_text_file(dir / "out/diag.json").find("\"pa_updates\"") != std::string::npos);

    REQUIRE(cli::cmd_track(dir / "run.cfg", std::nullopt, out, err) == cli::kExitOk);
    CHECK(read_text_file(dir / "out/traj.csv") == first);

    RunConfig bad = run;
    bad.init_box = BoundingBox{500, 10, 24, 24};
    bad.trajectory_out = "bad/traj.csv";
    bad.diagnostics_out = "bad/diag.json";
    write_text_file(dir / "bad.cfg", format_config(bad));
    CHECK(cli::cmd_track(dir / "bad.cfg", std::nullopt, out, err) == cli::kExitInput);
    CHECK_FALSE(fs::exists(dir / "bad"));

    CHECK(cli::cmd_track(dir / "missing.cfg", std::nullopt, out, err) == cli::kExitIo);

    fs::remove(dir / "frames" / "frame_0007.pgm");
    std::ostringstream gap_err;
    CHECK(cli::cmd_track(dir / "run.cfg", std::nullopt, out, gap_err) == cli::kExitInput);
    CHECK(gap_err.str().find("missing frame 7") != std::string::npos);
}

TEST_CASE("eval command") {
    const fs::path dir = scratch_dir("eval");
    write_text_file(dir / "gt.csv", "frame,x,y,w,h\n0,0,0,10,10\n1,0,0,10,10\n");
    write_text_file(dir / "pred.csv", "frame,x,y,w,h\n0,0,0,10,10\n1,3,4,10,10\n");
    std::ostringstream out, err;
    CHECK(cli::cmd_eval(dir / "pred.csv", dir / "gt.csv", dir / "r.json", dir / "pf.csv", out,
                        err) == cli::kExitOk);
    CHECK(out.str().find("\"mean_cle\": 2.5") != std::string::npos);
    CHECK(read_text_file(dir / "pf.csv").find("1,5.0000") != std::string::npos);
    write_text_file(dir / "nohdr.csv", "0,0,0,10,10\n");
    CHECK(cli::cmd_eval(dir / "nohdr.csv", dir / "gt.csv", std::nullopt, std::nullopt, out, err) ==
          cli::kExitInput);
}

TEST_CASE("bench command targets") {
    std::ostringstream out, err;
    cli::BenchOptions opts;
    opts.trials = 300;
    CHECK(cli::cmd_bench("sampling", opts, out, err) == cli::kExitOk);
    CHECK(out.str().rfind("q,decile", 0) == 0);
    CHECK(cli::cmd_bench("gpu", opts, out, err) == cli::kExitInput);
}

TEST_CASE("identify command with a single class") {
    const fs::path dir = scratch_dir("identify_single");
    IdentifyFixtureConfig fc;
    fc.frames = 12;
    fc.blank_begin = fc.blank_end = 0;
    const IdentifyFixture fx = write_identify_fixture(dir, fc);
    // Keep only one class directory.
    fs::remove_all(fx.templates_dir / "horizontal");
    fs::remove_all(fx.templates_dir / "vertical");
    std::ostringstream out, err;
    REQUIRE(cli::cmd_identify(fx.sequences[0].config_path, fx.templates_dir, std::nullopt, out,
                              err) == cli::kExitOk);
    CHECK(out.str().find("final label: diagonal") != std::string::npos);
}
