#pragma once

// Command implementations behind the `metrack` executable. Each cmd_*
// function catches library exceptions and maps them to exit codes.

#include "metrack/config.hpp"
#include "metrack/eval.hpp"
#include "metrack/identify.hpp"
#include "metrack/tracker.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace metrack::cli {

enum ExitCode : int {
    kExitOk = 0,
    kExitInput = 1,
    kExitNumerical = 2,
    kExitIo = 3,
};

struct TrackOutcome {
    BoxSequence trajectory;
    std::vector<FrameDiagnostics> diagnostics;
};

/// Runs the tracker over `cfg.input_dir`. Frame 0 reports the initial box.
TrackOutcome run_tracking(const RunConfig& cfg);

std::string diagnostics_json(const RunConfig& cfg, const TrackOutcome& outcome);

struct IdentityFrame {
    std::int64_t frame = 0;
    Eigen::Index class_index = 0;
    double residual_best = 0.0;
    bool occluded = false;
};

struct IdentifyOutcome {
    std::vector<std::string> class_ids;
    std::vector<IdentityFrame> frames;
    IdentityLedger ledger;
    BoxSequence trajectory;

    const std::string& final_label() const;
};

/// Tracks the sequence and, frame by frame, accumulates template residuals
/// weighted by the tracker score of the tracked patch.
IdentifyOutcome run_identification(const RunConfig& cfg,
                                   const std::vector<TemplateClass>& classes);

std::string identities_csv(const IdentifyOutcome& outcome);

int cmd_track(const std::filesystem::path& config_path, std::optional<std::uint64_t> seed,
              std::ostream& out, std::ostream& err);

int cmd_eval(const std::filesystem::path& trajectory_csv, const std::filesystem::path& gt_csv,
             const std::optional<std::filesystem::path>& report_out,
             const std::optional<std::filesystem::path>& per_frame_out, std::ostream& out,
             std::ostream& err);

int cmd_identify(const std::filesystem::path& config_path,
                 const std::filesystem::path& templates_dir, std::optional<std::uint64_t> seed,
                 std::ostream& out, std::ostream& err);

struct BenchOptions {
    std::uint64_t seed = 0;
    std::optional<std::filesystem::path> csv_out;
    int trials = 2000;  // sampling: Monte-Carlo trials per q
};

/// what: "sampling", "inverse" or "metric".
int cmd_bench(const std::string& what, const BenchOptions& opts, std::ostream& out,
              std::ostream& err);

/// kind: "tracking" or "identify".
int cmd_synth(const std::string& kind, const std::filesystem::path& out_dir, std::uint64_t seed,
              std::ostream& out, std::ostream& err);

/// Full command-line entry point.
int run(int argc, char** argv);

}  // namespace metrack::cli
