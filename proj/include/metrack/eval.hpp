#pragma once

// Tracking-quality metrics (centre location error, VOC overlap, success rate)
// and box-sequence CSV I/O.

#include "metrack/common.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace metrack {

/// Boxes keyed by frame index, top-left (x, y, w, h) convention.
using BoxSequence = std::map<std::int64_t, BoundingBox>;

/// Distance between box centres in pixels.
double cle(const BoundingBox& pred, const BoundingBox& gt);

struct FrameMetrics {
    std::int64_t frame = 0;
    double cle = 0.0;
    double vor = 0.0;
};

struct SequenceReport {
    std::vector<FrameMetrics> per_frame;
    double mean_cle = 0.0;
    double mean_vor = 0.0;
    double success_rate = 0.0;      // fraction of evaluated frames with vor > 0.5
    std::size_t frames_evaluated = 0;
    std::size_t frames_missing_gt = 0;  // predictions without a ground-truth box
};

inline constexpr double kSuccessOverlap = 0.5;

SequenceReport summarize(const BoxSequence& preds, const BoxSequence& gt);

/// Reads `frame,x,y,w,h` rows; the header line is required and frame indices
/// must be strictly increasing.
BoxSequence read_boxes_csv(const std::filesystem::path& path);
BoxSequence parse_boxes_csv(const std::string& text, const std::string& origin);

std::string format_boxes_csv(const BoxSequence& boxes);
void write_boxes_csv(const std::filesystem::path& path, const BoxSequence& boxes);

std::string report_json(const SequenceReport& report);
std::string report_per_frame_csv(const SequenceReport& report);

/// Writes `text` to `path`, throwing IoError on failure.
void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace metrack
