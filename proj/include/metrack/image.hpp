#pragma once

#include "metrack/common.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace metrack {

/// Grayscale frame, intensities scaled to [0, 1]. Stored row-major as
/// height x width.
class GrayFrame {
public:
    static constexpr int kMinSide = 16;

    GrayFrame() = default;
    GrayFrame(int width, int height, double fill = 0.0);

    /// Takes ownership of a height x width matrix with values in [0, 1].
    static GrayFrame from_matrix(Mat pixels);

    int width() const { return static_cast<int>(pixels_.cols()); }
    int height() const { return static_cast<int>(pixels_.rows()); }

    double at(int row, int col) const { return pixels_(row, col); }
    double& at(int row, int col) { return pixels_(row, col); }

    const Mat& pixels() const { return pixels_; }
    Mat& pixels() { return pixels_; }

    bool contains(const BoundingBox& box) const;

private:
    Mat pixels_;
};

/// Binary 8-bit PGM (P5). Intensities are divided by maxval.
GrayFrame read_pgm(const std::filesystem::path& path);

/// Writes P5 with maxval 255; values are rounded after clamping to [0, 1].
void write_pgm(const std::filesystem::path& path, const GrayFrame& frame);

/// 8-bit PNG converted to grayscale. Throws IoError when built without libpng.
GrayFrame read_png(const std::filesystem::path& path);

/// Dispatches on extension (.pgm / .png).
GrayFrame load_frame(const std::filesystem::path& path);

/// Frame files (*.pgm, *.png) in `dir`, sorted by numeric stem. Throws
/// InputError naming the first missing index if the numbering has a gap.
std::vector<std::filesystem::path> list_frames(const std::filesystem::path& dir);

}  // namespace metrack
