#pragma once

#include "metrack/common.hpp"
#include "metrack/image.hpp"

#include <array>
#include <string>

namespace metrack {

inline constexpr int kPatchSide = 32;
inline constexpr int kHogBins = 9;
inline constexpr int kHogCellsPerSide = 3;
inline constexpr int kHogModes = 5;
inline constexpr int kHogDim = kHogModes * kHogCellsPerSide * kHogCellsPerSide * kHogBins;  // 405
inline constexpr int kRawDim = kPatchSide * kPatchSide;

/// 32x32 resampled image region, values in [0, 1].
struct Patch {
    Mat pixels = Mat::Zero(kPatchSide, kPatchSide);
};

/// Rectangle inside the patch, in pixels.
struct PatchRegion {
    int row0;
    int col0;
    int rows;
    int cols;
};

/// The five block-division modes: full patch, top 2/3, bottom 2/3,
/// left 2/3, right 2/3. Each is split into 3x3 cells.
const std::array<PatchRegion, kHogModes>& hog_modes();

/// Cell boundary k (0..3) along a span of `len` pixels: floor(k * len / 3).
inline int cell_edge(int len, int k) { return k * len / kHogCellsPerSide; }

/// Bilinear resampling of `box` to 32x32. Samples outside the frame use the
/// nearest border pixel.
Patch extract_patch(const GrayFrame& frame, const BoundingBox& box);

/// 405-dim descriptor: per mode and cell, a 9-bin unsigned orientation
/// histogram (magnitude weighted, linear interpolation between bin centres),
/// L2-normalized per cell. Order: mode, cell row, cell column, bin.
Vec hog405(const Patch& patch);

/// Row-major flatten, mean removed, L2-normalized (zero if constant).
Vec raw_pixels(const Patch& patch);

enum class FeatureMode { Hog405, RawPixels };

FeatureMode parse_feature_mode(const std::string& name);
std::string to_string(FeatureMode mode);
int feature_dim(FeatureMode mode);

Vec featurize(const Patch& patch, FeatureMode mode);
Vec featurize(const GrayFrame& frame, const BoundingBox& box, FeatureMode mode);

}  // namespace metrack
