#include "metrack/features.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace metrack {

const std::array<PatchRegion, kHogModes>& hog_modes() {
    constexpr int two_thirds = 2 * kPatchSide / 3;  // 21
    constexpr int offset = kPatchSide - two_thirds;  // 11
    static const std::array<PatchRegion, kHogModes> modes = {{
        {0, 0, kPatchSide, kPatchSide},
        {0, 0, two_thirds, kPatchSide},
        {offset, 0, two_thirds, kPatchSide},
        {0, 0, kPatchSide, two_thirds},
        {0, offset, kPatchSide, two_thirds},
    }};
    return modes;
}

Patch extract_patch(const GrayFrame& frame, const BoundingBox& box) {
    if (!(box.w > 0.0) || !(box.h > 0.0)) {
        throw InputError("patch box must have positive area");
    }
    const int max_c = frame.width() - 1;
    const int max_r = frame.height() - 1;
    const double sx = box.w / kPatchSide;
    const double sy = box.h / kPatchSide;

    Patch patch;
    for (int r = 0; r < kPatchSide; ++r) {
        const double y = std::clamp(box.y + (r + 0.5) * sy - 0.5, 0.0, static_cast<double>(max_r));
        const int y0 = static_cast<int>(std::floor(y));
        const int y1 = std::min(y0 + 1, max_r);
        const double fy = y - y0;
        for (int c = 0; c < kPatchSide; ++c) {
            const double x =
                std::clamp(box.x + (c + 0.5) * sx - 0.5, 0.0, static_cast<double>(max_c));
            const int x0 = static_cast<int>(std::floor(x));
            const int x1 = std::min(x0 + 1, max_c);
            const double fx = x - x0;
            const double top = frame.at(y0, x0) * (1.0 - fx) + frame.at(y0, x1) * fx;
            const double bottom = frame.at(y1, x0) * (1.0 - fx) + frame.at(y1, x1) * fx;
            patch.pixels(r, c) = top * (1.0 - fy) + bottom * fy;
        }
    }
    return patch;
}

namespace {

struct Gradients {
    Mat magnitude = Mat::Zero(kPatchSide, kPatchSide);
    Mat angle = Mat::Zero(kPatchSide, kPatchSide);  // degrees in [0, 180)
};

// Central differences with replicated borders.
Gradients patch_gradients(const Mat& p) {
    Gradients g;
    const int last = kPatchSide - 1;
    for (int r = 0; r < kPatchSide; ++r) {
        for (int c = 0; c < kPatchSide; ++c) {
            const double gx = p(r, std::min(c + 1, last)) - p(r, std::max(c - 1, 0));
            const double gy = p(std::min(r + 1, last), c) - p(std::max(r - 1, 0), c);
            g.magnitude(r, c) = std::sqrt(gx * gx + gy * gy);
            double deg = std::atan2(gy, gx) * (180.0 / std::numbers::pi);
            if (deg < 0.0) deg += 180.0;
            if (deg >= 180.0) deg -= 180.0;
            g.angle(r, c) = deg;
        }
    }
    return g;
}

}  // namespace

Vec hog405(const Patch& patch) {
    constexpr double bin_width = 180.0 / kHogBins;
    const Gradients g = patch_gradients(patch.pixels);
    Vec out = Vec::Zero(kHogDim);
    Eigen::Index offset = 0;
    for (const PatchRegion& region : hog_modes()) {
        for (int cr = 0; cr < kHogCellsPerSide; ++cr) {
            const int r_begin = region.row0 + cell_edge(region.rows, cr);
            const int r_end = region.row0 + cell_edge(region.rows, cr + 1);
            for (int cc = 0; cc < kHogCellsPerSide; ++cc) {
                const int c_begin = region.col0 + cell_edge(region.cols, cc);
                const int c_end = region.col0 + cell_edge(region.cols, cc + 1);
                auto hist = out.segment(offset, kHogBins);
                for (int r = r_begin; r < r_end; ++r) {
                    for (int c = c_begin; c < c_end; ++c) {
                        const double mag = g.magnitude(r, c);
                        if (mag == 0.0) continue;
                        const double pos = g.angle(r, c) / bin_width - 0.5;
                        const double lo = std::floor(pos);
                        const double frac = pos - lo;
                        const int b0 = (static_cast<int>(lo) + kHogBins) % kHogBins;
                        const int b1 = (b0 + 1) % kHogBins;
                        hist[b0] += mag * (1.0 - frac);
                        hist[b1] += mag * frac;
                    }
                }
                const double norm = hist.norm();
                if (norm > 0.0) hist /= norm;
                offset += kHogBins;
            }
        }
    }
    return out;
}

Vec raw_pixels(const Patch& patch) {
    Vec v(kRawDim);
    for (int r = 0; r < kPatchSide; ++r) {
        for (int c = 0; c < kPatchSide; ++c) {
            v[r * kPatchSide + c] = patch.pixels(r, c);
        }
    }
    v.array() -= v.mean();
    const double norm = v.norm();
    if (norm > 1e-12) {
        v /= norm;
    } else {
        v.setZero();
    }
    return v;
}

FeatureMode parse_feature_mode(const std::string& name) {
    if (name == "hog405") return FeatureMode::Hog405;
    if (name == "raw_pixels") return FeatureMode::RawPixels;
    throw InputError("unknown feature mode '" + name + "' (expected hog405 or raw_pixels)");
}

std::string to_string(FeatureMode mode) {
    return mode == FeatureMode::Hog405 ? "hog405" : "raw_pixels";
}

int feature_dim(FeatureMode mode) { return mode == FeatureMode::Hog405 ? kHogDim : kRawDim; }

Vec featurize(const Patch& patch, FeatureMode mode) {
    return mode == FeatureMode::Hog405 ? hog405(patch) : raw_pixels(patch);
}

Vec featurize(const GrayFrame& frame, const BoundingBox& box, FeatureMode mode) {
    return featurize(extract_patch(frame, box), mode);
}

}  // namespace metrack
