#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace metrack {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Rng = std::mt19937_64;

/// Bad user input: dimension mismatch, malformed config, degenerate box.
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Unrecoverable numerical failure (e.g. a singular system with no fallback).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Uniform draw from the open interval (0, 1); never returns 0 or 1.
inline double open_unit(Rng& rng) {
    return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

/// Axis-aligned box in pixel coordinates, (x, y) is the top-left corner.
struct BoundingBox {
    double x = 0.0;
    double y = 0.0;
    double w = 0.0;
    double h = 0.0;

    double cx() const { return x + 0.5 * w; }
    double cy() const { return y + 0.5 * h; }
    double area() const { return (w > 0.0 && h > 0.0) ? w * h : 0.0; }

    static BoundingBox centered(double cx, double cy, double w, double h) {
        return {cx - 0.5 * w, cy - 0.5 * h, w, h};
    }

    bool operator==(const BoundingBox&) const = default;
};

inline void require_same_size(Eigen::Index a, Eigen::Index b, const char* what) {
    if (a != b) {
        throw InputError(std::string("dimension mismatch: ") + what + " (" + std::to_string(a) +
                         " vs " + std::to_string(b) + ")");
    }
}

}  // namespace metrack
