#pragma once

// Online Mahalanobis metric learning: triplet hinge losses, the
// passive-aggressive closed-form step, and the structured (overlap-ranked)
// cutting-plane learner.

#include "metrack/common.hpp"
#include "metrack/linalg.hpp"

#include <functional>
#include <span>
#include <utility>
#include <vector>

namespace metrack {

struct Triplet {
    Vec anchor;
    Vec positive;
    Vec negative;
};

struct PAConfig {
    double c_bound = 1.0;
};

/// Outcome of one passive-aggressive step. When `eta` is zero the metric was
/// left untouched. `a_minus` / `a_plus` are anchor-negative and
/// anchor-positive differences, so the update direction is
/// U = a_minus a_minus^T - a_plus a_plus^T.
struct PAStep {
    double loss = 0.0;
    double eta = 0.0;
    Vec a_minus;
    Vec a_plus;
};

/// (p - q)^T M (p - q)
double mahalanobis(const MetricMatrix& metric, const Vec& p, const Vec& q);

/// max{0, 1 + D(anchor, positive) - D(anchor, negative)}
double triplet_loss(const MetricMatrix& metric, const Triplet& t);

double global_loss(const MetricMatrix& metric, std::span<const Triplet> triplets);

/// Computes the step for `t` without touching `metric`.
PAStep pa_step(const MetricMatrix& metric, const Triplet& t, const PAConfig& cfg);

/// Applies the step in place and returns it.
PAStep pa_update(MetricMatrix& metric, const Triplet& t, const PAConfig& cfg);

/// Intersection over union; 0 when either box has zero area.
double vor_overlap(const BoundingBox& a, const BoundingBox& b);

struct ScoredBox {
    BoundingBox box;
    Vec feature;
};

struct StructuredConfig {
    double c_bound = 1.0;
    int max_iterations = 5;
    int n_candidate_boxes = 16;
};

struct ViolatedPair {
    Eigen::Index mu = 0;
    Eigen::Index nu = 1;
    double violation = 0.0;
};

/// Exhaustive argmax over ordered pairs (i != j) of
///   s(R, R_i) - s(R, R_j) + D(p, p_i) - D(p, p_j)
/// with the lexicographically smallest pair winning ties.
ViolatedPair most_violated(const MetricMatrix& metric, const ScoredBox& anchor,
                           std::span<const ScoredBox> candidates);

/// argmin ||B eta - f||_1  s.t.  eta >= 0, sum(eta) <= c_bound.
/// Solved exactly as a linear program.
Vec solve_eta_vector(const Mat& b_matrix, const Vec& f_vector, double c_bound);

/// Called once per accepted constraint with the metric after that
/// constraint's update has been applied.
using PerturbationHook = std::function<void(const MetricMatrix& updated, const Vec& a_minus,
                                            const Vec& a_plus, double eta)>;

struct StructuredResult {
    int iterations = 0;
    std::vector<std::pair<Eigen::Index, Eigen::Index>> constraints;
    Vec eta;
    bool aborted = false;
};

/// One round of structured metric learning around `anchor`. Updates `metric`
/// in place; each accepted constraint is forwarded to `hook`.
StructuredResult structured_update(MetricMatrix& metric, const ScoredBox& anchor,
                                   std::span<const ScoredBox> candidates,
                                   const StructuredConfig& cfg,
                                   const PerturbationHook& hook = {});

/// System (B, f) for a constraint list. Exposed for testing.
struct StructuredSystem {
    Mat b_matrix;
    Vec f_vector;
};
StructuredSystem build_structured_system(
    const MetricMatrix& round_start, const ScoredBox& anchor,
    std::span<const ScoredBox> candidates,
    std::span<const std::pair<Eigen::Index, Eigen::Index>> constraints);

/// Uniform boxes around `around`: centre offsets within +-1.5 box dimensions,
/// scale in [0.8, 1.2].
std::vector<BoundingBox> sample_candidate_boxes(const BoundingBox& around, int count, Rng& rng);

/// Clips negative eigenvalues of M to zero.
MetricMatrix psd_project(const MetricMatrix& metric);

}  // namespace metrack
