#pragma once

// Particle-filter tracker scored by metric-weighted linear representations.

#include "metrack/common.hpp"
#include "metrack/features.hpp"
#include "metrack/image.hpp"
#include "metrack/linalg.hpp"
#include "metrack/metric.hpp"
#include "metrack/reservoir.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace metrack {

/// Centre position and scale relative to the initial box.
struct ObjectState {
    double cx = 0.0;
    double cy = 0.0;
    double scale = 1.0;

    bool operator==(const ObjectState&) const = default;
};

inline constexpr double kMinScale = 0.2;
inline constexpr double kMaxScale = 5.0;

struct Particle {
    ObjectState state;
    double weight = 0.0;
};

struct TransitionSigma {
    double x = 10.0;
    double y = 10.0;
    double scale = 0.1;
};

struct TrackerConfig {
    int n_particles = 200;
    TransitionSigma sigma;
    double gamma_f = 1.0;
    double gamma_b = 1.0;
    double rho = 0.1;
    SamplerConfig sampler;
    PAConfig pa;
    bool metric_learning = true;
    std::optional<StructuredConfig> structured;
    std::size_t triplets_per_frame = 500;
    FeatureMode feature_mode = FeatureMode::Hog405;
    std::uint64_t rng_seed = 0;

    void validate() const;
};

/// A regression cache whose columns mirror the entries of one sample buffer.
struct BasisCache {
    RegressionCache cache;
    std::vector<std::uint64_t> column_ids;  // buffer entry id per column
};

struct LabeledSample {
    Vec feature;
    SampleLabel label;
    BoundingBox box;
};

struct FrameDiagnostics {
    std::int64_t frame_index = 0;
    double map_score = 0.0;
    std::size_t fg_size = 0;
    std::size_t bg_size = 0;
    int pa_updates = 0;
    int structured_constraints = 0;
    int cache_fallbacks = 0;
    bool uniform_reweight = false;  // scores carried no information
};

/// Logistic of exp(-theta_f / gamma_f) - rho * exp(-theta_b / gamma_b).
double score_from_residuals(double theta_f, double theta_b, double gamma_f, double gamma_b,
                            double rho);

/// Adds independent Gaussian noise to each state; scale is clamped to [0.2, 5].
void propagate(std::vector<Particle>& particles, const TransitionSigma& sigma, Rng& rng);

/// State of the heaviest particle; the lowest index wins ties.
ObjectState estimate_map(const std::vector<Particle>& particles);

/// Positives: the box itself plus 4 boxes within 0.1 * max(w, h) of it.
/// Negatives: 8 boxes at radius [1, 2] * max(w, h), evenly spaced angles.
std::vector<LabeledSample> select_training_samples(const GrayFrame& frame,
                                                   const BoundingBox& box, FeatureMode mode,
                                                   Rng& rng);

class Tracker {
public:
    /// Seeds buffers and caches from the first frame. `box` must lie inside it.
    static Tracker init(const GrayFrame& frame, const BoundingBox& box, const TrackerConfig& cfg);

    /// Processes one frame and returns the MAP state.
    ObjectState step(const GrayFrame& frame);

    /// Discriminative score in (0, 1) of a feature vector.
    double score(const Vec& feature) const;

    BoundingBox box_of(const ObjectState& state) const;
    BoundingBox current_box() const { return box_of(state_); }
    const ObjectState& state() const { return state_; }

    const TrackerConfig& config() const { return cfg_; }
    const MetricMatrix& metric() const { return metric_; }
    const SampleBuffer& fg_buffer() const { return fg_; }
    const SampleBuffer& bg_buffer() const { return bg_; }
    const BasisCache& fg_cache() const { return fg_cache_; }
    const BasisCache& bg_cache() const { return bg_cache_; }
    const std::vector<Particle>& particles() const { return particles_; }
    const BoundingBox& init_box() const { return init_box_; }
    std::int64_t frame_index() const { return frame_index_; }
    const FrameDiagnostics& last_diagnostics() const { return diag_; }

    /// Worst inverse residual ||H G - I||_F / sqrt(N) over both caches, or
    /// +inf if a cache's columns do not match its buffer.
    double consistency_error() const;

private:
    Tracker(const TrackerConfig& cfg, const BoundingBox& box, int feature_dim);

    void insert_sample(SampleBuffer& buffer, BasisCache& basis, const Vec& feature);
    void learn(const GrayFrame& frame, const BoundingBox& box, const Vec& anchor,
               const std::vector<LabeledSample>& samples);
    void perturb_caches(const MetricMatrix& updated, const Vec& a_minus, const Vec& a_plus,
                        double eta);

    TrackerConfig cfg_;
    BoundingBox init_box_;
    MetricMatrix metric_;
    SampleBuffer fg_;
    SampleBuffer bg_;
    BasisCache fg_cache_;
    BasisCache bg_cache_;
    std::vector<Particle> particles_;
    ObjectState state_;
    std::int64_t frame_index_ = 0;
    Rng rng_;
    FrameDiagnostics diag_;
};

}  // namespace metrack
