#pragma once

// Identification of a tracked object against static per-class template sets,
// by cumulative score-weighted reconstruction residuals, plus occlusion
// detection from residual spikes.

#include "metrack/common.hpp"
#include "metrack/features.hpp"
#include "metrack/linalg.hpp"

#include <deque>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace metrack {

/// One identity class: template feature vectors as basis columns. The
/// regression cache is rebuilt lazily whenever the metric it was built
/// against differs from the one passed in.
class TemplateClass {
public:
    TemplateClass(std::string class_id, Mat templates);

    const std::string& class_id() const { return class_id_; }
    const Mat& templates() const { return templates_; }
    Eigen::Index size() const { return templates_.cols(); }

    const RegressionCache& cache_for(const MetricMatrix& metric) const;

private:
    std::string class_id_;
    Mat templates_;
    mutable RegressionCache cache_;
    mutable Mat cached_metric_;
};

/// min_x (y - P_T x)^T M (y - P_T x) over the class's templates.
double class_residual(const MetricMatrix& metric, const TemplateClass& templates, const Vec& y);

struct LedgerFrame {
    Vec residuals;
    double weight = 0.0;
};

/// Running sums H_k = sum_i weight_i * residual_i[k].
struct IdentityLedger {
    Vec cumulative;
    std::vector<LedgerFrame> per_frame;

    static IdentityLedger empty(Eigen::Index n_classes);
    Eigen::Index n_classes() const { return cumulative.size(); }
};

IdentityLedger accumulate(IdentityLedger ledger, const Vec& residuals, double frame_score);

/// Index of the smallest cumulative residual; ties go to the lowest index.
Eigen::Index classify(const IdentityLedger& ledger);

/// True iff history holds at least `min_history` values and
/// residual > median(history) * factor.
bool detect_occlusion(double residual, std::span<const double> history, double factor = 3.0,
                      std::size_t min_history = 10);

double median(std::span<const double> values);

struct OcclusionConfig {
    double factor = 3.0;
    std::size_t window = 30;
    std::size_t min_history = 10;

    void validate() const;
};

/// Rolling-median spike detector. Frames flagged as occluded do not enter
/// the history, so a long occlusion does not raise the threshold.
class OcclusionMonitor {
public:
    explicit OcclusionMonitor(OcclusionConfig cfg = {});

    bool observe(double residual);
    const std::deque<double>& history() const { return history_; }

private:
    OcclusionConfig cfg_;
    std::deque<double> history_;
};

/// Residual divided by ||y||_M^2; 1 for a zero-norm feature, which is what an
/// empty (constant) patch produces.
double relative_residual(double residual, const MetricMatrix& metric, const Vec& y);

/// Loads `root/<class_id>/*.pgm|*.png`, one class per subdirectory in
/// lexicographic order. Each image is resampled whole to a patch.
std::vector<TemplateClass> load_template_classes(const std::filesystem::path& root,
                                                 FeatureMode mode);

}  // namespace metrack
