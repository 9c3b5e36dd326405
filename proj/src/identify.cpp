#include "metrack/identify.hpp"

#include "metrack/image.hpp"

#include <algorithm>
#include <cctype>

namespace fs = std::filesystem;

namespace metrack {

TemplateClass::TemplateClass(std::string class_id, Mat templates)
    : class_id_(std::move(class_id)), templates_(std::move(templates)) {
    if (templates_.cols() < 1) {
        throw InputError("template class '" + class_id_ + "' has no templates");
    }
    if (!templates_.allFinite()) {
        throw InputError("template class '" + class_id_ + "' has non-finite entries");
    }
}

const RegressionCache& TemplateClass::cache_for(const MetricMatrix& metric) const {
    require_same_size(metric.dim(), templates_.rows(), "metric vs template dimension");
    if (cache_.empty() || cached_metric_.rows() != metric.dim() ||
        cached_metric_ != metric.matrix()) {
        cache_ = RegressionCache::build(templates_, metric, templates_.cols());
        cached_metric_ = metric.matrix();
    }
    return cache_;
}

double class_residual(const MetricMatrix& metric, const TemplateClass& templates, const Vec& y) {
    return solve_regression(templates.cache_for(metric), metric, y).residual;
}

IdentityLedger IdentityLedger::empty(Eigen::Index n_classes) {
    if (n_classes < 1) throw InputError("an identity ledger needs at least one class");
    return {Vec::Zero(n_classes), {}};
}

IdentityLedger accumulate(IdentityLedger ledger, const Vec& residuals, double frame_score) {
    require_same_size(residuals.size(), ledger.n_classes(), "residuals vs ledger classes");
    if (!std::isfinite(frame_score) || !residuals.allFinite()) {
        throw InputError("non-finite residual or frame score");
    }
    ledger.cumulative += frame_score * residuals;
    ledger.per_frame.push_back({residuals, frame_score});
    return ledger;
}

Eigen::Index classify(const IdentityLedger& ledger) {
    if (ledger.n_classes() < 1) throw InputError("classify on an empty ledger");
    Eigen::Index best = 0;
    for (Eigen::Index k = 1; k < ledger.n_classes(); ++k) {
        if (ledger.cumulative[k] < ledger.cumulative[best]) best = k;
    }
    return best;
}

double median(std::span<const double> values) {
    if (values.empty()) throw InputError("median of an empty list");
    std::vector<double> v(values.begin(), values.end());
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    const double upper = v[mid];
    if (v.size() % 2 == 1) return upper;
    const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lower + upper);
}

bool detect_occlusion(double residual, std::span<const double> history, double factor,
                      std::size_t min_history) {
    if (history.size() < min_history || history.empty()) return false;
    return residual > median(history) * factor;
}

void OcclusionConfig::validate() const {
    if (!(factor > 0.0)) throw InputError("occlusion factor must be > 0");
    if (window < 1) throw InputError("occlusion window must be >= 1");
    if (min_history > window) {
        throw InputError("occlusion min_history cannot exceed the window");
    }
}

OcclusionMonitor::OcclusionMonitor(OcclusionConfig cfg) : cfg_(cfg) { cfg_.validate(); }

bool OcclusionMonitor::observe(double residual) {
    const std::vector<double> hist(history_.begin(), history_.end());
    const bool occluded = detect_occlusion(residual, hist, cfg_.factor, cfg_.min_history);
    if (!occluded) {
        history_.push_back(residual);
        if (history_.size() > cfg_.window) history_.pop_front();
    }
    return occluded;
}

double relative_residual(double residual, const MetricMatrix& metric, const Vec& y) {
    const double norm = metric.quad(y);
    if (!(norm > 1e-12)) return 1.0;
    return residual / norm;
}

namespace {

bool is_image(const fs::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return ext == ".pgm" || ext == ".png";
}

}  // namespace

std::vector<TemplateClass> load_template_classes(const fs::path& root, FeatureMode mode) {
    if (!fs::is_directory(root)) {
        throw IoError("template directory does not exist: " + root.string());
    }
    std::vector<fs::path> class_dirs;
    for (const auto& entry : fs::directory_iterator(root)) {
        if (entry.is_directory()) class_dirs.push_back(entry.path());
    }
    std::sort(class_dirs.begin(), class_dirs.end());
    if (class_dirs.empty()) {
        throw InputError("no class subdirectories in " + root.string());
    }

    std::vector<TemplateClass> classes;
    for (const fs::path& dir : class_dirs) {
        std::vector<fs::path> files;
        for (const auto& entry : fs::directory_iterator(dir)) {
            if (entry.is_regular_file() && is_image(entry.path())) files.push_back(entry.path());
        }
        std::sort(files.begin(), files.end());
        if (files.empty()) {
            throw InputError("template class directory has no images: " + dir.string());
        }
        Mat cols(feature_dim(mode), static_cast<Eigen::Index>(files.size()));
        for (std::size_t i = 0; i < files.size(); ++i) {
            const GrayFrame img = load_frame(files[i]);
            const BoundingBox whole{0.0, 0.0, static_cast<double>(img.width()),
                                    static_cast<double>(img.height())};
            cols.col(static_cast<Eigen::Index>(i)) = featurize(img, whole, mode);
        }
        classes.emplace_back(dir.filename().string(), std::move(cols));
    }
    return classes;
}

}  // namespace metrack
