#include "metrack/tracker.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace metrack {

void TrackerConfig::validate() const {
    if (n_particles < 1) throw InputError("n_particles must be >= 1");
    if (sigma.x < 0.0 || sigma.y < 0.0 || sigma.scale < 0.0) {
        throw InputError("transition sigmas must be >= 0");
    }
    if (!(gamma_f > 0.0) || !(gamma_b > 0.0)) throw InputError("gamma_f and gamma_b must be > 0");
    if (rho < 0.0) throw InputError("rho must be >= 0");
    if (!(pa.c_bound > 0.0)) throw InputError("PA bound C must be > 0");
    sampler.validate();
    if (structured) {
        if (structured->max_iterations < 1) {
            throw InputError("structured max_iterations must be >= 1");
        }
        if (!(structured->c_bound > 0.0)) throw InputError("structured C must be > 0");
        if (structured->n_candidate_boxes < 2) {
            throw InputError("structured learning needs at least 2 candidate boxes");
        }
    }
}

double score_from_residuals(double theta_f, double theta_b, double gamma_f, double gamma_b,
                            double rho) {
    const double z = std::exp(-theta_f / gamma_f) - rho * std::exp(-theta_b / gamma_b);
    return 1.0 / (1.0 + std::exp(-z));
}

void propagate(std::vector<Particle>& particles, const TransitionSigma& sigma, Rng& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    for (Particle& p : particles) {
        // Draw all three even when a sigma is zero so streams stay aligned.
        const double nx = normal(rng);
        const double ny = normal(rng);
        const double ns = normal(rng);
        p.state.cx += sigma.x * nx;
        p.state.cy += sigma.y * ny;
        p.state.scale = std::clamp(p.state.scale + sigma.scale * ns, kMinScale, kMaxScale);
    }
}

ObjectState estimate_map(const std::vector<Particle>& particles) {
    if (particles.empty()) {
        throw InputError("estimate_map on an empty particle set");
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < particles.size(); ++i) {
        if (particles[i].weight > particles[best].weight) best = i;
    }
    return particles[best].state;
}

namespace {

constexpr int kPositives = 4;
constexpr int kNegatives = 8;

BoundingBox shifted(const BoundingBox& box, double dx, double dy) {
    return {box.x + dx, box.y + dy, box.w, box.h};
}

// Uniform point in a disc of the given radius.
std::pair<double, double> disc_offset(double radius, Rng& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double r = radius * std::sqrt(unit(rng));
    const double a = 2.0 * std::numbers::pi * unit(rng);
    return {r * std::cos(a), r * std::sin(a)};
}

std::vector<LabeledSample> harvest(const GrayFrame& frame, const BoundingBox& box,
                                   FeatureMode mode, double positive_radius, Rng& rng) {
    std::vector<LabeledSample> out;
    out.reserve(1 + kPositives + kNegatives);
    out.push_back({featurize(frame, box, mode), SampleLabel::Foreground, box});
    for (int i = 0; i < kPositives; ++i) {
        const auto [dx, dy] = disc_offset(positive_radius, rng);
        const BoundingBox b = shifted(box, dx, dy);
        out.push_back({featurize(frame, b, mode), SampleLabel::Foreground, b});
    }
    const double extent = std::max(box.w, box.h);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double phase = 2.0 * std::numbers::pi * unit(rng);
    for (int i = 0; i < kNegatives; ++i) {
        const double radius = extent * (1.0 + unit(rng));
        const double angle = phase + 2.0 * std::numbers::pi * i / kNegatives;
        const BoundingBox b = shifted(box, radius * std::cos(angle), radius * std::sin(angle));
        out.push_back({featurize(frame, b, mode), SampleLabel::Background, b});
    }
    return out;
}

}  // namespace

std::vector<LabeledSample> select_training_samples(const GrayFrame& frame,
                                                   const BoundingBox& box, FeatureMode mode,
                                                   Rng& rng) {
    return harvest(frame, box, mode, 0.1 * std::max(box.w, box.h), rng);
}

Tracker::Tracker(const TrackerConfig& cfg, const BoundingBox& box, int feature_dim)
    : cfg_(cfg),
      init_box_(box),
      metric_(MetricMatrix::identity(feature_dim)),
      fg_(SampleLabel::Foreground, cfg.sampler.capacity),
      bg_(SampleLabel::Background, cfg.sampler.capacity),
      state_{box.cx(), box.cy(), 1.0},
      rng_(cfg.rng_seed) {}

Tracker Tracker::init(const GrayFrame& frame, const BoundingBox& box, const TrackerConfig& cfg) {
    cfg.validate();
    if (!(box.w >= 1.0) || !(box.h >= 1.0) || !std::isfinite(box.x) || !std::isfinite(box.y)) {
        throw InputError("initial box is degenerate");
    }
    if (!frame.contains(box)) {
        throw InputError("initial box lies outside the first frame");
    }
    const int dim = feature_dim(cfg.feature_mode);
    Tracker t(cfg, box, dim);

    // Init positives stay within 2 px of the given box.
    const std::vector<LabeledSample> seeds = harvest(frame, box, cfg.feature_mode, 2.0, t.rng_);
    Mat fg_basis(dim, 0);
    Mat bg_basis(dim, 0);
    for (const LabeledSample& s : seeds) {
        SampleBuffer& buffer = s.label == SampleLabel::Foreground ? t.fg_ : t.bg_;
        BasisCache& basis = s.label == SampleLabel::Foreground ? t.fg_cache_ : t.bg_cache_;
        Mat& cols = s.label == SampleLabel::Foreground ? fg_basis : bg_basis;
        const InsertResult r = buffer.insert(s.feature, 0, cfg.sampler, t.rng_);
        if (r.kind == InsertResult::Kind::Rejected) continue;
        // Seeding never exceeds capacity with the default sizes; with a tiny
        // capacity we rebuild the basis from the buffer below instead.
        basis.column_ids.push_back(r.entry_id);
        cols.conservativeResize(Eigen::NoChange, cols.cols() + 1);
        cols.col(cols.cols() - 1) = s.feature;
    }
    auto sync = [&](SampleBuffer& buffer, BasisCache& basis) {
        Mat cols(dim, static_cast<Eigen::Index>(buffer.size()));
        basis.column_ids.clear();
        for (std::size_t i = 0; i < buffer.size(); ++i) {
            cols.col(static_cast<Eigen::Index>(i)) = buffer.entries()[i].sample;
            basis.column_ids.push_back(buffer.entries()[i].entry_id);
        }
        basis.cache = RegressionCache::build(cols, t.metric_,
                                             static_cast<Eigen::Index>(cfg.sampler.capacity));
    };
    sync(t.fg_, t.fg_cache_);
    sync(t.bg_, t.bg_cache_);

    t.particles_.assign(static_cast<std::size_t>(cfg.n_particles),
                        Particle{t.state_, 1.0 / cfg.n_particles});
    t.diag_.map_score = t.score(seeds.front().feature);
    t.diag_.fg_size = t.fg_.size();
    t.diag_.bg_size = t.bg_.size();
    return t;
}

BoundingBox Tracker::box_of(const ObjectState& state) const {
    return BoundingBox::centered(state.cx, state.cy, init_box_.w * state.scale,
                                 init_box_.h * state.scale);
}

double Tracker::score(const Vec& feature) const {
    if (fg_cache_.cache.empty() || bg_cache_.cache.empty()) {
        return 0.5;
    }
    const double theta_f = solve_regression(fg_cache_.cache, metric_, feature).residual;
    const double theta_b = solve_regression(bg_cache_.cache, metric_, feature).residual;
    return score_from_residuals(theta_f, theta_b, cfg_.gamma_f, cfg_.gamma_b, cfg_.rho);
}

ObjectState Tracker::step(const GrayFrame& frame) {
    ++frame_index_;
    diag_ = FrameDiagnostics{};
    diag_.frame_index = frame_index_;

    // Every particle is drawn from the transition density around the
    // previous MAP estimate.
    for (Particle& p : particles_) {
        p.state = state_;
    }
    propagate(particles_, cfg_.sigma, rng_);

    double total = 0.0;
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (Particle& p : particles_) {
        p.weight = score(featurize(frame, box_of(p.state), cfg_.feature_mode));
        total += p.weight;
        lo = std::min(lo, p.weight);
        hi = std::max(hi, p.weight);
    }
    const bool informative = std::isfinite(total) && total > 0.0 && hi > lo;
    if (informative) {
        for (Particle& p : particles_) p.weight /= total;
    } else {
        for (Particle& p : particles_) p.weight = 1.0 / static_cast<double>(particles_.size());
        diag_.uniform_reweight = true;
    }

    if (informative) {
        state_ = estimate_map(particles_);
        const BoundingBox box = box_of(state_);
        const std::vector<LabeledSample> samples =
            select_training_samples(frame, box, cfg_.feature_mode, rng_);
        diag_.map_score = score(samples.front().feature);
        learn(frame, box, samples.front().feature, samples);
    }
    diag_.fg_size = fg_.size();
    diag_.bg_size = bg_.size();
    return state_;
}

void Tracker::insert_sample(SampleBuffer& buffer, BasisCache& basis, const Vec& feature) {
    const InsertResult r = buffer.insert(feature, frame_index_, cfg_.sampler, rng_);
    UpdatePath path = UpdatePath::Online;
    switch (r.kind) {
        case InsertResult::Kind::Appended:
            path = basis.cache.append(metric_, feature);
            basis.column_ids.push_back(r.entry_id);
            break;
        case InsertResult::Kind::Replaced: {
            const auto it = std::find(basis.column_ids.begin(), basis.column_ids.end(),
                                      r.evicted->entry_id);
            if (it == basis.column_ids.end()) {
                throw NumericalError("regression cache lost track of a buffer entry");
            }
            const auto col = static_cast<Eigen::Index>(it - basis.column_ids.begin());
            path = basis.cache.replace(metric_, col, feature);
            basis.column_ids.erase(it);
            basis.column_ids.push_back(r.entry_id);
            break;
        }
        case InsertResult::Kind::Rejected:
            break;
    }
    if (path == UpdatePath::DenseFallback) ++diag_.cache_fallbacks;
}

void Tracker::perturb_caches(const MetricMatrix& updated, const Vec& a_minus, const Vec& a_plus,
                             double eta) {
    for (BasisCache* basis : {&fg_cache_, &bg_cache_}) {
        if (basis->cache.perturb(updated, a_minus, a_plus, eta) == UpdatePath::DenseFallback) {
            ++diag_.cache_fallbacks;
        }
    }
}

void Tracker::learn(const GrayFrame& frame, const BoundingBox& box, const Vec& anchor,
                    const std::vector<LabeledSample>& samples) {
    for (std::size_t i = 1; i < samples.size(); ++i) {
        const LabeledSample& s = samples[i];
        if (s.label == SampleLabel::Foreground) {
            insert_sample(fg_, fg_cache_, s.feature);
        } else {
            insert_sample(bg_, bg_cache_, s.feature);
        }
    }

    if (cfg_.metric_learning) {
        const std::vector<Triplet> triplets = generate_triplets(
            fg_, bg_, anchor, SampleLabel::Foreground, cfg_.triplets_per_frame, rng_);
        for (const Triplet& t : triplets) {
            const PAStep st = pa_update(metric_, t, cfg_.pa);
            if (st.eta > 0.0) {
                perturb_caches(metric_, st.a_minus, st.a_plus, st.eta);
                ++diag_.pa_updates;
            }
        }

        if (cfg_.structured) {
            const std::vector<BoundingBox> boxes =
                sample_candidate_boxes(box, cfg_.structured->n_candidate_boxes, rng_);
            std::vector<ScoredBox> candidates;
            candidates.reserve(boxes.size());
            for (const BoundingBox& b : boxes) {
                candidates.push_back({b, featurize(frame, b, cfg_.feature_mode)});
            }
            const ScoredBox center{box, anchor};
            const StructuredResult res = structured_update(
                metric_, center, candidates, *cfg_.structured,
                [this](const MetricMatrix& m, const Vec& am, const Vec& ap, double eta) {
                    perturb_caches(m, am, ap, eta);
                });
            diag_.structured_constraints = static_cast<int>(res.constraints.size());
        }
    }

    // The anchor joins its buffer only after it has served in this frame's triplets.
    insert_sample(fg_, fg_cache_, anchor);
}

double Tracker::consistency_error() const {
    double worst = 0.0;
    const std::pair<const SampleBuffer*, const BasisCache*> pairs[] = {{&fg_, &fg_cache_},
                                                                        {&bg_, &bg_cache_}};
    for (const auto& [buffer, basis] : pairs) {
        if (basis->column_ids.size() != buffer->size() ||
            static_cast<std::size_t>(basis->cache.size()) != buffer->size()) {
            return std::numeric_limits<double>::infinity();
        }
        for (std::size_t c = 0; c < basis->column_ids.size(); ++c) {
            const BufferEntry& e = buffer->entries()[buffer->index_of(basis->column_ids[c])];
            if (e.sample != basis->cache.basis().col(static_cast<Eigen::Index>(c))) {
                return std::numeric_limits<double>::infinity();
            }
        }
        if (!basis->cache.singular()) {
            worst = std::max(worst, basis->cache.inverse_error(metric_));
        }
    }
    return worst;
}

}  // namespace metrack
