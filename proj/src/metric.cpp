#include "metrack/metric.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace metrack {

double mahalanobis(const MetricMatrix& metric, const Vec& p, const Vec& q) {
    require_same_size(p.size(), q.size(), "mahalanobis operands");
    const Vec diff = p - q;
    return metric.quad(diff);
}

double triplet_loss(const MetricMatrix& metric, const Triplet& t) {
    const double pos = mahalanobis(metric, t.anchor, t.positive);
    const double neg = mahalanobis(metric, t.anchor, t.negative);
    return std::max(0.0, 1.0 + pos - neg);
}

double global_loss(const MetricMatrix& metric, std::span<const Triplet> triplets) {
    double total = 0.0;
    for (const Triplet& t : triplets) {
        total += triplet_loss(metric, t);
    }
    return total;
}

PAStep pa_step(const MetricMatrix& metric, const Triplet& t, const PAConfig& cfg) {
    if (!(cfg.c_bound > 0.0) || !std::isfinite(cfg.c_bound)) {
        throw InputError("PA aggressiveness bound C must be finite and > 0");
    }
    require_same_size(t.positive.size(), t.anchor.size(), "triplet positive");
    require_same_size(t.negative.size(), t.anchor.size(), "triplet negative");

    PAStep step;
    step.a_plus = t.anchor - t.positive;
    step.a_minus = t.anchor - t.negative;

    const double margin = 1.0 + metric.quad(step.a_plus) - metric.quad(step.a_minus);
    if (!(margin > 0.0)) {
        return step;  // passive
    }
    step.loss = margin;

    // Denominator 2 a-^T U a- - 2 a+^T U a+ - ||U||_F^2 written through the
    // inner products of a+ and a-; it reduces to ||U||_F^2.
    const double np = step.a_plus.squaredNorm();
    const double nm = step.a_minus.squaredNorm();
    const double s = step.a_plus.dot(step.a_minus);
    const double um = nm * nm - s * s;  // a-^T U a-
    const double up = s * s - np * np;  // a+^T U a+
    const double uf = (nm - np) * (nm - np) + 2.0 * (nm * np - s * s);  // ||U||_F^2
    const double denom = 2.0 * um - 2.0 * up - uf;

    double eta = cfg.c_bound;
    if (denom != 0.0) {
        eta = std::min(cfg.c_bound, std::max(0.0, margin / denom));
    }
    step.eta = eta;
    return step;
}

PAStep pa_update(MetricMatrix& metric, const Triplet& t, const PAConfig& cfg) {
    PAStep step = pa_step(metric, t, cfg);
    if (step.eta > 0.0) {
        metric.add_rank_two(step.eta, step.a_minus, step.a_plus);
    }
    return step;
}

double vor_overlap(const BoundingBox& a, const BoundingBox& b) {
    if (a.area() <= 0.0 || b.area() <= 0.0) {
        return 0.0;
    }
    const double ix = std::max(0.0, std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x));
    const double iy = std::max(0.0, std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y));
    const double inter = ix * iy;
    const double uni = a.area() + b.area() - inter;
    return uni > 0.0 ? inter / uni : 0.0;
}

ViolatedPair most_violated(const MetricMatrix& metric, const ScoredBox& anchor,
                           std::span<const ScoredBox> candidates) {
    const auto n = static_cast<Eigen::Index>(candidates.size());
    if (n < 2) {
        throw InputError("most_violated needs at least two candidates");
    }
    std::vector<double> overlap(candidates.size());
    std::vector<double> dist(candidates.size());
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        overlap[i] = vor_overlap(anchor.box, candidates[i].box);
        dist[i] = mahalanobis(metric, anchor.feature, candidates[i].feature);
    }

    ViolatedPair best{0, 1, -std::numeric_limits<double>::infinity()};
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            if (i == j) continue;
            const double delta = overlap[i] - overlap[j];
            const double v = delta + dist[i] - dist[j];
            if (v > best.violation) {
                best = {i, j, v};
            }
        }
    }
    return best;
}

namespace {

// Dense two-phase simplex for: maximize c^T x  s.t.  A x <= b, x >= 0.
// Tableau layout follows the classic (m+2) x (n+2) form with an auxiliary
// column for phase one.
class SimplexLp {
public:
    SimplexLp(const Mat& a, const Vec& b, const Vec& c)
        : m_(static_cast<int>(b.size())),
          n_(static_cast<int>(c.size())),
          basic_(m_),
          nonbasic_(n_ + 1),
          d_(Mat::Zero(m_ + 2, n_ + 2)) {
        d_.topLeftCorner(m_, n_) = a;
        for (int i = 0; i < m_; ++i) {
            basic_[i] = n_ + i;
            d_(i, n_) = -1.0;
            d_(i, n_ + 1) = b[i];
        }
        for (int j = 0; j < n_; ++j) {
            nonbasic_[j] = j;
            d_(m_, j) = -c[j];
        }
        nonbasic_[n_] = -1;
        d_(m_ + 1, n_) = 1.0;
    }

    Vec solve() {
        int r = 0;
        for (int i = 1; i < m_; ++i) {
            if (d_(i, n_ + 1) < d_(r, n_ + 1)) r = i;
        }
        if (d_(r, n_ + 1) < -kEps) {
            pivot(r, n_);
            if (!run(1) || d_(m_ + 1, n_ + 1) < -kEps) {
                throw NumericalError("step-length LP is infeasible");
            }
            for (int i = 0; i < m_; ++i) {
                if (basic_[i] != -1) continue;
                int s = -1;
                for (int j = 0; j <= n_; ++j) {
                    if (s == -1 || d_(i, j) < d_(i, s) ||
                        (d_(i, j) == d_(i, s) && nonbasic_[j] < nonbasic_[s])) {
                        s = j;
                    }
                }
                pivot(i, s);
            }
        }
        if (!run(2)) {
            throw NumericalError("step-length LP is unbounded");
        }
        Vec x = Vec::Zero(n_);
        for (int i = 0; i < m_; ++i) {
            if (basic_[i] >= 0 && basic_[i] < n_) x[basic_[i]] = d_(i, n_ + 1);
        }
        return x;
    }

private:
    static constexpr double kEps = 1e-12;
    static constexpr int kMaxPivots = 20000;

    void pivot(int r, int s) {
        const double inv = 1.0 / d_(r, s);
        for (int i = 0; i < m_ + 2; ++i) {
            if (i == r) continue;
            const double f = d_(i, s) * inv;
            if (f == 0.0) continue;
            for (int j = 0; j < n_ + 2; ++j) {
                if (j != s) d_(i, j) -= d_(r, j) * f;
            }
        }
        for (int j = 0; j < n_ + 2; ++j) {
            if (j != s) d_(r, j) *= inv;
        }
        for (int i = 0; i < m_ + 2; ++i) {
            if (i != r) d_(i, s) *= -inv;
        }
        d_(r, s) = inv;
        std::swap(basic_[r], nonbasic_[s]);
        if (++pivots_ > kMaxPivots) {
            throw NumericalError("step-length LP did not converge");
        }
    }

    bool run(int phase) {
        const int obj = phase == 1 ? m_ + 1 : m_;
        while (true) {
            int s = -1;
            for (int j = 0; j <= n_; ++j) {
                if (phase == 2 && nonbasic_[j] == -1) continue;
                if (s == -1 || d_(obj, j) < d_(obj, s) ||
                    (d_(obj, j) == d_(obj, s) && nonbasic_[j] < nonbasic_[s])) {
                    s = j;
                }
            }
            if (d_(obj, s) > -kEps) return true;
            int r = -1;
            for (int i = 0; i < m_; ++i) {
                if (d_(i, s) < kEps) continue;
                if (r == -1) {
                    r = i;
                    continue;
                }
                const double ri = d_(i, n_ + 1) / d_(i, s);
                const double rr = d_(r, n_ + 1) / d_(r, s);
                if (ri < rr || (ri == rr && basic_[i] < basic_[r])) r = i;
            }
            if (r == -1) return false;
            pivot(r, s);
        }
    }

    int m_;
    int n_;
    std::vector<int> basic_;
    std::vector<int> nonbasic_;
    Mat d_;
    int pivots_ = 0;
};

}  // namespace

Vec solve_eta_vector(const Mat& b_matrix, const Vec& f_vector, double c_bound) {
    const Eigen::Index m = f_vector.size();
    if (m < 1) {
        throw InputError("step-length system must have at least one constraint");
    }
    if (b_matrix.rows() != m || b_matrix.cols() != m) {
        throw InputError("step-length matrix B must be m x m");
    }
    if (!b_matrix.allFinite() || !f_vector.allFinite() || !std::isfinite(c_bound)) {
        throw InputError("step-length system has non-finite entries");
    }
    if (!(c_bound > 0.0)) {
        throw InputError("step-length bound C must be > 0");
    }

    // The argmin is invariant to a common positive rescaling of (B, f).
    const double scale = std::max({b_matrix.cwiseAbs().maxCoeff(), f_vector.cwiseAbs().maxCoeff(),
                                   std::numeric_limits<double>::min()});
    const Mat b = b_matrix / scale;
    const Vec f = f_vector / scale;

    // Variables x = [eta (m), t (m)];  minimize sum(t)
    //   B eta - t <= f,  -B eta - t <= -f,  1^T eta <= C.
    const Eigen::Index rows = 2 * m + 1;
    Mat a = Mat::Zero(rows, 2 * m);
    Vec rhs(rows);
    a.topLeftCorner(m, m) = b;
    a.block(0, m, m, m) = -Mat::Identity(m, m);
    a.block(m, 0, m, m) = -b;
    a.block(m, m, m, m) = -Mat::Identity(m, m);
    a.block(2 * m, 0, 1, m).setOnes();
    rhs.head(m) = f;
    rhs.segment(m, m) = -f;
    rhs[2 * m] = c_bound;
    Vec c = Vec::Zero(2 * m);
    c.tail(m).setConstant(-1.0);

    Vec x = SimplexLp(a, rhs, c).solve();
    Vec eta = x.head(m).cwiseMax(0.0);
    const double total = eta.sum();
    if (total > c_bound) {
        eta *= c_bound / total;
    }
    return eta;
}

StructuredSystem build_structured_system(
    const MetricMatrix& round_start, const ScoredBox& anchor,
    std::span<const ScoredBox> candidates,
    std::span<const std::pair<Eigen::Index, Eigen::Index>> constraints) {
    const auto m = static_cast<Eigen::Index>(constraints.size());
    std::vector<Vec> a_mu(constraints.size());
    std::vector<Vec> a_nu(constraints.size());
    Vec delta(m);
    for (Eigen::Index l = 0; l < m; ++l) {
        const auto [mu, nu] = constraints[l];
        const ScoredBox& bm = candidates[static_cast<std::size_t>(mu)];
        const ScoredBox& bn = candidates[static_cast<std::size_t>(nu)];
        a_mu[l] = anchor.feature - bm.feature;
        a_nu[l] = anchor.feature - bn.feature;
        delta[l] = vor_overlap(anchor.box, bm.box) - vor_overlap(anchor.box, bn.box);
    }

    // x^T U_k x with U_k = a_nu a_nu^T - a_mu a_mu^T, via inner products.
    auto quad_u = [&](Eigen::Index k, const Vec& x) {
        const double n = x.dot(a_nu[k]);
        const double u = x.dot(a_mu[k]);
        return n * n - u * u;
    };
    // <U_l, U_k>_F = sum of the elementwise product.
    auto frob_u = [&](Eigen::Index l, Eigen::Index k) {
        const double nn = a_nu[l].dot(a_nu[k]);
        const double nu = a_nu[l].dot(a_mu[k]);
        const double un = a_mu[l].dot(a_nu[k]);
        const double uu = a_mu[l].dot(a_mu[k]);
        return nn * nn - nu * nu - un * un + uu * uu;
    };

    StructuredSystem sys{Mat(m, m), Vec(m)};
    for (Eigen::Index l = 0; l < m; ++l) {
        sys.f_vector[l] =
            -(delta[l] + round_start.quad(a_mu[l]) - round_start.quad(a_nu[l]));
        for (Eigen::Index k = 0; k < m; ++k) {
            sys.b_matrix(l, k) = frob_u(l, k) + quad_u(k, a_mu[l]) - quad_u(k, a_nu[l]) +
                                 quad_u(l, a_mu[k]) - quad_u(l, a_nu[k]);
        }
    }
    return sys;
}

StructuredResult structured_update(MetricMatrix& metric, const ScoredBox& anchor,
                                   std::span<const ScoredBox> candidates,
                                   const StructuredConfig& cfg, const PerturbationHook& hook) {
    if (cfg.max_iterations < 1) {
        throw InputError("structured learner needs max_iterations >= 1");
    }
    StructuredResult result;
    if (candidates.size() < 2) {
        return result;
    }
    const MetricMatrix round_start = metric;
    MetricMatrix current = metric;
    std::vector<Vec> a_mu;
    std::vector<Vec> a_nu;

    for (int iter = 0; iter < cfg.max_iterations; ++iter) {
        const ViolatedPair pair = most_violated(current, anchor, candidates);
        if (!(pair.violation > 0.0)) break;
        const std::pair<Eigen::Index, Eigen::Index> key{pair.mu, pair.nu};
        if (std::find(result.constraints.begin(), result.constraints.end(), key) !=
            result.constraints.end()) {
            break;
        }
        result.constraints.push_back(key);
        a_mu.push_back(anchor.feature - candidates[static_cast<std::size_t>(pair.mu)].feature);
        a_nu.push_back(anchor.feature - candidates[static_cast<std::size_t>(pair.nu)].feature);

        Vec eta;
        try {
            const StructuredSystem sys =
                build_structured_system(round_start, anchor, candidates, result.constraints);
            eta = solve_eta_vector(sys.b_matrix, sys.f_vector, cfg.c_bound);
        } catch (const NumericalError&) {
            result.constraints.pop_back();
            a_mu.pop_back();
            a_nu.pop_back();
            result.aborted = true;
            break;
        }
        current = round_start;
        for (std::size_t l = 0; l < a_mu.size(); ++l) {
            current.add_rank_two(eta[static_cast<Eigen::Index>(l)], a_nu[l], a_mu[l]);
        }
        result.eta = std::move(eta);
        result.iterations = iter + 1;
    }

    if (result.constraints.empty() || result.eta.size() == 0) {
        result.constraints.clear();
        return result;
    }
    // Re-apply constraint by constraint so hooks see consistent partial metrics.
    MetricMatrix applied = round_start;
    for (std::size_t l = 0; l < a_mu.size(); ++l) {
        const double eta_l = result.eta[static_cast<Eigen::Index>(l)];
        if (eta_l <= 0.0) continue;
        applied.add_rank_two(eta_l, a_nu[l], a_mu[l]);
        if (hook) hook(applied, a_nu[l], a_mu[l], eta_l);
    }
    metric = std::move(applied);
    return result;
}

std::vector<BoundingBox> sample_candidate_boxes(const BoundingBox& around, int count, Rng& rng) {
    std::uniform_real_distribution<double> offset(-1.5, 1.5);
    std::uniform_real_distribution<double> scale(0.8, 1.2);
    std::vector<BoundingBox> boxes;
    boxes.reserve(static_cast<std::size_t>(std::max(count, 0)));
    for (int i = 0; i < count; ++i) {
        const double dx = offset(rng) * around.w;
        const double dy = offset(rng) * around.h;
        const double s = scale(rng);
        boxes.push_back(BoundingBox::centered(around.cx() + dx, around.cy() + dy, around.w * s,
                                              around.h * s));
    }
    return boxes;
}

MetricMatrix psd_project(const MetricMatrix& metric) {
    Eigen::SelfAdjointEigenSolver<Mat> eig(metric.matrix());
    if (eig.info() != Eigen::Success) {
        throw NumericalError("eigendecomposition of metric failed");
    }
    const Vec clipped = eig.eigenvalues().cwiseMax(0.0);
    Mat m = eig.eigenvectors() * clipped.asDiagonal() * eig.eigenvectors().transpose();
    return MetricMatrix(0.5 * (m + m.transpose()));
}

}  // namespace metrack
