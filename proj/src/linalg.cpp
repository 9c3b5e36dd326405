#include "metrack/linalg.hpp"

#include <algorithm>
#include <cmath>

namespace metrack {

MetricMatrix::MetricMatrix(Mat m) : m_(std::move(m)) {
    if (m_.rows() != m_.cols()) {
        throw InputError("metric matrix must be square");
    }
    if (!m_.allFinite()) {
        throw InputError("metric matrix has non-finite entries");
    }
    if (asymmetry() > 1e-10) {
        throw InputError("metric matrix must be symmetric");
    }
}

MetricMatrix MetricMatrix::identity(Eigen::Index dim) {
    return MetricMatrix(Mat::Identity(dim, dim));
}

double MetricMatrix::quad(const Vec& a) const {
    require_same_size(a.size(), dim(), "metric quadratic form");
    return a.dot(m_ * a);
}

void MetricMatrix::add_rank_two(double eta, const Vec& a_minus, const Vec& a_plus) {
    require_same_size(a_minus.size(), dim(), "metric update a_minus");
    require_same_size(a_plus.size(), dim(), "metric update a_plus");
    if (eta == 0.0) {
        return;
    }
    // Each entry is formed from commutative products, so both triangles stay
    // bitwise equal, and a_minus == a_plus leaves M untouched.
    const Eigen::Index d = dim();
    for (Eigen::Index j = 0; j < d; ++j) {
        const double mj = a_minus[j];
        const double pj = a_plus[j];
        for (Eigen::Index i = 0; i < d; ++i) {
            m_(i, j) += eta * (a_minus[i] * mj - a_plus[i] * pj);
        }
    }
}

double MetricMatrix::asymmetry() const {
    if (m_.size() == 0) {
        return 0.0;
    }
    const double scale = std::max(m_.cwiseAbs().maxCoeff(), 1e-300);
    return (m_ - m_.transpose()).cwiseAbs().maxCoeff() / scale;
}

Mat symmetric_pseudo_inverse(const Mat& g, bool* full_rank) {
    const Eigen::Index n = g.rows();
    if (n == 0) {
        if (full_rank) *full_rank = true;
        return Mat(0, 0);
    }
    Eigen::SelfAdjointEigenSolver<Mat> eig(g);
    if (eig.info() != Eigen::Success) {
        throw NumericalError("eigendecomposition of Gram matrix failed");
    }
    const Vec& lambda = eig.eigenvalues();
    const double largest = lambda.cwiseAbs().maxCoeff();
    const double cutoff = kPinvRelativeCutoff * largest;
    Vec inv_lambda(n);
    bool all_kept = largest > 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (std::abs(lambda[i]) > cutoff && largest > 0.0) {
            inv_lambda[i] = 1.0 / lambda[i];
        } else {
            inv_lambda[i] = 0.0;
            all_kept = false;
        }
    }
    if (full_rank) *full_rank = all_kept;
    const Mat& v = eig.eigenvectors();
    Mat out = v * inv_lambda.asDiagonal() * v.transpose();
    return 0.5 * (out + out.transpose());
}

Mat rank_one_inverse_update(const Mat& j_inv, const Vec& u, const Vec& v) {
    require_same_size(j_inv.rows(), j_inv.cols(), "rank-one update: J^-1 must be square");
    require_same_size(u.size(), j_inv.rows(), "rank-one update u");
    require_same_size(v.size(), j_inv.rows(), "rank-one update v");
    const Vec ju = j_inv * u;
    const double denom = 1.0 + v.dot(ju);
    if (!(std::abs(denom) >= kShermanMorrisonTolerance)) {
        throw SingularUpdate("rank-one update denominator below tolerance");
    }
    const Vec vj = j_inv.transpose() * v;
    Mat out = j_inv;
    out.noalias() -= (ju / denom) * vj.transpose();
    return out;
}

Mat metric_gram(const Mat& basis, const MetricMatrix& metric) {
    require_same_size(basis.rows(), metric.dim(), "basis rows vs metric");
    const Mat mp = metric.matrix() * basis;
    Mat g = basis.transpose() * mp;
    return 0.5 * (g + g.transpose());
}

RegressionCache RegressionCache::build(const Mat& basis, const MetricMatrix& metric,
                                       Eigen::Index capacity) {
    if (capacity < 1) {
        throw InputError("regression cache capacity must be >= 1");
    }
    if (basis.cols() > capacity) {
        throw InputError("basis has more columns than cache capacity");
    }
    if (!basis.allFinite()) {
        throw InputError("basis has non-finite entries");
    }
    require_same_size(basis.rows(), metric.dim(), "basis rows vs metric");
    RegressionCache cache;
    cache.basis_ = basis;
    cache.capacity_ = capacity;
    cache.rebuild(metric);
    return cache;
}

void RegressionCache::rebuild(const MetricMatrix& metric) {
    bool full_rank = true;
    inverse_ = symmetric_pseudo_inverse(metric_gram(basis_, metric), &full_rank);
    singular_ = !full_rank;
    edits_since_rebuild_ = 0;
}

UpdatePath RegressionCache::count_edit(const MetricMatrix& metric) {
    if (++edits_since_rebuild_ >= kEditsBetweenRebuilds) {
        rebuild(metric);
        return UpdatePath::Rebuild;
    }
    return UpdatePath::Online;
}

UpdatePath RegressionCache::append(const MetricMatrix& metric, const Vec& column) {
    require_same_size(column.size(), metric.dim(), "appended column");
    if (basis_.rows() == 0 && basis_.cols() == 0) {
        basis_.resize(metric.dim(), 0);
    }
    require_same_size(basis_.rows(), column.size(), "appended column vs basis");
    if (size() >= capacity_) {
        throw InputError("regression cache is at capacity");
    }
    if (!column.allFinite()) {
        throw InputError("appended column has non-finite entries");
    }

    const Eigen::Index n = size();
    const Vec m_col = metric.matrix() * column;
    const double r = column.dot(m_col);

    basis_.conservativeResize(Eigen::NoChange, n + 1);
    basis_.col(n) = column;

    if (singular_ || n == 0) {
        rebuild(metric);
        return n == 0 && !singular_ ? UpdatePath::Online : UpdatePath::DenseFallback;
    }

    const Vec c = basis_.leftCols(n).transpose() * m_col;
    const Vec hc = inverse_ * c;
    const double schur = r - c.dot(hc);
    if (!(std::abs(schur) >= kSchurTolerance)) {
        rebuild(metric);
        return UpdatePath::DenseFallback;
    }

    Mat next(n + 1, n + 1);
    next.topLeftCorner(n, n) = inverse_;
    next.topLeftCorner(n, n).noalias() += (hc / schur) * hc.transpose();
    next.topRightCorner(n, 1) = -hc / schur;
    next.bottomLeftCorner(1, n) = -hc.transpose() / schur;
    next(n, n) = 1.0 / schur;
    inverse_ = std::move(next);
    return count_edit(metric);
}

UpdatePath RegressionCache::remove(const MetricMatrix& metric, Eigen::Index index) {
    const Eigen::Index n = size();
    if (n < 2) {
        throw InputError("cannot remove a column from a cache with fewer than 2 columns");
    }
    if (index < 0 || index >= n) {
        throw InputError("column index out of range");
    }

    const Eigen::Index tail = n - index - 1;
    basis_.block(0, index, basis_.rows(), tail) = basis_.rightCols(tail).eval();
    basis_.conservativeResize(Eigen::NoChange, n - 1);

    const double pivot = inverse_(index, index);
    if (singular_ || !(std::abs(pivot) >= kPivotTolerance)) {
        rebuild(metric);
        return UpdatePath::DenseFallback;
    }

    // Gather the kept index set, then apply the Schur update.
    Vec h_col(n - 1);
    Mat kept(n - 1, n - 1);
    for (Eigen::Index i = 0, ii = 0; i < n; ++i) {
        if (i == index) continue;
        h_col[ii] = inverse_(i, index);
        for (Eigen::Index j = 0, jj = 0; j < n; ++j) {
            if (j == index) continue;
            kept(ii, jj) = inverse_(i, j);
            ++jj;
        }
        ++ii;
    }
    Vec h_row(n - 1);
    for (Eigen::Index j = 0, jj = 0; j < n; ++j) {
        if (j == index) continue;
        h_row[jj++] = inverse_(index, j);
    }
    kept.noalias() -= (h_col / pivot) * h_row.transpose();
    inverse_ = std::move(kept);
    return count_edit(metric);
}

UpdatePath RegressionCache::replace(const MetricMatrix& metric, Eigen::Index index,
                                    const Vec& column) {
    if (size() == 1) {
        if (index != 0) {
            throw InputError("column index out of range");
        }
        require_same_size(column.size(), basis_.rows(), "replacement column");
        basis_.col(0) = column;
        rebuild(metric);
        return singular_ ? UpdatePath::DenseFallback : UpdatePath::Online;
    }
    const UpdatePath removed = remove(metric, index);
    const UpdatePath added = append(metric, column);
    if (removed == UpdatePath::DenseFallback || added == UpdatePath::DenseFallback) {
        return UpdatePath::DenseFallback;
    }
    if (removed == UpdatePath::Rebuild || added == UpdatePath::Rebuild) {
        return UpdatePath::Rebuild;
    }
    return UpdatePath::Online;
}

UpdatePath RegressionCache::perturb(const MetricMatrix& updated, const Vec& a_minus,
                                    const Vec& a_plus, double eta) {
    if (eta < 0.0 || !std::isfinite(eta)) {
        throw InputError("metric perturbation step must be finite and >= 0");
    }
    require_same_size(a_minus.size(), basis_.rows(), "perturbation a_minus");
    require_same_size(a_plus.size(), basis_.rows(), "perturbation a_plus");
    if (eta == 0.0 || empty()) {
        return UpdatePath::Online;
    }
    if (singular_) {
        rebuild(updated);
        return UpdatePath::DenseFallback;
    }

    const Vec pm = basis_.transpose() * a_minus;
    const Vec pp = basis_.transpose() * a_plus;
    try {
        // In place: H -= (H u)(v^T H) / (1 + v^T H u) for each rank-one term.
        auto step = [this](const Vec& u, const Vec& v) {
            const Vec hu = inverse_ * u;
            const double denom = 1.0 + v.dot(hu);
            if (!(std::abs(denom) >= kShermanMorrisonTolerance)) {
                throw SingularUpdate("rank-one update denominator below tolerance");
            }
            const Vec vh = inverse_.transpose() * v;
            inverse_.noalias() -= (hu / denom) * vh.transpose();
        };
        step(eta * pm, pm);
        step(-eta * pp, pp);
    } catch (const SingularUpdate&) {
        rebuild(updated);
        return UpdatePath::DenseFallback;
    }
    if (!inverse_.allFinite()) {
        rebuild(updated);
        return UpdatePath::DenseFallback;
    }
    return count_edit(updated);
}

double RegressionCache::inverse_error(const MetricMatrix& metric) const {
    const Eigen::Index n = size();
    if (n == 0) return 0.0;
    const Mat prod = inverse_ * metric_gram(basis_, metric);
    return (prod - Mat::Identity(n, n)).norm() / std::sqrt(static_cast<double>(n));
}

namespace {

RegressionSolution finish_solution(const Mat& basis, const MetricMatrix& metric, const Vec& y,
                                   Vec coeffs) {
    const Vec r = y - basis * coeffs;
    const double residual = r.dot(metric.matrix() * r);
    return {std::move(coeffs), residual > 0.0 ? residual : 0.0};
}

}  // namespace

RegressionSolution solve_regression(const RegressionCache& cache, const MetricMatrix& metric,
                                    const Vec& y) {
    require_same_size(y.size(), metric.dim(), "test sample vs metric");
    if (cache.empty()) {
        throw InputError("cannot solve against an empty regression cache");
    }
    require_same_size(cache.dim(), metric.dim(), "cache dimension vs metric");
    const Vec my = metric.matrix() * y;
    Vec coeffs = cache.inverse() * (cache.basis().transpose() * my);
    return finish_solution(cache.basis(), metric, y, std::move(coeffs));
}

RegressionSolution solve_regression_dense(const Mat& basis, const MetricMatrix& metric,
                                          const Vec& y) {
    require_same_size(y.size(), metric.dim(), "test sample vs metric");
    require_same_size(basis.rows(), metric.dim(), "basis rows vs metric");
    if (basis.cols() == 0) {
        throw InputError("cannot solve against an empty basis");
    }
    const Mat h = symmetric_pseudo_inverse(metric_gram(basis, metric));
    Vec coeffs = h * (basis.transpose() * (metric.matrix() * y));
    return finish_solution(basis, metric, y, std::move(coeffs));
}

}  // namespace metrack
