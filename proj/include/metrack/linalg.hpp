#pragma once

// Metric-weighted least squares and online maintenance of (P^T M P)^-1.

#include "metrack/common.hpp"

namespace metrack {

/// Symmetric d x d matrix defining the Mahalanobis form a^T M a.
///
/// Positive semidefiniteness is not enforced: passive-aggressive updates may
/// push eigenvalues below zero and downstream consumers clamp residuals.
class MetricMatrix {
public:
    MetricMatrix() = default;
    explicit MetricMatrix(Mat m);

    static MetricMatrix identity(Eigen::Index dim);

    const Mat& matrix() const { return m_; }
    Eigen::Index dim() const { return m_.rows(); }

    /// a^T M a
    double quad(const Vec& a) const;

    /// M += eta * (a_minus a_minus^T - a_plus a_plus^T). Exactly symmetric.
    void add_rank_two(double eta, const Vec& a_minus, const Vec& a_plus);

    /// Largest |M_ij - M_ji| relative to max |M_ij|.
    double asymmetry() const;

private:
    Mat m_;
};

struct RegressionSolution {
    Vec coeffs;
    double residual = 0.0;  // clamped at zero
};

/// Which route an online edit of a RegressionCache took.
enum class UpdatePath {
    Online,         // closed-form block / Sherman-Morrison update
    DenseFallback,  // degenerate scalar detected, recomputed densely
    Rebuild,        // periodic drift-bounding recompute
};

/// Thrown by rank_one_inverse_update when |1 + v^T J^-1 u| is below threshold.
class SingularUpdate : public NumericalError {
public:
    using NumericalError::NumericalError;
};

inline constexpr double kSchurTolerance = 1e-10;
inline constexpr double kPivotTolerance = 1e-12;
inline constexpr double kShermanMorrisonTolerance = 1e-10;
inline constexpr double kPinvRelativeCutoff = 1e-10;
inline constexpr int kEditsBetweenRebuilds = 500;

/// Pseudoinverse of a symmetric matrix through its eigendecomposition.
/// Eigenvalues with |lambda| <= 1e-10 * max|lambda| are dropped.
/// `full_rank` (optional) reports whether nothing was dropped.
Mat symmetric_pseudo_inverse(const Mat& g, bool* full_rank = nullptr);

/// (J + u v^T)^-1 from J^-1 (Sherman-Morrison).
Mat rank_one_inverse_update(const Mat& j_inv, const Vec& u, const Vec& v);

/// Basis matrix P (columns are samples) together with H = (P^T M P)^-1.
///
/// H is maintained online across column appends, removals, replacements and
/// rank-two metric perturbations. When the Gram matrix becomes singular the
/// cache holds its pseudoinverse and every subsequent edit is dense until the
/// Gram matrix regains full rank.
class RegressionCache {
public:
    RegressionCache() = default;

    static RegressionCache build(const Mat& basis, const MetricMatrix& metric,
                                 Eigen::Index capacity);

    Eigen::Index size() const { return basis_.cols(); }
    Eigen::Index dim() const { return basis_.rows(); }
    Eigen::Index capacity() const { return capacity_; }
    bool empty() const { return basis_.cols() == 0; }
    bool singular() const { return singular_; }

    const Mat& basis() const { return basis_; }
    const Mat& inverse() const { return inverse_; }

    /// Appends a column using the block-inverse identity.
    UpdatePath append(const MetricMatrix& metric, const Vec& column);

    /// Removes column `index`; later columns shift left by one.
    UpdatePath remove(const MetricMatrix& metric, Eigen::Index index);

    /// Removes column `index` then appends `column` at the end.
    UpdatePath replace(const MetricMatrix& metric, Eigen::Index index, const Vec& column);

    /// Propagates M' = M + eta (a_minus a_minus^T - a_plus a_plus^T) into H.
    /// `updated` is M', used only if a dense recompute is needed.
    UpdatePath perturb(const MetricMatrix& updated, const Vec& a_minus, const Vec& a_plus,
                       double eta);

    void rebuild(const MetricMatrix& metric);

    /// ||H (P^T M P) - I||_F / sqrt(N)
    double inverse_error(const MetricMatrix& metric) const;

private:
    UpdatePath count_edit(const MetricMatrix& metric);

    Mat basis_;
    Mat inverse_;
    Eigen::Index capacity_ = 0;
    bool singular_ = false;
    int edits_since_rebuild_ = 0;
};

/// Minimizes (y - P x)^T M (y - P x) using the cached inverse.
RegressionSolution solve_regression(const RegressionCache& cache, const MetricMatrix& metric,
                                    const Vec& y);

/// Same objective without a cache: forms and pseudo-inverts P^T M P directly.
RegressionSolution solve_regression_dense(const Mat& basis, const MetricMatrix& metric,
                                          const Vec& y);

/// Gram matrix P^T M P, symmetrized.
Mat metric_gram(const Mat& basis, const MetricMatrix& metric);

}  // namespace metrack
