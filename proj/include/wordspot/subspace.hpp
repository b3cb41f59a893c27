#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace wordspot {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Covariance
{
    Eigen::VectorXd mean;
    Eigen::MatrixXd matrix; ///< population normalization, 1/N
};

/// Sample mean and covariance of the rows of `samples`.
/// Throws InsufficientDataError for fewer than two rows.
Covariance compute_covariance(const Eigen::Ref<const RowMatrix>& samples);

struct EigenDecomposition
{
    Eigen::VectorXd values;  ///< descending
    Eigen::MatrixXd vectors; ///< column i pairs with values[i]; orthonormal
};

/// Symmetric eigendecomposition by cyclic Jacobi rotations.
///
/// Eigenvalues come back in descending order and each eigenvector is signed
/// so that its largest-magnitude component is positive. Iteration stops once
/// every off-diagonal element is below 1e-12 of the largest diagonal.
/// Throws SymmetryError when |R - R^T| exceeds 1e-9 (scaled by max(1, |R|max))
/// and NumericalError if the sweeps fail to converge.
EigenDecomposition eigendecompose(const Eigen::MatrixXd& symmetric);

/// Relative floor below which eigenvalues are never retained.
inline constexpr double kRetentionFloor = 1e-12;
/// Whitening regularizer, relative to the leading eigenvalue.
inline constexpr double kWhiteningEpsilon = 1e-8;

/// Smallest m whose leading eigenvalues carry at least `variance_target` of
/// the total, capped by the retention floor. `fixed` overrides the target
/// (still capped). Throws DegenerateSpectrumError on an all-zero spectrum.
std::size_t select_dimension(const Eigen::VectorXd& eigenvalues, double variance_target,
                             std::optional<std::size_t> fixed = std::nullopt);

struct PcaOptions
{
    double variance_target = 0.95;
    std::optional<std::size_t> fixed_dimension;
    bool whiten = true;
};

/// Fitted principal subspace. `basis` holds the m retained eigenvectors as
/// orthonormal rows; `eigenvalues` keeps the full descending spectrum.
struct PcaModel
{
    Eigen::VectorXd mean;
    Eigen::VectorXd eigenvalues;
    RowMatrix basis;
    Eigen::VectorXd whitening_scales; ///< 1 / sqrt(lambda_i + epsilon), length m
    double epsilon = 0;
    bool whitened = true;

    std::size_t source_dimension() const { return static_cast<std::size_t>(mean.size()); }
    std::size_t dimension() const { return static_cast<std::size_t>(basis.rows()); }

    bool operator==(const PcaModel& other) const;
};

PcaModel fit_pca(const Eigen::Ref<const RowMatrix>& samples, const PcaOptions& options = {});

/// Builds a model from an existing decomposition. Used by fit_pca and by
/// the index loader.
PcaModel make_model(Eigen::VectorXd mean, const EigenDecomposition& eig, std::size_t m, bool whiten);

/// y = W'(x - mean), then scaled per coordinate when the model whitens.
std::vector<double> project(const PcaModel& model, std::span<const double> x);

/// Projects every row of a row-major N x n block into an N x m block.
std::vector<double> project_rows(const PcaModel& model, std::span<const double> rows);

/// x' = W'^T y + mean. Accepts coordinates as produced by project(): whitened
/// input is unscaled first.
std::vector<double> reconstruct(const PcaModel& model, std::span<const double> y);

/// Sum of the discarded eigenvalues (mean squared reconstruction error).
double reconstruction_error(const PcaModel& model);

/// Fraction of total variance carried by the retained components.
double retained_variance(const PcaModel& model);

/// Euclidean distance between whitened projections; equals the Mahalanobis
/// distance in the original space for a full, unregularized basis.
/// Throws ModeError if the model does not whiten.
double whitened_distance(const PcaModel& model, std::span<const double> x1, std::span<const double> x2);

} // namespace wordspot
