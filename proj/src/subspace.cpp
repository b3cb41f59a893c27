#include "wordspot/subspace.hpp"

#include "wordspot/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace wordspot {

namespace {

constexpr int kMaxSweeps = 100;

template <typename A, typename B>
bool same(const A& a, const B& b)
{
    return a.rows() == b.rows() && a.cols() == b.cols() && a == b;
}

void check_length(std::size_t got, std::size_t want, const char* what)
{
    if (got != want)
        throw DimensionError(std::string(what) + ": expected length " + std::to_string(want) + ", got " +
                             std::to_string(got));
}

} // namespace

bool PcaModel::operator==(const PcaModel& other) const
{
    return same(mean, other.mean) && same(eigenvalues, other.eigenvalues) && same(basis, other.basis) &&
           same(whitening_scales, other.whitening_scales) && epsilon == other.epsilon &&
           whitened == other.whitened;
}

Covariance compute_covariance(const Eigen::Ref<const RowMatrix>& samples)
{
    if (samples.rows() < 2)
        throw InsufficientDataError("covariance needs at least two samples, got " +
                                    std::to_string(samples.rows()));
    Covariance out;
    out.mean = samples.colwise().mean().transpose();
    const RowMatrix centered = samples.rowwise() - out.mean.transpose();
    out.matrix = (centered.transpose() * centered) / static_cast<double>(samples.rows());
    // Exact symmetry; the product can differ in the last bit across triangles.
    out.matrix = 0.5 * (out.matrix + out.matrix.transpose()).eval();
    return out;
}

EigenDecomposition eigendecompose(const Eigen::MatrixXd& symmetric)
{
    const Eigen::Index n = symmetric.rows();
    if (n == 0 || symmetric.cols() != n)
        throw DimensionError("eigendecompose needs a non-empty square matrix");
    if (!symmetric.allFinite())
        throw NumericalError("matrix has non-finite entries");
    const double magnitude = std::max(1.0, symmetric.cwiseAbs().maxCoeff());
    if ((symmetric - symmetric.transpose()).cwiseAbs().maxCoeff() > 1e-9 * magnitude)
        throw SymmetryError("matrix is not symmetric");

    Eigen::MatrixXd a = 0.5 * (symmetric + symmetric.transpose());
    Eigen::MatrixXd v = Eigen::MatrixXd::Identity(n, n);

    bool converged = false;
    for (int sweep = 0; sweep <= kMaxSweeps; ++sweep) {
        const double scale = a.diagonal().cwiseAbs().maxCoeff();
        double off = 0;
        for (Eigen::Index p = 0; p < n; ++p)
            for (Eigen::Index q = p + 1; q < n; ++q)
                off = std::max(off, std::abs(a(p, q)));
        if (off <= 1e-12 * scale || off == 0.0) {
            converged = true;
            break;
        }
        if (sweep == kMaxSweeps)
            break;

        for (Eigen::Index p = 0; p < n; ++p) {
            for (Eigen::Index q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (apq == 0.0)
                    continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (Eigen::Index k = 0; k < n; ++k) {
                    const double akp = a(k, p);
                    const double akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (Eigen::Index k = 0; k < n; ++k) {
                    const double apk = a(p, k);
                    const double aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
                a(p, q) = 0.0;
                a(q, p) = 0.0;
                for (Eigen::Index k = 0; k < n; ++k) {
                    const double vkp = v(k, p);
                    const double vkq = v(k, q);
                    v(k, p) = c * vkp - s * vkq;
                    v(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }
    if (!converged)
        throw NumericalError("Jacobi sweeps did not converge");

    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index i, Eigen::Index j) { return a(i, i) > a(j, j); });

    EigenDecomposition out;
    out.values.resize(n);
    out.vectors.resize(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto src = order[static_cast<std::size_t>(i)];
        out.values(i) = a(src, src);
        Eigen::VectorXd col = v.col(src);
        Eigen::Index largest = 0;
        col.cwiseAbs().maxCoeff(&largest);
        if (col(largest) < 0)
            col = -col;
        out.vectors.col(i) = col;
    }
    return out;
}

std::size_t select_dimension(const Eigen::VectorXd& eigenvalues, double variance_target,
                             std::optional<std::size_t> fixed)
{
    if (eigenvalues.size() == 0)
        throw DegenerateSpectrumError("empty spectrum");
    if (!fixed && !(variance_target > 0.0 && variance_target <= 1.0))
        throw ParameterError("variance target must lie in (0, 1]");
    if (fixed && *fixed == 0)
        throw ParameterError("fixed dimension must be at least 1");

    const double lead = eigenvalues(0);
    if (!(lead > 0.0))
        throw DegenerateSpectrumError("all eigenvalues are zero");

    std::size_t floor_count = 0;
    for (Eigen::Index i = 0; i < eigenvalues.size(); ++i)
        if (eigenvalues(i) > kRetentionFloor * lead)
            ++floor_count;

    if (fixed)
        return std::min(*fixed, floor_count);

    double total = 0;
    for (Eigen::Index i = 0; i < eigenvalues.size(); ++i)
        total += eigenvalues(i);
    double cumulative = 0;
    std::size_t m = static_cast<std::size_t>(eigenvalues.size());
    for (Eigen::Index i = 0; i < eigenvalues.size(); ++i) {
        cumulative += eigenvalues(i);
        if (cumulative / total >= variance_target) {
            m = static_cast<std::size_t>(i) + 1;
            break;
        }
    }
    return std::min(m, floor_count);
}

PcaModel make_model(Eigen::VectorXd mean, const EigenDecomposition& eig, std::size_t m, bool whiten)
{
    const auto n = eig.values.size();
    if (mean.size() != n || eig.vectors.rows() != n || eig.vectors.cols() != n)
        throw DimensionError("mean and decomposition sizes disagree");
    if (m < 1 || static_cast<Eigen::Index>(m) > n)
        throw DimensionError("retained dimension out of range");

    PcaModel model;
    model.mean = std::move(mean);
    model.eigenvalues = eig.values;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (model.eigenvalues(i) < -1e-9 * std::max(1.0, std::abs(eig.values(0))))
            throw NumericalError("covariance has a negative eigenvalue");
        model.eigenvalues(i) = std::max(0.0, model.eigenvalues(i));
    }
    const auto rows = static_cast<Eigen::Index>(m);
    model.basis = eig.vectors.leftCols(rows).transpose();
    model.epsilon = kWhiteningEpsilon * model.eigenvalues(0);
    model.whitening_scales = (model.eigenvalues.head(rows).array() + model.epsilon).rsqrt().matrix();
    model.whitened = whiten;
    return model;
}

PcaModel fit_pca(const Eigen::Ref<const RowMatrix>& samples, const PcaOptions& options)
{
    auto cov = compute_covariance(samples);
    const auto eig = eigendecompose(cov.matrix);
    Eigen::VectorXd clamped = eig.values.cwiseMax(0.0);
    const auto m = select_dimension(clamped, options.variance_target, options.fixed_dimension);
    return make_model(std::move(cov.mean), eig, m, options.whiten);
}

std::vector<double> project(const PcaModel& model, std::span<const double> x)
{
    check_length(x.size(), model.source_dimension(), "project");
    const Eigen::Map<const Eigen::VectorXd> xv(x.data(), static_cast<Eigen::Index>(x.size()));
    Eigen::VectorXd y = model.basis * (xv - model.mean);
    if (model.whitened)
        y.array() *= model.whitening_scales.array();
    return {y.data(), y.data() + y.size()};
}

std::vector<double> project_rows(const PcaModel& model, std::span<const double> rows)
{
    const auto n = static_cast<Eigen::Index>(model.source_dimension());
    if (rows.size() % static_cast<std::size_t>(n) != 0)
        throw DimensionError("row block is not a multiple of the source dimension");
    const auto count = static_cast<Eigen::Index>(rows.size()) / n;
    const auto m = static_cast<Eigen::Index>(model.dimension());
    const Eigen::Map<const RowMatrix> x(rows.data(), count, n);
    std::vector<double> out(static_cast<std::size_t>(count * m));
    Eigen::Map<RowMatrix> y(out.data(), count, m);
    y.noalias() = (x.rowwise() - model.mean.transpose()) * model.basis.transpose();
    if (model.whitened)
        y.array().rowwise() *= model.whitening_scales.transpose().array();
    return out;
}

std::vector<double> reconstruct(const PcaModel& model, std::span<const double> y)
{
    check_length(y.size(), model.dimension(), "reconstruct");
    Eigen::VectorXd coords = Eigen::Map<const Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(y.size()));
    if (model.whitened)
        coords.array() /= model.whitening_scales.array();
    const Eigen::VectorXd x = model.basis.transpose() * coords + model.mean;
    return {x.data(), x.data() + x.size()};
}

double reconstruction_error(const PcaModel& model)
{
    double tail = 0;
    for (auto i = static_cast<Eigen::Index>(model.dimension()); i < model.eigenvalues.size(); ++i)
        tail += model.eigenvalues(i);
    return tail;
}

double retained_variance(const PcaModel& model)
{
    const double total = model.eigenvalues.sum();
    if (!(total > 0))
        return 1.0;
    return model.eigenvalues.head(static_cast<Eigen::Index>(model.dimension())).sum() / total;
}

double whitened_distance(const PcaModel& model, std::span<const double> x1, std::span<const double> x2)
{
    if (!model.whitened)
        throw ModeError("whitened distance requires a whitening model");
    const auto y1 = project(model, x1);
    const auto y2 = project(model, x2);
    double sum = 0;
    for (std::size_t i = 0; i < y1.size(); ++i) {
        const double d = y1[i] - y2[i];
        sum += d * d;
    }
    return std::sqrt(sum);
}

} // namespace wordspot
