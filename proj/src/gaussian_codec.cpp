#include "spn/gaussian_codec.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>

#include "spn/errors.hpp"
#include "spn/metrics.hpp"

namespace spn {

namespace {

using Matrix = std::vector<std::vector<double>>;

double tolerant_ceil(double x)
{
    return std::ceil(x - 1e-9 * std::max(1.0, std::abs(x)));
}

// Lower Cholesky factor with plain loops so decoded values do not depend on
// vectorization. Returns nullopt when a pivot is not clearly positive.
std::optional<Matrix> cholesky(const Matrix& a)
{
    const std::size_t d = a.size();
    double scale = 0.0;
    for (std::size_t i = 0; i < d; ++i) scale = std::max(scale, std::abs(a[i][i]));
    if (!(scale > 0.0) || !std::isfinite(scale)) return std::nullopt;
    Matrix l(d, std::vector<double>(d, 0.0));
    for (std::size_t j = 0; j < d; ++j) {
        double pivot = a[j][j];
        for (std::size_t p = 0; p < j; ++p) pivot -= l[j][p] * l[j][p];
        if (!(pivot > 1e-12 * scale)) return std::nullopt;
        l[j][j] = std::sqrt(pivot);
        for (std::size_t i = j + 1; i < d; ++i) {
            double acc = a[i][j];
            for (std::size_t p = 0; p < j; ++p) acc -= l[i][p] * l[j][p];
            l[i][j] = acc / l[j][j];
        }
    }
    return l;
}

struct Frame {
    std::vector<double> center;
    Matrix scale; // lower triangular
    bool degenerate = false;
};

Frame anchor_frame(std::span<const std::vector<double>> anchors, std::size_t d)
{
    Frame frame;
    frame.center.assign(d, 0.0);
    const double count = static_cast<double>(anchors.size());
    for (const auto& p : anchors)
        for (std::size_t i = 0; i < d; ++i) frame.center[i] += p[i];
    for (auto& c : frame.center) c /= count;
    Matrix scatter(d, std::vector<double>(d, 0.0));
    for (const auto& p : anchors)
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = 0; j <= i; ++j) scatter[i][j] += (p[i] - frame.center[i]) * (p[j] - frame.center[j]);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j <= i; ++j) {
            scatter[i][j] /= count;
            scatter[j][i] = scatter[i][j];
        }
    auto factor = cholesky(scatter);
    if (factor) {
        frame.scale = std::move(*factor);
    } else {
        frame.degenerate = true;
        frame.scale.assign(d, std::vector<double>(d, 0.0));
        for (std::size_t i = 0; i < d; ++i) frame.scale[i][i] = 1.0;
    }
    return frame;
}

std::size_t checked_dimension(std::span<const std::vector<double>> points)
{
    if (points.empty()) throw DimensionError("no anchor points");
    const auto d = points.front().size();
    if (d == 0) throw DimensionError("anchor points are empty");
    for (const auto& p : points)
        if (p.size() != d) throw DimensionError("anchor points have inconsistent dimensions");
    return d;
}

std::uint64_t grid_index(double value, const GaussianCodecBudget& budget, double range)
{
    const double j = std::round((value + range) / budget.step);
    if (!(j > 0.0)) return 0;
    if (j >= static_cast<double>(budget.levels)) return budget.levels;
    return static_cast<std::uint64_t>(j);
}

} // namespace

GaussianCodecBudget gaussian_budget(std::size_t dimension, double eps, const GaussianCodecOptions& options)
{
    if (dimension == 0) throw DimensionError("gaussian dimension must be positive");
    if (!(eps > 0.0) || !(eps <= 1.0)) throw NumericalError("accuracy must lie in (0, 1]");
    if (!(options.sample_factor > 0.0) || !(options.range > 0.0) || !(options.resolution_factor > 0.0))
        throw NumericalError("gaussian codec constants must be positive");
    const double d = static_cast<double>(dimension);
    GaussianCodecBudget b;
    b.tau = dimension + 1;
    b.m = std::max<std::size_t>(dimension + 1, static_cast<std::size_t>(tolerant_ceil(options.sample_factor * d * std::log(2.0 * d))));
    b.step = eps / (options.resolution_factor * d);
    b.levels = static_cast<std::uint64_t>(tolerant_ceil(2.0 * options.range / b.step));
    b.width = bit_width_for(b.levels + 1);
    b.t = (dimension + dimension * (dimension + 1) / 2) * b.width;
    return b;
}

GaussianLeaf gaussian_decode(std::span<const std::vector<double>> anchors, BitReader& bits, double eps,
                             const GaussianCodecOptions& options)
{
    const auto d = checked_dimension(anchors);
    const auto budget = gaussian_budget(d, eps, options);
    auto value = [&] {
        return -options.range + static_cast<double>(std::min(bits.read(budget.width), budget.levels)) * budget.step;
    };
    std::vector<double> offset(d);
    for (auto& v : offset) v = value();
    Matrix shape(d, std::vector<double>(d, 0.0));
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j <= i; ++j) shape[i][j] = value();
    for (std::size_t i = 0; i < d; ++i) shape[i][i] = std::max(shape[i][i], 0.5 * budget.step);

    const auto frame = anchor_frame(anchors, d);
    Eigen::VectorXd mean(static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < d; ++i) {
        double acc = frame.center[i];
        for (std::size_t j = 0; j <= i; ++j) acc += frame.scale[i][j] * offset[j];
        mean(static_cast<Eigen::Index>(i)) = acc;
    }
    // factor = scale * shape, both lower triangular
    Matrix factor(d, std::vector<double>(d, 0.0));
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j <= i; ++j) {
            double acc = 0.0;
            for (std::size_t p = j; p <= i; ++p) acc += frame.scale[i][p] * shape[p][j];
            factor[i][j] = acc;
        }
    Eigen::MatrixXd covariance(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j <= i; ++j) {
            double acc = 0.0;
            for (std::size_t p = 0; p <= j; ++p) acc += factor[i][p] * factor[j][p];
            covariance(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = acc;
            covariance(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = acc;
        }
    return GaussianLeaf(std::move(mean), std::move(covariance));
}

double gaussian_tv_upper_bound(const GaussianLeaf& a, const GaussianLeaf& b)
{
    const auto d = static_cast<double>(a.dimension());
    // KL(a || b) = (tr(Sb^-1 Sa) + (mb-ma)' Sb^-1 (mb-ma) - d + ln det Sb - ln det Sa) / 2
    const Eigen::MatrixXd& lb = b.cholesky();
    const Eigen::MatrixXd& la = a.cholesky();
    const Eigen::MatrixXd whitened = lb.triangularView<Eigen::Lower>().solve(la);
    const Eigen::VectorXd shift = lb.triangularView<Eigen::Lower>().solve(b.mean() - a.mean());
    double log_det = 0.0;
    for (Eigen::Index i = 0; i < lb.rows(); ++i) log_det += 2.0 * (std::log(lb(i, i)) - std::log(la(i, i)));
    const double kl = 0.5 * (whitened.squaredNorm() + shift.squaredNorm() - d + log_det);
    return std::sqrt(std::max(0.0, kl) / 2.0);
}

GaussianCode gaussian_encode(std::span<const std::vector<double>> samples, const GaussianLeaf& truth, double eps,
                             std::uint64_t seed, const GaussianCodecOptions& options)
{
    const auto d = truth.dimension();
    const auto budget = gaussian_budget(d, eps, options);
    if (samples.size() < budget.m)
        throw InsufficientSamples("gaussian leaf needs " + std::to_string(budget.m) + " samples, got " +
                                  std::to_string(samples.size()));
    for (const auto& s : samples)
        if (s.size() != d) throw DimensionError("sample dimension does not match the leaf");

    std::vector<std::size_t> order(samples.size());
    bool any_frame = false;
    const std::size_t trials = std::max<std::size_t>(options.max_anchor_trials, 1);
    for (std::size_t trial = 0; trial < trials; ++trial) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        if (trial > 0) {
            Rng rng(seed, trial);
            std::shuffle(order.begin(), order.end(), rng);
        }
        std::vector<std::size_t> anchors(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(budget.tau));
        std::vector<std::vector<double>> points;
        for (auto i : anchors) points.push_back(samples[i]);
        const auto frame = anchor_frame(points, d);
        if (frame.degenerate) continue;
        any_frame = true;

        Eigen::MatrixXd scale(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
        Eigen::VectorXd center(static_cast<Eigen::Index>(d));
        for (std::size_t i = 0; i < d; ++i) {
            center(static_cast<Eigen::Index>(i)) = frame.center[i];
            for (std::size_t j = 0; j < d; ++j)
                scale(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = frame.scale[i][j];
        }
        const auto lower = scale.triangularView<Eigen::Lower>();
        const Eigen::VectorXd offset = lower.solve(truth.mean() - center);
        const Eigen::MatrixXd relative = lower.solve(truth.cholesky());
        // relative * relative' = scale^-1 Sigma scale^-T; re-factor to lower triangular.
        Eigen::LLT<Eigen::MatrixXd> llt(relative * relative.transpose());
        if (llt.info() != Eigen::Success) continue;
        const Eigen::MatrixXd shape = llt.matrixL();

        BitWriter writer;
        for (std::size_t i = 0; i < d; ++i)
            writer.write(grid_index(offset(static_cast<Eigen::Index>(i)), budget, options.range), budget.width);
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = 0; j <= i; ++j)
                writer.write(grid_index(shape(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)), budget, options.range),
                             budget.width);
        auto bits = writer.take();

        BitReader reader(bits);
        const auto decoded = [&]() -> std::optional<GaussianLeaf> {
            try {
                return gaussian_decode(points, reader, eps, options);
            } catch (const ModelError&) {
                return std::nullopt;
            }
        }();
        if (!decoded) continue;
        const double distance = d == 1 ? gaussian_tv_1d(truth.mean()(0), std::sqrt(truth.covariance()(0, 0)), decoded->mean()(0),
                                                        std::sqrt(decoded->covariance()(0, 0)))
                                       : gaussian_tv_upper_bound(truth, *decoded);
        if (distance <= eps) return GaussianCode{std::move(anchors), std::move(bits)};
    }
    if (!any_frame) throw DegenerateSample("no tried anchor set spans the space");
    throw LeafEncodeFailure("no anchor set reached the requested accuracy after " + std::to_string(trials) + " trials");
}

} // namespace spn
