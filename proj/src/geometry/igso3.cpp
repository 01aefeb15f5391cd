#include "cdrdiff/igso3.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <vector>

namespace cdrdiff::geom {

namespace {

constexpr double kPi = std::numbers::pi;

struct AngleTable {
    std::vector<double> omega;
    std::vector<double> cdf;
};

void check_variance(double eps) {
    if (!(eps > 0.0) || !std::isfinite(eps)) throw GeometryError("igso3: variance must be positive and finite");
}

std::shared_ptr<const AngleTable> build_table(double eps) {
    auto table = std::make_shared<AngleTable>();
    table->omega.resize(kIgso3GridSize + 1);
    table->cdf.resize(kIgso3GridSize + 1);
    double prev_density = 0.0;
    table->omega[0] = 0.0;
    table->cdf[0] = 0.0;
    const double h = kPi / static_cast<double>(kIgso3GridSize);
    for (std::size_t k = 1; k <= kIgso3GridSize; ++k) {
        const double w = h * static_cast<double>(k);
        const double density = std::max(0.0, igso3_angle_density(w, eps));
        table->omega[k] = w;
        table->cdf[k] = table->cdf[k - 1] + 0.5 * h * (density + prev_density);
        prev_density = density;
    }
    const double total = table->cdf.back();
    if (!(total > 0.0)) throw GeometryError("igso3: degenerate angle density");
    for (double& c : table->cdf) c /= total;
    return table;
}

std::shared_ptr<const AngleTable> angle_table(double eps) {
    static std::mutex mutex;
    static std::map<double, std::shared_ptr<const AngleTable>> cache;
    {
        std::lock_guard lock(mutex);
        auto it = cache.find(eps);
        if (it != cache.end()) return it->second;
    }
    auto table = build_table(eps);
    std::lock_guard lock(mutex);
    return cache.emplace(eps, std::move(table)).first->second;
}

}  // namespace

std::size_t igso3_truncation(double eps) {
    check_variance(eps);
    double terms;
    if (eps < 0.1) {
        terms = 1000.0;
    } else if (eps >= 1.0) {
        terms = 50.0;
    } else {
        const double f = std::log(eps / 0.1) / std::log(10.0);
        terms = std::exp(std::log(1000.0) + f * (std::log(50.0) - std::log(1000.0)));
    }
    // Terms with l(l+1) eps > 37 are below 1e-16 relative to the leading term.
    const double negligible = std::ceil(std::sqrt(37.0 / eps)) + 1.0;
    return static_cast<std::size_t>(std::min(terms, negligible));
}

double igso3_angle_density(double omega, double eps) {
    check_variance(eps);
    if (omega < 0.0 || omega > kPi) throw GeometryError("igso3_angle_density: angle outside [0, pi]");
    const std::size_t terms = igso3_truncation(eps);
    const double half = std::sin(0.5 * omega);
    double sum = 0.0;
    for (std::size_t l = 0; l <= terms; ++l) {
        const double lf = static_cast<double>(l);
        const double weight = (2.0 * lf + 1.0) * std::exp(-lf * (lf + 1.0) * eps);
        const double character =
            half < 1e-12 ? 2.0 * lf + 1.0 : std::sin((lf + 0.5) * omega) / half;
        sum += weight * character;
    }
    return (1.0 - std::cos(omega)) / kPi * sum;
}

double igso3_sample_angle(double eps, Rng& rng) {
    check_variance(eps);
    if (eps < kIgso3SmallVariance) {
        const double s = std::sqrt(2.0 * eps);
        const Vec3 rv(s * standard_normal(rng), s * standard_normal(rng), s * standard_normal(rng));
        return std::min(rv.norm(), kPi);
    }
    const auto table = angle_table(eps);
    const double u = uniform01(rng);
    const auto it = std::upper_bound(table->cdf.begin(), table->cdf.end(), u);
    if (it == table->cdf.end()) return kPi;
    const std::size_t k = static_cast<std::size_t>(it - table->cdf.begin());
    const double c0 = table->cdf[k - 1];
    const double c1 = table->cdf[k];
    const double frac = c1 > c0 ? (u - c0) / (c1 - c0) : 0.0;
    return table->omega[k - 1] + frac * (table->omega[k] - table->omega[k - 1]);
}

Mat3 igso3_sample(const Mat3& mean, double eps, Rng& rng) {
    check_variance(eps);
    if (eps < kIgso3SmallVariance) {
        const double s = std::sqrt(2.0 * eps);
        const Vec3 rv(s * standard_normal(rng), s * standard_normal(rng), s * standard_normal(rng));
        return mean * rotation_exp(rv);
    }
    const double omega = igso3_sample_angle(eps, rng);
    const Vec3 axis = random_unit_vector(rng);
    return mean * rotation_exp(Vec3(axis * omega));
}

double haar_angle_cdf(double omega) { return (omega - std::sin(omega)) / kPi; }

}  // namespace cdrdiff::geom
