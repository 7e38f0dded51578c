#include "slnlss/sln.hpp"

#include <cmath>
#include <string>

#include "slnlss/errors.hpp"
#include "slnlss/normal.hpp"

namespace slnlss {

namespace {

void require_finite(double y) {
    if (!std::isfinite(y)) {
        throw DomainError("SLN: observation is not finite");
    }
}

}  // namespace

void SlnParams::validate() const {
    if (!std::isfinite(mu) || !std::isfinite(sigma) || !std::isfinite(lambda)) {
        throw DomainError("SLN: parameters must be finite");
    }
    if (!(sigma > 0.0)) {
        throw DomainError("SLN: sigma must be positive, got " + std::to_string(sigma));
    }
}

double log_pdf(double y, const SlnParams& p) {
    p.validate();
    require_finite(y);
    const double s = (y - p.mu) / p.sigma;
    return -std::log(p.sigma) - std::abs(s) + log_norm_cdf(p.lambda * s);
}

double pdf(double y, const SlnParams& p) { return std::exp(log_pdf(y, p)); }

double draw(const SlnParams& p, Rng& rng) {
    std::exponential_distribution<double> expo(1.0);
    std::normal_distribution<double> normal(0.0, 1.0);

    const double v = 1.0 / std::sqrt(2.0 * expo(rng));
    const double z1 = normal(rng);
    const double z2 = normal(rng);
    if (!std::isfinite(v)) {
        return p.mu;  // T == 0 exactly; the mixing scale collapses onto mu
    }
    const double root = std::sqrt(v * v + p.lambda * p.lambda);
    return p.mu + p.sigma * (p.lambda * std::abs(z1) / (v * root) + z2 / root);
}

std::vector<double> sample(const SlnParams& p, std::size_t n, std::uint64_t seed) {
    p.validate();
    Rng rng(seed);
    std::vector<double> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        out.push_back(draw(p, rng));
    }
    return out;
}

double cond_ev2(double y, const SlnParams& p, double clamp_eps) {
    p.validate();
    require_finite(y);
    return p.sigma / std::max(std::abs(y - p.mu), clamp_eps * p.sigma);
}

double cond_eu1(double y, const SlnParams& p) {
    p.validate();
    require_finite(y);
    return tn_mean(p.lambda * (y - p.mu) / p.sigma);
}

double cond_eu2(double y, const SlnParams& p) {
    p.validate();
    require_finite(y);
    return tn_second_moment(p.lambda * (y - p.mu) / p.sigma);
}

}  // namespace slnlss
