#include "slnlss/inference.hpp"

#include <cmath>
#include <optional>
#include <random>

#include "slnlss/errors.hpp"
#include "slnlss/parallel.hpp"
#include "slnlss/sln.hpp"

namespace slnlss {

CriteriaReport info_criteria(double loglik, int m, int n) {
    if (n < 1 || m < 1) {
        throw InferenceError("info_criteria: need n >= 1 and m >= 1");
    }
    const double deviance = -2.0 * loglik;
    const double md = static_cast<double>(m);
    const double nd = static_cast<double>(n);
    return CriteriaReport{loglik, m, n, deviance + 2.0 * md, deviance + md * std::log(nd),
                          deviance + md * 0.2 * std::sqrt(nd)};
}

Resampler paired_resampler(std::uint64_t seed) {
    return [seed](int b, Eigen::Index n) {
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(b)));
        std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
        std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
        for (auto& i : idx) i = pick(rng);
        return idx;
    };
}

BootstrapReport bootstrap_se(const Dataset& d, const FitOptions& opts, int B, std::uint64_t seed,
                             unsigned threads) {
    const FitResult full = fit(d, std::nullopt, opts);
    return bootstrap_se(d, full.theta_hat, opts, B, paired_resampler(seed), threads);
}

BootstrapReport bootstrap_se(const Dataset& d, const Theta& theta_hat, const FitOptions& opts,
                             int B, const Resampler& resample, unsigned threads) {
    if (B < 2) {
        throw InferenceError("bootstrap_se: need at least 2 resamples");
    }
    theta_hat.check_against(d);
    const auto count = static_cast<std::size_t>(B);
    std::vector<std::optional<VectorXd>> slots(count);
    parallel_for(count, threads, [&](std::size_t b) {
        try {
            const Dataset boot = d.subset(resample(static_cast<int>(b), d.n()));
            const FitResult fr = fit(boot, theta_hat, opts);
            if (fr.converged) slots[b] = fr.theta_hat.stacked();
        } catch (const std::exception&) {
            // rank-deficient or numerically failed resample, counted below
        }
    });

    const Eigen::Index k = theta_hat.size();
    VectorXd sum = VectorXd::Zero(k);
    int used = 0;
    for (const auto& s : slots) {
        if (s) {
            sum += *s;
            ++used;
        }
    }
    if (used < 2) {
        throw InferenceError("bootstrap_se: fewer than two of " + std::to_string(B) +
                             " resamples converged");
    }
    const VectorXd mean = sum / used;
    VectorXd ss = VectorXd::Zero(k);
    for (const auto& s : slots) {
        if (s) ss += (*s - mean).cwiseAbs2();
    }
    return BootstrapReport{B, (ss / (used - 1)).cwiseSqrt(), B - used};
}

}  // namespace slnlss
