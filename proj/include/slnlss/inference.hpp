#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "slnlss/em.hpp"
#include "slnlss/model.hpp"

namespace slnlss {

/// -2 loglik + m c_n with c_n = 2 (AIC), log n (BIC), 0.2 sqrt(n) (EDC).
struct CriteriaReport {
    double loglik = 0.0;
    int m = 0;
    int n = 0;
    double aic = 0.0;
    double bic = 0.0;
    double edc = 0.0;
};

CriteriaReport info_criteria(double loglik, int m, int n);

struct BootstrapReport {
    int B = 0;
    VectorXd se;       ///< sample standard deviation over converged resamples
    int n_failed = 0;  ///< resamples that errored or did not converge
};

/// Row indices for resample b of a dataset with n rows.
using Resampler = std::function<std::vector<Eigen::Index>(int b, Eigen::Index n)>;

/// Paired bootstrap with replacement; resample b draws its rows from a
/// generator seeded by derive_seed(seed, b), so results do not depend on
/// evaluation order or thread count.
Resampler paired_resampler(std::uint64_t seed);

/// Fits the full data first, then refits B resamples starting from that fit.
BootstrapReport bootstrap_se(const Dataset& d, const FitOptions& opts, int B, std::uint64_t seed,
                             unsigned threads = 0);

/// Same, with the full-data estimate and the resampling scheme supplied.
BootstrapReport bootstrap_se(const Dataset& d, const Theta& theta_hat, const FitOptions& opts,
                             int B, const Resampler& resample, unsigned threads = 0);

}  // namespace slnlss
