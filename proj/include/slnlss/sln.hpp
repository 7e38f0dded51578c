#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace slnlss {

using Rng = std::mt19937_64;

/// Default residual clamp: |y - mu| is floored at clamp_eps * sigma wherever
/// the conditional weight sigma/|y - mu| is formed.
inline constexpr double kDefaultClampEps = 1e-8;

/// One observation's skew Laplace normal law SLN(mu, sigma^2, lambda).
struct SlnParams {
    double mu = 0.0;
    double sigma = 1.0;  ///< scale, strictly positive
    double lambda = 0.0; ///< skewness

    /// Throws DomainError unless sigma > 0 and every field is finite.
    void validate() const;
};

/// log f(y) = -log sigma - |y - mu|/sigma + log Phi(lambda (y - mu)/sigma).
double log_pdf(double y, const SlnParams& p);
double pdf(double y, const SlnParams& p);

/// One exact draw. Uses the hierarchy V = (2T)^{-1/2}, T ~ Exp(1), and
/// Y | V ~ mu + sigma * S / V with S skew normal of shape lambda / V.
double draw(const SlnParams& p, Rng& rng);

/// n i.i.d. draws, deterministic in `seed`. n == 0 gives an empty vector.
std::vector<double> sample(const SlnParams& p, std::size_t n, std::uint64_t seed);

/// E(V^2 | y) = sigma / |y - mu|, with |y - mu| floored at clamp_eps * sigma.
double cond_ev2(double y, const SlnParams& p, double clamp_eps = kDefaultClampEps);

/// E(U | y): mean of N(lambda s, 1) truncated to (0, inf), s = (y - mu)/sigma.
double cond_eu1(double y, const SlnParams& p);

/// E(U^2 | y) = 1 + lambda s E(U | y).
double cond_eu2(double y, const SlnParams& p);

}  // namespace slnlss
