#pragma once

// Standard normal special functions evaluated without underflow in the
// lower tail. Everything here is pure and thread-safe.

namespace slnlss {

inline constexpr double kSqrt2 = 1.41421356237309504880;
inline constexpr double kInvSqrt2Pi = 0.39894228040143267794;
inline constexpr double kSqrt2OverPi = 0.79788456080286535588;
inline constexpr double kLogPi = 1.14472988584940017414;

double norm_pdf(double x);
double norm_cdf(double x);

/// log Phi(x), finite for every finite x.
double log_norm_cdf(double x);

/// Scaled complementary error function exp(t^2) * erfc(t).
double erfcx(double t);

/// Inverse Mills ratio phi(x) / Phi(x). Never NaN or infinite for finite x;
/// underflows gracefully to 0 for large positive x.
double inv_mills(double x);

/// Mean of N(m, 1) truncated to (0, inf): m + phi(m)/Phi(m).
double tn_mean(double m);

/// Second raw moment of N(m, 1) truncated to (0, inf): 1 + m * tn_mean(m).
double tn_second_moment(double m);

}  // namespace slnlss
