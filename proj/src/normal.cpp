#include "slnlss/normal.hpp"

#include <array>
#include <cmath>

namespace slnlss {

namespace {

constexpr double kInvSqrtPi = 0.56418958354775628695;

// Below this, erfc(t) is still a normal double and exp(t*t)*erfc(t) loses
// nothing once t*t is split into hi + lo parts.
constexpr double kErfcxDirectLimit = 25.0;

// Continued fraction exp(t^2) erfc(t) = (1/sqrt(pi)) / (t + (1/2)/(t + 1/(t + (3/2)/(t + ...)))),
// evaluated bottom-up. For t >= 25 sixty levels converge far past double precision.
double erfcx_continued_fraction(double t) {
    double tail = t;
    for (int k = 60; k >= 1; --k) {
        tail = t + (0.5 * k) / tail;
    }
    return kInvSqrtPi / tail;
}

// Asymptotic coefficients of phi/Phi at -t: t * sum_k b_k t^{-2k}.
constexpr std::array<double, 7> kMillsSeries = {1.0, 1.0, -2.0, 10.0, -74.0, 706.0, -8162.0};

// Beyond this magnitude the lower-tail truncated moments come from the series;
// m + phi(m)/Phi(m) would cancel catastrophically.
constexpr double kTailSeriesLimit = 100.0;

}  // namespace

double norm_pdf(double x) { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }

double norm_cdf(double x) { return 0.5 * std::erfc(-x / kSqrt2); }

double erfcx(double t) {
    if (t >= kErfcxDirectLimit) {
        return erfcx_continued_fraction(t);
    }
    const double hi = t * t;
    const double lo = std::fma(t, t, -hi);
    return std::exp(hi) * std::erfc(t) * (1.0 + lo);
}

double log_norm_cdf(double x) {
    if (x < -8.0) {
        // Phi(x) = erfcx(-x/sqrt2) * exp(-x^2/2) / 2
        return std::log(0.5 * erfcx(-x / kSqrt2)) - 0.5 * x * x;
    }
    if (x < 0.0) {
        return std::log(norm_cdf(x));
    }
    return std::log1p(-0.5 * std::erfc(x / kSqrt2));
}

double inv_mills(double x) {
    if (x < 0.0) {
        return kSqrt2OverPi / erfcx(-x / kSqrt2);
    }
    return norm_pdf(x) / norm_cdf(x);
}

double tn_mean(double m) {
    if (m < -kTailSeriesLimit) {
        const double u = 1.0 / (m * m);
        double acc = 0.0;
        for (std::size_t k = kMillsSeries.size() - 1; k >= 1; --k) {
            acc = acc * u + kMillsSeries[k];
        }
        return -acc / m;  // 1/t - 2/t^3 + ...  with t = -m
    }
    return m + inv_mills(m);
}

double tn_second_moment(double m) {
    if (m < -kTailSeriesLimit) {
        const double u = 1.0 / (m * m);
        double acc = 0.0;
        for (std::size_t k = kMillsSeries.size() - 1; k >= 2; --k) {
            acc = acc * u + kMillsSeries[k];
        }
        return -acc * u;  // 2/t^2 - 10/t^4 + ...
    }
    return 1.0 + m * tn_mean(m);
}

}  // namespace slnlss
