#pragma once

#include <cstdint>
#include <random>

#include "slnlss/model.hpp"
#include "slnlss/sln.hpp"

namespace fixture {

using slnlss::Dataset;
using slnlss::Theta;

/// Intercept plus U(-1, 1) covariates in every block; y drawn from the model at `truth`.
inline Dataset random_dataset(Eigen::Index n, Eigen::Index p, Eigen::Index q, Eigen::Index r, const Theta& truth,
                              std::uint64_t seed) {
    slnlss::Rng rng(seed);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    auto design = [&](Eigen::Index k) {
        Eigen::MatrixXd M(n, k);
        for (Eigen::Index i = 0; i < n; ++i) {
            M(i, 0) = 1.0;
            for (Eigen::Index j = 1; j < k; ++j) M(i, j) = unif(rng);
        }
        return M;
    };
    Dataset d{Eigen::VectorXd(n), design(p), design(q), design(r)};
    for (Eigen::Index i = 0; i < n; ++i) {
        const slnlss::SlnParams law{d.X.row(i).dot(truth.beta), std::exp(0.5 * d.Z.row(i).dot(truth.gamma)),
                                    d.W.row(i).dot(truth.alpha)};
        d.y(i) = slnlss::draw(law, rng);
    }
    return d;
}

/// Coefficients with independent N(0, scale^2) coordinates.
inline Theta random_theta(Eigen::Index p, Eigen::Index q, Eigen::Index r, std::uint64_t seed, double scale = 1.0) {
    slnlss::Rng rng(seed);
    std::normal_distribution<double> g(0.0, scale);
    Theta t{Eigen::VectorXd(p), Eigen::VectorXd(q), Eigen::VectorXd(r)};
    for (auto* v : {&t.beta, &t.gamma, &t.alpha}) {
        for (Eigen::Index i = 0; i < v->size(); ++i) (*v)(i) = g(rng);
    }
    return t;
}

}  // namespace fixture
