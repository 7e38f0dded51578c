#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace slnlss {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Responses plus the three design matrices of the joint location / scale /
/// skewness regression. Intercepts are ordinary columns supplied by the caller.
struct Dataset {
    VectorXd y;
    MatrixXd X;  ///< location covariates, n x p
    MatrixXd Z;  ///< scale covariates (log sigma^2), n x q
    MatrixXd W;  ///< skewness covariates, n x r

    Eigen::Index n() const { return y.size(); }
    Eigen::Index p() const { return X.cols(); }
    Eigen::Index q() const { return Z.cols(); }
    Eigen::Index r() const { return W.cols(); }

    /// Rows `idx` of every component, in order (duplicates allowed).
    Dataset subset(const std::vector<Eigen::Index>& idx) const;
};

/// Coefficients (beta, gamma, alpha).
struct Theta {
    VectorXd beta;
    VectorXd gamma;
    VectorXd alpha;

    Eigen::Index size() const { return beta.size() + gamma.size() + alpha.size(); }

    VectorXd stacked() const;
    static Theta unstack(const VectorXd& v, Eigen::Index p, Eigen::Index q, Eigen::Index r);
    static Theta zeros(const Dataset& d);

    /// Throws StructuralError when block sizes disagree with `d`.
    void check_against(const Dataset& d) const;
};

/// mu_i = x_i'beta, log sigma_i^2 = z_i'gamma, lambda_i = w_i'alpha.
struct LinPreds {
    VectorXd mu;
    VectorXd log_sigma2;
    VectorXd lambda;

    VectorXd sigma() const { return (0.5 * log_sigma2.array()).exp().matrix(); }
};

LinPreds linear_predictors(const Dataset& d, const Theta& t);

/// Observed-data log-likelihood. Throws NumericError carrying the row index
/// when a row's contribution is not finite.
double observed_loglik(const Dataset& d, const Theta& t);

/// Diagnostics for a dataset; an empty list means it is usable.
/// Rank is judged by singular values above 1e-10 times the largest one.
std::vector<std::string> validate(const Dataset& d);

/// Throws StructuralError joining every violation reported by validate().
void require_valid(const Dataset& d);

}  // namespace slnlss
