#pragma once

#include <optional>
#include <string>
#include <vector>

#include "slnlss/model.hpp"
#include "slnlss/sln.hpp"

namespace slnlss {

/// Per-observation conditional expectations from the E-step.
struct EStepCache {
    VectorXd v_hat;      ///< E(V_i^2 | y_i)
    VectorXd u1_hat;     ///< E(U_i | y_i)
    VectorXd u2_hat;     ///< E(U_i^2 | y_i)
    VectorXd kappa_hat;  ///< lambda_i (y_i - mu_i) / sigma_i
};

struct FitOptions {
    double tol = 1e-6;
    /// Convergence also requires ||score(theta, e_step(theta))||_inf below this.
    double grad_tol = 1e-5;
    int max_iter = 1000;
    int max_halvings = 30;
    double ridge0 = 1e-8;
    double clamp_eps = kDefaultClampEps;
    /// SQUAREM extrapolation between EM cycles; false gives plain EM.
    bool accelerate = true;

    void validate() const;
};

struct FitResult {
    Theta theta_hat;
    double loglik = 0.0;
    double loglik_start = 0.0;       ///< log-likelihood at the initial value
    int n_iter = 0;                  ///< number of E-step/M-step applications
    bool converged = false;
    double score_norm = 0.0;           ///< ||G||_inf at theta_hat with the cache at theta_hat
    std::vector<double> loglik_trace;  ///< log-likelihood along the accepted path, at most max_iter
    std::vector<std::string> warnings;
};

EStepCache e_step(const Dataset& d, const Theta& t, double clamp_eps = kDefaultClampEps);

/// Q(theta; theta_hat), where the cache was computed at theta_hat.
double q_value(const Dataset& d, const Theta& t, const EStepCache& c);

/// dQ/dtheta stacked as (beta, gamma, alpha).
VectorXd score(const Dataset& d, const Theta& t, const EStepCache& c);

/// d^2Q/dtheta dtheta', symmetric by construction.
MatrixXd hessian(const Dataset& d, const Theta& t, const EStepCache& c);

struct SymSolve {
    VectorXd x;
    double ridge = 0.0;  ///< tau actually added to the diagonal
};

/// Solves (A + tau I) x = b for symmetric A, escalating tau through
/// 0, ridge0, 10 ridge0, ... until a Cholesky factorization succeeds.
/// Throws NumericError once tau would exceed 1e6 * ||A||.
SymSolve solve_sym(const MatrixXd& A, const VectorXd& b, double ridge0);

struct MStepResult {
    Theta theta;
    double loglik = 0.0;
    double ridge = 0.0;
    int halvings = 0;
    bool accepted = true;  ///< false: no halving recovered ascent, theta unchanged
};

/// One safeguarded Newton step on Q. The observed log-likelihood of the
/// returned theta is never below loglik(t) - 1e-12.
MStepResult m_step(const Dataset& d, const Theta& t, const EStepCache& c, const FitOptions& opts,
                   std::optional<double> loglik_t = std::nullopt);

/// Least-squares beta, least-squares gamma on log squared residuals, alpha = 0.
Theta default_init(const Dataset& d);

/// Alternates e_step and m_step. Converged means the last step moved both the
/// log-likelihood and every coefficient by less than tol, and the score at the
/// new point (with its own E-step) is below grad_tol. With opts.accelerate,
/// every two EM steps are followed by a squared extrapolation that is kept
/// only if one further EM step from it beats the plain path.
FitResult fit(const Dataset& d, const std::optional<Theta>& init = std::nullopt,
              const FitOptions& opts = {});

}  // namespace slnlss
