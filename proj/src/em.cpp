#include "slnlss/em.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "slnlss/errors.hpp"
#include "slnlss/normal.hpp"

namespace slnlss {

void FitOptions::validate() const {
    if (!(tol > 0.0)) throw StructuralError("FitOptions: tol must be positive");
    if (!(grad_tol > 0.0)) throw StructuralError("FitOptions: grad_tol must be positive");
    if (max_iter < 1) throw StructuralError("FitOptions: max_iter must be at least 1");
    if (max_halvings < 0) throw StructuralError("FitOptions: max_halvings must be nonnegative");
    if (!(ridge0 >= 0.0)) throw StructuralError("FitOptions: ridge0 must be nonnegative");
    if (!(clamp_eps > 0.0)) throw StructuralError("FitOptions: clamp_eps must be positive");
}

EStepCache e_step(const Dataset& d, const Theta& t, double clamp_eps) {
    const LinPreds lp = linear_predictors(d, t);
    const Eigen::Index n = d.n();
    EStepCache c{VectorXd(n), VectorXd(n), VectorXd(n), VectorXd(n)};
    for (Eigen::Index i = 0; i < n; ++i) {
        const double sigma = std::exp(0.5 * lp.log_sigma2(i));
        const double resid = d.y(i) - lp.mu(i);
        c.kappa_hat(i) = lp.lambda(i) * resid / sigma;
        c.v_hat(i) = sigma / std::max(std::abs(resid), clamp_eps * sigma);
        c.u1_hat(i) = tn_mean(c.kappa_hat(i));
        c.u2_hat(i) = tn_second_moment(c.kappa_hat(i));
        if (!std::isfinite(c.v_hat(i)) || !std::isfinite(c.u1_hat(i)) ||
            !std::isfinite(c.u2_hat(i)) || !std::isfinite(c.kappa_hat(i))) {
            throw NumericError("E-step produced a non-finite expectation at row " +
                                   std::to_string(i),
                               static_cast<std::size_t>(i));
        }
    }
    return c;
}

namespace {

// Row-wise pieces shared by Q, its gradient and its Hessian.
struct RowTerms {
    VectorXd resid;  // y - x'beta
    VectorXd a;      // w'alpha
    VectorXd e1;     // exp(-z'gamma / 2)
    VectorXd e2;     // exp(-z'gamma)
    VectorXd zg;     // z'gamma
};

RowTerms row_terms(const Dataset& d, const Theta& t, const EStepCache& c) {
    const LinPreds lp = linear_predictors(d, t);
    if (c.v_hat.size() != d.n()) {
        throw StructuralError("E-step cache length does not match the dataset");
    }
    RowTerms rt;
    rt.resid = d.y - lp.mu;
    rt.a = lp.lambda;
    rt.zg = lp.log_sigma2;
    rt.e1 = (-0.5 * rt.zg.array()).exp().matrix();
    rt.e2 = (-rt.zg.array()).exp().matrix();
    return rt;
}

MatrixXd weighted_cross(const MatrixXd& A, const VectorXd& w, const MatrixXd& B) {
    return A.transpose() * w.asDiagonal() * B;
}

}  // namespace

double q_value(const Dataset& d, const Theta& t, const EStepCache& c) {
    const RowTerms rt = row_terms(d, t, c);
    double total = 0.0;
    for (Eigen::Index i = 0; i < d.n(); ++i) {
        const double r = rt.resid(i);
        const double a = rt.a(i);
        const double inner = r * r * rt.e2(i) * c.v_hat(i) + c.u2_hat(i) -
                             2.0 * a * rt.e1(i) * r * c.u1_hat(i) + a * a * rt.e2(i) * r * r;
        total += -kLogPi - 0.5 * rt.zg(i) - 0.5 * inner;
    }
    return total;
}

VectorXd score(const Dataset& d, const Theta& t, const EStepCache& c) {
    const RowTerms rt = row_terms(d, t, c);
    const Eigen::Index n = d.n();
    VectorXd g_beta(n), g_gamma(n), g_alpha(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double r = rt.resid(i);
        const double a = rt.a(i);
        const double weight = rt.e2(i) * (c.v_hat(i) + a * a);
        const double skew = a * rt.e1(i) * c.u1_hat(i);
        g_beta(i) = r * weight - skew;
        g_gamma(i) = -0.5 + 0.5 * r * r * weight - 0.5 * r * skew;
        // squared residual in the second term: d/dalpha of -(a r)^2 e2 / 2
        g_alpha(i) = r * rt.e1(i) * c.u1_hat(i) - a * r * r * rt.e2(i);
    }
    VectorXd g(t.size());
    g << d.X.transpose() * g_beta, d.Z.transpose() * g_gamma, d.W.transpose() * g_alpha;
    return g;
}

MatrixXd hessian(const Dataset& d, const Theta& t, const EStepCache& c) {
    const RowTerms rt = row_terms(d, t, c);
    const Eigen::Index n = d.n();
    VectorXd w_bb(n), w_bg(n), w_ba(n), w_gg(n), w_ga(n), w_aa(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double r = rt.resid(i);
        const double a = rt.a(i);
        const double weight = rt.e2(i) * (c.v_hat(i) + a * a);
        const double skew = a * rt.e1(i) * c.u1_hat(i);
        const double tilt = rt.e1(i) * c.u1_hat(i);
        w_bb(i) = -weight;
        w_bg(i) = -r * weight + 0.5 * skew;
        w_ba(i) = -tilt + 2.0 * a * r * rt.e2(i);
        w_gg(i) = -0.5 * r * r * weight + 0.25 * r * skew;
        w_ga(i) = -0.5 * r * tilt + a * r * r * rt.e2(i);
        w_aa(i) = -r * r * rt.e2(i);
    }
    const Eigen::Index p = d.p(), q = d.q(), r = d.r();
    MatrixXd H(p + q + r, p + q + r);
    H.block(0, 0, p, p) = weighted_cross(d.X, w_bb, d.X);
    H.block(p, p, q, q) = weighted_cross(d.Z, w_gg, d.Z);
    H.block(p + q, p + q, r, r) = weighted_cross(d.W, w_aa, d.W);
    H.block(0, p, p, q) = weighted_cross(d.X, w_bg, d.Z);
    H.block(0, p + q, p, r) = weighted_cross(d.X, w_ba, d.W);
    H.block(p, p + q, q, r) = weighted_cross(d.Z, w_ga, d.W);
    H.block(p, 0, q, p) = H.block(0, p, p, q).transpose();
    H.block(p + q, 0, r, p) = H.block(0, p + q, p, r).transpose();
    H.block(p + q, p, r, q) = H.block(p, p + q, q, r).transpose();
    // the diagonal blocks come out of a product and may differ from their
    // transpose in the last bit
    for (Eigen::Index j = 0; j < H.cols(); ++j) {
        for (Eigen::Index i = j + 1; i < H.rows(); ++i) {
            H(j, i) = H(i, j);
        }
    }
    return H;
}

SymSolve solve_sym(const MatrixXd& A, const VectorXd& b, double ridge0) {
    if (A.rows() != A.cols() || A.rows() != b.size()) {
        throw StructuralError("solve_sym: dimension mismatch");
    }
    if (b.size() == 0) {
        return SymSolve{VectorXd(0), 0.0};
    }
    const double norm = A.cwiseAbs().rowwise().sum().maxCoeff();
    if (!std::isfinite(norm)) {
        throw NumericError("solve_sym: matrix has non-finite entries");
    }
    const double limit = 1e6 * norm;
    const double first = ridge0 > 0.0 ? ridge0 : 1e-12 * std::max(norm, 1.0);
    const Eigen::Index k = A.rows();

    double tau = 0.0;
    while (true) {
        const MatrixXd shifted = A + tau * MatrixXd::Identity(k, k);
        const Eigen::LLT<MatrixXd> llt(shifted);
        if (llt.info() == Eigen::Success) {
            VectorXd x = llt.solve(b);
            if (x.allFinite()) {
                return SymSolve{std::move(x), tau};
            }
        }
        tau = tau == 0.0 ? first : 10.0 * tau;
        if (tau > limit) {
            throw NumericError("solve_sym: system is singular (ridge exceeded 1e6 * ||A||)");
        }
    }
}

namespace {

double loglik_or_neg_inf(const Dataset& d, const Theta& t) {
    try {
        return observed_loglik(d, t);
    } catch (const NumericError&) {
        return -std::numeric_limits<double>::infinity();
    }
}

}  // namespace

MStepResult m_step(const Dataset& d, const Theta& t, const EStepCache& c, const FitOptions& opts,
                   std::optional<double> loglik_t) {
    const double base = loglik_t ? *loglik_t : observed_loglik(d, t);
    const VectorXd g = score(d, t, c);
    const MatrixXd h = hessian(d, t, c);
    const SymSolve sol = solve_sym(-h, g, opts.ridge0);

    const VectorXd start = t.stacked();
    double scale = 1.0;
    for (int halvings = 0; halvings <= opts.max_halvings; ++halvings) {
        Theta cand = Theta::unstack(start + scale * sol.x, d.p(), d.q(), d.r());
        const double ll = loglik_or_neg_inf(d, cand);
        if (ll >= base - 1e-12) {
            return MStepResult{std::move(cand), ll, sol.ridge, halvings, true};
        }
        scale *= 0.5;
    }
    return MStepResult{t, base, sol.ridge, opts.max_halvings, false};
}

Theta default_init(const Dataset& d) {
    require_valid(d);
    Theta t = Theta::zeros(d);
    if (d.p() > 0) {
        t.beta = d.X.colPivHouseholderQr().solve(d.y);
    }
    if (d.q() > 0) {
        const VectorXd resid = d.y - d.X * t.beta;
        const VectorXd target = resid.array().square().max(1e-10).log().matrix();
        t.gamma = d.Z.colPivHouseholderQr().solve(target);
    }
    return t;
}

namespace {

// One E-step + M-step application with bookkeeping for the fit loop.
class EmDriver {
public:
    EmDriver(const Dataset& d, const FitOptions& opts, FitResult& res)
        : d_(d), opts_(opts), res_(res) {}

    struct Move {
        Theta theta;
        double loglik;
        bool accepted;
        bool small_change;
        int halvings;
    };

    // Score at theta with its own E-step; kept for the convergence test.
    double score_norm(const Theta& theta) {
        return guarded([&] {
            return score(d_, theta, e_step(d_, theta, opts_.clamp_eps)).lpNorm<Eigen::Infinity>();
        });
    }

    Move apply(const Theta& theta, double ll) {
        ++res_.n_iter;
        MStepResult step = guarded([&] {
            const EStepCache cache = e_step(d_, theta, opts_.clamp_eps);
            return m_step(d_, theta, cache, opts_, ll);
        });
        const double dtheta = (step.theta.stacked() - theta.stacked()).lpNorm<Eigen::Infinity>();
        const bool small = std::max(std::abs(step.loglik - ll), dtheta) < opts_.tol;
        return Move{std::move(step.theta), step.loglik, step.accepted, small, step.halvings};
    }

    bool budget_left() const { return res_.n_iter < opts_.max_iter; }

    void record(double ll) {
        if (res_.loglik_trace.size() < static_cast<std::size_t>(opts_.max_iter)) {
            res_.loglik_trace.push_back(ll);
        }
    }

private:
    template <class F>
    auto guarded(F&& f) -> decltype(f()) {
        try {
            return f();
        } catch (const NumericError& e) {
            const int k = res_.n_iter;
            throw NumericError("iteration " + std::to_string(k) + ": " + e.what(),
                               static_cast<std::size_t>(k));
        }
    }

    const Dataset& d_;
    const FitOptions& opts_;
    FitResult& res_;
};

VectorXd standardized_residuals(const Dataset& d, const Theta& t) {
    const LinPreds lp = linear_predictors(d, t);
    return ((d.y - lp.mu).array() * (-0.5 * lp.log_sigma2.array()).exp()).matrix();
}

bool enters_clamp_zone(const VectorXd& before, const VectorXd& after, double clamp_eps) {
    for (Eigen::Index i = 0; i < before.size(); ++i) {
        if (std::abs(before(i)) >= clamp_eps && !(std::abs(after(i)) >= clamp_eps)) {
            return true;
        }
    }
    return false;
}

}  // namespace

FitResult fit(const Dataset& d, const std::optional<Theta>& init, const FitOptions& opts) {
    opts.validate();
    require_valid(d);
    Theta theta = init ? *init : default_init(d);
    theta.check_against(d);
    if (!theta.stacked().allFinite()) {
        throw StructuralError("fit: initial value is not finite");
    }

    FitResult res;
    EmDriver em(d, opts, res);
    double ll = observed_loglik(d, theta);
    res.loglik_start = ll;
    res.loglik_trace.reserve(static_cast<std::size_t>(opts.max_iter));

    bool small_change = false;
    bool stalled = false;
    double step_cap = 1.0;  // bound on |extrapolation length|, grows by 4 when hit

    auto converged_at = [&](const Theta& t) {
        if (!small_change) return false;
        res.score_norm = em.score_norm(t);
        return res.score_norm < opts.grad_tol;
    };

    while (em.budget_left()) {
        if (converged_at(theta)) {
            res.converged = true;
            break;
        }
        EmDriver::Move m1 = em.apply(theta, ll);
        em.record(m1.loglik);
        small_change = m1.small_change;
        if (!m1.accepted) {
            stalled = true;
            break;
        }
        if (!opts.accelerate || !em.budget_left()) {
            theta = std::move(m1.theta);
            ll = m1.loglik;
            continue;
        }
        if (converged_at(m1.theta)) {
            theta = std::move(m1.theta);
            ll = m1.loglik;
            res.converged = true;
            break;
        }

        EmDriver::Move m2 = em.apply(m1.theta, m1.loglik);
        em.record(m2.loglik);
        small_change = m2.small_change;
        if (!m2.accepted) {
            theta = std::move(m1.theta);
            ll = m1.loglik;
            stalled = true;
            break;
        }

        const VectorXd t0 = theta.stacked();
        const VectorXd r = m1.theta.stacked() - t0;
        const VectorXd v = m2.theta.stacked() - m1.theta.stacked() - r;
        const double vn = v.norm();
        const double raw = vn > 0.0 ? -r.norm() / vn : -1.0;
        const bool hit_cap = raw <= -step_cap;
        const double alpha = std::min(std::max(raw, -step_cap), -1.0);

        theta = std::move(m2.theta);
        ll = m2.loglik;
        if (alpha == -1.0 || !em.budget_left()) {
            // the extrapolation would land on the plain EM point
            if (hit_cap) step_cap *= 4.0;
            continue;
        }
        // Backtrack the extrapolation until no residual outside the clamp
        // zone at the plain EM point lands inside it. A residual placed nearer
        // zero than the clamped fixed point can only move back out by lowering
        // the observed log-likelihood, which the M-step safeguard forbids.
        const VectorXd plain_std = standardized_residuals(d, theta);
        std::optional<Theta> jump;
        for (double a = alpha; a < -1.0 - 1e-3; a = 0.5 * (a - 1.0)) {
            Theta cand = Theta::unstack(t0 - 2.0 * a * r + a * a * v, d.p(), d.q(), d.r());
            if (!enters_clamp_zone(plain_std, standardized_residuals(d, cand), opts.clamp_eps)) {
                jump = std::move(cand);
                break;
            }
        }
        if (!jump) {
            continue;
        }
        double jump_ll = -std::numeric_limits<double>::infinity();
        try {
            jump_ll = observed_loglik(d, *jump);
        } catch (const NumericError&) {
        }
        if (!std::isfinite(jump_ll)) {
            step_cap = std::max(1.0, step_cap / 4.0);
            continue;
        }
        EmDriver::Move m3 = em.apply(*jump, jump_ll);
        if (!m3.accepted || m3.loglik < ll || !em.budget_left()) {
            step_cap = std::max(1.0, step_cap / 4.0);
            continue;
        }
        // Look one plain step ahead. A jump that leaves the next M-step
        // needing step halving has usually pushed a residual past its clamped
        // fixed point, from which no ascent path leads back; drop it.
        EmDriver::Move m4 = em.apply(m3.theta, m3.loglik);
        if (!m4.accepted || m4.halvings > 0) {
            step_cap = std::max(1.0, step_cap / 4.0);
            continue;
        }
        em.record(m3.loglik);
        em.record(m4.loglik);
        theta = std::move(m4.theta);
        ll = m4.loglik;
        small_change = m4.small_change;
        if (hit_cap) step_cap *= 4.0;
    }

    if (!res.converged && !stalled) {
        // the budget ran out; the last step may still have met the rule
        res.converged = converged_at(theta);
    }
    if (stalled) {
        res.warnings.push_back("iteration " + std::to_string(res.n_iter) +
                               ": no step length increased the log-likelihood; stopped");
    } else if (!res.converged) {
        res.warnings.push_back("reached max_iter = " + std::to_string(opts.max_iter) +
                               " without convergence");
    }
    res.score_norm = em.score_norm(theta);
    res.theta_hat = std::move(theta);
    res.loglik = ll;
    return res;
}

}  // namespace slnlss
