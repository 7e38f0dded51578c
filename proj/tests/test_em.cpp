#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "slnlss/em.hpp"
#include "slnlss/errors.hpp"
#include "slnlss/normal.hpp"
#include "slnlss/simulation.hpp"

using namespace slnlss;

namespace {

Dataset one_row(double y) {
    return Dataset{VectorXd::Constant(1, y), MatrixXd::Ones(1, 1), MatrixXd::Ones(1, 1), MatrixXd::Ones(1, 1)};
}

VectorXd fd_gradient(const std::function<double(const VectorXd&)>& f, const VectorXd& x, double h) {
    VectorXd g(x.size());
    for (Eigen::Index k = 0; k < x.size(); ++k) {
        VectorXd a = x, b = x;
        a(k) += h;
        b(k) -= h;
        g(k) = (f(a) - f(b)) / (2 * h);
    }
    return g;
}

double rel_err(const VectorXd& got, const VectorXd& ref) {
    return (got - ref).lpNorm<Eigen::Infinity>() / std::max(ref.lpNorm<Eigen::Infinity>(), 1e-300);
}

}  // namespace

TEST_CASE("e_step reference rows") {
    const EStepCache a = e_step(one_row(1.0), Theta::zeros(one_row(1.0)));
    CHECK(a.kappa_hat(0) == 0.0);
    CHECK(a.v_hat(0) == doctest::Approx(1.0));
    CHECK(a.u1_hat(0) == doctest::Approx(kSqrt2OverPi));
    CHECK(a.u2_hat(0) == doctest::Approx(1.0));

    // residual equal to the scale gives unit weight whatever the skewness
    Dataset d = one_row(std::exp(0.35) + 0.2);
    Theta t{VectorXd::Constant(1, 0.2), VectorXd::Constant(1, 0.7), VectorXd::Constant(1, -1.3)};
    CHECK(e_step(d, t).v_hat(0) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("e_step agrees with the single-observation expectations") {
    const Theta truth = fixture::random_theta(3, 2, 2, 21);
    const Dataset d = fixture::random_dataset(40, 3, 2, 2, truth, 22);
    const Theta t = fixture::random_theta(3, 2, 2, 23);
    const EStepCache c = e_step(d, t);
    const LinPreds lp = linear_predictors(d, t);
    for (Eigen::Index i = 0; i < d.n(); ++i) {
        const SlnParams p{lp.mu(i), lp.sigma()(i), lp.lambda(i)};
        CHECK(c.v_hat(i) == doctest::Approx(cond_ev2(d.y(i), p)).epsilon(1e-14));
        CHECK(c.u1_hat(i) == doctest::Approx(cond_eu1(d.y(i), p)).epsilon(1e-14));
        CHECK(c.u2_hat(i) == doctest::Approx(cond_eu2(d.y(i), p)).epsilon(1e-14));
        CHECK(c.v_hat(i) > 0.0);
        CHECK(c.u1_hat(i) > 0.0);
        CHECK(c.u2_hat(i) > 0.0);
        CHECK(c.u2_hat(i) >= 1.0 + std::min(0.0, c.kappa_hat(i) * c.u1_hat(i)) - 1e-12);
    }
}

TEST_CASE("q_value: hand value and term-by-term oracle") {
    const Dataset d = one_row(1.0);
    const Theta zero = Theta::zeros(d);
    CHECK(q_value(d, zero, e_step(d, zero)) == doctest::Approx(-std::log(oracle::kPi) - 1.0).epsilon(1e-15));

    const Dataset r = fixture::random_dataset(35, 2, 3, 2, fixture::random_theta(2, 3, 2, 24), 25);
    const EStepCache c = e_step(r, fixture::random_theta(2, 3, 2, 26));
    for (std::uint64_t k = 0; k < 5; ++k) {
        const Theta t = fixture::random_theta(2, 3, 2, 30 + k);
        CHECK(q_value(r, t, c) == doctest::Approx(oracle::q_function(r, t, c)).epsilon(1e-13));
    }
}

TEST_CASE("score and Hessian agree with finite differences") {
    double worst_g = 0.0, worst_h = 0.0;
    for (std::uint64_t k = 0; k < 20; ++k) {
        const Theta truth = fixture::random_theta(2, 2, 2, 100 + k);
        const Dataset d = fixture::random_dataset(30, 2, 2, 2, truth, 200 + k);
        // the cache comes from one draw, derivatives are taken at another
        const EStepCache c = e_step(d, fixture::random_theta(2, 2, 2, 300 + k));
        const Theta t = fixture::random_theta(2, 2, 2, 400 + k);
        auto q = [&](const VectorXd& v) { return q_value(d, Theta::unstack(v, 2, 2, 2), c); };
        const VectorXd g = score(d, t, c);
        worst_g = std::max(worst_g, rel_err(g, fd_gradient(q, t.stacked(), 1e-6)));

        const MatrixXd h = hessian(d, t, c);
        CHECK((h - h.transpose()).cwiseAbs().maxCoeff() == 0.0);
        MatrixXd fd(6, 6);
        for (Eigen::Index j = 0; j < 6; ++j) {
            VectorXd a = t.stacked(), b = t.stacked();
            a(j) += 1e-6;
            b(j) -= 1e-6;
            fd.col(j) = (score(d, Theta::unstack(a, 2, 2, 2), c) - score(d, Theta::unstack(b, 2, 2, 2), c)) / 2e-6;
        }
        worst_h = std::max(worst_h, (h - fd).cwiseAbs().maxCoeff() / fd.cwiseAbs().maxCoeff());
    }
    CHECK(worst_g < 1e-5);
    CHECK(worst_h < 1e-4);
}

TEST_CASE("skewness block of the Hessian") {
    const Dataset d = fixture::random_dataset(25, 2, 2, 3, fixture::random_theta(2, 2, 3, 40), 41);
    const Theta t = fixture::random_theta(2, 2, 3, 42);
    const MatrixXd h = hessian(d, t, e_step(d, t));
    const LinPreds lp = linear_predictors(d, t);
    MatrixXd ref = MatrixXd::Zero(3, 3);
    for (Eigen::Index i = 0; i < d.n(); ++i) {
        const double res = d.y(i) - lp.mu(i);
        ref -= res * res * std::exp(-lp.log_sigma2(i)) * d.W.row(i).transpose() * d.W.row(i);
    }
    const MatrixXd block = h.bottomRightCorner(3, 3);
    CHECK((block - ref).cwiseAbs().maxCoeff() < 1e-10 * ref.cwiseAbs().maxCoeff());
    CHECK(Eigen::SelfAdjointEigenSolver<MatrixXd>(block).eigenvalues().maxCoeff() <= 1e-12);
}

TEST_CASE("skewness score vanishes on data mirrored about the location") {
    const int half = 20;
    Dataset d{VectorXd(2 * half), MatrixXd::Ones(2 * half, 1), MatrixXd::Ones(2 * half, 1), MatrixXd::Ones(2 * half, 1)};
    const auto s = sample({0.0, 1.0, 0.0}, half, 43);
    for (int i = 0; i < half; ++i) {
        d.y(i) = 1.5 + s[i];
        d.y(half + i) = 1.5 - s[i];
    }
    Theta t{VectorXd::Constant(1, 1.5), VectorXd::Constant(1, 0.3), VectorXd::Zero(1)};
    CHECK(std::abs(score(d, t, e_step(d, t))(2)) < 1e-12);
}

TEST_CASE("solve_sym") {
    const SymSolve a = solve_sym(MatrixXd::Identity(3, 3), VectorXd::Unit(3, 0), 1e-8);
    CHECK(a.ridge == 0.0);
    CHECK((a.x - VectorXd::Unit(3, 0)).norm() == 0.0);

    MatrixXd near(2, 2);
    near << 1.0, 0.0, 0.0, -1e-14;
    const SymSolve b = solve_sym(near, VectorXd::Unit(2, 0), 1e-8);
    CHECK(b.ridge > 0.0);
    CHECK(b.x(0) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(std::abs(b.x(1)) < 1e-12);

    Rng rng(44);
    std::normal_distribution<double> g;
    MatrixXd M(6, 6);
    for (Eigen::Index i = 0; i < 36; ++i) M(i) = g(rng);
    const MatrixXd spd = M * M.transpose() + 0.5 * MatrixXd::Identity(6, 6);
    VectorXd rhs(6);
    for (Eigen::Index i = 0; i < 6; ++i) rhs(i) = g(rng);
    const SymSolve c = solve_sym(spd, rhs, 1e-8);
    const VectorXd ref = spd.fullPivLu().solve(rhs);
    CHECK(c.ridge == 0.0);
    CHECK((c.x - ref).norm() < 1e-10 * ref.norm());

    const SymSolve neg = solve_sym(-MatrixXd::Identity(2, 2), VectorXd::Ones(2), 1e-8);
    CHECK(neg.ridge > 1.0);
    CHECK((neg.x.array() - 1.0 / (neg.ridge - 1.0)).abs().maxCoeff() < 1e-15);
    CHECK_THROWS_AS(solve_sym(MatrixXd::Zero(2, 2), VectorXd::Ones(2), 1e-8), NumericError);
    CHECK_THROWS_AS(solve_sym(MatrixXd::Identity(2, 2), VectorXd::Ones(3), 1e-8), StructuralError);
    MatrixXd bad = MatrixXd::Identity(2, 2);
    bad(0, 1) = NAN;
    CHECK_THROWS_AS(solve_sym(bad, VectorXd::Ones(2), 1e-8), NumericError);
}

TEST_CASE("m_step: Newton on a quadratic objective is exact") {
    // location only: Q is quadratic in beta and its maximizer is a weighted mean
    const auto ys = sample({0.4, 1.0, 0.0}, 30, 45);
    Dataset d{Eigen::Map<const VectorXd>(ys.data(), 30), MatrixXd::Ones(30, 1), MatrixXd(30, 0), MatrixXd(30, 0)};
    const Theta t{VectorXd::Constant(1, 0.1), VectorXd(0), VectorXd(0)};
    const EStepCache c = e_step(d, t);
    const MStepResult m = m_step(d, t, c, FitOptions{});
    const double target = c.v_hat.dot(d.y) / c.v_hat.sum();
    CHECK(m.accepted);
    CHECK(m.halvings == 0);
    CHECK(m.theta.beta(0) == doctest::Approx(target).epsilon(1e-12));
    CHECK(q_value(d, m.theta, c) >= q_value(d, t, c));
    CHECK(m.loglik >= observed_loglik(d, t));
}

TEST_CASE("m_step never lowers the observed log-likelihood") {
    for (std::uint64_t k = 0; k < 10; ++k) {
        const Dataset d = fixture::random_dataset(40, 2, 2, 2, fixture::random_theta(2, 2, 2, 500 + k), 600 + k);
        const Theta t = fixture::random_theta(2, 2, 2, 700 + k, 1.5);
        const MStepResult m = m_step(d, t, e_step(d, t), FitOptions{});
        CHECK(m.loglik >= observed_loglik(d, t) - 1e-12);
        CHECK(m.loglik == doctest::Approx(observed_loglik(d, m.theta)).epsilon(1e-14));
    }
}

TEST_CASE("m_step leaves a stationary point in place") {
    const Dataset d = gen_dataset(case_two(), 200, 46);
    const FitResult f = fit(d);
    REQUIRE(f.converged);
    const MStepResult m = m_step(d, f.theta_hat, e_step(d, f.theta_hat), FitOptions{});
    CHECK((m.theta.stacked() - f.theta_hat.stacked()).lpNorm<Eigen::Infinity>() < 1e-5);
}

TEST_CASE("default_init") {
    Dataset d = gen_dataset(case_one(), 50, 47);
    const Theta t0 = default_init(d);
    CHECK(t0.alpha.isZero(0.0));

    VectorXd b(3);
    b << 0.5, -2.0, 3.0;
    d.y = d.X * b;  // exact fit: every residual is clamped in the scale regression
    const Theta t1 = default_init(d);
    CHECK((t1.beta - b).lpNorm<Eigen::Infinity>() < 1e-10);
    CHECK(t1.gamma.allFinite());
    CHECK(t1.gamma(0) < -15.0);

    Dataset dup = d;
    dup.X.col(2) = dup.X.col(1);
    CHECK_THROWS_AS(default_init(dup), StructuralError);
}

TEST_CASE("FitOptions validation") {
    FitOptions o;
    CHECK_NOTHROW(o.validate());
    o.tol = 0.0;
    CHECK_THROWS_AS(o.validate(), StructuralError);
    o = FitOptions{};
    o.max_iter = 0;
    CHECK_THROWS_AS(o.validate(), StructuralError);
    o = FitOptions{};
    o.ridge0 = -1.0;
    CHECK_THROWS_AS(o.validate(), StructuralError);
}

TEST_CASE("fit: ascent, stationarity and self-consistency on seeded data") {
    for (const auto& label : {"I", "II", "III"}) {
        for (int n : {50, 200}) {
            for (std::uint64_t k = 0; k < 3; ++k) {
                CAPTURE(label);
                CAPTURE(n);
                CAPTURE(k);
                const Dataset d = gen_dataset(builtin_case(label), n, 800 + k);
                const FitOptions opts;
                const FitResult f = fit(d, std::nullopt, opts);
                double prev = f.loglik_start;
                for (double ll : f.loglik_trace) {
                    REQUIRE(ll - prev >= -1e-10);
                    prev = ll;
                }
                CHECK(f.loglik == doctest::Approx(observed_loglik(d, f.theta_hat)).epsilon(1e-14));
                CHECK(f.loglik >= f.loglik_start);
                if (f.converged) {
                    const EStepCache c = e_step(d, f.theta_hat);
                    CHECK(score(d, f.theta_hat, c).lpNorm<Eigen::Infinity>() < 1e-4);
                    const MStepResult m = m_step(d, f.theta_hat, c, opts);
                    CHECK((m.theta.stacked() - f.theta_hat.stacked()).lpNorm<Eigen::Infinity>() < 10 * opts.tol);
                } else {
                    CHECK_FALSE(f.warnings.empty());
                }
            }
        }
    }
}

TEST_CASE("fit: plain EM reaches the same optimum as the accelerated loop") {
    const Dataset d = gen_dataset(case_two(), 150, 48);
    FitOptions plain;
    plain.accelerate = false;
    plain.max_iter = 5000;
    const FitResult a = fit(d);
    const FitResult b = fit(d, std::nullopt, plain);
    REQUIRE(a.converged);
    REQUIRE(b.converged);
    CHECK(a.n_iter < b.n_iter);
    CHECK(std::abs(a.loglik - b.loglik) < 1e-6);
    CHECK((a.theta_hat.stacked() - b.theta_hat.stacked()).lpNorm<Eigen::Infinity>() < 1e-3);
}

TEST_CASE("fit: starting from the truth or from default_init gives the same optimum") {
    const SimCase c = case_two();
    const Dataset d = gen_dataset(c, 500, 49);
    const FitResult a = fit(d);
    const FitResult b = fit(d, c.truth());
    REQUIRE(a.converged);
    REQUIRE(b.converged);
    CHECK(std::abs(a.loglik - b.loglik) < 1e-4);
}

TEST_CASE("fit: Case I estimates sit near the published n = 200 means") {
    // Monte Carlo means and MSEs from the published n = 200 column
    const double mean[] = {-0.0006, -0.9965, -0.9987, -0.0223, -1.0088, -1.0060, -0.0016, -1.0852, -1.0754};
    const double mse[] = {0.0061, 0.0109, 0.0117, 0.0161, 0.0594, 0.0629, 0.0190, 0.0727, 0.0652};
    const FitResult f = fit(gen_dataset(case_one(), 200, 50));
    REQUIRE(f.converged);
    const VectorXd est = f.theta_hat.stacked();
    for (int j = 0; j < 9; ++j) {
        CAPTURE(j);
        CHECK(std::abs(est(j) - mean[j]) < 3.0 * std::sqrt(mse[j]));
    }
}

TEST_CASE("fit: symmetric data give a small skewness intercept") {
    SimCase c;
    c.beta0 = VectorXd(2);
    c.beta0 << 0.5, 1.0;
    c.gamma0 = VectorXd(2);
    c.gamma0 << -0.2, 0.5;
    c.alpha0 = VectorXd::Zero(1);
    const FitResult f = fit(gen_dataset(c, 1000, 51));
    REQUIRE(f.converged);
    CHECK(std::abs(f.theta_hat.alpha(0)) < 0.2);
}

TEST_CASE("fit: row order does not matter") {
    const Dataset d = gen_dataset(case_one(), 120, 52);
    std::vector<Eigen::Index> perm(120);
    std::iota(perm.begin(), perm.end(), 0);
    std::reverse(perm.begin(), perm.end());
    std::rotate(perm.begin(), perm.begin() + 31, perm.end());
    const Theta init = default_init(d);
    const FitResult a = fit(d, init);
    const FitResult b = fit(d.subset(perm), init);
    REQUIRE(a.converged);
    REQUIRE(b.converged);
    CHECK(std::abs(a.loglik - b.loglik) < 1e-9);
    CHECK((a.theta_hat.stacked() - b.theta_hat.stacked()).lpNorm<Eigen::Infinity>() < 1e-5);
}

TEST_CASE("fit: structural problems and iteration budget") {
    Dataset tiny = gen_dataset(case_one(), 2, 53);
    CHECK_THROWS_AS(fit(tiny), StructuralError);

    const Dataset d = gen_dataset(case_one(), 100, 54);
    Theta bad = Theta::zeros(d);
    bad.beta.resize(2);
    CHECK_THROWS_AS(fit(d, bad), StructuralError);
    Theta inf = Theta::zeros(d);
    inf.alpha(1) = INFINITY;
    CHECK_THROWS_AS(fit(d, inf), StructuralError);

    FitOptions one;
    one.max_iter = 1;
    const FitResult f = fit(d, std::nullopt, one);
    CHECK_FALSE(f.converged);
    CHECK(f.n_iter == 1);
    CHECK(f.loglik_trace.size() == 1);
    REQUIRE(f.warnings.size() == 1);
    CHECK(f.warnings[0].find("max_iter") != std::string::npos);
}
