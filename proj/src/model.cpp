#include "slnlss/model.hpp"

#include <cmath>
#include <sstream>

#include "slnlss/errors.hpp"
#include "slnlss/normal.hpp"

namespace slnlss {

Dataset Dataset::subset(const std::vector<Eigen::Index>& idx) const {
    const auto m = static_cast<Eigen::Index>(idx.size());
    Dataset out{VectorXd(m), MatrixXd(m, p()), MatrixXd(m, q()), MatrixXd(m, r())};
    for (Eigen::Index k = 0; k < m; ++k) {
        const Eigen::Index i = idx[static_cast<std::size_t>(k)];
        out.y(k) = y(i);
        out.X.row(k) = X.row(i);
        out.Z.row(k) = Z.row(i);
        out.W.row(k) = W.row(i);
    }
    return out;
}

VectorXd Theta::stacked() const {
    VectorXd v(size());
    v << beta, gamma, alpha;
    return v;
}

Theta Theta::unstack(const VectorXd& v, Eigen::Index p, Eigen::Index q, Eigen::Index r) {
    if (v.size() != p + q + r) {
        throw StructuralError("Theta: stacked vector has wrong length");
    }
    return Theta{v.segment(0, p), v.segment(p, q), v.segment(p + q, r)};
}

Theta Theta::zeros(const Dataset& d) {
    return Theta{VectorXd::Zero(d.p()), VectorXd::Zero(d.q()), VectorXd::Zero(d.r())};
}

void Theta::check_against(const Dataset& d) const {
    if (beta.size() != d.p() || gamma.size() != d.q() || alpha.size() != d.r()) {
        std::ostringstream os;
        os << "Theta dimensions (" << beta.size() << ", " << gamma.size() << ", " << alpha.size()
           << ") do not match design (" << d.p() << ", " << d.q() << ", " << d.r() << ")";
        throw StructuralError(os.str());
    }
}

namespace {

void check_rows(const Dataset& d) {
    const auto n = d.n();
    if (d.X.rows() != n || d.Z.rows() != n || d.W.rows() != n) {
        throw StructuralError("Dataset: design matrices and y have different row counts");
    }
}

}  // namespace

LinPreds linear_predictors(const Dataset& d, const Theta& t) {
    check_rows(d);
    t.check_against(d);
    return LinPreds{d.X * t.beta, d.Z * t.gamma, d.W * t.alpha};
}

double observed_loglik(const Dataset& d, const Theta& t) {
    const LinPreds lp = linear_predictors(d, t);
    double total = 0.0;
    for (Eigen::Index i = 0; i < d.n(); ++i) {
        const double inv_sigma = std::exp(-0.5 * lp.log_sigma2(i));
        const double resid = d.y(i) - lp.mu(i);
        const double kappa = lp.lambda(i) * resid * inv_sigma;
        const double row = -0.5 * lp.log_sigma2(i) - std::abs(resid) * inv_sigma + log_norm_cdf(kappa);
        if (!std::isfinite(row)) {
            throw NumericError("log-likelihood is not finite at row " + std::to_string(i),
                               static_cast<std::size_t>(i));
        }
        total += row;
    }
    return total;
}

namespace {

void check_block(const char* name, const MatrixXd& M, Eigen::Index n,
                 std::vector<std::string>& out) {
    if (M.rows() != n) {
        std::ostringstream os;
        os << name << " has " << M.rows() << " rows, y has " << n;
        out.push_back(os.str());
        return;
    }
    if (M.cols() > n) {
        std::ostringstream os;
        os << name << " has more columns (" << M.cols() << ") than rows (" << n << ")";
        out.push_back(os.str());
    }
    bool finite = true;
    for (Eigen::Index i = 0; i < M.rows() && finite; ++i) {
        for (Eigen::Index j = 0; j < M.cols(); ++j) {
            if (!std::isfinite(M(i, j))) {
                std::ostringstream os;
                os << name << " has a non-finite entry at row " << i << ", column " << j;
                out.push_back(os.str());
                finite = false;
                break;
            }
        }
    }
    if (!finite || M.cols() == 0 || M.rows() == 0) {
        return;
    }
    const Eigen::JacobiSVD<MatrixXd> svd(M);
    const VectorXd& sv = svd.singularValues();
    const double cutoff = 1e-10 * sv(0);
    Eigen::Index rank = 0;
    for (Eigen::Index k = 0; k < sv.size(); ++k) {
        rank += sv(k) > cutoff ? 1 : 0;
    }
    if (rank < M.cols()) {
        out.push_back(std::string(name) + " rank-deficient");
    }
}

}  // namespace

std::vector<std::string> validate(const Dataset& d) {
    std::vector<std::string> out;
    const Eigen::Index n = d.n();
    if (n == 0) {
        out.emplace_back("dataset has no rows");
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        if (!std::isfinite(d.y(i))) {
            out.push_back("y has a non-finite value at row " + std::to_string(i));
        }
    }
    check_block("X", d.X, n, out);
    check_block("Z", d.Z, n, out);
    check_block("W", d.W, n, out);
    return out;
}

void require_valid(const Dataset& d) {
    const auto problems = validate(d);
    if (problems.empty()) {
        return;
    }
    std::string msg = "invalid dataset:";
    for (const auto& p : problems) {
        msg += " " + p + ";";
    }
    throw StructuralError(msg);
}

}  // namespace slnlss
