#include "slnlss/simulation.hpp"

#include <cmath>
#include <cstdio>
#include <optional>
#include <random>
#include <sstream>

#include "slnlss/errors.hpp"
#include "slnlss/parallel.hpp"
#include "slnlss/sln.hpp"

namespace slnlss {

namespace {

VectorXd vec(std::initializer_list<double> xs) {
    VectorXd v(static_cast<Eigen::Index>(xs.size()));
    Eigen::Index i = 0;
    for (double x : xs) v(i++) = x;
    return v;
}

std::string fmt6(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", x);
    return buf;
}

struct BlockSpec {
    const char* block;
    const char* symbol;
};

constexpr BlockSpec kBlocks[3] = {{"Location", "beta"}, {"Scale", "gamma"}, {"Skewness", "alpha"}};

}  // namespace

Eigen::Index SimCase::max_dim() const {
    return std::max({beta0.size(), gamma0.size(), alpha0.size()});
}

SimCase case_one() {
    return SimCase{vec({0, -1, -1}), vec({0, -1, -1}), vec({0, -1, -1}), "I", true};
}

SimCase case_two() { return SimCase{vec({0, 1, 1}), vec({0, 1, 1}), vec({0, 1, 1}), "II", true}; }

SimCase case_three() {
    return SimCase{vec({1, 1, 0, 0, 1}), vec({0.7, 0.7, 0, 0, 0.7}), vec({0.5, 0.5, 0, 0, 0.5}),
                   "III", true};
}

SimCase builtin_case(const std::string& label) {
    if (label == "I") return case_one();
    if (label == "II") return case_two();
    if (label == "III") return case_three();
    throw StructuralError("unknown simulation case '" + label + "' (expected I, II or III)");
}

void SimConfig::validate() const {
    if (reps < 1) throw StructuralError("SimConfig: reps must be at least 1");
    if (n_list.empty()) throw StructuralError("SimConfig: n_list is empty");
    if (sim_case.beta0.size() == 0 || sim_case.gamma0.size() == 0 || sim_case.alpha0.size() == 0) {
        throw StructuralError("SimConfig: coefficient vectors must be nonempty");
    }
    for (int n : n_list) {
        if (n < sim_case.max_dim()) {
            throw StructuralError("SimConfig: n = " + std::to_string(n) +
                                  " is smaller than the number of coefficients per block");
        }
    }
    fit.validate();
}

Dataset gen_dataset(const SimCase& c, int n, std::uint64_t stream_seed) {
    const Eigen::Index p = c.beta0.size(), q = c.gamma0.size(), r = c.alpha0.size();
    Dataset d{VectorXd(n), MatrixXd(n, p), MatrixXd(n, q), MatrixXd(n, r)};
    Rng rng(stream_seed);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    const Eigen::Index first = c.intercept ? 1 : 0;
    auto fill_row = [&](MatrixXd& M, Eigen::Index i) {
        if (c.intercept && M.cols() > 0) M(i, 0) = 1.0;
        for (Eigen::Index j = first; j < M.cols(); ++j) M(i, j) = unif(rng);
    };
    for (Eigen::Index i = 0; i < n; ++i) {
        fill_row(d.X, i);
        fill_row(d.Z, i);
        fill_row(d.W, i);
        const SlnParams law{d.X.row(i).dot(c.beta0), std::exp(0.5 * d.Z.row(i).dot(c.gamma0)),
                            d.W.row(i).dot(c.alpha0)};
        d.y(i) = draw(law, rng);
    }
    return d;
}

VectorXd mse(const std::vector<Theta>& estimates, const Theta& truth) {
    if (estimates.empty()) {
        throw StructuralError("mse: no estimates");
    }
    const VectorXd target = truth.stacked();
    VectorXd acc = VectorXd::Zero(target.size());
    for (const Theta& e : estimates) {
        const VectorXd diff = e.stacked() - target;
        if (diff.size() != target.size()) {
            throw StructuralError("mse: estimate dimension differs from truth");
        }
        acc += diff.cwiseAbs2();
    }
    return acc / static_cast<double>(estimates.size());
}

SimTable run_mc(const SimConfig& config) {
    config.validate();
    const SimCase& sc = config.sim_case;
    const Theta truth = sc.truth();
    const Eigen::Index k = truth.size();
    const Eigen::Index sizes[3] = {sc.beta0.size(), sc.gamma0.size(), sc.alpha0.size()};

    SimTable table;
    table.label = sc.label;
    std::vector<VectorXd> means, mses;

    for (int n : config.n_list) {
        const auto reps = static_cast<std::size_t>(config.reps);
        std::vector<std::optional<Theta>> slots(reps);
        parallel_for(reps, config.threads, [&](std::size_t j) {
            const Dataset d = gen_dataset(sc, n, derive_seed(config.seed, static_cast<std::uint64_t>(n), j));
            try {
                FitResult fr = fit(d, std::nullopt, config.fit);
                if (fr.converged) slots[j] = std::move(fr.theta_hat);
            } catch (const std::exception&) {
                // counted as a failed replication below
            }
        });

        std::vector<Theta> used;
        for (auto& s : slots) {
            if (s) used.push_back(std::move(*s));
        }
        SimLeg leg{n, static_cast<int>(used.size()), config.reps - static_cast<int>(used.size())};
        table.legs.push_back(leg);
        if (leg.failed * 5 > config.reps) {
            table.warnings.push_back("n = " + std::to_string(n) + ": " + std::to_string(leg.failed) +
                                     " of " + std::to_string(config.reps) +
                                     " replications did not converge");
        }
        if (used.empty()) {
            means.push_back(VectorXd::Constant(k, std::nan("")));
            mses.push_back(VectorXd::Constant(k, std::nan("")));
            continue;
        }
        VectorXd m = VectorXd::Zero(k);
        for (const Theta& t : used) m += t.stacked();
        means.push_back(m / static_cast<double>(used.size()));
        mses.push_back(mse(used, truth));
    }

    Eigen::Index offset = 0;
    for (int b = 0; b < 3; ++b) {
        for (Eigen::Index j = 0; j < sizes[b]; ++j) {
            const std::string name = std::string(kBlocks[b].symbol) + std::to_string(j);
            for (std::size_t leg = 0; leg < config.n_list.size(); ++leg) {
                table.rows.push_back(SimRow{kBlocks[b].block, name, config.n_list[leg],
                                            means[leg](offset + j), mses[leg](offset + j)});
            }
        }
        offset += sizes[b];
    }
    return table;
}

std::string SimTable::to_tsv() const {
    std::ostringstream os;
    os << "# case\t" << label << "\n";
    for (const SimLeg& leg : legs) {
        os << "# n=" << leg.n << "\tused=" << leg.used << "\tfailed=" << leg.failed << "\n";
    }
    for (const std::string& w : warnings) {
        os << "# warning\t" << w << "\n";
    }
    os << "block\tparameter\tn\tmean\tmse\n";
    for (const SimRow& r : rows) {
        os << r.block << '\t' << r.parameter << '\t' << r.n << '\t' << fmt6(r.mean) << '\t'
           << fmt6(r.mse) << '\n';
    }
    return os.str();
}

std::string SimTable::to_text() const {
    std::ostringstream os;
    char buf[64];
    os << "Case " << label << ": mean of the estimators and MSE\n";
    std::snprintf(buf, sizeof buf, "%-16s%-10s", "Model", "");
    os << buf;
    for (const SimLeg& leg : legs) {
        std::snprintf(buf, sizeof buf, "%-24s", ("n = " + std::to_string(leg.n)).c_str());
        os << buf;
    }
    os << "\n";
    std::snprintf(buf, sizeof buf, "%-26s", "");
    os << buf;
    for (std::size_t i = 0; i < legs.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%-12s%-12s", "Mean", "MSE");
        os << buf;
    }
    os << "\n";
    std::string last_block;
    for (std::size_t i = 0; i < rows.size(); i += legs.size()) {
        const std::string block = rows[i].block != last_block ? rows[i].block + " Model" : "";
        last_block = rows[i].block;
        std::snprintf(buf, sizeof buf, "%-16s%-10s", block.c_str(), rows[i].parameter.c_str());
        os << buf;
        for (std::size_t j = 0; j < legs.size(); ++j) {
            const SimRow& r = rows[i + j];
            std::snprintf(buf, sizeof buf, "%-12s%-12s", fmt6(r.mean).c_str(), fmt6(r.mse).c_str());
            os << buf;
        }
        os << "\n";
    }
    for (const SimLeg& leg : legs) {
        os << "n = " << leg.n << ": " << leg.used << " converged, " << leg.failed << " excluded\n";
    }
    for (const std::string& w : warnings) {
        os << "warning: " << w << "\n";
    }
    return os.str();
}

}  // namespace slnlss
