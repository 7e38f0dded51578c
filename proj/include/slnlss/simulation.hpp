#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "slnlss/em.hpp"
#include "slnlss/model.hpp"

namespace slnlss {

/// True coefficients of a Monte Carlo design. When `intercept` is set the
/// first coefficient of each block multiplies a constant column of ones and
/// the remaining covariates are U(-1, 1).
struct SimCase {
    VectorXd beta0;
    VectorXd gamma0;
    VectorXd alpha0;
    std::string label;
    bool intercept = true;

    Theta truth() const { return Theta{beta0, gamma0, alpha0}; }
    Eigen::Index max_dim() const;
};

SimCase case_one();
SimCase case_two();
SimCase case_three();
/// "I", "II" or "III"; throws StructuralError otherwise.
SimCase builtin_case(const std::string& label);

struct SimConfig {
    SimCase sim_case;
    std::vector<int> n_list{50, 100, 150, 200};
    int reps = 1000;
    std::uint64_t seed = 1;
    unsigned threads = 0;  ///< 0 = hardware concurrency
    FitOptions fit{};

    void validate() const;
};

struct SimRow {
    std::string block;      ///< Location | Scale | Skewness
    std::string parameter;  ///< beta0, gamma1, ...
    int n = 0;
    double mean = 0.0;
    double mse = 0.0;
};

struct SimLeg {
    int n = 0;
    int used = 0;    ///< converged replications entering mean and MSE
    int failed = 0;  ///< non-converged or errored, excluded
};

struct SimTable {
    std::string label;
    std::vector<SimRow> rows;  ///< grouped by parameter, then n
    std::vector<SimLeg> legs;
    std::vector<std::string> warnings;

    std::string to_tsv() const;
    /// Aligned text: one block per model part, Mean and MSE columns per n.
    std::string to_text() const;
};

Dataset gen_dataset(const SimCase& c, int n, std::uint64_t stream_seed);

/// Per coordinate (1/N) sum_j (estimate_j - truth)^2.
VectorXd mse(const std::vector<Theta>& estimates, const Theta& truth);

SimTable run_mc(const SimConfig& config);

}  // namespace slnlss
