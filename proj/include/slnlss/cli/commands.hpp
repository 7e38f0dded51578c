#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "slnlss/cli/csv.hpp"
#include "slnlss/em.hpp"
#include "slnlss/model.hpp"
#include "slnlss/simulation.hpp"

namespace slnlss::cli {

/// Process exit statuses shared by every subcommand.
enum ExitCode : int {
    kExitOk = 0,
    kExitUsage = 2,         ///< bad flags, missing files or columns, rank deficiency
    kExitNumeric = 3,       ///< a computation failed
    kExitNotConverged = 4,  ///< ran to completion without meeting the convergence rule
};

struct FitRequest {
    std::string data_path;
    std::string response;
    std::vector<std::string> loc_cols;
    std::vector<std::string> scale_cols;
    std::vector<std::string> skew_cols;
    bool intercept_loc = true;
    bool intercept_scale = true;
    bool intercept_skew = true;
    double tol = 1e-6;
    int max_iter = 1000;
    int bootstrap_B = 0;
    std::uint64_t seed = 1;
    unsigned threads = 0;
    std::string output_path;  ///< JSON report; empty = none

    void validate() const;
};

/// Design matrices assembled from a table, with the column label of every
/// coefficient ("(Intercept)" for the constant).
struct Design {
    Dataset data;
    std::vector<std::string> loc_names;
    std::vector<std::string> scale_names;
    std::vector<std::string> skew_names;
};

Design build_design(const CsvTable& table, const FitRequest& req);

/// Fit, optional bootstrap, JSON report and aligned text summary.
struct FitReport {
    Design design;
    FitResult fit;
    std::optional<VectorXd> bse;
    nlohmann::json json;
    std::string text;
};

FitReport run_fit(const FitRequest& req);

/// Writes the report to req.output_path (when set) and the summary to `out`.
/// Returns kExitNotConverged when the fit did not converge.
int cmd_fit(const FitRequest& req, std::ostream& out);

struct SimulateRequest {
    std::string case_label;  ///< I, II or III; ignored when coeff_path is set
    std::string coeff_path;
    std::vector<int> n_list{50, 200};
    int reps = 100;
    bool full = false;  ///< n in {50, 100, 150, 200} with 1000 replications
    std::uint64_t seed = 1;
    unsigned threads = 0;
    double tol = 1e-6;
    int max_iter = 1000;
    std::string output_path;  ///< TSV; empty = none
};

int cmd_simulate(const SimulateRequest& req, std::ostream& out);

struct SampleRequest {
    std::string case_label;
    std::string coeff_path;
    std::vector<double> beta, gamma, alpha;
    bool intercept = true;
    int n = 100;
    std::uint64_t seed = 1;
    std::string output_path;  ///< CSV; empty = `out`
};

/// Resolves the coefficient source of a sample request.
SimCase sample_case(const SampleRequest& req);

/// Header y, x1.., z1.., w1..; the intercept columns are left implicit.
int cmd_sample(const SampleRequest& req, std::ostream& out);

/// Coefficient file: lines "beta: 0 -1 -1", "gamma: ...", "alpha: ..."
/// (commas or blanks between values, '#' starts a comment).
SimCase read_coefficients(const std::string& path, bool intercept = true);

/// Runs a command, mapping exceptions to exit statuses and messages on `err`.
int guarded_run(const std::function<int()>& command, std::ostream& err);

}  // namespace slnlss::cli
