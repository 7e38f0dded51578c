#include <iostream>

#include <CLI11.hpp>

#include "slnlss/cli/commands.hpp"

using namespace slnlss::cli;

int main(int argc, char** argv) {
    CLI::App app{"Joint location, scale and skewness regression under the skew Laplace normal law"};
    app.require_subcommand(1);

    FitRequest fit_req;
    auto* fit = app.add_subcommand("fit", "fit the model to a CSV file and report estimates");
    fit->add_option("--data", fit_req.data_path, "CSV file with a header row")->required();
    fit->add_option("--response", fit_req.response, "response column")->required();
    fit->add_option("--loc", fit_req.loc_cols, "location covariates")->delimiter(',');
    fit->add_option("--scale", fit_req.scale_cols, "scale covariates")->delimiter(',');
    fit->add_option("--skew", fit_req.skew_cols, "skewness covariates")->delimiter(',');
    fit->add_option("--intercept-loc", fit_req.intercept_loc, "constant column in the location model")
        ->default_val(true);
    fit->add_option("--intercept-scale", fit_req.intercept_scale, "constant column in the scale model")
        ->default_val(true);
    fit->add_option("--intercept-skew", fit_req.intercept_skew, "constant column in the skewness model")
        ->default_val(true);
    fit->add_option("--tol", fit_req.tol, "convergence threshold")->capture_default_str();
    fit->add_option("--max-iter", fit_req.max_iter, "iteration limit")->capture_default_str();
    fit->add_option("--bootstrap", fit_req.bootstrap_B, "bootstrap resamples for standard errors (0 = none)")
        ->capture_default_str();
    fit->add_option("--seed", fit_req.seed, "bootstrap seed")->capture_default_str();
    fit->add_option("--threads", fit_req.threads, "worker threads (0 = all cores)")->capture_default_str();
    fit->add_option("--out", fit_req.output_path, "JSON report path");

    SimulateRequest sim_req;
    auto* sim = app.add_subcommand("simulate", "Monte Carlo study of the estimators");
    auto* sim_case = sim->add_option("--case", sim_req.case_label, "built-in design: I, II or III");
    auto* sim_coef = sim->add_option("--coefficients", sim_req.coeff_path, "coefficient file");
    sim_case->excludes(sim_coef);
    sim->add_option("--n", sim_req.n_list, "sample sizes")->delimiter(',')->capture_default_str();
    sim->add_option("--reps", sim_req.reps, "replications per sample size")->capture_default_str();
    sim->add_flag("--full", sim_req.full, "n = 50,100,150,200 with 1000 replications");
    sim->add_option("--seed", sim_req.seed, "master seed")->capture_default_str();
    sim->add_option("--threads", sim_req.threads, "worker threads (0 = all cores)")->capture_default_str();
    sim->add_option("--tol", sim_req.tol, "convergence threshold")->capture_default_str();
    sim->add_option("--max-iter", sim_req.max_iter, "iteration limit")->capture_default_str();
    sim->add_option("--out", sim_req.output_path, "TSV output path");

    SampleRequest smp_req;
    auto* smp = app.add_subcommand("sample", "draw a synthetic data set as CSV");
    smp->add_option("--case", smp_req.case_label, "built-in design: I, II or III");
    smp->add_option("--coefficients", smp_req.coeff_path, "coefficient file");
    smp->add_option("--beta", smp_req.beta, "location coefficients")->delimiter(',');
    smp->add_option("--gamma", smp_req.gamma, "scale coefficients")->delimiter(',');
    smp->add_option("--alpha", smp_req.alpha, "skewness coefficients")->delimiter(',');
    smp->add_option("--intercept", smp_req.intercept, "first coefficient of each block is a constant")
        ->default_val(true);
    smp->add_option("--n", smp_req.n, "rows")->capture_default_str();
    smp->add_option("--seed", smp_req.seed, "seed")->capture_default_str();
    smp->add_option("--out", smp_req.output_path, "CSV output path (default: standard output)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    if (fit->parsed()) {
        return guarded_run([&] { return cmd_fit(fit_req, std::cout); }, std::cerr);
    }
    if (sim->parsed()) {
        if (sim_req.case_label.empty() && sim_req.coeff_path.empty()) {
            std::cerr << "error: simulate needs --case or --coefficients\n";
            return kExitUsage;
        }
        return guarded_run([&] { return cmd_simulate(sim_req, std::cout); }, std::cerr);
    }
    return guarded_run([&] { return cmd_sample(smp_req, std::cout); }, std::cerr);
}
