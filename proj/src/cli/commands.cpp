#include "slnlss/cli/commands.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "slnlss/errors.hpp"
#include "slnlss/inference.hpp"

namespace slnlss::cli {

using nlohmann::json;

namespace {

const char* const kIntercept = "(Intercept)";

void write_file(const std::string& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary);
    if (!f) {
        throw StructuralError("cannot write '" + path + "'");
    }
    f << content;
    if (!f) {
        throw StructuralError("write to '" + path + "' failed");
    }
}

// JSON numbers carry six significant digits, like the CSV output.
json rounded(double x) {
    if (!std::isfinite(x)) return nullptr;
    return std::stod(format_number(x));
}

json rounded(const VectorXd& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(rounded(v(i)));
    return a;
}

MatrixXd block_matrix(const CsvTable& t, const std::vector<std::string>& cols, bool intercept,
                      std::vector<std::string>& names) {
    const Eigen::Index n = t.values.rows();
    const Eigen::Index k = static_cast<Eigen::Index>(cols.size()) + (intercept ? 1 : 0);
    MatrixXd M(n, k);
    Eigen::Index j = 0;
    if (intercept) {
        M.col(j++).setOnes();
        names.emplace_back(kIntercept);
    }
    for (const auto& c : cols) {
        M.col(j++) = t.values.col(t.column(c));
        names.push_back(c);
    }
    return M;
}

std::string fmt_fixed(double x, int width, int prec = 4) {
    std::ostringstream s;
    s.imbue(std::locale::classic());
    s << std::setw(width);
    if (std::isfinite(x)) {
        s << std::fixed << std::setprecision(prec) << x;
    } else {
        s << "-";
    }
    return s.str();
}

std::string summary_text(const FitReport& r, const CriteriaReport& crit) {
    const auto& ds = r.design;
    const FitResult& f = r.fit;
    std::size_t wname = 10;
    for (const auto* names : {&ds.loc_names, &ds.scale_names, &ds.skew_names}) {
        for (const auto& s : *names) wname = std::max(wname, s.size());
    }
    const int wn = static_cast<int>(wname);

    std::ostringstream o;
    o.imbue(std::locale::classic());
    o << std::left << std::setw(16) << "" << std::setw(wn) << "" << std::right << std::setw(12)
      << "Estimate" << std::setw(12) << "BSE" << '\n';
    auto block = [&](const char* title, const std::vector<std::string>& names, const VectorXd& est,
                     Eigen::Index offset) {
        for (std::size_t i = 0; i < names.size(); ++i) {
            const auto k = static_cast<Eigen::Index>(i);
            const double se = r.bse ? (*r.bse)(offset + k) : std::nan("");
            o << std::left << std::setw(16) << (i == 0 ? title : "") << std::setw(wn) << names[i]
              << std::right << fmt_fixed(est(k), 12) << fmt_fixed(se, 12) << '\n';
        }
    };
    const Eigen::Index p = ds.data.p(), q = ds.data.q();
    block("Location model", ds.loc_names, f.theta_hat.beta, 0);
    block("Scale model", ds.scale_names, f.theta_hat.gamma, p);
    block("Skewness model", ds.skew_names, f.theta_hat.alpha, p + q);
    o << std::left << std::setw(16) << "Log-likelihood" << std::setw(wn) << "" << std::right
      << fmt_fixed(crit.loglik, 12) << '\n';
    o << std::left << std::setw(16) << "Information" << std::setw(wn) << "AIC" << std::right
      << fmt_fixed(crit.aic, 12) << '\n';
    o << std::left << std::setw(16) << "criteria" << std::setw(wn) << "BIC" << std::right
      << fmt_fixed(crit.bic, 12) << '\n';
    o << std::left << std::setw(16) << "" << std::setw(wn) << "EDC" << std::right
      << fmt_fixed(crit.edc, 12) << '\n';
    o << "n = " << ds.data.n() << ", iterations = " << f.n_iter
      << ", converged = " << (f.converged ? "yes" : "no");
    if (r.bse) o << ", bootstrap resamples = " << r.json["bootstrap"]["B"].get<int>();
    o << '\n';
    for (const auto& w : f.warnings) o << "warning: " << w << '\n';
    return o.str();
}

std::vector<double> parse_values(const std::string& text, const std::string& what) {
    std::vector<double> out;
    std::string s = text;
    for (char& ch : s) {
        if (ch == ',') ch = ' ';
    }
    std::istringstream in(s);
    in.imbue(std::locale::classic());
    std::string tok;
    while (in >> tok) {
        std::size_t used = 0;
        double x = 0.0;
        try {
            x = std::stod(tok, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != tok.size() || !std::isfinite(x)) {
            throw StructuralError(what + ": malformed coefficient '" + tok + "'");
        }
        out.push_back(x);
    }
    return out;
}

VectorXd to_vector(const std::vector<double>& v) {
    return Eigen::Map<const VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

void FitRequest::validate() const {
    if (data_path.empty()) throw StructuralError("fit: --data is required");
    if (response.empty()) throw StructuralError("fit: --response is required");
    if (loc_cols.empty() && !intercept_loc) {
        throw StructuralError("fit: the location model needs a column or an intercept");
    }
    if (scale_cols.empty() && !intercept_scale) {
        throw StructuralError("fit: the scale model needs a column or an intercept");
    }
    if (skew_cols.empty() && !intercept_skew) {
        throw StructuralError("fit: the skewness model needs a column or an intercept");
    }
    for (const auto* cols : {&loc_cols, &scale_cols, &skew_cols}) {
        for (const auto& c : *cols) {
            if (c == response) {
                throw StructuralError("fit: column '" + c + "' is the response and a covariate");
            }
        }
    }
    if (bootstrap_B < 0) throw StructuralError("fit: --bootstrap must be nonnegative");
    FitOptions o;
    o.tol = tol;
    o.max_iter = max_iter;
    o.validate();
}

Design build_design(const CsvTable& table, const FitRequest& req) {
    req.validate();
    Design ds;
    ds.data.y = table.values.col(table.column(req.response));
    ds.data.X = block_matrix(table, req.loc_cols, req.intercept_loc, ds.loc_names);
    ds.data.Z = block_matrix(table, req.scale_cols, req.intercept_scale, ds.scale_names);
    ds.data.W = block_matrix(table, req.skew_cols, req.intercept_skew, ds.skew_names);
    return ds;
}

FitReport run_fit(const FitRequest& req) {
    req.validate();
    FitReport r;
    r.design = build_design(read_csv(req.data_path), req);
    const Dataset& d = r.design.data;
    require_valid(d);

    FitOptions opts;
    opts.tol = req.tol;
    opts.max_iter = req.max_iter;
    r.fit = fit(d, std::nullopt, opts);

    std::vector<std::string> warnings = r.fit.warnings;
    json boot = nullptr;
    if (req.bootstrap_B > 0) {
        if (r.fit.converged) {
            const BootstrapReport b =
                bootstrap_se(d, r.fit.theta_hat, opts, req.bootstrap_B, paired_resampler(req.seed), req.threads);
            r.bse = b.se;
            boot = json{{"B", b.B}, {"failed", b.n_failed}, {"seed", req.seed}};
            if (b.n_failed > 0) {
                warnings.push_back(std::to_string(b.n_failed) + " of " + std::to_string(b.B) +
                                   " bootstrap resamples failed and were excluded");
            }
        } else {
            warnings.emplace_back("bootstrap skipped: the full-data fit did not converge");
        }
    }

    const int m = static_cast<int>(d.p() + d.q() + d.r());
    const CriteriaReport crit = info_criteria(r.fit.loglik, m, static_cast<int>(d.n()));
    const Eigen::Index p = d.p(), q = d.q();

    json& j = r.json;
    j["schema_version"] = 1;
    j["n"] = d.n();
    j["p"] = d.p();
    j["q"] = d.q();
    j["r"] = d.r();
    j["response"] = req.response;
    j["columns"] = {{"beta", r.design.loc_names}, {"gamma", r.design.scale_names}, {"alpha", r.design.skew_names}};
    j["estimates"] = {{"beta", rounded(r.fit.theta_hat.beta)},
                      {"gamma", rounded(r.fit.theta_hat.gamma)},
                      {"alpha", rounded(r.fit.theta_hat.alpha)}};
    if (r.bse) {
        j["bse"] = {{"beta", rounded(VectorXd(r.bse->segment(0, p)))},
                    {"gamma", rounded(VectorXd(r.bse->segment(p, q)))},
                    {"alpha", rounded(VectorXd(r.bse->segment(p + q, d.r())))}};
    } else {
        j["bse"] = nullptr;
    }
    j["bootstrap"] = boot;
    j["loglik"] = rounded(crit.loglik);
    j["aic"] = rounded(crit.aic);
    j["bic"] = rounded(crit.bic);
    j["edc"] = rounded(crit.edc);
    j["iterations"] = r.fit.n_iter;
    j["converged"] = r.fit.converged;
    j["score_norm"] = rounded(r.fit.score_norm);
    j["warnings"] = warnings;

    r.fit.warnings = std::move(warnings);
    r.text = summary_text(r, crit);
    return r;
}

int cmd_fit(const FitRequest& req, std::ostream& out) {
    const FitReport r = run_fit(req);
    if (!req.output_path.empty()) {
        write_file(req.output_path, r.json.dump(2) + "\n");
    }
    out << r.text;
    return r.fit.converged ? kExitOk : kExitNotConverged;
}

SimCase read_coefficients(const std::string& path, bool intercept) {
    std::ifstream in(path);
    if (!in) {
        throw StructuralError("cannot open '" + path + "'");
    }
    SimCase c;
    c.label = path;
    c.intercept = intercept;
    bool seen[3] = {false, false, false};
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto colon = line.find(':');
        if (colon == std::string::npos) {
            throw StructuralError(path + ": line " + std::to_string(lineno) + ": expected 'name: values'");
        }
        std::string key = line.substr(0, colon);
        key.erase(0, key.find_first_not_of(" \t"));
        key.erase(key.find_last_not_of(" \t") + 1);
        const VectorXd v = to_vector(parse_values(line.substr(colon + 1), path));
        int slot = -1;
        if (key == "beta") {
            c.beta0 = v;
            slot = 0;
        } else if (key == "gamma") {
            c.gamma0 = v;
            slot = 1;
        } else if (key == "alpha") {
            c.alpha0 = v;
            slot = 2;
        } else {
            throw StructuralError(path + ": line " + std::to_string(lineno) + ": unknown block '" + key + "'");
        }
        if (seen[slot]) {
            throw StructuralError(path + ": block '" + key + "' given twice");
        }
        seen[slot] = true;
    }
    if (!seen[0] || !seen[1] || !seen[2]) {
        throw StructuralError(path + ": beta, gamma and alpha are all required");
    }
    if (c.beta0.size() == 0 || c.gamma0.size() == 0 || c.alpha0.size() == 0) {
        throw StructuralError(path + ": empty coefficient block");
    }
    return c;
}

int cmd_simulate(const SimulateRequest& req, std::ostream& out) {
    SimConfig cfg;
    cfg.sim_case = req.coeff_path.empty() ? builtin_case(req.case_label) : read_coefficients(req.coeff_path);
    cfg.n_list = req.full ? std::vector<int>{50, 100, 150, 200} : req.n_list;
    cfg.reps = req.full ? 1000 : req.reps;
    cfg.seed = req.seed;
    cfg.threads = req.threads;
    cfg.fit.tol = req.tol;
    cfg.fit.max_iter = req.max_iter;
    cfg.validate();

    const SimTable table = run_mc(cfg);
    if (!req.output_path.empty()) {
        write_file(req.output_path, table.to_tsv());
    }
    out << table.to_text();
    return kExitOk;
}

SimCase sample_case(const SampleRequest& req) {
    const bool vectors = !req.beta.empty() || !req.gamma.empty() || !req.alpha.empty();
    const int sources = (vectors ? 1 : 0) + (req.case_label.empty() ? 0 : 1) + (req.coeff_path.empty() ? 0 : 1);
    if (sources != 1) {
        throw StructuralError("sample: give exactly one of --case, --coefficients or --beta/--gamma/--alpha");
    }
    if (!req.case_label.empty()) return builtin_case(req.case_label);
    if (!req.coeff_path.empty()) return read_coefficients(req.coeff_path, req.intercept);
    if (req.beta.empty() || req.gamma.empty() || req.alpha.empty()) {
        throw StructuralError("sample: --beta, --gamma and --alpha are all required");
    }
    for (const auto* v : {&req.beta, &req.gamma, &req.alpha}) {
        for (double x : *v) {
            if (!std::isfinite(x)) throw StructuralError("sample: coefficients must be finite");
        }
    }
    SimCase c;
    c.beta0 = to_vector(req.beta);
    c.gamma0 = to_vector(req.gamma);
    c.alpha0 = to_vector(req.alpha);
    c.label = "custom";
    c.intercept = req.intercept;
    return c;
}

int cmd_sample(const SampleRequest& req, std::ostream& out) {
    if (req.n < 0) throw StructuralError("sample: n must be nonnegative");
    const SimCase c = sample_case(req);
    const Dataset d = gen_dataset(c, req.n, req.seed);

    const Eigen::Index skip = c.intercept ? 1 : 0;
    std::vector<std::string> header{"y"};
    std::vector<const MatrixXd*> blocks{&d.X, &d.Z, &d.W};
    const char prefix[3] = {'x', 'z', 'w'};
    Eigen::Index width = 1;
    for (int b = 0; b < 3; ++b) {
        for (Eigen::Index j = skip; j < blocks[b]->cols(); ++j) {
            header.push_back(prefix[b] + std::to_string(j - skip + 1));
        }
        width += std::max<Eigen::Index>(blocks[b]->cols() - skip, 0);
    }
    MatrixXd values(d.n(), width);
    values.col(0) = d.y;
    Eigen::Index col = 1;
    for (const MatrixXd* M : blocks) {
        for (Eigen::Index j = skip; j < M->cols(); ++j) values.col(col++) = M->col(j);
    }

    if (req.output_path.empty()) {
        write_csv(out, header, values);
    } else {
        std::ostringstream s;
        write_csv(s, header, values);
        write_file(req.output_path, s.str());
    }
    return kExitOk;
}

int guarded_run(const std::function<int()>& command, std::ostream& err) {
    try {
        return command();
    } catch (const StructuralError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const DomainError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const NumericError& e) {
        err << "numeric failure: " << e.what() << '\n';
        return kExitNumeric;
    } catch (const InferenceError& e) {
        err << "numeric failure: " << e.what() << '\n';
        return kExitNumeric;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitNumeric;
    }
}

}  // namespace slnlss::cli
