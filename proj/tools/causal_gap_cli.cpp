// causal-gap: population gap curves, pair analysis, simulation and
// permutation-score verification from the command line.

#include "causal_gap/causal_gap.hpp"
#include "causal_gap/fetch.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#ifndef CAUSAL_GAP_VERSION
#define CAUSAL_GAP_VERSION "0.0.0"
#endif
#ifndef CAUSAL_GAP_DEFAULT_DATA_DIR
#define CAUSAL_GAP_DEFAULT_DATA_DIR "data/tuebingen"
#endif

namespace cg = causal_gap;
using nlohmann::ordered_json;

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

struct GridSpec {
    double lo = 0.0, hi = 0.0;
    std::size_t count = 0;
    bool log = false;
};

GridSpec parse_grid(const std::string& s) {
    std::vector<std::string> parts;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ':')) parts.push_back(item);
    if (parts.size() < 3 || parts.size() > 4 || (parts.size() == 4 && parts[3] != "log" && parts[3] != "lin")) {
        throw cg::ValidationError("--grid must be lo:hi:count[:log]");
    }
    GridSpec g;
    try {
        g.lo = std::stod(parts[0]);
        g.hi = std::stod(parts[1]);
        const long c = std::stol(parts[2]);
        if (c < 1) throw cg::ValidationError("--grid count must be >= 1");
        g.count = static_cast<std::size_t>(c);
    } catch (const std::logic_error&) {
        throw cg::ValidationError("--grid must be lo:hi:count[:log] with numeric fields");
    }
    g.log = parts.size() == 4 && parts[3] == "log";
    return g;
}

GridSpec default_grid(const cg::Scenario& s) {
    if (s.param == "beta") return {0.05, 20.0, 60, true};
    return {0.25, 3.0, 56, false};
}

/// Writes to --out, or stdout when empty.
void emit(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        std::cout.flush();
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw cg::IoError("cannot write " + path);
    out << text;
    if (!out) throw cg::IoError("write failed: " + path);
}

std::string data_dir(const std::string& flag) {
    if (!flag.empty()) return flag;
    if (const char* env = std::getenv("CAUSAL_GAP_DATA_DIR"); env && *env) return env;
    return CAUSAL_GAP_DEFAULT_DATA_DIR;
}

std::vector<std::string> methods_of(const std::string& m) {
    if (m == "all") return {"gauss", "gauss-het", "hsic"};
    if (m == "gauss" || m == "gauss-het" || m == "hsic") return {m};
    throw cg::ValidationError("unknown --method '" + m + "' (expected gauss, gauss-het, hsic or all)");
}

ordered_json report_json(const cg::GapReport& r) {
    ordered_json j;
    j["delta"] = r.delta;
    j["exp_delta_sq"] = r.exp_delta_sq;
    j["method"] = cg::to_string(r.method);
    j["fit"] = cg::to_string(r.fit);
    j["sigma_fwd"] = {r.sigma_fwd[0], r.sigma_fwd[1]};
    j["sigma_bwd"] = {r.sigma_bwd[0], r.sigma_bwd[1]};
    return j;
}

ordered_json direction_json(const cg::DirectionReport& r) {
    ordered_json j;
    j["score_fwd"] = r.score_fwd;
    j["score_bwd"] = r.score_bwd;
    j["exp_delta_sq_hat"] = r.exp_delta_sq_hat;
    j["decision"] = cg::to_string(r.decision);
    j["fit"] = cg::to_string(r.fit);
    j["tie_tol"] = r.tie_tol;
    j["smoother"] = {{"description", r.smoother},
                     {"bandwidth_fwd", r.bandwidth_fwd},
                     {"bandwidth_bwd", r.bandwidth_bwd},
                     {"binned", r.binned}};
    return j;
}

ordered_json hsic_json(const cg::HsicResult& r) {
    return {{"statistic", r.statistic},     {"p_value", r.p_value},         {"permutations", r.permutations},
            {"bandwidth_x", r.bandwidth_x}, {"bandwidth_y", r.bandwidth_y}, {"n_used", r.n_used}};
}

std::string json_text(const ordered_json& j) { return j.dump(2) + "\n"; }

// ---------------------------------------------------------------------------

struct CurvesArgs {
    std::string scenario;
    std::optional<double> beta;
    std::string grid;
    std::string fit;
    std::size_t jobs = 1;
    std::string out, format = "csv";
};

int run_curves(const CurvesArgs& a) {
    const cg::Scenario sc = cg::make_scenario(a.scenario, a.beta);
    const cg::Fit fit = a.fit.empty() ? sc.default_fit : cg::parse_fit(a.fit);
    const GridSpec g = a.grid.empty() ? default_grid(sc) : parse_grid(a.grid);
    const auto grid = cg::make_grid(g.lo, g.hi, g.count, g.log);
    const auto rows = cg::curve(sc, grid, fit, {}, a.jobs);

    if (a.format == "json") {
        ordered_json j;
        j["scenario"] = sc.name;
        j["param"] = sc.param;
        if (sc.param == "nu") j["beta"] = sc.fixed_beta;
        j["fit"] = cg::to_string(fit);
        j["version"] = CAUSAL_GAP_VERSION;
        ordered_json arr = ordered_json::array();
        for (const auto& r : rows) {
            ordered_json e = report_json(r.report);
            e["param"] = r.param;
            arr.push_back(e);
        }
        j["rows"] = arr;
        emit(a.out, json_text(j));
        return 0;
    }
    std::string s = "param,delta,exp_delta_sq,method,fit\n";
    for (const auto& r : rows) {
        s += fmt(r.param) + "," + fmt(r.report.delta) + "," + fmt(r.report.exp_delta_sq) + "," +
             cg::to_string(r.report.method) + "," + cg::to_string(r.report.fit) + "\n";
    }
    s += "# seed=none, version=" CAUSAL_GAP_VERSION ", method=population quadrature, scenario=" + sc.name;
    if (sc.param == "nu") s += ", beta=" + fmt(sc.fixed_beta);
    s += "\n";
    emit(a.out, s);
    return 0;
}

// ---------------------------------------------------------------------------

struct PairArgs {
    int id = 0;
    std::string file;
    int cause_col = 1, effect_col = 2;
    std::string restrict = "none";
    std::string method = "all";
    std::size_t perms = 499;
    std::optional<std::uint64_t> seed;
    std::string data_dir;
    std::size_t jobs = 1;
    std::string out, format = "json";
};

int run_pair(const PairArgs& a) {
    const auto methods = methods_of(a.method);
    const bool needs_seed = std::find(methods.begin(), methods.end(), "hsic") != methods.end();
    if (needs_seed && !a.seed) throw cg::ValidationError("--seed is required when the hsic method runs");

    cg::CauseEffectPair pair;
    std::string source;
    if (!a.file.empty()) {
        cg::PairMeta meta;
        meta.id = a.id;
        meta.cause_first = meta.cause_last = a.cause_col;
        meta.effect_first = meta.effect_last = a.effect_col;
        pair = cg::load_pair(a.file, meta);
        source = a.file;
    } else {
        if (a.id <= 0) throw cg::ValidationError("give --id or --file");
        const std::string dir = data_dir(a.data_dir);
        pair = cg::load_pair_from_dir(dir, a.id);
        source = (std::filesystem::path(dir) / cg::pair_file_name(a.id)).string();
    }
    const auto window = cg::parse_day_window(a.restrict);
    const cg::CauseEffectPair used = cg::restrict_days(pair, window);

    ordered_json j;
    j["pair"] = used.id;
    j["source"] = source;
    j["preprocessing"] = {{"restrict", cg::to_string(window)},
                          {"rows_in", pair.rows_in},
                          {"rows_dropped", pair.rows_dropped},
                          {"rows_parsed", pair.rows_used()},
                          {"rows_used", used.rows_used()}};
    j["smoother"] = {{"description", cg::SmootherFit::kDescription},
                     {"bandwidth_grid", "25 log-spaced points, 0.01 to 1 times sd(x)"}};
    std::vector<std::vector<std::string>> csv_rows;
    for (const auto& m : methods) {
        if (m == "gauss" || m == "gauss-het") {
            const auto r = cg::gaussian_direction(used.x, used.y,
                                                  m == "gauss" ? cg::Fit::homoskedastic : cg::Fit::heteroskedastic);
            j[m] = direction_json(r);
            csv_rows.push_back({m, fmt(r.score_fwd), fmt(r.score_bwd), fmt(r.exp_delta_sq_hat),
                                cg::to_string(r.decision), "", ""});
        } else {
            cg::HsicOptions ho;
            ho.jobs = a.jobs;
            const auto d = cg::direction_by_dependence(used.x, used.y, a.perms, *a.seed, ho);
            j["hsic"] = {{"decision", cg::to_string(d.decision)},
                         {"fwd", hsic_json(d.fwd)},
                         {"bwd", hsic_json(d.bwd)},
                         {"bandwidth_fwd", d.bandwidth_fwd},
                         {"bandwidth_bwd", d.bandwidth_bwd}};
            csv_rows.push_back({m, fmt(d.fwd.statistic), fmt(d.bwd.statistic), "", cg::to_string(d.decision),
                                fmt(d.fwd.p_value), fmt(d.bwd.p_value)});
        }
    }
    j["seed"] = a.seed ? ordered_json(*a.seed) : ordered_json(nullptr);
    j["version"] = CAUSAL_GAP_VERSION;

    if (a.format == "csv") {
        std::string s = "method,score_fwd,score_bwd,exp_delta_sq_hat,decision,p_fwd,p_bwd\n";
        for (const auto& r : csv_rows) {
            for (std::size_t k = 0; k < r.size(); ++k) s += (k ? "," : "") + r[k];
            s += "\n";
        }
        s += "# seed=" + (a.seed ? std::to_string(*a.seed) : std::string("none")) +
             ", version=" CAUSAL_GAP_VERSION ", method=" + a.method + ", pair=" + std::to_string(used.id) +
             ", restrict=" + cg::to_string(window) + ", smoother=" + cg::SmootherFit::kDescription + "\n";
        emit(a.out, s);
    } else {
        emit(a.out, json_text(j));
    }
    return 0;
}

// ---------------------------------------------------------------------------

cg::BivariateAnm simulation_model(const std::string& name, std::optional<double> beta, std::optional<double> nu) {
    if (name == "ga-uni-even") {
        return {cg::NoiseSpec::gaussian(0.0, 1.0), cg::Mechanism::even_power(beta.value_or(1.0), nu.value_or(2.0)),
                cg::NoiseSpec::uniform(-1.0, 1.0), {}};
    }
    const cg::Scenario sc = cg::make_scenario(name, beta);
    if (sc.param == "beta") {
        if (!beta) throw cg::ValidationError("--beta is required for scenario " + name);
        return sc.model(*beta);
    }
    if (!nu) throw cg::ValidationError("--nu is required for scenario " + name);
    return sc.model(*nu);
}

struct SimulateArgs {
    std::string scenario;
    std::optional<double> beta, nu;
    std::size_t n = 10000, reps = 50, perms = 499;
    std::optional<std::uint64_t> seed;
    std::string method = "gauss";
    std::size_t jobs = 1;
    std::string out, format = "csv";
};

struct RepResult {
    double estimate = std::numeric_limits<double>::quiet_NaN();
    cg::Decision decision = cg::Decision::tie;
    double p_fwd = std::numeric_limits<double>::quiet_NaN(), p_bwd = std::numeric_limits<double>::quiet_NaN();
};

int run_simulate(const SimulateArgs& a) {
    if (!a.seed) throw cg::ValidationError("--seed is required for simulate");
    const auto methods = methods_of(a.method);
    const cg::BivariateAnm model = simulation_model(a.scenario, a.beta, a.nu);
    cg::detail::require(a.reps >= 1, "--reps must be >= 1");
    cg::detail::require(a.n >= 50, "--n must be >= 50");

    std::vector<std::vector<RepResult>> res(methods.size(), std::vector<RepResult>(a.reps));
    cg::parallel_for(a.reps, a.jobs, [&](std::size_t r) {
        const std::uint64_t rep_seed = cg::Rng(*a.seed, r).next_u64();
        const cg::Dataset d = cg::sample_bivariate(model, a.n, rep_seed);
        const auto x = d.column(0), y = d.column(1);
        for (std::size_t m = 0; m < methods.size(); ++m) {
            RepResult& out = res[m][r];
            if (methods[m] == "hsic") {
                const auto dd = cg::direction_by_dependence(x, y, a.perms, rep_seed);
                out.decision = dd.decision;
                out.p_fwd = dd.fwd.p_value;
                out.p_bwd = dd.bwd.p_value;
            } else {
                const auto g = cg::gaussian_direction(
                    x, y, methods[m] == "gauss" ? cg::Fit::homoskedastic : cg::Fit::heteroskedastic);
                out.estimate = g.exp_delta_sq_hat;
                out.decision = g.decision;
            }
        }
    });

    ordered_json j;
    j["model"] = model.describe();
    j["n"] = a.n;
    j["reps"] = a.reps;
    j["seed"] = *a.seed;
    j["version"] = CAUSAL_GAP_VERSION;
    std::string s = "row,method,exp_delta_sq_hat,se,decision,p_fwd,p_bwd,freq_forward,freq_backward,freq_tie\n";
    auto opt_num = [](double v) { return std::isnan(v) ? std::string() : fmt(v); };
    for (std::size_t m = 0; m < methods.size(); ++m) {
        double sum = 0.0, sum2 = 0.0;
        std::size_t counted = 0, f = 0, b = 0, t = 0;
        ordered_json reps = ordered_json::array();
        for (std::size_t r = 0; r < a.reps; ++r) {
            const auto& rr = res[m][r];
            s += std::to_string(r) + "," + methods[m] + "," + opt_num(rr.estimate) + ",," +
                 cg::to_string(rr.decision) + "," + opt_num(rr.p_fwd) + "," + opt_num(rr.p_bwd) + ",,,\n";
            ordered_json e = {{"rep", r}, {"decision", cg::to_string(rr.decision)}};
            if (!std::isnan(rr.estimate)) {
                e["exp_delta_sq_hat"] = rr.estimate;
                sum += rr.estimate;
                sum2 += rr.estimate * rr.estimate;
                ++counted;
            }
            if (!std::isnan(rr.p_fwd)) {
                e["p_fwd"] = rr.p_fwd;
                e["p_bwd"] = rr.p_bwd;
            }
            reps.push_back(e);
            (rr.decision == cg::Decision::forward ? f : rr.decision == cg::Decision::backward ? b : t)++;
        }
        const double reps_d = static_cast<double>(a.reps);
        double mean = std::numeric_limits<double>::quiet_NaN(), se = mean;
        if (counted > 0) {
            mean = sum / static_cast<double>(counted);
            se = counted > 1 ? std::sqrt(std::max(sum2 / counted - mean * mean, 0.0) *
                                         static_cast<double>(counted) / static_cast<double>(counted - 1) /
                                         static_cast<double>(counted))
                             : 0.0;
        }
        const char* majority = f >= b && f >= t ? "forward" : b >= t ? "backward" : "tie";
        s += "summary," + methods[m] + "," + opt_num(mean) + "," + opt_num(se) + "," + majority + ",,," +
             fmt(static_cast<double>(f) / reps_d) + "," + fmt(static_cast<double>(b) / reps_d) + "," +
             fmt(static_cast<double>(t) / reps_d) + "\n";
        ordered_json summary = {{"freq_forward", static_cast<double>(f) / reps_d},
                                {"freq_backward", static_cast<double>(b) / reps_d},
                                {"freq_tie", static_cast<double>(t) / reps_d}};
        if (counted > 0) {
            summary["mean_exp_delta_sq_hat"] = mean;
            summary["se"] = se;
        }
        j["methods"][methods[m]] = {{"summary", summary}, {"reps", reps}};
    }
    s += "# seed=" + std::to_string(*a.seed) + ", version=" CAUSAL_GAP_VERSION ", method=" + a.method +
         ", model=" + model.describe() + ", n=" + std::to_string(a.n) + "\n";
    emit(a.out, a.format == "json" ? json_text(j) : s);
    return 0;
}

// ---------------------------------------------------------------------------

struct VerifyArgs {
    std::size_t p = 3;
    std::string noise = "uniform";
    std::string graph = "random";
    std::optional<double> beta;
    std::optional<std::uint64_t> seed;
    std::size_t n = 20000;
    std::size_t jobs = 1;
    bool witnesses = true;
    std::string out, format = "json";
};

std::vector<cg::NoiseSpec> noise_laws(const std::string& kind, std::size_t p) {
    std::vector<cg::NoiseSpec> out;
    for (std::size_t j = 0; j < p; ++j) {
        std::string k = kind;
        if (kind == "mixed") k = j % 3 == 0 ? "uniform" : j % 3 == 1 ? "gaussian" : "chi2";
        if (k == "uniform") out.push_back(cg::NoiseSpec::uniform(-1.0, 1.0));
        else if (k == "gaussian") out.push_back(cg::NoiseSpec::gaussian(0.0, 1.0));
        else if (k == "chi2") out.push_back(cg::NoiseSpec::chi1_centered(1.0));
        else throw cg::ValidationError("unknown --noise '" + kind + "' (uniform, gaussian, chi2 or mixed)");
    }
    return out;
}

int run_verify(const VerifyArgs& a) {
    if (!a.seed) throw cg::ValidationError("--seed is required for verify-theorem1");
    cg::detail::require(a.p >= 1 && a.p <= 6, "--p must be between 1 and 6");
    const auto laws = noise_laws(a.noise, a.p);
    cg::LinearSem sem;
    if (a.graph == "chain") sem = cg::chain_sem(a.p, a.beta.value_or(1.0), laws.front());
    else if (a.graph == "random") sem = cg::random_linear_sem(a.p, laws, *a.seed);
    else throw cg::ValidationError("unknown --graph '" + a.graph + "' (random or chain)");
    if (a.graph == "chain") sem.noises = laws;

    cg::Theorem1Options o;
    o.n = a.n;
    o.seed = *a.seed;
    o.jobs = a.jobs;
    o.detect_witnesses = a.witnesses;
    const auto rep = cg::verify_theorem1(sem, o);
    const bool equal = rep.max_deviation <= 1e-8;

    ordered_json j;
    j["p"] = rep.p;
    j["graph"] = a.graph;
    j["noise"] = a.noise;
    ordered_json coeffs = ordered_json::array();
    for (std::size_t r = 0; r < sem.p; ++r) {
        ordered_json row = ordered_json::array();
        for (std::size_t c = 0; c < sem.p; ++c) row.push_back(sem.coeffs(static_cast<long>(r), static_cast<long>(c)));
        coeffs.push_back(row);
    }
    j["coefficients"] = coeffs;
    j["true_total"] = rep.true_total;
    j["max_deviation"] = rep.max_deviation;
    j["population_totals_equal"] = equal;
    j["n"] = a.n;
    j["seed"] = *a.seed;
    ordered_json perms = ordered_json::array();
    std::string s = "permutation,total,deviation,conformable,strict,max_gain\n";
    for (const auto& c : rep.checks) {
        const double g = c.gain.empty() ? 0.0 : *std::max_element(c.gain.begin(), c.gain.end());
        perms.push_back({{"permutation", c.pi.describe()},
                         {"total", c.population_total},
                         {"deviation", c.deviation},
                         {"conformable", c.conformable},
                         {"strict", c.strict()},
                         {"gains", c.gain}});
        s += c.pi.describe() + "," + fmt(c.population_total) + "," + fmt(c.deviation) + "," +
             (c.conformable ? "true" : "false") + "," + (c.strict() ? "true" : "false") + "," + fmt(g) + "\n";
    }
    j["permutations"] = perms;
    if (rep.bivariate_gap) {
        ordered_json b = report_json(*rep.bivariate_gap);
        b["equality"] = std::abs(rep.bivariate_gap->delta) <= 1e-8;
        j["bivariate_gap"] = b;
    }
    j["version"] = CAUSAL_GAP_VERSION;
    s += "# seed=" + std::to_string(*a.seed) + ", version=" CAUSAL_GAP_VERSION ", method=best-linear population";
    if (rep.bivariate_gap) s += ", bivariate_delta=" + fmt(rep.bivariate_gap->delta);
    s += "\n";
    emit(a.out, a.format == "csv" ? s : json_text(j));
    if (!equal) {
        std::cerr << "error: population totals deviate by " << rep.max_deviation << " (> 1e-8)\n";
        return 3;
    }
    return 0;
}

// ---------------------------------------------------------------------------

struct FetchArgs {
    std::vector<int> ids{42, 77};
    std::string base_url = cg::kDefaultPairsBaseUrl;
    std::string data_dir;
    std::string out, format = "json";
};

int run_fetch(const FetchArgs& a) {
    cg::FetchOptions o;
    o.log = [](const std::string& line) { std::cerr << line << "\n"; };
    const std::string dest = data_dir(a.data_dir);
    const auto r = cg::fetch_pairs(a.ids, a.base_url, dest, o);
    ordered_json j;
    j["dest"] = dest;
    j["requests"] = r.requests;
    auto names = [](const std::vector<std::filesystem::path>& v) {
        std::vector<std::string> s;
        for (const auto& p : v) s.push_back(p.string());
        return s;
    };
    j["downloaded"] = names(r.downloaded);
    j["skipped"] = names(r.skipped);
    if (a.format == "csv") {
        std::string s = "file,status\n";
        for (const auto& p : r.downloaded) s += p.string() + ",downloaded\n";
        for (const auto& p : r.skipped) s += p.string() + ",skipped\n";
        s += "# seed=none, version=" CAUSAL_GAP_VERSION ", method=fetch\n";
        emit(a.out, s);
    } else {
        emit(a.out, json_text(j));
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Gaussian-score gaps for bivariate and linear causal models"};
    app.set_version_flag("--version", CAUSAL_GAP_VERSION);
    app.require_subcommand(1);

    auto add_output = [](CLI::App* c, std::string& out, std::string& format) {
        c->add_option("--out", out, "Output file (default: stdout)");
        c->add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
    };

    CurvesArgs ca;
    auto* curves = app.add_subcommand("curves", "Population gap along a parameter grid");
    curves->add_option("--scenario", ca.scenario, "Model family")->required()
        ->check(CLI::IsMember(cg::scenario_names()));
    curves->add_option("--beta", ca.beta, "Coefficient of the power families");
    curves->add_option("--grid", ca.grid, "lo:hi:count[:log]");
    curves->add_option("--fit", ca.fit, "homo or het (default: the scenario's)")
        ->check(CLI::IsMember({"homo", "het"}));
    curves->add_option("--jobs", ca.jobs, "Worker threads")->check(CLI::PositiveNumber);
    add_output(curves, ca.out, ca.format);

    PairArgs pa;
    auto* pair = app.add_subcommand("pair", "Direction analysis of a cause-effect pair");
    pair->add_option("--id", pa.id, "Pair id in the data directory");
    pair->add_option("--file", pa.file, "Pair file (overrides --id lookup)");
    pair->add_option("--cause-col", pa.cause_col, "Cause column for --file (1-based)");
    pair->add_option("--effect-col", pa.effect_col, "Effect column for --file (1-based)");
    pair->add_option("--restrict", pa.restrict, "none, summer or first183")
        ->check(CLI::IsMember({"none", "summer", "first183"}));
    pair->add_option("--method", pa.method, "gauss, gauss-het, hsic or all");
    pair->add_option("--perms", pa.perms, "HSIC permutations");
    pair->add_option("--seed", pa.seed, "Seed (needed for hsic)");
    pair->add_option("--data-dir", pa.data_dir, "Pair directory (overrides CAUSAL_GAP_DATA_DIR)");
    pair->add_option("--jobs", pa.jobs, "Worker threads")->check(CLI::PositiveNumber);
    add_output(pair, pa.out, pa.format);

    SimulateArgs sa;
    auto* sim = app.add_subcommand("simulate", "Repeated sampling and direction decisions");
    std::vector<std::string> sim_models = cg::scenario_names();
    sim_models.push_back("ga-uni-even");
    sim->add_option("--scenario", sa.scenario, "Model family")->required()->check(CLI::IsMember(sim_models));
    sim->add_option("--beta", sa.beta, "Coefficient");
    sim->add_option("--nu", sa.nu, "Exponent of the power families");
    sim->add_option("--n", sa.n, "Sample size");
    sim->add_option("--reps", sa.reps, "Repetitions");
    sim->add_option("--perms", sa.perms, "HSIC permutations");
    sim->add_option("--seed", sa.seed, "Seed")->required();
    sim->add_option("--method", sa.method, "gauss, gauss-het, hsic or all");
    sim->add_option("--jobs", sa.jobs, "Worker threads")->check(CLI::PositiveNumber);
    add_output(sim, sa.out, sa.format);

    VerifyArgs va;
    auto* ver = app.add_subcommand("verify-theorem1", "Permutation-invariance of best-linear Gaussian scores");
    ver->add_option("--p", va.p, "Number of nodes (<= 6)");
    ver->add_option("--noise", va.noise, "uniform, gaussian, chi2 or mixed");
    ver->add_option("--graph", va.graph, "random or chain");
    ver->add_option("--beta", va.beta, "Chain coefficient");
    ver->add_option("--seed", va.seed, "Seed")->required();
    ver->add_option("--n", va.n, "Sample size for the nonlinearity check");
    ver->add_flag("!--no-witnesses", va.witnesses, "Skip the sample-based nonlinearity check");
    ver->add_option("--jobs", va.jobs, "Worker threads")->check(CLI::PositiveNumber);
    add_output(ver, va.out, va.format);

    FetchArgs fa;
    auto* fetch = app.add_subcommand("fetch", "Download pair files");
    fetch->add_option("--ids", fa.ids, "Pair ids")->delimiter(',');
    fetch->add_option("--base-url", fa.base_url, "Repository URL");
    fetch->add_option("--data-dir", fa.data_dir, "Destination (overrides CAUSAL_GAP_DATA_DIR)");
    add_output(fetch, fa.out, fa.format);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (*curves) return run_curves(ca);
        if (*pair) return run_pair(pa);
        if (*sim) return run_simulate(sa);
        if (*ver) return run_verify(va);
        if (*fetch) return run_fetch(fa);
    } catch (const cg::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.exit_code();
    } catch (const std::bad_alloc&) {
        std::cerr << "error: out of memory\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
