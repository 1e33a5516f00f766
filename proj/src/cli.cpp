#include "enkbf/cli.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "enkbf/analysis.hpp"
#include "enkbf/errors.hpp"
#include "enkbf/estimators.hpp"
#include "enkbf/harness.hpp"
#include "enkbf/model_io.hpp"
#include "enkbf/paths.hpp"

namespace enkbf {

namespace {

struct ModelOptions {
    std::string preset = "baseline";
    std::string model_file;
    double epsilon = 0.01;
    double beta = 2.0;
    CLI::Option* epsilon_opt = nullptr;
    CLI::Option* beta_opt = nullptr;
};

struct Resolved {
    LinearModel model;
    Matrix M;
    double epsilon;
};

void add_model_options(CLI::App* app, ModelOptions& o) {
    app->add_option("--preset", o.preset, "Named parameter preset (baseline)");
    app->add_option("--model", o.model_file, "Model spec JSON file");
    o.epsilon_opt = app->add_option("--epsilon", o.epsilon, "Fast scale of the two-scale model");
    o.beta_opt = app->add_option("--beta", o.beta, "Rotation strength in M = [[1, beta], [-beta, 1]]");
}

Resolved resolve_model(const ModelOptions& o) {
    if (o.preset != "baseline") throw ConfigError("unknown preset '" + o.preset + "'");
    Resolved r{baseline_model(), rotation_M(2.0), 0.01};
    if (!o.model_file.empty()) {
        ModelSpec spec = load_model_spec(o.model_file);
        if (auto* ts = std::get_if<TwoScaleModel>(&spec)) {
            r.model = ts->base();
            r.M = ts->M();
            r.epsilon = ts->epsilon();
        } else {
            r.model = std::get<LinearModel>(spec);
        }
    }
    if (o.epsilon_opt->count() > 0) r.epsilon = o.epsilon;
    if (o.beta_opt->count() > 0) r.M = rotation_M(o.beta);
    if (r.M.rows() != r.model.dim()) throw ConfigError("M does not match the model dimension");
    return r;
}

DataSource parse_source(const std::string& s) {
    if (s == "reference") return DataSource::reference;
    if (s == "two_scale") return DataSource::two_scale;
    throw ConfigError("unknown data source '" + s + "' (reference|two_scale)");
}

struct SimulatedData {
    ObservationPath x;
    std::optional<ObservationPath> p;
};

SimulatedData simulate_data(const Resolved& r, DataSource src, double T, double dtau, std::uint64_t seed) {
    if (src == DataSource::reference) return {simulate_reference(r.model, T, dtau, seed), std::nullopt};
    TwoScaleBundle b = simulate_two_scale(TwoScaleModel(r.model, r.M, r.epsilon), T, dtau, seed);
    return {std::move(b.x_path), std::move(b.p_path)};
}

std::string output_root(const std::string& flag) {
    if (!flag.empty()) return flag;
    if (const char* env = std::getenv("ENKBF_OUTPUT_DIR"); env != nullptr && *env != '\0') return env;
    return "results";
}

void print_matrix_json(std::ostream& out, const nlohmann::json& j) { out << j.dump(2) << '\n'; }

std::string one_line(std::string s) {
    for (char& c : s)
        if (c == '\n' || c == '\r') c = ' ';
    return s;
}

} // namespace

int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Ensemble Kalman-Bucy parameter estimation for linear SDEs", "enkbf"};
    app.require_subcommand(1);

    // simulate
    ModelOptions sim_m;
    std::string sim_data = "reference", sim_out;
    double sim_T = 6.0, sim_dtau = 1e-4, sim_delta = 0.1;
    int sim_delta_noise = 0;
    bool sim_filtered = false;
    std::uint64_t sim_seed = 1;
    auto* sim = app.add_subcommand("simulate", "Simulate an observation path and write it as CSV");
    add_model_options(sim, sim_m);
    sim->add_option("--data", sim_data, "reference | two_scale");
    sim->add_option("--T", sim_T, "Time horizon");
    sim->add_option("--dtau", sim_dtau, "Fine step");
    sim->add_option("--seed", sim_seed, "Master seed");
    sim->add_flag("--filtered", sim_filtered, "Also emit the filtered path z_*");
    sim->add_option("--delta", sim_delta, "Filter time constant");
    sim->add_option("--delta-noise", sim_delta_noise, "Filter noise flag (0 or 1)");
    sim->add_option("--out", sim_out, "Output CSV (default: stdout)");

    // estimate
    ModelOptions est_m;
    std::string est_data = "reference", est_variant = "subsampled", est_corr = "none", est_gain = "exact";
    std::string est_path, est_out;
    double est_T = 6.0, est_dtau = 1e-4, est_dt = 0.06, est_sigma0 = 4.0, est_m0 = 0.0, est_delta = 0.1;
    int est_delta_noise = 0;
    bool est_filtered = false;
    std::uint64_t est_seed = 1;
    auto* est = app.add_subcommand("estimate", "Run one estimator on one path and write its trace");
    add_model_options(est, est_m);
    est->add_option("--data", est_data, "reference | two_scale");
    est->add_option("--path", est_path, "Read the observation path from CSV instead of simulating");
    est->add_option("--variant", est_variant, "subsampled | high_freq | high_freq_corrected | strat_midpoint");
    est->add_option("--correction", est_corr, "none | true | estimated");
    est->add_option("--gain", est_gain, "exact | approx");
    est->add_flag("--filtered", est_filtered, "Use the filtered-data estimator");
    est->add_option("--delta", est_delta, "Filter time constant");
    est->add_option("--delta-noise", est_delta_noise, "Filter noise flag (0 or 1)");
    est->add_option("--T", est_T, "Time horizon");
    est->add_option("--dt", est_dt, "Outer step");
    est->add_option("--dtau", est_dtau, "Fine step");
    est->add_option("--sigma0", est_sigma0, "Prior variance");
    est->add_option("--m0", est_m0, "Prior mean");
    est->add_option("--seed", est_seed, "Master seed");
    est->add_option("--out", est_out, "Trace CSV (default: stdout)");

    // moments
    ModelOptions mom_m;
    double mom_sigma0 = 4.0, mom_m0 = 0.0, mom_T = 6.0, mom_dt = 0.06, mom_c = 0.0, mom_b = 0.0;
    auto* mom = app.add_subcommand("moments", "Closed-form and ODE frequentist moments");
    add_model_options(mom, mom_m);
    mom->add_option("--sigma0", mom_sigma0, "Prior variance");
    mom->add_option("--m0", mom_m0, "Prior mean");
    auto* mom_c_opt = mom->add_option("--c", mom_c, "Learning constant (AᵀA):C/γ (default: from the model)");
    auto* mom_b_opt = mom->add_option("--b", mom_b, "Constant bias rate for the biased mean");
    mom->add_option("--T", mom_T, "Time horizon");
    mom->add_option("--dt", mom_dt, "Reporting grid");

    // estimate-m
    ModelOptions em_m;
    std::string em_data = "two_scale";
    std::size_t em_paths = 200;
    double em_T = 6.0, em_dtau = 1e-4, em_dt = 0.06;
    std::uint64_t em_seed = 1;
    auto* em = app.add_subcommand("estimate-m", "Estimate the correction matrix M from sampled paths");
    add_model_options(em, em_m);
    em->add_option("--data", em_data, "reference | two_scale");
    em->add_option("--paths", em_paths, "Number of paths");
    em->add_option("--T", em_T, "Path length");
    em->add_option("--dt", em_dt, "Window length");
    em->add_option("--dtau", em_dtau, "Fine step");
    em->add_option("--seed", em_seed, "Master seed");

    // subsample-scan
    ModelOptions ss_m;
    std::string ss_data = "two_scale", ss_norm = "spectral";
    std::size_t ss_paths = 200;
    std::vector<double> ss_dts = {0.002, 0.005, 0.01, 0.02, 0.04, 0.06, 0.12};
    double ss_T = 6.0, ss_dtau = 1e-4;
    std::uint64_t ss_seed = 1;
    auto* ss = app.add_subcommand("subsample-scan", "Subsampling diagnostic h(dt) as CSV");
    add_model_options(ss, ss_m);
    ss->add_option("--data", ss_data, "reference | two_scale");
    ss->add_option("--paths", ss_paths, "Number of paths");
    ss->add_option("--dts", ss_dts, "Comma-separated step sizes")->delimiter(',');
    ss->add_option("--norm", ss_norm, "spectral | frobenius");
    ss->add_option("--T", ss_T, "Path length");
    ss->add_option("--dtau", ss_dtau, "Fine step");
    ss->add_option("--seed", ss_seed, "Master seed");

    // experiment
    ModelOptions ex_m;
    std::string ex_name, ex_out, ex_config;
    std::size_t ex_trials = 0;
    double ex_dt = 0.0, ex_dtau = 0.0, ex_delta = 0.1;
    int ex_delta_noise = 0;
    std::uint64_t ex_seed = 1;
    unsigned ex_workers = 0;
    bool ex_full = false;
    auto* ex = app.add_subcommand("experiment", "Monte Carlo reproduction: fig2 | fig3 | filtered");
    add_model_options(ex, ex_m);
    ex->add_option("name", ex_name, "fig2 | fig3 | filtered")->required();
    ex->add_option("--config", ex_config, "Experiment config JSON (flags override it)");
    auto* ex_trials_opt = ex->add_option("--trials", ex_trials, "Number of trials");
    auto* ex_dt_opt = ex->add_option("--dt", ex_dt, "Outer step for every scheme");
    auto* ex_dtau_opt = ex->add_option("--dtau", ex_dtau, "Fine step");
    auto* ex_delta_opt = ex->add_option("--delta", ex_delta, "Filter time constant");
    auto* ex_dn_opt = ex->add_option("--delta-noise", ex_delta_noise, "Filter noise flag (0 or 1)");
    auto* ex_seed_opt = ex->add_option("--seed", ex_seed, "Master seed");
    auto* ex_workers_opt = ex->add_option("--workers", ex_workers, "Worker threads (0: all cores)");
    ex->add_flag("--full", ex_full, "Use 10^4 trials");
    ex->add_option("--out", ex_out, "Output root (default: $ENKBF_OUTPUT_DIR or ./results)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return exit_ok;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return exit_ok;
    } catch (const CLI::ParseError& e) {
        err << "enkbf: error[usage]: " << one_line(e.what()) << '\n';
        return exit_usage;
    }

    try {
        out << std::setprecision(10);
        if (sim->parsed()) {
            const Resolved r = resolve_model(sim_m);
            SimulatedData data = simulate_data(r, parse_source(sim_data), sim_T, sim_dtau, sim_seed);
            std::optional<ObservationPath> z;
            if (sim_filtered) z = simulate_filtered(data.x, FilterConfig{sim_delta, sim_delta_noise}, sim_seed);
            const ObservationPath* extra = z ? &*z : (data.p ? &*data.p : nullptr);
            const std::string prefix = z ? "z" : "p";
            if (sim_out.empty()) write_path_csv(out, data.x, extra, prefix);
            else write_path_csv(sim_out, data.x, extra, prefix);
        } else if (est->parsed()) {
            const Resolved r = resolve_model(est_m);
            SchemeConfig sc;
            sc.variant = parse_variant(est_variant);
            sc.delta_t = est_dt;
            if (est_gain == "approx") sc.gain_mode = GainMode::approx;
            else if (est_gain != "exact") throw ConfigError("unknown gain mode '" + est_gain + "'");
            const FilterConfig filter{est_delta, est_delta_noise};
            std::optional<ObservationPath> x;
            if (!est_path.empty()) x = read_path_csv(est_path);
            else x = simulate_data(r, parse_source(est_data), est_T, est_dtau, est_seed).x;
            if (est_corr == "true") sc.correction_M = r.M;
            else if (est_corr == "estimated") sc.correction_M = estimate_M(*x, est_dt, r.model.gamma()).M;
            else if (est_corr != "none") throw ConfigError("unknown correction '" + est_corr + "'");
            if (sc.gain_mode == GainMode::approx)
                sc.approx_covariance = est_filtered ? extended_stationary_covariance(r.model, filter).c_tilde
                                                    : stationary_covariance(r.model);
            const GaussianPosterior prior{est_m0, est_sigma0};
            EstimatorTrace tr;
            if (est_filtered) {
                const ObservationPath z = simulate_filtered(*x, filter, est_seed);
                tr = run_filtered_estimator(*x, z, sc, prior, r.model.A(), r.model.gamma());
            } else {
                tr = run_estimator(*x, sc, prior, r.model.A(), r.model.gamma());
            }
            if (est_out.empty()) {
                write_trace_csv(out, tr);
            } else {
                write_trace_csv(est_out, tr);
                out << "mu_T=" << tr.mu.back() << "\nsigma_T=" << tr.sigma.back() << '\n';
            }
        } else if (mom->parsed()) {
            double c = mom_c;
            if (mom_c_opt->count() == 0) c = learning_constant(resolve_model(mom_m).model);
            const FrequentistMoments fm = frequentist_moments(mom_sigma0, mom_m0, c, mom_T, mom_dt);
            out << "c=" << c << '\n';
            out << "sigma_T=" << sigma_closed_form(mom_sigma0, c, mom_T) << '\n';
            out << "m_T=" << mean_closed_form(mom_sigma0, mom_m0, c, mom_T) << '\n';
            out << "p_T=" << variance_closed_form(mom_sigma0, c, mom_T) << '\n';
            out << "m_T_ode=" << fm.m.back() << '\n';
            out << "p_T_ode=" << fm.p.back() << '\n';
            if (mom_b_opt->count() > 0) {
                const MeanTrajectory bm = biased_frequentist_mean(mom_sigma0, mom_m0, c, mom_b, mom_T, mom_dt);
                out << "m_T_biased=" << biased_mean_closed_form(mom_sigma0, mom_m0, c, mom_b, mom_T) << '\n';
                out << "m_T_biased_ode=" << bm.m.back() << '\n';
            }
        } else if (em->parsed()) {
            const Resolved r = resolve_model(em_m);
            if (em_paths < 1) throw ConfigError("--paths must be at least 1");
            const DataSource src = parse_source(em_data);
            std::vector<ObservationPath> paths;
            paths.reserve(em_paths);
            for (std::size_t i = 0; i < em_paths; ++i)
                paths.push_back(simulate_data(r, src, em_T, em_dtau, trial_seed(em_seed, i)).x);
            const MEstimate me = estimate_M(paths, em_dt, r.model.gamma());
            nlohmann::json j = {{"M", matrix_to_json(me.M)},
                                {"se", matrix_to_json(me.se())},
                                {"se_window", matrix_to_json(me.se_window)},
                                {"n_windows", me.n_windows},
                                {"n_paths", me.n_paths},
                                {"delta_t", em_dt}};
            print_matrix_json(out, j);
        } else if (ss->parsed()) {
            const Resolved r = resolve_model(ss_m);
            if (ss_paths < 1) throw ConfigError("--paths must be at least 1");
            const DataSource src = parse_source(ss_data);
            std::vector<ObservationPath> paths;
            paths.reserve(ss_paths);
            for (std::size_t i = 0; i < ss_paths; ++i)
                paths.push_back(simulate_data(r, src, ss_T, ss_dtau, trial_seed(ss_seed, i)).x);
            const SubsampleDiagnostic diag = subsample_diagnostic(paths, ss_dts, parse_norm(ss_norm));
            out << "delta_t,h,stderr\n";
            for (std::size_t i = 0; i < diag.delta_t.size(); ++i)
                out << diag.delta_t[i] << ',' << diag.h[i] << ',' << diag.se[i] << '\n';
        } else if (ex->parsed()) {
            ExperimentConfig cfg;
            if (ex_name == "fig2") cfg = fig2_defaults();
            else if (ex_name == "fig3") cfg = fig3_defaults();
            else if (ex_name == "filtered") cfg = filtered_defaults();
            else throw ConfigError("unknown experiment '" + ex_name + "' (fig2|fig3|filtered)");
            if (!ex_config.empty()) cfg = load_experiment_config(ex_config, cfg);
            if (!ex_m.model_file.empty() || ex_m.epsilon_opt->count() > 0 || ex_m.beta_opt->count() > 0 ||
                ex_m.preset != "baseline") {
                const Resolved r = resolve_model(ex_m);
                if (!ex_m.model_file.empty()) cfg.model = r.model;
                if (!ex_m.model_file.empty() || ex_m.beta_opt->count() > 0) cfg.M = r.M;
                if (!ex_m.model_file.empty() || ex_m.epsilon_opt->count() > 0) cfg.epsilon = r.epsilon;
            }
            if (ex_full) cfg.n_trials = 10000;
            if (ex_trials_opt->count() > 0) cfg.n_trials = ex_trials;
            if (ex_seed_opt->count() > 0) cfg.master_seed = ex_seed;
            if (ex_workers_opt->count() > 0) cfg.workers = ex_workers;
            if (ex_dtau_opt->count() > 0) cfg.delta_tau = ex_dtau;
            if (ex_delta_opt->count() > 0) cfg.filter.delta = ex_delta;
            if (ex_dn_opt->count() > 0) cfg.filter.delta_noise = ex_delta_noise;
            if (ex_dt_opt->count() > 0) {
                for (auto& s : cfg.schemes) s.scheme.delta_t = ex_dt;
                const double r = cfg.report_dt / ex_dt;
                if (std::abs(r - std::round(r)) > 1e-9 * std::max(1.0, r) || r < 1.0) cfg.report_dt = ex_dt;
            }
            cfg.output_dir = output_root(ex_out);
            const ExperimentResult res = run_monte_carlo(cfg);
            for (const auto& st : res.stats) {
                const std::size_t k = st.times.size() - 1;
                out << st.name << ": m_hat_T=" << st.m_hat[k] << " se_m_T=" << st.se_m[k]
                    << " p_hat_T=" << st.p_hat[k] << " sigma_analytic_T=" << st.sigma_analytic[k]
                    << " m_analytic_T=" << st.m_analytic[k] << '\n';
            }
            if (res.m_est_mean) {
                const Matrix& m = *res.m_est_mean;
                out << "m_est=[[" << m(0, 0) << ',' << m(0, 1) << "],[" << m(1, 0) << ',' << m(1, 1) << "]]\n";
            }
            out << "runtime_seconds=" << res.runtime_seconds << '\n';
            out << "output=" << (std::filesystem::path(cfg.output_dir) / cfg.name).string() << '\n';
        }
    } catch (const Error& e) {
        err << "enkbf: error[" << category_name(e.category()) << "]: " << one_line(e.what()) << '\n';
        switch (e.category()) {
        case ErrorCategory::config: return exit_config;
        case ErrorCategory::numeric: return exit_numeric;
        case ErrorCategory::io: return exit_io;
        }
    } catch (const std::exception& e) {
        err << "enkbf: error[numeric]: " << one_line(e.what()) << '\n';
        return exit_numeric;
    }
    return exit_ok;
}

} // namespace enkbf
