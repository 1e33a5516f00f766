#include "enkbf/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "enkbf/analysis.hpp"
#include "enkbf/errors.hpp"
#include "enkbf/model_io.hpp"
#include "enkbf/paths.hpp"
#include "enkbf/random.hpp"

namespace enkbf {

namespace {

bool is_multiple(double big, double small) {
    const double r = big / small;
    const double n = std::round(r);
    return n >= 1.0 && std::abs(r - n) <= 1e-9 * n;
}

std::size_t ratio_of(double big, double small) {
    return static_cast<std::size_t>(std::llround(big / small));
}

const char* source_name(DataSource s) { return s == DataSource::reference ? "reference" : "two_scale"; }

const char* correction_name(Correction c) {
    switch (c) {
    case Correction::none: return "none";
    case Correction::true_M: return "true";
    case Correction::estimated_M: return "estimated";
    }
    return "none";
}

// Pairwise summation; the result depends only on the order of `v`.
double pairwise_sum(const double* v, std::size_t n) {
    if (n <= 8) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += v[i];
        return s;
    }
    const std::size_t h = n / 2;
    return pairwise_sum(v, h) + pairwise_sum(v + h, n - h);
}

double pairwise_sum(const std::vector<double>& v) { return pairwise_sum(v.data(), v.size()); }

} // namespace

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

bool ExperimentConfig::needs_two_scale() const {
    return std::any_of(schemes.begin(), schemes.end(),
                       [](const SchemeSpec& s) { return s.data == DataSource::two_scale; });
}

void ExperimentConfig::validate() const {
    if (n_trials < 1) throw ConfigError("n_trials must be at least 1");
    if (schemes.empty()) throw ConfigError("experiment has no schemes");
    if (!(T > 0.0) || !(delta_tau > 0.0) || !(report_dt > 0.0))
        throw ConfigError("T, delta_tau and report_dt must be positive");
    if (!is_multiple(T, delta_tau)) throw ConfigError("T is not a multiple of delta_tau");
    if (!is_multiple(T, report_dt)) throw ConfigError("T is not a multiple of report_dt");
    if (!(prior.sigma >= 0.0)) throw ConfigError("prior variance must be nonnegative");
    filter.validate();

    std::set<std::string> names;
    bool any_filtered = false, any_estimated = false;
    for (const auto& s : schemes) {
        if (s.name.empty() || s.name.find_first_not_of(
                                  "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_-") !=
                                  std::string::npos)
            throw ConfigError("scheme name '" + s.name + "' must be non-empty [A-Za-z0-9_-]");
        if (!names.insert(s.name).second) throw ConfigError("duplicate scheme name '" + s.name + "'");
        const double dt = s.scheme.delta_t;
        if (!(dt > 0.0)) throw ConfigError(s.name + ": delta_t must be positive");
        if (!is_multiple(dt, delta_tau)) throw ConfigError(s.name + ": delta_t is not a multiple of delta_tau");
        if (!is_multiple(report_dt, dt))
            throw ConfigError(s.name + ": report_dt is not a multiple of delta_t");
        const bool corrected = s.scheme.variant == SchemeVariant::high_freq_corrected;
        if (corrected != (s.correction != Correction::none))
            throw ConfigError(s.name + ": a correction is used exactly by high_freq_corrected");
        if (s.filtered && s.scheme.variant != SchemeVariant::high_freq)
            throw ConfigError(s.name + ": filtered schemes use the high_freq variant");
        any_filtered |= s.filtered;
        any_estimated |= s.correction == Correction::estimated_M;
    }
    if (any_estimated && !is_multiple(T, m_est_dt))
        throw ConfigError("T is not a multiple of m_est_dt");
    if (any_estimated && !is_multiple(m_est_dt, delta_tau))
        throw ConfigError("m_est_dt is not a multiple of delta_tau");
    if (needs_two_scale()) {
        TwoScaleModel tsm(model, M, epsilon);
        if (delta_tau > epsilon / 10.0 * (1.0 + 1e-12))
            throw ConfigError("delta_tau must be at most epsilon/10 for two-scale data");
    }
    (void)any_filtered;
}

std::uint64_t trial_seed(std::uint64_t master_seed, std::size_t trial) {
    return derive_seed(master_seed, static_cast<std::uint64_t>(StreamTag::trial), trial);
}

const AggregateStats& ExperimentResult::scheme(const std::string& name) const {
    for (const auto& s : stats)
        if (s.name == name) return s;
    throw ConfigError("no scheme named '" + name + "' in the result");
}

// ---------------------------------------------------------------------------
// Monte Carlo
// ---------------------------------------------------------------------------

namespace {

struct TrialPaths {
    std::optional<ObservationPath> x[2];
    std::optional<ObservationPath> z[2];
    std::optional<Matrix> m_est[2];
};

struct Slots {
    std::size_t n_report = 0;
    // [scheme][trial * (n_report + 1) + k]
    std::vector<std::vector<double>> mu, sigma;
    // [source][trial] row-major d×d estimates
    std::vector<std::vector<double>> m_est;
};

void run_trial(const ExperimentConfig& cfg, std::size_t trial, Slots& slots) {
    const std::uint64_t seed = trial_seed(cfg.master_seed, trial);
    const LinearModel& model = cfg.model;
    const int d = model.dim();

    bool need[2] = {false, false}, need_z[2] = {false, false}, need_m[2] = {false, false};
    for (const auto& s : cfg.schemes) {
        const int k = static_cast<int>(s.data);
        need[k] = true;
        need_z[k] |= s.filtered;
        need_m[k] |= s.correction == Correction::estimated_M;
    }

    TrialPaths tp;
    const NoiseDriver drv = make_noise_driver(model, cfg.T, cfg.delta_tau, seed);
    if (need[0]) tp.x[0] = simulate_reference(model, drv);
    if (need[1]) {
        TwoScaleModel tsm(model, cfg.M, cfg.epsilon);
        tp.x[1] = simulate_two_scale(tsm, cfg.T, cfg.delta_tau, seed, &drv).x_path;
    }
    for (int k = 0; k < 2; ++k) {
        if (need_z[k]) tp.z[k] = simulate_filtered(*tp.x[k], cfg.filter, seed);
        if (need_m[k]) {
            tp.m_est[k] = estimate_M(*tp.x[k], cfg.m_est_dt, model.gamma()).M;
            double* out = slots.m_est[static_cast<std::size_t>(k)].data() +
                          trial * static_cast<std::size_t>(d * d);
            for (int i = 0; i < d; ++i)
                for (int j = 0; j < d; ++j) out[i * d + j] = (*tp.m_est[k])(i, j);
        }
    }

    const std::size_t stride_out = slots.n_report + 1;
    for (std::size_t si = 0; si < cfg.schemes.size(); ++si) {
        const SchemeSpec& s = cfg.schemes[si];
        const int k = static_cast<int>(s.data);
        SchemeConfig sc = s.scheme;
        if (s.correction == Correction::true_M) sc.correction_M = cfg.M;
        if (s.correction == Correction::estimated_M) sc.correction_M = *tp.m_est[k];
        if (sc.gain_mode == GainMode::approx && !sc.approx_covariance) {
            sc.approx_covariance = s.filtered
                                       ? extended_stationary_covariance(model, cfg.filter).c_tilde
                                       : stationary_covariance(model);
        }
        const EstimatorTrace tr =
            s.filtered ? run_filtered_estimator(*tp.x[k], *tp.z[k], sc, cfg.prior, model.A(), model.gamma())
                       : run_estimator(*tp.x[k], sc, cfg.prior, model.A(), model.gamma());
        const std::size_t stride = ratio_of(cfg.report_dt, sc.delta_t);
        double* mu = slots.mu[si].data() + trial * stride_out;
        double* sg = slots.sigma[si].data() + trial * stride_out;
        for (std::size_t r = 0; r <= slots.n_report; ++r) {
            mu[r] = tr.mu[r * stride];
            sg[r] = tr.sigma[r * stride];
        }
    }
}

struct Failure {
    std::size_t trial;
    ErrorCategory category;
    std::string message;
};

} // namespace

ExperimentResult run_monte_carlo(const ExperimentConfig& config) {
    config.validate();
    const auto start = std::chrono::steady_clock::now();
    const std::size_t N = config.n_trials;
    const int d = config.model.dim();

    Slots slots;
    slots.n_report = ratio_of(config.T, config.report_dt);
    const std::size_t row = slots.n_report + 1;
    slots.mu.assign(config.schemes.size(), std::vector<double>(N * row));
    slots.sigma.assign(config.schemes.size(), std::vector<double>(N * row));
    slots.m_est.assign(2, std::vector<double>());
    for (const auto& s : config.schemes)
        if (s.correction == Correction::estimated_M)
            slots.m_est[static_cast<std::size_t>(s.data)].assign(N * static_cast<std::size_t>(d * d), 0.0);

    unsigned workers = config.workers != 0 ? config.workers : std::max(1u, std::thread::hardware_concurrency());
    workers = static_cast<unsigned>(std::min<std::size_t>(workers, N));

    std::atomic<std::size_t> next{0};
    std::atomic<bool> abort{false};
    std::mutex fail_mu;
    std::optional<Failure> failure;
    auto worker = [&]() {
        for (;;) {
            if (abort.load()) return;
            const std::size_t t = next.fetch_add(1);
            if (t >= N) return;
            try {
                run_trial(config, t, slots);
            } catch (const Error& e) {
                std::lock_guard<std::mutex> lk(fail_mu);
                if (!failure || t < failure->trial) failure = Failure{t, e.category(), e.what()};
                abort = true;
            } catch (const std::exception& e) {
                std::lock_guard<std::mutex> lk(fail_mu);
                if (!failure || t < failure->trial) failure = Failure{t, ErrorCategory::numeric, e.what()};
                abort = true;
            }
        }
    };
    if (workers <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (failure) {
        std::ostringstream os;
        os << "trial " << failure->trial << " (seed " << trial_seed(config.master_seed, failure->trial)
           << ") failed: " << failure->message;
        throw Error(failure->category, os.str());
    }

    ExperimentResult res;
    for (std::size_t t = 0; t < N; ++t) res.trial_seeds.push_back(trial_seed(config.master_seed, t));

    const double c = learning_constant(config.model);
    std::optional<ExtendedStationaryCovariance> ext;
    if (std::any_of(config.schemes.begin(), config.schemes.end(), [](const SchemeSpec& s) { return s.filtered; })) {
        ext = extended_stationary_covariance(config.model, config.filter);
        res.c_tilde = ext->c_tilde;
    }
    const double b = bias_term(config.model.A(), config.M, config.model.gamma()) / config.model.gamma();

    const double Nd = static_cast<double>(N);
    std::vector<double> col(N), dev(N);
    for (std::size_t si = 0; si < config.schemes.size(); ++si) {
        const SchemeSpec& s = config.schemes[si];
        AggregateStats st;
        st.name = s.name;
        st.n_trials = N;
        double cs = c;
        if (s.filtered) cs = learning_constant(config.model.A(), ext->c_tilde, config.model.gamma());
        const bool biased = s.data == DataSource::two_scale && s.scheme.variant == SchemeVariant::high_freq &&
                            !s.filtered;
        for (std::size_t r = 0; r < row; ++r) {
            const double t = static_cast<double>(r) * config.report_dt;
            for (std::size_t k = 0; k < N; ++k) col[k] = slots.mu[si][k * row + r];
            const double m = pairwise_sum(col) / Nd;
            for (std::size_t k = 0; k < N; ++k) dev[k] = (col[k] - m) * (col[k] - m);
            const double p = pairwise_sum(dev) / Nd;
            for (std::size_t k = 0; k < N; ++k) dev[k] = (dev[k] - p) * (dev[k] - p);
            const double var_sq = pairwise_sum(dev) / Nd;
            for (std::size_t k = 0; k < N; ++k) col[k] = slots.sigma[si][k * row + r];
            const double sm = pairwise_sum(col) / Nd;

            st.times.push_back(t);
            st.m_hat.push_back(m);
            st.p_hat.push_back(p);
            st.se_m.push_back(std::sqrt(p / Nd));
            st.se_p.push_back(std::sqrt(var_sq / Nd));
            st.sigma_mean.push_back(sm);
            st.sigma_analytic.push_back(sigma_closed_form(config.prior.sigma, cs, t));
            st.m_analytic.push_back(biased ? biased_mean_closed_form(config.prior.sigma, config.prior.mu, cs, b, t)
                                           : mean_closed_form(config.prior.sigma, config.prior.mu, cs, t));
        }
        for (std::size_t k = 0; k < N; ++k) st.terminal_mu.push_back(slots.mu[si][k * row + row - 1]);
        res.stats.push_back(std::move(st));
    }

    for (int k = 0; k < 2; ++k) {
        const auto& v = slots.m_est[static_cast<std::size_t>(k)];
        if (v.empty()) continue;
        Matrix mean(d, d), se(d, d);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) {
                for (std::size_t t = 0; t < N; ++t) col[t] = v[t * static_cast<std::size_t>(d * d) + i * d + j];
                const double m = pairwise_sum(col) / Nd;
                for (std::size_t t = 0; t < N; ++t) dev[t] = (col[t] - m) * (col[t] - m);
                mean(i, j) = m;
                se(i, j) = N > 1 ? std::sqrt(pairwise_sum(dev) / (Nd - 1.0) / Nd) : 0.0;
            }
        res.m_est_mean = mean;
        res.m_est_se = se;
    }

    res.runtime_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    nlohmann::json j;
    j["experiment"] = config.name;
    j["master_seed"] = config.master_seed;
    j["n_trials"] = N;
    j["T"] = config.T;
    j["delta_tau"] = config.delta_tau;
    j["report_dt"] = config.report_dt;
    if (config.needs_two_scale()) {
        j["epsilon"] = config.epsilon;
        j["M"] = matrix_to_json(config.M);
    }
    j["runtime_seconds"] = res.runtime_seconds;
    j["trial_seeds"] = res.trial_seeds;
    nlohmann::json schemes = nlohmann::json::object();
    for (std::size_t si = 0; si < config.schemes.size(); ++si) {
        const SchemeSpec& s = config.schemes[si];
        const AggregateStats& st = res.stats[si];
        const std::size_t last = st.times.size() - 1;
        schemes[s.name] = {
            {"variant", variant_name(s.scheme.variant)},
            {"delta_t", s.scheme.delta_t},
            {"data", source_name(s.data)},
            {"correction", correction_name(s.correction)},
            {"filtered", s.filtered},
            {"terminal",
             {{"t", st.times[last]},
              {"m_hat", st.m_hat[last]},
              {"p_hat", st.p_hat[last]},
              {"se_m", st.se_m[last]},
              {"se_p", st.se_p[last]},
              {"sigma_mean", st.sigma_mean[last]},
              {"sigma_analytic", st.sigma_analytic[last]},
              {"m_analytic", st.m_analytic[last]}}}};
    }
    j["schemes"] = schemes;
    if (res.m_est_mean) j["m_est"] = {{"mean", matrix_to_json(*res.m_est_mean)}, {"se", matrix_to_json(*res.m_est_se)}};
    if (res.c_tilde) {
        j["c_tilde"] = matrix_to_json(*res.c_tilde);
        j["filter"] = {{"delta", config.filter.delta}, {"delta_noise", config.filter.delta_noise}};
    }
    res.summary = std::move(j);

    if (!config.output_dir.empty())
        write_experiment_outputs(res, (std::filesystem::path(config.output_dir) / config.name).string());
    return res;
}

void write_experiment_outputs(const ExperimentResult& result, const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory '" + dir + "': " + ec.message());
    for (const auto& st : result.stats) {
        const std::string file = (std::filesystem::path(dir) / (st.name + ".csv")).string();
        std::ofstream out(file);
        if (!out) throw IoError("cannot open '" + file + "' for writing");
        out << "t,m_hat,p_hat,se_m,sigma_analytic,m_analytic\n";
        out << std::setprecision(std::numeric_limits<double>::max_digits10);
        for (std::size_t r = 0; r < st.times.size(); ++r)
            out << st.times[r] << ',' << st.m_hat[r] << ',' << st.p_hat[r] << ',' << st.se_m[r] << ','
                << st.sigma_analytic[r] << ',' << st.m_analytic[r] << '\n';
        if (!out) throw IoError("write to '" + file + "' failed");
    }
    const std::string file = (std::filesystem::path(dir) / "summary.json").string();
    std::ofstream out(file);
    if (!out) throw IoError("cannot open '" + file + "' for writing");
    out << result.summary.dump(2) << '\n';
    if (!out) throw IoError("write to '" + file + "' failed");
}

// ---------------------------------------------------------------------------
// Presets
// ---------------------------------------------------------------------------

namespace {

SchemeSpec make_scheme(std::string name, SchemeVariant v, double dt, DataSource data,
                       Correction corr = Correction::none, bool filtered = false) {
    SchemeSpec s;
    s.name = std::move(name);
    s.scheme.variant = v;
    s.scheme.delta_t = dt;
    s.data = data;
    s.correction = corr;
    s.filtered = filtered;
    return s;
}

} // namespace

ExperimentConfig fig2_defaults() {
    ExperimentConfig c;
    c.name = "fig2";
    c.schemes = {make_scheme("subsampled", SchemeVariant::subsampled, 0.06, DataSource::reference),
                 make_scheme("highfreq", SchemeVariant::high_freq, 0.06, DataSource::reference)};
    return c;
}

ExperimentConfig fig3_defaults() {
    ExperimentConfig c;
    c.name = "fig3";
    const auto ts = DataSource::two_scale;
    c.schemes = {make_scheme("subsampled", SchemeVariant::subsampled, 0.06, ts),
                 make_scheme("corrected", SchemeVariant::high_freq_corrected, 0.06, ts, Correction::true_M),
                 make_scheme("corrected_mest", SchemeVariant::high_freq_corrected, 0.06, ts,
                             Correction::estimated_M),
                 make_scheme("uncorrected", SchemeVariant::high_freq, 0.06, ts)};
    return c;
}

ExperimentConfig filtered_defaults() {
    ExperimentConfig c;
    c.name = "filtered";
    c.n_trials = 100;
    c.schemes = {make_scheme("reference", SchemeVariant::high_freq, 1e-4, DataSource::reference,
                             Correction::none, true),
                 make_scheme("two_scale", SchemeVariant::high_freq, 1e-4, DataSource::two_scale,
                             Correction::none, true)};
    return c;
}

ExperimentResult experiment_fig2(const ExperimentConfig& config) { return run_monte_carlo(config); }
ExperimentResult experiment_fig3(const ExperimentConfig& config) { return run_monte_carlo(config); }
ExperimentResult experiment_filtered(const ExperimentConfig& config) { return run_monte_carlo(config); }

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

namespace {

double get_number(const nlohmann::json& j, const char* key) {
    if (!j[key].is_number()) throw ConfigError(std::string("config: '") + key + "' must be a number");
    return j[key].get<double>();
}

std::uint64_t get_count(const nlohmann::json& j, const char* key) {
    if (!j[key].is_number_unsigned() && !(j[key].is_number_integer() && j[key].get<long long>() >= 0))
        throw ConfigError(std::string("config: '") + key + "' must be a nonnegative integer");
    return j[key].get<std::uint64_t>();
}

SchemeSpec scheme_from_json(const nlohmann::json& j) {
    static const std::set<std::string> known = {"name", "variant", "delta_t", "data",
                                                "correction", "filtered", "gain_mode"};
    if (!j.is_object()) throw ConfigError("config: each scheme must be an object");
    for (const auto& [k, v] : j.items())
        if (!known.count(k)) throw ConfigError("config: unknown scheme field '" + k + "'");
    SchemeSpec s;
    if (!j.contains("name") || !j["name"].is_string()) throw ConfigError("config: scheme needs a name");
    s.name = j["name"].get<std::string>();
    s.scheme.variant = parse_variant(j.value("variant", std::string("subsampled")));
    if (j.contains("delta_t")) s.scheme.delta_t = get_number(j, "delta_t");
    const std::string data = j.value("data", std::string("reference"));
    if (data == "reference") s.data = DataSource::reference;
    else if (data == "two_scale") s.data = DataSource::two_scale;
    else throw ConfigError("config: unknown data source '" + data + "'");
    const std::string corr = j.value("correction", std::string("none"));
    if (corr == "none") s.correction = Correction::none;
    else if (corr == "true") s.correction = Correction::true_M;
    else if (corr == "estimated") s.correction = Correction::estimated_M;
    else throw ConfigError("config: unknown correction '" + corr + "'");
    s.filtered = j.value("filtered", false);
    const std::string gm = j.value("gain_mode", std::string("exact"));
    if (gm == "exact") s.scheme.gain_mode = GainMode::exact;
    else if (gm == "approx") s.scheme.gain_mode = GainMode::approx;
    else throw ConfigError("config: unknown gain_mode '" + gm + "'");
    return s;
}

} // namespace

ExperimentConfig experiment_config_from_json(const nlohmann::json& j, ExperimentConfig c) {
    static const std::set<std::string> known = {
        "name", "model", "M", "beta", "epsilon", "T", "delta_tau", "report_dt", "m_est_dt",
        "n_trials", "seed", "prior", "filter", "output_dir", "workers", "schemes"};
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    for (const auto& [k, v] : j.items())
        if (!known.count(k)) throw ConfigError("config: unknown field '" + k + "'");
    try {
        if (j.contains("name")) c.name = j["name"].get<std::string>();
        if (j.contains("model")) {
            ModelSpec spec = model_from_json(j["model"]);
            if (auto* ts = std::get_if<TwoScaleModel>(&spec)) {
                c.model = ts->base();
                c.M = ts->M();
                c.epsilon = ts->epsilon();
            } else {
                c.model = std::get<LinearModel>(spec);
            }
        }
        if (j.contains("beta")) c.M = rotation_M(get_number(j, "beta"));
        if (j.contains("M")) c.M = matrix_from_json(j["M"], "M");
        if (j.contains("epsilon")) c.epsilon = get_number(j, "epsilon");
        if (j.contains("T")) c.T = get_number(j, "T");
        if (j.contains("delta_tau")) c.delta_tau = get_number(j, "delta_tau");
        if (j.contains("report_dt")) c.report_dt = get_number(j, "report_dt");
        if (j.contains("m_est_dt")) c.m_est_dt = get_number(j, "m_est_dt");
        if (j.contains("n_trials")) c.n_trials = get_count(j, "n_trials");
        if (j.contains("seed")) c.master_seed = get_count(j, "seed");
        if (j.contains("workers")) c.workers = static_cast<unsigned>(get_count(j, "workers"));
        if (j.contains("output_dir")) c.output_dir = j["output_dir"].get<std::string>();
        if (j.contains("prior")) {
            const auto& p = j["prior"];
            if (p.contains("mean")) c.prior.mu = get_number(p, "mean");
            if (p.contains("variance")) c.prior.sigma = get_number(p, "variance");
        }
        if (j.contains("filter")) {
            const auto& f = j["filter"];
            if (f.contains("delta")) c.filter.delta = get_number(f, "delta");
            if (f.contains("delta_noise")) c.filter.delta_noise = static_cast<int>(get_count(f, "delta_noise"));
        }
        if (j.contains("schemes")) {
            if (!j["schemes"].is_array()) throw ConfigError("config: 'schemes' must be an array");
            c.schemes.clear();
            for (const auto& s : j["schemes"]) c.schemes.push_back(scheme_from_json(s));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return c;
}

ExperimentConfig load_experiment_config(const std::string& path, ExperimentConfig base) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("config: invalid JSON: ") + e.what());
    }
    return experiment_config_from_json(j, std::move(base));
}

} // namespace enkbf
