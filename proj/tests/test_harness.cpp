// Monte Carlo experiment harness tests
#include <cmath>
#include <filesystem>
#include <fstream>
#include <gtest/gtest.h>
#include <sstream>

#include "enkbf/errors.hpp"
#include "enkbf/harness.hpp"

using namespace enkbf;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

fs::path scratch_dir(const std::string& tag) {
    const fs::path dir = fs::temp_directory_path() / ("enkbf_harness_" + tag);
    fs::remove_all(dir);
    return dir;
}

ExperimentConfig small_fig2(std::size_t n, unsigned workers = 1) {
    ExperimentConfig c = fig2_defaults();
    c.n_trials = n;
    c.workers = workers;
    c.delta_tau = 1e-3;
    return c;
}

double variance(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m += x;
    m /= v.size();
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / v.size();
}

} // namespace

// =============================================================================
// Aggregation
// =============================================================================

TEST(MonteCarlo, SingleTrialHasZeroSpread) {
    const ExperimentConfig cfg = small_fig2(1);
    const ExperimentResult res = run_monte_carlo(cfg);
    const ObservationPath path = simulate_reference(cfg.model, cfg.T, cfg.delta_tau, trial_seed(cfg.master_seed, 0));
    const EstimatorTrace tr = run_estimator(path, cfg.schemes[0].scheme, cfg.prior, cfg.model.A(), cfg.model.gamma());
    const AggregateStats& st = res.scheme("subsampled");
    ASSERT_EQ(st.m_hat.size(), tr.mu.size());
    for (std::size_t k = 0; k < tr.mu.size(); ++k) {
        EXPECT_EQ(st.m_hat[k], tr.mu[k]);
        EXPECT_EQ(st.p_hat[k], 0.0);
        EXPECT_EQ(st.se_m[k], 0.0);
    }
}

TEST(MonteCarlo, StandardErrorDefinition) {
    const ExperimentResult res = run_monte_carlo(small_fig2(50));
    for (const auto& st : res.stats)
        for (std::size_t k = 0; k < st.times.size(); ++k) {
            EXPECT_GE(st.p_hat[k], 0.0);
            EXPECT_DOUBLE_EQ(st.se_m[k], std::sqrt(st.p_hat[k] / 50.0));
        }
}

TEST(MonteCarlo, StandardErrorScaling) {
    const double a = run_monte_carlo(small_fig2(100)).stats[0].se_m.back();
    ExperimentConfig big = small_fig2(400);
    big.master_seed = 2;
    const double b = run_monte_carlo(big).stats[0].se_m.back();
    EXPECT_NEAR(a / b, 2.0, 0.4);
}

TEST(MonteCarlo, PairedDifferenceHasSmallVariance) {
    const ExperimentResult res = run_monte_carlo(small_fig2(200));
    const auto& a = res.stats[0].terminal_mu;
    const auto& b = res.stats[1].terminal_mu;
    std::vector<double> diff(a.size());
    for (std::size_t k = 0; k < a.size(); ++k) diff[k] = a[k] - b[k];
    EXPECT_LT(variance(diff), variance(a) + variance(b));
}

TEST(MonteCarlo, TrialSeedsAreDerived) {
    const ExperimentResult res = run_monte_carlo(small_fig2(5));
    ASSERT_EQ(res.trial_seeds.size(), 5u);
    for (std::size_t t = 0; t < 5; ++t) EXPECT_EQ(res.trial_seeds[t], trial_seed(1, t));
    EXPECT_NE(trial_seed(1, 0), trial_seed(1, 1));
    EXPECT_NE(trial_seed(1, 0), trial_seed(2, 0));
}

// =============================================================================
// Reproducibility
// =============================================================================

TEST(Reproducibility, IndependentOfWorkerCount) {
    const fs::path d1 = scratch_dir("w1"), d3 = scratch_dir("w3");
    ExperimentConfig c1 = small_fig2(30, 1), c3 = small_fig2(30, 3);
    c1.output_dir = d1.string();
    c3.output_dir = d3.string();
    run_monte_carlo(c1);
    run_monte_carlo(c3);
    for (const char* f : {"subsampled.csv", "highfreq.csv"})
        EXPECT_EQ(slurp(d1 / "fig2" / f), slurp(d3 / "fig2" / f)) << f;
    auto s1 = nlohmann::json::parse(slurp(d1 / "fig2" / "summary.json"));
    auto s3 = nlohmann::json::parse(slurp(d3 / "fig2" / "summary.json"));
    s1.erase("runtime_seconds");
    s3.erase("runtime_seconds");
    EXPECT_EQ(s1, s3);
    fs::remove_all(d1);
    fs::remove_all(d3);
}

// =============================================================================
// Failures
// =============================================================================

TEST(Failures, TrialIndexAndSeedInMessage) {
    ExperimentConfig cfg = small_fig2(4);
    cfg.prior.mu = std::nan("");
    try {
        run_monte_carlo(cfg);
        FAIL() << "expected an error";
    } catch (const Error& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("trial 0"), std::string::npos) << msg;
        EXPECT_NE(msg.find("seed " + std::to_string(trial_seed(1, 0))), std::string::npos) << msg;
    }
}

TEST(Failures, ValidationErrors) {
    ExperimentConfig cfg = small_fig2(0);
    EXPECT_THROW(run_monte_carlo(cfg), ConfigError);
    cfg = small_fig2(2);
    cfg.schemes[1].name = cfg.schemes[0].name;
    EXPECT_THROW(run_monte_carlo(cfg), ConfigError);
    cfg = small_fig2(2);
    cfg.report_dt = 0.09;
    EXPECT_THROW(run_monte_carlo(cfg), ConfigError);
    cfg = fig3_defaults();
    cfg.delta_tau = 2e-3;
    EXPECT_THROW(run_monte_carlo(cfg), ConfigError);
}

// =============================================================================
// JSON configuration
// =============================================================================

TEST(JsonConfig, UnknownKeyRejected) {
    EXPECT_THROW(experiment_config_from_json(nlohmann::json{{"trials", 5}}, fig2_defaults()), ConfigError);
    const nlohmann::json bad_scheme = {{"schemes", {{{"name", "a"}, {"dt", 0.06}}}}};
    EXPECT_THROW(experiment_config_from_json(bad_scheme, fig2_defaults()), ConfigError);
}

TEST(JsonConfig, Overrides) {
    const nlohmann::json j = {{"n_trials", 12},
                              {"seed", 9},
                              {"beta", 3.0},
                              {"epsilon", 0.02},
                              {"prior", {{"variance", 2.0}}},
                              {"schemes", {{{"name", "only"}, {"variant", "high_freq_corrected"}, {"data", "two_scale"},
                                            {"correction", "true"}, {"delta_t", 0.12}}}}};
    const ExperimentConfig c = experiment_config_from_json(j, fig2_defaults());
    EXPECT_EQ(c.n_trials, 12u);
    EXPECT_EQ(c.master_seed, 9u);
    EXPECT_EQ(c.M, rotation_M(3.0));
    EXPECT_EQ(c.epsilon, 0.02);
    EXPECT_EQ(c.prior.sigma, 2.0);
    EXPECT_EQ(c.prior.mu, 0.0);
    ASSERT_EQ(c.schemes.size(), 1u);
    EXPECT_EQ(c.schemes[0].scheme.variant, SchemeVariant::high_freq_corrected);
    EXPECT_EQ(c.schemes[0].correction, Correction::true_M);
    EXPECT_EQ(c.schemes[0].scheme.delta_t, 0.12);
    EXPECT_EQ(c.T, 6.0);
}

TEST(JsonConfig, MissingFileIsIoError) {
    EXPECT_THROW(load_experiment_config("/nonexistent/config.json", fig2_defaults()), IoError);
}

// =============================================================================
// Presets and outputs
// =============================================================================

TEST(Presets, Fig2AnalyticOverlay) {
    const ExperimentResult res = run_monte_carlo(small_fig2(2));
    for (const auto& st : res.stats) {
        EXPECT_NEAR(st.times.back(), 6.0, 1e-12);
        EXPECT_NEAR(st.sigma_analytic.back(), 0.16, 1e-12);
        EXPECT_NEAR(st.m_analytic.back(), 0.96, 1e-12);
    }
}

TEST(Presets, Fig3BiasedOverlay) {
    ExperimentConfig cfg = fig3_defaults();
    cfg.n_trials = 2;
    cfg.T = 1.2;
    cfg.workers = 1;
    const ExperimentResult res = run_monte_carlo(cfg);
    EXPECT_NEAR(res.scheme("uncorrected").m_analytic.back(), -0.5 + 0.5 / (1.0 + 4.0 * 1.2), 1e-12);
    EXPECT_NEAR(res.scheme("subsampled").m_analytic.back(), 1.0 - 1.0 / (1.0 + 4.0 * 1.2), 1e-12);
    ASSERT_TRUE(res.m_est_mean.has_value());
    EXPECT_EQ(res.summary["epsilon"], 0.01);
}

TEST(Presets, OutputFiles) {
    const fs::path dir = scratch_dir("out");
    ExperimentConfig cfg = small_fig2(3);
    cfg.output_dir = dir.string();
    run_monte_carlo(cfg);
    for (const char* f : {"subsampled.csv", "highfreq.csv"}) {
        const std::string text = slurp(dir / "fig2" / f);
        EXPECT_EQ(text.substr(0, text.find('\n')), "t,m_hat,p_hat,se_m,sigma_analytic,m_analytic");
        EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 102);
    }
    const auto summary = nlohmann::json::parse(slurp(dir / "fig2" / "summary.json"));
    EXPECT_EQ(summary["n_trials"], 3);
    EXPECT_TRUE(summary["schemes"].contains("highfreq"));
    EXPECT_TRUE(summary.contains("runtime_seconds"));
    fs::remove_all(dir);
}

TEST(Presets, FilterNoiseSlowsVarianceDecay) {
    double c_tilde[2], sigma_end[2];
    for (int dn = 0; dn < 2; ++dn) {
        ExperimentConfig cfg = filtered_defaults();
        cfg.schemes.resize(1);
        cfg.n_trials = 10;
        cfg.T = 3.0;
        cfg.filter.delta_noise = dn;
        const ExperimentResult res = run_monte_carlo(cfg);
        ASSERT_TRUE(res.c_tilde.has_value());
        const Matrix A = cfg.model.A();
        c_tilde[dn] = frobenius(A.transpose() * A, *res.c_tilde);
        sigma_end[dn] = res.stats[0].sigma_mean.back();
        EXPECT_GT(res.stats[0].m_hat.back(), 0.5);
    }
    ASSERT_GT(std::abs(c_tilde[0] - c_tilde[1]), 1e-10 * c_tilde[0]);
    if (c_tilde[0] < c_tilde[1])
        EXPECT_GT(sigma_end[0], sigma_end[1]);
    else
        EXPECT_LT(sigma_end[0], sigma_end[1]);
}
