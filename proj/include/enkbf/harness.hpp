#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "enkbf/estimators.hpp"
#include "enkbf/models.hpp"

namespace enkbf {

enum class DataSource { reference, two_scale };
enum class Correction { none, true_M, estimated_M };

struct SchemeSpec {
    std::string name;
    SchemeConfig scheme;
    DataSource data = DataSource::reference;
    Correction correction = Correction::none;
    bool filtered = false;
};

struct ExperimentConfig {
    std::string name = "experiment";
    LinearModel model = baseline_model();
    Matrix M = rotation_M(2.0);
    double epsilon = 0.01;
    std::vector<SchemeSpec> schemes;
    GaussianPosterior prior{0.0, 4.0};
    double T = 6.0;
    double delta_tau = 1e-4;
    double report_dt = 0.06;
    double m_est_dt = 0.06;     // window for per-path M estimates
    std::size_t n_trials = 2000;
    std::uint64_t master_seed = 1;
    FilterConfig filter{};
    std::string output_dir;     // empty: no files written
    unsigned workers = 0;       // 0: hardware concurrency

    void validate() const;
    bool needs_two_scale() const;
};

struct AggregateStats {
    std::string name;
    std::vector<double> times;
    std::vector<double> m_hat;
    std::vector<double> p_hat;       // population variance over trials
    std::vector<double> se_m;        // √(p̂/N)
    std::vector<double> se_p;        // standard error of p̂
    std::vector<double> sigma_mean;  // trial average of σ_t
    std::vector<double> sigma_analytic;
    std::vector<double> m_analytic;
    std::vector<double> terminal_mu; // per trial, in trial order
    std::size_t n_trials = 0;
};

struct ExperimentResult {
    std::vector<AggregateStats> stats;
    std::vector<std::uint64_t> trial_seeds;
    std::optional<Matrix> m_est_mean;   // average of per-path estimates
    std::optional<Matrix> m_est_se;
    std::optional<Matrix> c_tilde;
    double runtime_seconds = 0.0;
    nlohmann::json summary;

    const AggregateStats& scheme(const std::string& name) const;
};

std::uint64_t trial_seed(std::uint64_t master_seed, std::size_t trial);

/// Runs every scheme on the same sampled path(s) for each trial and
/// aggregates the traces on the report grid. Output files are written when
/// output_dir is set.
ExperimentResult run_monte_carlo(const ExperimentConfig& config);

ExperimentConfig fig2_defaults();
ExperimentConfig fig3_defaults();
ExperimentConfig filtered_defaults();

ExperimentResult experiment_fig2(const ExperimentConfig& config = fig2_defaults());
ExperimentResult experiment_fig3(const ExperimentConfig& config = fig3_defaults());
ExperimentResult experiment_filtered(const ExperimentConfig& config = filtered_defaults());

/// Fields absent from `j` keep the values already in `base`.
ExperimentConfig experiment_config_from_json(const nlohmann::json& j, ExperimentConfig base);
ExperimentConfig load_experiment_config(const std::string& path, ExperimentConfig base);

/// Output files: <dir>/<scheme>.csv and <dir>/summary.json.
void write_experiment_outputs(const ExperimentResult& result, const std::string& dir);

} // namespace enkbf
