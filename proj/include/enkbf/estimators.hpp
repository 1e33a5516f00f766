#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "enkbf/models.hpp"
#include "enkbf/paths.hpp"

namespace enkbf {

struct GaussianPosterior {
    double mu = 0.0;
    double sigma = 0.0;
};

enum class SchemeVariant { subsampled, high_freq, high_freq_corrected, strat_midpoint };
enum class GainMode { exact, approx };

const char* variant_name(SchemeVariant v);
SchemeVariant parse_variant(const std::string& name);

struct SchemeConfig {
    SchemeVariant variant = SchemeVariant::subsampled;
    double delta_t = 0.06;
    std::optional<Matrix> correction_M;
    GainMode gain_mode = GainMode::exact;
    std::optional<Matrix> approx_covariance;   // C in the approx gain

    void validate(int d) const;
    /// L with delta_t = L·delta_tau.
    std::size_t inner_steps(double delta_tau) const;
};

/// exact: σ(Ax)ᵀ / (γ + Δt σ (Ax)ᵀ(Ax)); approx: σ(Ax)ᵀ / (γ + Δt σ (AᵀA):C).
Eigen::RowVectorXd kalman_gain(double sigma, const Vector& x, const Matrix& A, double gamma,
                               double delta_t, GainMode mode, const Matrix* C = nullptr);

GaussianPosterior enkbf_step_subsampled(const GaussianPosterior& post, const Vector& x_n,
                                        const Vector& x_np1, const Matrix& A, double gamma,
                                        const SchemeConfig& cfg);

/// One outer step on the fine window [n_from, n_from + L] of `path`.
GaussianPosterior enkbf_step_highfreq(const GaussianPosterior& post, const ObservationPath& path,
                                      std::size_t n_from, const Matrix& A, double gamma,
                                      const SchemeConfig& cfg);

GaussianPosterior enkbf_step_strat(const GaussianPosterior& post, const ObservationPath& path,
                                   std::size_t n_from, const Matrix& A, double gamma,
                                   const SchemeConfig& cfg);

struct EstimatorTrace {
    std::vector<double> times;
    std::vector<double> mu;
    std::vector<double> sigma;
};

EstimatorTrace run_estimator(const ObservationPath& path, const SchemeConfig& cfg,
                             const GaussianPosterior& prior, const Matrix& A, double gamma);

/// Gain from A·Z, innovation from dX. With z_path identical to x_path this is
/// the uncorrected high-frequency scheme.
EstimatorTrace run_filtered_estimator(const ObservationPath& x_path, const ObservationPath& z_path,
                                      const SchemeConfig& cfg, const GaussianPosterior& prior,
                                      const Matrix& A, double gamma);

enum class InnovationKind { deterministic, stochastic };

using PriorSampler = std::function<double(std::mt19937_64&)>;
PriorSampler gaussian_prior(double mean, double variance);

/// Interacting particle system; the trace holds the empirical mean and
/// (population) variance. A collapsed ensemble has zero gain.
EstimatorTrace run_ensemble(const ObservationPath& path, const SchemeConfig& cfg,
                            const PriorSampler& prior, std::size_t n_particles, std::uint64_t seed,
                            const Matrix& A, double gamma,
                            InnovationKind kind = InnovationKind::deterministic);

struct SgdTrace {
    std::vector<double> times;
    std::vector<double> theta;
    std::vector<double> alpha;
};

/// α_t = min(ᾱ, 1/(c t)), c = (AᵀA):C/γ.
double sgd_learning_rate(double alpha_bar, double c, double t);

/// θ ← θ + (α/γ)[J − θ (Ax)ᵀ(Ax) Δt]. J is the increment form for
/// subsampled, the inner sum for high_freq, and the inner sum minus
/// (γΔt/2)Aᵀ:M for high_freq_corrected.
SgdTrace run_sgd(const ObservationPath& path, const SchemeConfig& cfg, double alpha_bar,
                 double theta_0, const Matrix& A, double gamma);

void write_trace_csv(std::ostream& out, const EstimatorTrace& trace);
void write_trace_csv(const std::string& file, const EstimatorTrace& trace);

} // namespace enkbf
