#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "enkbf/models.hpp"
#include "enkbf/paths.hpp"

namespace enkbf {

/// (AᵀA):C/γ
double learning_constant(const LinearModel& model);
double learning_constant(const Matrix& A, const Matrix& C, double gamma);

/// σ_t = σ₀/(1 + cσ₀t)
double sigma_closed_form(double sigma_0, double c, double t);

/// m_t = 1 − (1 − m₀)σ_t/σ₀
double mean_closed_form(double sigma_0, double m_0, double c, double t);

/// p_t = cσ_t²t, the solution with p₀ = 0.
double variance_closed_form(double sigma_0, double c, double t);

struct FrequentistMoments {
    std::vector<double> times;
    std::vector<double> m;
    std::vector<double> p;
    std::vector<double> sigma;
    double c = 0.0;
};

/// RK4 (step ≤ dt_grid/10, finer when 2cσ₀ is large) of dm/dt = cσ_t(1 − m), dp/dt = −2cσ_t p + cσ_t²,
/// p₀ = 0, reported on t_n = n·dt_grid. For m₀ = 0 the result is checked
/// against the closed forms.
FrequentistMoments frequentist_moments(double sigma_0, double m_0, double c, double T, double dt_grid);

struct MeanTrajectory {
    std::vector<double> times;
    std::vector<double> m;
};

/// RK4 of dm/dt = σ_t[c(1 − m) + b].
MeanTrajectory biased_frequentist_mean(double sigma_0, double m_0, double c, double b, double T,
                                       double dt_grid);

/// m* + (m₀ − m*)σ_t/σ₀ with m* = 1 + b/c.
double biased_mean_closed_form(double sigma_0, double m_0, double c, double b, double t);

/// (γ/2)Aᵀ:M
double bias_term(const Matrix& A, const Matrix& M, double gamma);

struct MEstimate {
    Matrix M;
    Matrix se_window;   // from the pooled window samples
    Matrix se_path;     // from per-path means; NaN with a single path
    std::size_t n_windows = 0;
    std::size_t n_paths = 0;

    /// se_path when available, otherwise se_window.
    const Matrix& se() const;
};

/// (2/(Δtγ)) × mean of the second-order iterated integrals over consecutive
/// windows of length Δt, pooled across the given paths.
MEstimate estimate_M(std::span<const ObservationPath> paths, double delta_t, double gamma);
MEstimate estimate_M(const ObservationPath& path, double delta_t, double gamma);

enum class MatrixNorm { frobenius, spectral };
const char* norm_name(MatrixNorm n);
MatrixNorm parse_norm(const std::string& name);
double matrix_norm(const Matrix& m, MatrixNorm n);

struct SubsampleDiagnostic {
    std::vector<double> delta_t;
    std::vector<double> h;
    std::vector<double> se;
    std::vector<std::size_t> n_windows;
    MatrixNorm norm = MatrixNorm::spectral;
};

/// h(Δt) = Δt⁻²‖E[X_{t_n,t_{n+1}} ⊗ X_{t_{n+1},t_{n+2}}]‖ with the expectation
/// taken over consecutive windows on every path. The SE is a delta-method
/// estimate built from per-path means (window samples with a single path).
SubsampleDiagnostic subsample_diagnostic(std::span<const ObservationPath> paths,
                                         const std::vector<double>& delta_ts,
                                         MatrixNorm norm = MatrixNorm::spectral);

} // namespace enkbf
