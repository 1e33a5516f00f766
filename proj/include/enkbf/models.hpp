#pragma once

#include <Eigen/Dense>

namespace enkbf {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class NormalityPolicy { enforce, warn };

/// Linear SDE dX = θ A X dt + γ^{1/2} dW with θ† = 1.
///
/// A must be normal with spectrum in the open left half plane; these are the
/// conditions under which C = −γ(A + Aᵀ)⁻¹ is the stationary covariance.
class LinearModel {
public:
    LinearModel(Matrix A, double gamma, NormalityPolicy policy = NormalityPolicy::enforce);

    const Matrix& A() const { return A_; }
    double gamma() const { return gamma_; }
    int dim() const { return static_cast<int>(A_.rows()); }

private:
    Matrix A_;
    double gamma_;
};

/// Slow variable driven through a fast OU process P with scale ε.
class TwoScaleModel {
public:
    TwoScaleModel(LinearModel base, Matrix M, double epsilon);

    const LinearModel& base() const { return base_; }
    const Matrix& M() const { return M_; }
    double epsilon() const { return epsilon_; }

    /// ε (M + Mᵀ)⁻¹
    Matrix fast_covariance() const;

private:
    LinearModel base_;
    Matrix M_;
    double epsilon_;
};

struct FilterConfig {
    double delta = 0.1;
    int delta_noise = 0;

    void validate() const;
};

/// Stationary second moments of the joint (X, Z) system, Σxz = E[X Zᵀ].
struct ExtendedStationaryCovariance {
    Matrix sigma_xx;
    Matrix sigma_xz;
    Matrix sigma_zz;
    Matrix c_tilde;
};

/// ‖AAᵀ − AᵀA‖_F
double normality_residual(const Matrix& A);

/// ‖AC + CAᵀ + γI‖_F
double lyapunov_residual(const Matrix& A, const Matrix& C, double gamma);

/// C = −γ(A + Aᵀ)⁻¹, verified against the Lyapunov equation.
Matrix stationary_covariance(const LinearModel& model);

/// Solves F X + X Fᵀ + Q = 0 by Bartels–Stewart on the complex Schur form of F.
Matrix solve_lyapunov(const Matrix& F, const Matrix& Q);

/// tr(AᵀB)
double frobenius(const Matrix& A, const Matrix& B);

/// [[1, β], [−β, 1]]
Matrix rotation_M(double beta);

/// Centered first difference on a periodic grid of d points with spacing dy.
Matrix periodic_centered_difference(int d, double dy);

struct SpdeDiscretization {
    Matrix A;
    double gamma;
};

/// Raw semi-discretization −(U D + ρ D Dᵀ) of the periodic advection–diffusion
/// SPDE, no stability checks. Constants (and, for even d, the alternating
/// grid mode) lie in the kernel of D, so A is singular whenever damping = 0.
SpdeDiscretization spde_drift(double U, double rho, double L_domain, int d, double damping = 0.0);

/// LinearModel for the discretized SPDE with an optional uniform damping
/// −κ u. Throws if the result is not strictly dissipative.
LinearModel spde_advection_diffusion(double U, double rho, double L_domain, int d,
                                     double damping = 0.0);

/// Stationary covariance of dX = AX dt + γ^{1/2}dW, dZ = δ⁻¹(X − Z)dt + δ_noise √2 dV.
ExtendedStationaryCovariance extended_stationary_covariance(const LinearModel& model,
                                                            const FilterConfig& filter);

/// Two-dimensional baseline: γ = 1, A = −½[[1, −1], [1, 1]], so C = I.
LinearModel baseline_model();

} // namespace enkbf
