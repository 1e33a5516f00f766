#include "enkbf/models.hpp"

#include <cmath>
#include <complex>
#include <iostream>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "enkbf/errors.hpp"

namespace enkbf {

namespace {

bool all_finite(const Matrix& m) { return m.allFinite(); }

void require_square(const Matrix& m, const char* name) {
    if (m.rows() == 0 || m.rows() != m.cols()) {
        std::ostringstream os;
        os << name << " must be a non-empty square matrix, got " << m.rows() << "x" << m.cols();
        throw ConfigError(os.str());
    }
}

} // namespace

// ---------------------------------------------------------------------------
// LinearModel / TwoScaleModel / FilterConfig
// ---------------------------------------------------------------------------

LinearModel::LinearModel(Matrix A, double gamma, NormalityPolicy policy)
    : A_(std::move(A)), gamma_(gamma) {
    require_square(A_, "A");
    if (!all_finite(A_)) throw ConfigError("A has non-finite entries");
    if (!(gamma_ > 0.0) || !std::isfinite(gamma_)) throw ConfigError("gamma must be positive");

    Eigen::EigenSolver<Matrix> es(A_, false);
    if (es.info() != Eigen::Success) throw NumericError("eigenvalue solve for A failed");
    const double max_re = es.eigenvalues().real().maxCoeff();
    if (!(max_re < -1e-12 * std::max(1.0, A_.norm()))) {
        std::ostringstream os;
        os << "A has an eigenvalue with nonnegative real part (max Re = " << max_re << ")";
        throw ConfigError(os.str());
    }

    const double scale = A_.squaredNorm();
    const double resid = normality_residual(A_);
    if (resid > 1e-10 * scale) {
        std::ostringstream os;
        os << "A is not normal (‖AAᵀ − AᵀA‖_F = " << resid << ")";
        if (policy == NormalityPolicy::enforce) throw ConfigError(os.str());
        std::cerr << "warning: " << os.str() << "; stationary covariance formula is invalid\n";
    }
}

TwoScaleModel::TwoScaleModel(LinearModel base, Matrix M, double epsilon)
    : base_(std::move(base)), M_(std::move(M)), epsilon_(epsilon) {
    require_square(M_, "M");
    if (M_.rows() != base_.dim()) throw ConfigError("M and A dimensions differ");
    if (!all_finite(M_)) throw ConfigError("M has non-finite entries");
    if (!(epsilon_ > 0.0) || !std::isfinite(epsilon_)) throw ConfigError("epsilon must be positive");
    const Matrix sym = M_ + M_.transpose();
    Eigen::SelfAdjointEigenSolver<Matrix> es(sym, Eigen::EigenvaluesOnly);
    if (!(es.eigenvalues().minCoeff() > 0.0))
        throw ConfigError("M + Mᵀ must be positive definite");
}

Matrix TwoScaleModel::fast_covariance() const {
    const Matrix sym = M_ + M_.transpose();
    return epsilon_ * sym.inverse();
}

void FilterConfig::validate() const {
    if (!(delta > 0.0) || !std::isfinite(delta)) throw ConfigError("filter delta must be positive");
    if (delta_noise != 0 && delta_noise != 1) throw ConfigError("delta_noise must be 0 or 1");
}

// ---------------------------------------------------------------------------
// Matrix utilities
// ---------------------------------------------------------------------------

double normality_residual(const Matrix& A) {
    return (A * A.transpose() - A.transpose() * A).norm();
}

double lyapunov_residual(const Matrix& A, const Matrix& C, double gamma) {
    const auto d = A.rows();
    return (A * C + C * A.transpose() + gamma * Matrix::Identity(d, d)).norm();
}

double frobenius(const Matrix& A, const Matrix& B) {
    if (A.rows() != B.rows() || A.cols() != B.cols()) {
        std::ostringstream os;
        os << "frobenius: shape mismatch " << A.rows() << "x" << A.cols() << " vs " << B.rows()
           << "x" << B.cols();
        throw ConfigError(os.str());
    }
    return (A.array() * B.array()).sum();
}

Matrix rotation_M(double beta) {
    Matrix M(2, 2);
    M << 1.0, beta, -beta, 1.0;
    return M;
}

Matrix stationary_covariance(const LinearModel& model) {
    const Matrix& A = model.A();
    const Matrix S = A + A.transpose();
    Eigen::FullPivLU<Matrix> lu(S);
    if (!lu.isInvertible()) throw NumericError("drift not dissipative: A + Aᵀ is singular");
    Matrix C = -model.gamma() * lu.inverse();
    C = 0.5 * (C + C.transpose());

    const double resid = lyapunov_residual(A, C, model.gamma());
    const double scale = std::max(1.0, A.norm() * C.norm());
    if (!(resid <= 1e-10 * scale)) {
        std::ostringstream os;
        os << "stationary covariance fails the Lyapunov equation (residual " << resid << ")";
        throw NumericError(os.str());
    }
    return C;
}

Matrix solve_lyapunov(const Matrix& F, const Matrix& Q) {
    require_square(F, "F");
    if (Q.rows() != F.rows() || Q.cols() != F.cols()) throw ConfigError("Q must match F");
    using Complex = std::complex<double>;
    using CMatrix = Eigen::MatrixXcd;

    const auto n = F.rows();
    Eigen::ComplexSchur<Matrix> schur(F);
    if (schur.info() != Eigen::Success) throw NumericError("Schur decomposition failed");
    const CMatrix& U = schur.matrixU();
    const CMatrix& T = schur.matrixT();

    // T Y + Y Tᴴ = −Uᴴ Q U, solved column by column from the right.
    const CMatrix rhs = -(U.adjoint() * Q.cast<Complex>() * U);
    CMatrix Y = CMatrix::Zero(n, n);
    for (Eigen::Index j = n - 1; j >= 0; --j) {
        Eigen::VectorXcd b = rhs.col(j);
        for (Eigen::Index k = j + 1; k < n; ++k) b -= std::conj(T(j, k)) * Y.col(k);
        CMatrix shifted = T;
        shifted.diagonal().array() += std::conj(T(j, j));
        for (Eigen::Index i = 0; i < n; ++i) {
            if (std::abs(shifted(i, i)) < 1e-14 * std::max(1.0, T.norm()))
                throw NumericError("Lyapunov equation is singular (eigenvalues λᵢ + λ̄ⱼ = 0)");
        }
        Y.col(j) = shifted.triangularView<Eigen::Upper>().solve(b);
    }
    return (U * Y * U.adjoint()).real();
}

// ---------------------------------------------------------------------------
// SPDE example
// ---------------------------------------------------------------------------

Matrix periodic_centered_difference(int d, double dy) {
    if (d < 3) throw ConfigError("periodic difference needs at least 3 points");
    Matrix D = Matrix::Zero(d, d);
    const double w = 1.0 / (2.0 * dy);
    for (int i = 0; i < d; ++i) {
        D(i, (i + 1) % d) += w;
        D(i, (i + d - 1) % d) -= w;
    }
    return D;
}

SpdeDiscretization spde_drift(double U, double rho, double L_domain, int d, double damping) {
    if (d < 4) throw ConfigError("SPDE grid needs d >= 4");
    if (!(rho > 0.0)) throw ConfigError("rho must be positive");
    if (!(L_domain > 0.0)) throw ConfigError("domain length must be positive");
    if (!(damping >= 0.0)) throw ConfigError("damping must be nonnegative");
    const double dy = L_domain / d;
    const Matrix D = periodic_centered_difference(d, dy);
    Matrix A = -(U * D + rho * D * D.transpose());
    A.diagonal().array() -= damping;
    return {A, 1.0 / dy};
}

LinearModel spde_advection_diffusion(double U, double rho, double L_domain, int d, double damping) {
    auto disc = spde_drift(U, rho, L_domain, d, damping);
    return LinearModel(std::move(disc.A), disc.gamma);
}

// ---------------------------------------------------------------------------
// Filtered observations
// ---------------------------------------------------------------------------

ExtendedStationaryCovariance extended_stationary_covariance(const LinearModel& model,
                                                            const FilterConfig& filter) {
    filter.validate();
    const int d = model.dim();
    const double inv_delta = 1.0 / filter.delta;
    const Matrix I = Matrix::Identity(d, d);

    Matrix F = Matrix::Zero(2 * d, 2 * d);
    F.topLeftCorner(d, d) = model.A();
    F.bottomLeftCorner(d, d) = inv_delta * I;
    F.bottomRightCorner(d, d) = -inv_delta * I;

    Matrix Q = Matrix::Zero(2 * d, 2 * d);
    Q.topLeftCorner(d, d) = model.gamma() * I;
    Q.bottomRightCorner(d, d) = 2.0 * filter.delta_noise * filter.delta_noise * I;

    Matrix sigma = solve_lyapunov(F, Q);
    sigma = 0.5 * (sigma + sigma.transpose());

    ExtendedStationaryCovariance out;
    out.sigma_xx = sigma.topLeftCorner(d, d);
    out.sigma_xz = sigma.topRightCorner(d, d);
    out.sigma_zz = sigma.bottomRightCorner(d, d);
    out.c_tilde = out.sigma_zz - filter.delta_noise * filter.delta * I;

    const Matrix C = stationary_covariance(model);
    if ((out.sigma_xx - C).norm() > 1e-8 * std::max(1.0, C.norm()))
        throw NumericError("joint stationary covariance disagrees with C in the X block");
    return out;
}

LinearModel baseline_model() {
    Matrix A(2, 2);
    A << 1.0, -1.0, 1.0, 1.0;
    return LinearModel(-0.5 * A, 1.0);
}

} // namespace enkbf
