#include "enkbf/analysis.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/SVD>

#include "enkbf/errors.hpp"

namespace enkbf {

double learning_constant(const Matrix& A, const Matrix& C, double gamma) {
    return frobenius(A.transpose() * A, C) / gamma;
}

double learning_constant(const LinearModel& model) {
    return learning_constant(model.A(), stationary_covariance(model), model.gamma());
}

double sigma_closed_form(double sigma_0, double c, double t) {
    return sigma_0 / (1.0 + c * sigma_0 * t);
}

double mean_closed_form(double sigma_0, double m_0, double c, double t) {
    if (sigma_0 == 0.0) return m_0;
    return 1.0 - (1.0 - m_0) * sigma_closed_form(sigma_0, c, t) / sigma_0;
}

double variance_closed_form(double sigma_0, double c, double t) {
    const double s = sigma_closed_form(sigma_0, c, t);
    return c * s * s * t;
}

double biased_mean_closed_form(double sigma_0, double m_0, double c, double b, double t) {
    if (sigma_0 == 0.0) return m_0;
    const double m_star = 1.0 + b / c;
    return m_star + (m_0 - m_star) * sigma_closed_form(sigma_0, c, t) / sigma_0;
}

namespace {

void check_inputs(double sigma_0, double c, double T, double dt_grid) {
    if (!(sigma_0 >= 0.0)) throw ConfigError("sigma_0 must be nonnegative");
    if (!(c > 0.0)) throw ConfigError("c must be positive");
    if (!(dt_grid > 0.0) || !(T >= 0.0)) throw ConfigError("T and dt_grid must be positive");
}

std::size_t grid_points(double T, double dt_grid) {
    const double ratio = T / dt_grid;
    const double n = std::round(ratio);
    if (std::abs(ratio - n) > 1e-9 * std::max(1.0, n)) {
        std::ostringstream os;
        os << "T = " << T << " is not a multiple of dt_grid = " << dt_grid;
        throw ConfigError(os.str());
    }
    return static_cast<std::size_t>(n);
}

// At least 10 substeps, and h·2cσ₀ ≤ 0.05 for stiff initial decay.
int rk4_substeps(double sigma_0, double c, double dt_grid) {
    return std::max(10, static_cast<int>(std::ceil(dt_grid * 2.0 * c * sigma_0 / 0.05)));
}

// Classical RK4 for y' = f(t, y) on a 2-vector.
template <class F>
void rk4(F&& f, double t, double h, double y[2]) {
    double k1[2], k2[2], k3[2], k4[2], tmp[2];
    f(t, y, k1);
    for (int i = 0; i < 2; ++i) tmp[i] = y[i] + 0.5 * h * k1[i];
    f(t + 0.5 * h, tmp, k2);
    for (int i = 0; i < 2; ++i) tmp[i] = y[i] + 0.5 * h * k2[i];
    f(t + 0.5 * h, tmp, k3);
    for (int i = 0; i < 2; ++i) tmp[i] = y[i] + h * k3[i];
    f(t + h, tmp, k4);
    for (int i = 0; i < 2; ++i) y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
}

} // namespace

FrequentistMoments frequentist_moments(double sigma_0, double m_0, double c, double T, double dt_grid) {
    check_inputs(sigma_0, c, T, dt_grid);
    const std::size_t n = grid_points(T, dt_grid);
    const int sub = rk4_substeps(sigma_0, c, dt_grid);
    const double h = dt_grid / sub;
    auto rhs = [&](double t, const double* y, double* dy) {
        const double s = sigma_closed_form(sigma_0, c, t);
        dy[0] = c * s * (1.0 - y[0]);
        dy[1] = -2.0 * c * s * y[1] + c * s * s;
    };

    FrequentistMoments out;
    out.c = c;
    double y[2] = {m_0, 0.0};
    for (std::size_t k = 0; k <= n; ++k) {
        const double t = static_cast<double>(k) * dt_grid;
        out.times.push_back(t);
        out.m.push_back(y[0]);
        out.p.push_back(y[1]);
        out.sigma.push_back(sigma_closed_form(sigma_0, c, t));
        if (k == n) break;
        for (int j = 0; j < sub; ++j) rk4(rhs, t + j * h, h, y);
    }

    for (std::size_t k = 0; k <= n; ++k) {
        const double t = out.times[k];
        if (m_0 == 0.0 && std::abs(out.m[k] - mean_closed_form(sigma_0, 0.0, c, t)) > 1e-8)
            throw NumericError("frequentist mean disagrees with its closed form");
        if (std::abs(out.p[k] - variance_closed_form(sigma_0, c, t)) > 1e-6)
            throw NumericError("frequentist variance disagrees with its closed form");
    }
    return out;
}

MeanTrajectory biased_frequentist_mean(double sigma_0, double m_0, double c, double b, double T,
                                       double dt_grid) {
    check_inputs(sigma_0, c, T, dt_grid);
    const std::size_t n = grid_points(T, dt_grid);
    const int sub = rk4_substeps(sigma_0, c, dt_grid);
    const double h = dt_grid / sub;
    auto rhs = [&](double t, const double* y, double* dy) {
        dy[0] = sigma_closed_form(sigma_0, c, t) * (c * (1.0 - y[0]) + b);
        dy[1] = 0.0;
    };
    MeanTrajectory out;
    double y[2] = {m_0, 0.0};
    for (std::size_t k = 0; k <= n; ++k) {
        const double t = static_cast<double>(k) * dt_grid;
        out.times.push_back(t);
        out.m.push_back(y[0]);
        if (k == n) break;
        for (int j = 0; j < sub; ++j) rk4(rhs, t + j * h, h, y);
    }
    return out;
}

double bias_term(const Matrix& A, const Matrix& M, double gamma) {
    return 0.5 * gamma * frobenius(A.transpose(), M);
}

// ---------------------------------------------------------------------------
// M estimator
// ---------------------------------------------------------------------------

const Matrix& MEstimate::se() const { return n_paths >= 2 ? se_path : se_window; }

MEstimate estimate_M(std::span<const ObservationPath> paths, double delta_t, double gamma) {
    if (paths.empty()) throw ConfigError("estimate_M: no paths");
    if (!(gamma > 0.0)) throw ConfigError("gamma must be positive");
    const int d = paths[0].dim();
    const double scale = 2.0 / (delta_t * gamma);

    Matrix sum = Matrix::Zero(d, d), sum_sq = Matrix::Zero(d, d);
    Matrix path_sum = Matrix::Zero(d, d), path_sum_sq = Matrix::Zero(d, d);
    std::size_t total = 0;
    for (const auto& path : paths) {
        if (path.dim() != d) throw ConfigError("estimate_M: dimension mismatch");
        const double ratio = delta_t / path.delta_tau();
        const auto L = static_cast<std::size_t>(std::llround(ratio));
        if (L < 1 || std::abs(ratio - static_cast<double>(L)) > 1e-9 * ratio)
            throw ConfigError("estimate_M: delta_t is not a multiple of the path step");
        const std::size_t nw = path.n_fine() / L;
        if (nw < 10) throw ConfigError("estimate_M: fewer than 10 windows on a path");
        Matrix local = Matrix::Zero(d, d);
        for (std::size_t w = 0; w < nw; ++w) {
            const Matrix s = scale * iterated_integral(path, w * L, (w + 1) * L).second;
            local += s;
            sum_sq.array() += s.array().square();
        }
        sum += local;
        total += nw;
        local /= static_cast<double>(nw);
        path_sum += local;
        path_sum_sq.array() += local.array().square();
    }

    MEstimate out;
    out.n_windows = total;
    out.n_paths = paths.size();
    const double N = static_cast<double>(total);
    out.M = sum / N;
    const Matrix var_w = (sum_sq / N - out.M.cwiseProduct(out.M)) * (N / std::max(1.0, N - 1.0));
    out.se_window = (var_w.cwiseMax(0.0) / N).cwiseSqrt();
    const double P = static_cast<double>(paths.size());
    if (paths.size() >= 2) {
        const Matrix mean_p = path_sum / P;
        const Matrix var_p = (path_sum_sq / P - mean_p.cwiseProduct(mean_p)) * (P / (P - 1.0));
        out.se_path = (var_p.cwiseMax(0.0) / P).cwiseSqrt();
    } else {
        out.se_path = Matrix::Constant(d, d, std::numeric_limits<double>::quiet_NaN());
    }
    return out;
}

MEstimate estimate_M(const ObservationPath& path, double delta_t, double gamma) {
    return estimate_M(std::span<const ObservationPath>(&path, 1), delta_t, gamma);
}

// ---------------------------------------------------------------------------
// Subsampling diagnostic
// ---------------------------------------------------------------------------

const char* norm_name(MatrixNorm n) {
    return n == MatrixNorm::frobenius ? "frobenius" : "spectral";
}

MatrixNorm parse_norm(const std::string& name) {
    if (name == "frobenius") return MatrixNorm::frobenius;
    if (name == "spectral") return MatrixNorm::spectral;
    throw ConfigError("unknown norm '" + name + "'");
}

double matrix_norm(const Matrix& m, MatrixNorm n) {
    if (n == MatrixNorm::frobenius) return m.norm();
    Eigen::JacobiSVD<Matrix> svd(m);
    return svd.singularValues()(0);
}

namespace {

// Gradient of the norm with respect to the entries of m (column-major).
Vector norm_gradient(const Matrix& m, MatrixNorm n) {
    Matrix g;
    if (n == MatrixNorm::frobenius) {
        const double f = m.norm();
        g = f > 0.0 ? Matrix(m / f) : Matrix::Zero(m.rows(), m.cols());
    } else {
        Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
        g = svd.matrixU().col(0) * svd.matrixV().col(0).transpose();
    }
    return Eigen::Map<const Vector>(g.data(), g.size());
}

} // namespace

SubsampleDiagnostic subsample_diagnostic(std::span<const ObservationPath> paths,
                                         const std::vector<double>& delta_ts, MatrixNorm norm) {
    if (paths.empty()) throw ConfigError("subsample_diagnostic: no paths");
    if (delta_ts.empty()) throw ConfigError("subsample_diagnostic: no step sizes");
    const int d = paths[0].dim();
    const int dd = d * d;
    SubsampleDiagnostic out;
    out.norm = norm;

    for (double dt : delta_ts) {
        if (!(dt > 0.0)) throw ConfigError("subsample_diagnostic: step sizes must be positive");
        Vector sum = Vector::Zero(dd);
        Matrix outer_w = Matrix::Zero(dd, dd);
        std::vector<Vector> per_path;
        std::size_t total = 0;
        for (const auto& path : paths) {
            if (path.dim() != d) throw ConfigError("subsample_diagnostic: dimension mismatch");
            const double ratio = dt / path.delta_tau();
            const auto L = static_cast<std::size_t>(std::llround(ratio));
            if (L < 1 || std::abs(ratio - static_cast<double>(L)) > 1e-9 * ratio)
                throw ConfigError("subsample_diagnostic: step is not a multiple of the path grid");
            const std::size_t nw = path.n_fine() / L;
            if (nw < 20) {
                std::ostringstream os;
                os << "subsample_diagnostic: only " << nw << " windows of " << dt << " (need 20)";
                throw ConfigError(os.str());
            }
            Vector local = Vector::Zero(dd);
            Vector a(d), b(d), prod(dd);
            for (std::size_t w = 0; w + 1 < nw; ++w) {
                a = path.state((w + 1) * L) - path.state(w * L);
                b = path.state((w + 2) * L) - path.state((w + 1) * L);
                Eigen::Map<Matrix>(prod.data(), d, d) = a * b.transpose();
                local += prod;
                outer_w.noalias() += prod * prod.transpose();
            }
            sum += local;
            total += nw - 1;
            per_path.push_back(local / static_cast<double>(nw - 1));
        }
        const double N = static_cast<double>(total);
        const Vector mean = sum / N;
        Matrix cov;
        double count;
        if (per_path.size() >= 2) {
            count = static_cast<double>(per_path.size());
            cov = Matrix::Zero(dd, dd);
            Vector pm = Vector::Zero(dd);
            for (const auto& v : per_path) pm += v;
            pm /= count;
            for (const auto& v : per_path) cov.noalias() += (v - pm) * (v - pm).transpose();
            cov /= (count - 1.0);
        } else {
            count = N;
            cov = (outer_w / N - mean * mean.transpose()) * (N / std::max(1.0, N - 1.0));
        }
        const Matrix E = Eigen::Map<const Matrix>(mean.data(), d, d);
        const Vector g = norm_gradient(E, norm);
        const double var = std::max(0.0, g.dot(cov * g)) / count;
        out.delta_t.push_back(dt);
        out.h.push_back(matrix_norm(E, norm) / (dt * dt));
        out.se.push_back(std::sqrt(var) / (dt * dt));
        out.n_windows.push_back(total);
    }
    return out;
}

} // namespace enkbf
