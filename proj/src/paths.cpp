#include "enkbf/paths.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "enkbf/errors.hpp"
#include "enkbf/random.hpp"

namespace enkbf {

namespace {

void check_window(const ObservationPath& path, std::size_t from, std::size_t to) {
    if (from >= to || to > path.n_fine()) {
        std::ostringstream os;
        os << "invalid window [" << from << ", " << to << "] on a path with " << path.n_fine()
           << " steps";
        throw ConfigError(os.str());
    }
}

double max_abs_real_eigenvalue(const Matrix& A) {
    Eigen::EigenSolver<Matrix> es(A, false);
    return es.eigenvalues().real().cwiseAbs().maxCoeff();
}

void check_stability(const LinearModel& model, double delta_tau) {
    const double r = delta_tau * max_abs_real_eigenvalue(model.A());
    if (!(r < 0.1)) {
        std::ostringstream os;
        os << "step too large for the drift: delta_tau * max|Re lambda| = " << r << " >= 0.1";
        throw ConfigError(os.str());
    }
}

Matrix cholesky_factor(const Matrix& S, const char* what) {
    Eigen::LLT<Matrix> llt(S);
    if (llt.info() != Eigen::Success) throw NumericError(std::string(what) + " is not positive definite");
    return llt.matrixL();
}

// out = M x for a column-major d×d matrix
inline void matvec(const double* M, const double* x, double* out, int d) {
    for (int i = 0; i < d; ++i) out[i] = 0.0;
    for (int k = 0; k < d; ++k) {
        const double xk = x[k];
        const double* col = M + static_cast<std::ptrdiff_t>(k) * d;
        for (int i = 0; i < d; ++i) out[i] += col[i] * xk;
    }
}

} // namespace

// ---------------------------------------------------------------------------
// ObservationPath
// ---------------------------------------------------------------------------

ObservationPath::ObservationPath(Matrix states, double delta_tau, std::uint64_t seed, PathOrigin origin)
    : states_(std::move(states)), delta_tau_(delta_tau), seed_(seed), origin_(origin) {
    if (states_.rows() < 1 || states_.cols() < 1) throw ConfigError("path must have at least one state");
    if (!(delta_tau_ > 0.0) || !std::isfinite(delta_tau_)) throw ConfigError("delta_tau must be positive");
    if (!states_.allFinite()) throw NumericError("path has non-finite states");
}

std::size_t fine_steps(double T, double delta_tau) {
    if (!(delta_tau > 0.0) || !std::isfinite(delta_tau)) throw ConfigError("delta_tau must be positive");
    if (!(T > 0.0) || !std::isfinite(T)) throw ConfigError("T must be positive");
    const double ratio = T / delta_tau;
    const double n = std::round(ratio);
    if (std::abs(ratio - n) > 1e-9 * std::max(1.0, n) || n < 1.0) {
        std::ostringstream os;
        os << "T = " << T << " is not an integer multiple of delta_tau = " << delta_tau;
        throw ConfigError(os.str());
    }
    return static_cast<std::size_t>(n);
}

// ---------------------------------------------------------------------------
// Simulation
// ---------------------------------------------------------------------------

NoiseDriver make_noise_driver(const LinearModel& model, double T, double delta_tau, std::uint64_t seed) {
    const std::size_t n = fine_steps(T, delta_tau);
    const int d = model.dim();
    NoiseDriver drv;
    drv.delta_tau = delta_tau;
    drv.seed = seed;

    const Matrix L = cholesky_factor(stationary_covariance(model), "stationary covariance");
    NoiseStream init(seed, StreamTag::initial_state);
    Vector z(d);
    init.fill_normal({z.data(), static_cast<std::size_t>(d)});
    drv.x0 = L * z;

    drv.xi.resize(d, static_cast<Eigen::Index>(n));
    NoiseStream bm(seed, StreamTag::brownian);
    bm.fill_normal({drv.xi.data(), static_cast<std::size_t>(drv.xi.size())});
    return drv;
}

ObservationPath simulate_reference(const LinearModel& model, double T, double delta_tau,
                                   std::uint64_t seed) {
    check_stability(model, delta_tau);
    return simulate_reference(model, make_noise_driver(model, T, delta_tau, seed));
}

ObservationPath simulate_reference(const LinearModel& model, const NoiseDriver& noise) {
    const int d = model.dim();
    if (noise.x0.size() != d || noise.xi.rows() != d) throw ConfigError("noise driver dimension mismatch");
    check_stability(model, noise.delta_tau);
    const std::size_t n = static_cast<std::size_t>(noise.xi.cols());
    const double dtau = noise.delta_tau;
    const double s = std::sqrt(model.gamma() * dtau);

    Matrix X(d, static_cast<Eigen::Index>(n + 1));
    X.col(0) = noise.x0;
    const double* A = model.A().data();
    const double* xi = noise.xi.data();
    double* x = X.data();
    Vector ax_buf(d);
    double* ax = ax_buf.data();
    for (std::size_t l = 0; l < n; ++l) {
        const double* cur = x + l * d;
        double* next = x + (l + 1) * d;
        const double* e = xi + l * d;
        matvec(A, cur, ax, d);
        for (int i = 0; i < d; ++i) next[i] = cur[i] + dtau * ax[i] + s * e[i];
    }
    return ObservationPath(std::move(X), dtau, noise.seed, {PathSource::reference});
}

TwoScaleBundle simulate_two_scale(const TwoScaleModel& model, double T, double delta_tau,
                                  std::uint64_t seed, const NoiseDriver* shared) {
    const LinearModel& base = model.base();
    const int d = base.dim();
    const double eps = model.epsilon();
    if (delta_tau > eps / 10.0 * (1.0 + 1e-12)) {
        std::ostringstream os;
        os << "delta_tau = " << delta_tau << " does not resolve the fast scale (need <= epsilon/10 = "
           << eps / 10.0 << ")";
        throw ConfigError(os.str());
    }
    check_stability(base, delta_tau);

    NoiseDriver local;
    if (shared == nullptr) {
        local = make_noise_driver(base, T, delta_tau, seed);
        shared = &local;
    } else {
        if (std::abs(shared->delta_tau - delta_tau) > 1e-15 * delta_tau)
            throw ConfigError("shared noise driver uses a different delta_tau");
        if (static_cast<std::size_t>(shared->xi.cols()) != fine_steps(T, delta_tau))
            throw ConfigError("shared noise driver covers a different horizon");
        if (shared->xi.rows() != d) throw ConfigError("shared noise driver dimension mismatch");
    }
    const std::size_t n = static_cast<std::size_t>(shared->xi.cols());

    const Matrix Lp = cholesky_factor(model.fast_covariance(), "fast covariance");
    NoiseStream fast(seed, StreamTag::fast_initial);
    Vector z(d);
    fast.fill_normal({z.data(), static_cast<std::size_t>(d)});

    Matrix X(d, static_cast<Eigen::Index>(n + 1));
    Matrix P(d, static_cast<Eigen::Index>(n + 1));
    X.col(0) = shared->x0;
    P.col(0) = Lp * z;

    const double* A = base.A().data();
    const double* M = model.M().data();
    const double* xi = shared->xi.data();
    const double coupling = std::sqrt(base.gamma()) / eps;
    const double relax = delta_tau / eps;
    const double s = std::sqrt(delta_tau);
    Vector ax_buf(d), mp_buf(d);
    double* ax = ax_buf.data();
    double* mp = mp_buf.data();
    double* x = X.data();
    double* p = P.data();
    for (std::size_t l = 0; l < n; ++l) {
        const double* xc = x + l * d;
        const double* pc = p + l * d;
        double* xn = x + (l + 1) * d;
        double* pn = p + (l + 1) * d;
        const double* e = xi + l * d;
        matvec(A, xc, ax, d);
        matvec(M, pc, mp, d);
        for (int i = 0; i < d; ++i) {
            xn[i] = xc[i] + delta_tau * (ax[i] + coupling * mp[i]);
            pn[i] = pc[i] - relax * mp[i] + s * e[i];
        }
    }
    PathOrigin ox{PathSource::two_scale, eps};
    PathOrigin op{PathSource::fast_process, eps};
    return {ObservationPath(std::move(X), delta_tau, shared->seed, ox),
            ObservationPath(std::move(P), delta_tau, seed, op)};
}

ObservationPath simulate_filtered(const ObservationPath& x, const FilterConfig& filter,
                                  std::uint64_t seed) {
    filter.validate();
    const double dtau = x.delta_tau();
    const double r = dtau / filter.delta;
    if (r > 0.5) {
        std::ostringstream os;
        os << "filter too stiff for the grid: delta_tau / delta = " << r << " > 0.5";
        throw ConfigError(os.str());
    }
    const int d = x.dim();
    const std::size_t n = x.n_fine();
    Matrix Z(d, static_cast<Eigen::Index>(n + 1));
    Z.col(0) = x.state(0);

    Matrix eta;
    if (filter.delta_noise != 0) {
        eta.resize(d, static_cast<Eigen::Index>(n));
        NoiseStream ns(seed, StreamTag::filter_noise);
        ns.fill_normal({eta.data(), static_cast<std::size_t>(eta.size())});
    }
    const double s = filter.delta_noise * std::sqrt(2.0 * dtau);
    const double* xs = x.states().data();
    double* z = Z.data();
    for (std::size_t l = 0; l < n; ++l) {
        const double* xc = xs + l * d;
        const double* zc = z + l * d;
        double* zn = z + (l + 1) * d;
        for (int i = 0; i < d; ++i) zn[i] = zc[i] + r * (xc[i] - zc[i]);
        if (filter.delta_noise != 0) {
            const double* e = eta.data() + l * d;
            for (int i = 0; i < d; ++i) zn[i] += s * e[i];
        }
    }
    PathOrigin o{PathSource::filtered, x.origin().epsilon, filter.delta, filter.delta_noise};
    return ObservationPath(std::move(Z), dtau, seed, o);
}

// ---------------------------------------------------------------------------
// Path functionals
// ---------------------------------------------------------------------------

Vector increment(const ObservationPath& path, std::size_t from, std::size_t to) {
    check_window(path, from, to);
    return path.state(to) - path.state(from);
}

IteratedIncrement iterated_integral(const ObservationPath& path, std::size_t from, std::size_t to) {
    check_window(path, from, to);
    const int d = path.dim();
    IteratedIncrement out;
    out.from = from;
    out.to = to;
    out.second = Matrix::Zero(d, d);
    const double* x0 = path.data(from);
    double* S = out.second.data();
    for (std::size_t l = from; l < to; ++l) {
        const double* xc = path.data(l);
        const double* xn = path.data(l + 1);
        for (int k = 0; k < d; ++k) {
            const double dk = xn[k] - xc[k];
            double* col = S + static_cast<std::ptrdiff_t>(k) * d;
            for (int i = 0; i < d; ++i) col[i] += (xc[i] - x0[i]) * dk;
        }
    }
    out.first = path.state(to) - path.state(from);
    return out;
}

IteratedDecomposition decompose_iterated_integral(const ObservationPath& path, std::size_t from,
                                                  std::size_t to) {
    check_window(path, from, to);
    const int d = path.dim();
    IteratedDecomposition out{Matrix::Zero(d, d), Matrix::Zero(d, d)};
    const Vector x0 = path.state(from);
    for (std::size_t l = from; l < to; ++l) {
        const Vector a = path.state(l) - x0;
        const Vector dx = path.state(l + 1) - path.state(l);
        out.quadratic.noalias() += dx * dx.transpose();
        out.commutator.noalias() += a * dx.transpose() - dx * a.transpose();
    }
    return out;
}

IteratedIncrement chen_combine(const IteratedIncrement& a, const IteratedIncrement& b) {
    if (a.to != b.from) {
        std::ostringstream os;
        os << "chen_combine: windows [" << a.from << ", " << a.to << "] and [" << b.from << ", "
           << b.to << "] are not adjacent";
        throw ConfigError(os.str());
    }
    if (a.first.size() != b.first.size()) throw ConfigError("chen_combine: dimension mismatch");
    IteratedIncrement out;
    out.from = a.from;
    out.to = b.to;
    out.first = a.first + b.first;
    out.second = a.second + b.second + a.first * b.first.transpose();
    return out;
}

double j_integral(const ObservationPath& path, const Matrix& A, std::size_t from, std::size_t to) {
    return mixed_j_integral(path, path, A, from, to);
}

double mixed_j_integral(const ObservationPath& gain, const ObservationPath& data, const Matrix& A,
                        std::size_t from, std::size_t to) {
    check_window(data, from, to);
    const int d = data.dim();
    if (gain.dim() != d || gain.n_fine() != data.n_fine()) throw ConfigError("path grids differ");
    if (A.rows() != d || A.cols() != d) throw ConfigError("A does not match the path dimension");
    const double* Ad = A.data();
    double sum = 0.0;
    for (std::size_t l = from; l < to; ++l) {
        const double* g = gain.data(l);
        const double* xc = data.data(l);
        const double* xn = data.data(l + 1);
        for (int i = 0; i < d; ++i) {
            double ag = 0.0;
            for (int k = 0; k < d; ++k) ag += Ad[i + static_cast<std::ptrdiff_t>(k) * d] * g[k];
            sum += ag * (xn[i] - xc[i]);
        }
    }
    return sum;
}

Matrix sample_covariance(std::span<const ObservationPath> paths) {
    if (paths.empty()) throw ConfigError("sample_covariance: no paths");
    const int d = paths[0].dim();
    Vector mean = Vector::Zero(d);
    double count = 0.0;
    for (const auto& p : paths) {
        if (p.dim() != d) throw ConfigError("sample_covariance: dimension mismatch");
        mean += p.states().rowwise().sum();
        count += static_cast<double>(p.states().cols());
    }
    mean /= count;
    Matrix cov = Matrix::Zero(d, d);
    for (const auto& p : paths) {
        const Matrix c = p.states().colwise() - mean;
        cov.noalias() += c * c.transpose();
    }
    return cov / (count - 1.0);
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

void write_path_csv(std::ostream& out, const ObservationPath& path, const ObservationPath* extra,
                    const std::string& extra_prefix) {
    const int d = path.dim();
    if (extra && (extra->n_fine() != path.n_fine() || extra->dim() != d))
        throw ConfigError("bundle paths are on different grids");
    out << "t";
    for (int i = 1; i <= d; ++i) out << ",x_" << i;
    if (extra)
        for (int i = 1; i <= d; ++i) out << ',' << extra_prefix << '_' << i;
    out << '\n';
    out << std::setprecision(std::numeric_limits<double>::max_digits10);
    for (std::size_t l = 0; l <= path.n_fine(); ++l) {
        out << path.time(l);
        const double* x = path.data(l);
        for (int i = 0; i < d; ++i) out << ',' << x[i];
        if (extra) {
            const double* e = extra->data(l);
            for (int i = 0; i < d; ++i) out << ',' << e[i];
        }
        out << '\n';
    }
}

void write_path_csv(const std::string& file, const ObservationPath& path, const ObservationPath* extra,
                    const std::string& extra_prefix) {
    std::ofstream out(file);
    if (!out) throw IoError("cannot open '" + file + "' for writing");
    write_path_csv(out, path, extra, extra_prefix);
    if (!out) throw IoError("write to '" + file + "' failed");
}

ObservationPath read_path_csv(const std::string& file) {
    std::ifstream in(file);
    if (!in) throw IoError("cannot open path file '" + file + "'");
    std::string line;
    if (!std::getline(in, line)) throw IoError("path file '" + file + "' is empty");

    std::vector<std::string> header;
    {
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) header.push_back(cell);
    }
    if (header.empty() || header[0] != "t") throw ConfigError("path CSV must start with a 't' column");
    std::vector<int> xcols;
    for (std::size_t c = 1; c < header.size(); ++c)
        if (header[c].rfind("x_", 0) == 0) xcols.push_back(static_cast<int>(c));
    if (xcols.empty()) throw ConfigError("path CSV has no x_ columns");

    std::vector<double> times;
    std::vector<double> values;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        std::vector<double> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            try {
                cells.push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw ConfigError("path CSV row " + std::to_string(row) + ": bad number '" + cell + "'");
            }
        }
        if (cells.size() != header.size())
            throw ConfigError("path CSV row " + std::to_string(row) + " has the wrong column count");
        times.push_back(cells[0]);
        for (int c : xcols) values.push_back(cells[static_cast<std::size_t>(c)]);
    }
    if (times.size() < 2) throw ConfigError("path CSV needs at least two rows");
    const double dtau = times[1] - times[0];
    const std::size_t n = times.size() - 1;
    if (std::abs(times.back() - static_cast<double>(n) * dtau) > 1e-9 * std::max(1.0, times.back()))
        throw ConfigError("path CSV times are not uniformly spaced");
    const auto d = static_cast<Eigen::Index>(xcols.size());
    Matrix X = Eigen::Map<const Matrix>(values.data(), d, static_cast<Eigen::Index>(times.size()));
    return ObservationPath(std::move(X), dtau, 0, {PathSource::external});
}

} // namespace enkbf
