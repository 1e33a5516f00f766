#include "enkbf/estimators.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "enkbf/errors.hpp"
#include "enkbf/random.hpp"

namespace enkbf {

const char* variant_name(SchemeVariant v) {
    switch (v) {
    case SchemeVariant::subsampled: return "subsampled";
    case SchemeVariant::high_freq: return "high_freq";
    case SchemeVariant::high_freq_corrected: return "high_freq_corrected";
    case SchemeVariant::strat_midpoint: return "strat_midpoint";
    }
    return "unknown";
}

SchemeVariant parse_variant(const std::string& name) {
    for (auto v : {SchemeVariant::subsampled, SchemeVariant::high_freq,
                   SchemeVariant::high_freq_corrected, SchemeVariant::strat_midpoint})
        if (name == variant_name(v)) return v;
    throw ConfigError("unknown scheme variant '" + name + "'");
}

void SchemeConfig::validate(int d) const {
    if (!(delta_t > 0.0) || !std::isfinite(delta_t)) throw ConfigError("delta_t must be positive");
    if (variant == SchemeVariant::high_freq_corrected) {
        if (!correction_M) throw ConfigError("high_freq_corrected requires correction_M");
        if (correction_M->rows() != d || correction_M->cols() != d)
            throw ConfigError("correction_M has the wrong shape");
    }
    if (gain_mode == GainMode::approx) {
        if (!approx_covariance) throw ConfigError("approx gain mode requires a covariance C");
        if (approx_covariance->rows() != d || approx_covariance->cols() != d)
            throw ConfigError("approx covariance has the wrong shape");
    }
}

std::size_t SchemeConfig::inner_steps(double delta_tau) const {
    if (!(delta_tau > 0.0)) throw ConfigError("delta_tau must be positive");
    const double ratio = delta_t / delta_tau;
    const double L = std::round(ratio);
    if (L < 1.0 || std::abs(ratio - L) > 1e-9 * L) {
        std::ostringstream os;
        os << "delta_t = " << delta_t << " is not a multiple of delta_tau = " << delta_tau;
        throw ConfigError(os.str());
    }
    return static_cast<std::size_t>(L);
}

namespace {

struct StepTerms {
    double data;
    double rate;
    double k;
};

inline GaussianPosterior apply_terms(const GaussianPosterior& post, const StepTerms& t, double dt) {
    const double f = 1.0 - 0.5 * t.rate * dt;
    return {post.mu + t.data - t.rate * post.mu * dt, post.sigma * f * f};
}

// Shared per-step arithmetic for every variant; `a` holds the gain direction
// of the most recent step.
class StepKernel {
public:
    StepKernel(const Matrix& A, double gamma, const SchemeConfig& cfg)
        : A_(A), gamma_(gamma), cfg_(cfg), a_(A.rows()), b_(A.rows()), mid_(A.rows()) {
        if (A.rows() != A.cols()) throw ConfigError("A must be square");
        if (!(gamma > 0.0)) throw ConfigError("gamma must be positive");
        cfg.validate(static_cast<int>(A.rows()));
        if (cfg.gain_mode == GainMode::approx) c_ = frobenius(A.transpose() * A, *cfg.approx_covariance);
        if (cfg.variant == SchemeVariant::high_freq_corrected)
            correction_ = 0.5 * cfg.delta_t * frobenius(A.transpose(), *cfg.correction_M);
        half_trace_ = 0.5 * cfg.delta_t * A.trace();
    }

    const Vector& a() const { return a_; }

    double scale(double sigma, double q) const {
        const double denom =
            gamma_ + cfg_.delta_t * sigma * (cfg_.gain_mode == GainMode::exact ? q : c_);
        if (!(denom > 0.0)) throw NumericError("non-positive gain denominator");
        return sigma / denom;
    }

    StepTerms subsampled(double sigma, const double* xn, const double* xnp1) {
        const int d = dim();
        apply(xn, a_.data());
        double q = 0.0, inn = 0.0;
        for (int i = 0; i < d; ++i) {
            q += a_[i] * a_[i];
            inn += a_[i] * (xnp1[i] - xn[i]);
        }
        const double k = scale(sigma, q);
        return {k * inn, k * q, k};
    }

    StepTerms strat(double sigma, const double* xn, const double* xnp1) {
        const int d = dim();
        for (int i = 0; i < d; ++i) mid_[i] = 0.5 * (xn[i] + xnp1[i]);
        StepTerms t = subsampled(sigma, mid_.data(), mid_.data());
        double inn = 0.0;
        for (int i = 0; i < d; ++i) inn += a_[i] * (xnp1[i] - xn[i]);
        t.data = t.k * inn - sigma * half_trace_;
        return t;
    }

    StepTerms high_freq(double sigma, const ObservationPath& gain, const ObservationPath& data,
                        std::size_t from, std::size_t L) {
        const int d = dim();
        apply(gain.data(from), a_.data());
        apply(data.data(from), b_.data());
        double p = 0.0;
        for (int i = 0; i < d; ++i) p += a_[i] * b_[i];
        const double k = scale(sigma, p);
        double drive = sigma / gamma_ * mixed_j_integral(gain, data, A_, from, from + L);
        if (cfg_.variant == SchemeVariant::high_freq_corrected) drive -= sigma * correction_;
        return {drive, k * p, k};
    }

    StepTerms terms(double sigma, const ObservationPath& gain, const ObservationPath& data,
                    std::size_t from, std::size_t L) {
        switch (cfg_.variant) {
        case SchemeVariant::subsampled: return subsampled(sigma, data.data(from), data.data(from + L));
        case SchemeVariant::strat_midpoint: return strat(sigma, data.data(from), data.data(from + L));
        case SchemeVariant::high_freq:
        case SchemeVariant::high_freq_corrected: return high_freq(sigma, gain, data, from, L);
        }
        throw ConfigError("unknown scheme variant");
    }

private:
    int dim() const { return static_cast<int>(A_.rows()); }

    void apply(const double* x, double* out) const {
        const int d = dim();
        const double* M = A_.data();
        for (int i = 0; i < d; ++i) out[i] = 0.0;
        for (int k = 0; k < d; ++k)
            for (int i = 0; i < d; ++i) out[i] += M[i + static_cast<std::ptrdiff_t>(k) * d] * x[k];
    }

    const Matrix& A_;
    double gamma_;
    const SchemeConfig& cfg_;
    double c_ = 0.0;
    double correction_ = 0.0;
    double half_trace_ = 0.0;
    Vector a_, b_, mid_;
};

std::size_t outer_steps(const ObservationPath& path, std::size_t L) {
    if (path.n_fine() % L != 0) {
        std::ostringstream os;
        os << "path with " << path.n_fine() << " fine steps is not a whole number of outer steps of "
           << L;
        throw ConfigError(os.str());
    }
    return path.n_fine() / L;
}

void check_dims(const ObservationPath& path, const Matrix& A) {
    if (A.rows() != path.dim() || A.cols() != path.dim())
        throw ConfigError("A does not match the path dimension");
}

void check_prior(const GaussianPosterior& prior) {
    if (!(prior.sigma >= 0.0) || !std::isfinite(prior.sigma) || !std::isfinite(prior.mu))
        throw ConfigError("prior variance must be finite and nonnegative");
}

EstimatorTrace run_kernel(const ObservationPath& gain, const ObservationPath& data,
                          const SchemeConfig& cfg, const GaussianPosterior& prior, const Matrix& A,
                          double gamma) {
    check_dims(data, A);
    check_prior(prior);
    StepKernel kernel(A, gamma, cfg);
    const std::size_t L = cfg.inner_steps(data.delta_tau());
    const std::size_t n = outer_steps(data, L);

    EstimatorTrace tr;
    tr.times.reserve(n + 1);
    tr.mu.reserve(n + 1);
    tr.sigma.reserve(n + 1);
    GaussianPosterior post = prior;
    tr.times.push_back(0.0);
    tr.mu.push_back(post.mu);
    tr.sigma.push_back(post.sigma);
    for (std::size_t s = 0; s < n; ++s) {
        post = apply_terms(post, kernel.terms(post.sigma, gain, data, s * L, L), cfg.delta_t);
        tr.times.push_back(static_cast<double>(s + 1) * cfg.delta_t);
        tr.mu.push_back(post.mu);
        tr.sigma.push_back(post.sigma);
    }
    if (!std::isfinite(post.mu) || !std::isfinite(post.sigma))
        throw NumericError("estimator produced non-finite moments");
    return tr;
}

} // namespace

Eigen::RowVectorXd kalman_gain(double sigma, const Vector& x, const Matrix& A, double gamma,
                               double delta_t, GainMode mode, const Matrix* C) {
    if (!(sigma >= 0.0)) throw ConfigError("sigma must be nonnegative");
    if (mode == GainMode::approx && C == nullptr) throw ConfigError("approx gain mode requires C");
    const Vector a = A * x;
    const double q = mode == GainMode::exact ? a.squaredNorm() : frobenius(A.transpose() * A, *C);
    const double denom = gamma + delta_t * sigma * q;
    if (!(denom > 0.0)) throw NumericError("non-positive gain denominator");
    return (sigma / denom) * a.transpose();
}

GaussianPosterior enkbf_step_subsampled(const GaussianPosterior& post, const Vector& x_n,
                                        const Vector& x_np1, const Matrix& A, double gamma,
                                        const SchemeConfig& cfg) {
    if (cfg.variant != SchemeVariant::subsampled) throw ConfigError("scheme is not subsampled");
    if (x_n.size() != A.rows() || x_np1.size() != A.rows()) throw ConfigError("state dimension mismatch");
    StepKernel kernel(A, gamma, cfg);
    return apply_terms(post, kernel.subsampled(post.sigma, x_n.data(), x_np1.data()), cfg.delta_t);
}

GaussianPosterior enkbf_step_highfreq(const GaussianPosterior& post, const ObservationPath& path,
                                      std::size_t n_from, const Matrix& A, double gamma,
                                      const SchemeConfig& cfg) {
    if (cfg.variant != SchemeVariant::high_freq && cfg.variant != SchemeVariant::high_freq_corrected)
        throw ConfigError("scheme is not high-frequency");
    check_dims(path, A);
    StepKernel kernel(A, gamma, cfg);
    const std::size_t L = cfg.inner_steps(path.delta_tau());
    if (n_from + L > path.n_fine()) throw ConfigError("window runs past the end of the path");
    return apply_terms(post, kernel.high_freq(post.sigma, path, path, n_from, L), cfg.delta_t);
}

GaussianPosterior enkbf_step_strat(const GaussianPosterior& post, const ObservationPath& path,
                                   std::size_t n_from, const Matrix& A, double gamma,
                                   const SchemeConfig& cfg) {
    if (cfg.variant != SchemeVariant::strat_midpoint) throw ConfigError("scheme is not strat_midpoint");
    check_dims(path, A);
    StepKernel kernel(A, gamma, cfg);
    const std::size_t L = cfg.inner_steps(path.delta_tau());
    if (n_from + L > path.n_fine()) throw ConfigError("window runs past the end of the path");
    return apply_terms(post, kernel.strat(post.sigma, path.data(n_from), path.data(n_from + L)),
                       cfg.delta_t);
}

EstimatorTrace run_estimator(const ObservationPath& path, const SchemeConfig& cfg,
                             const GaussianPosterior& prior, const Matrix& A, double gamma) {
    return run_kernel(path, path, cfg, prior, A, gamma);
}

EstimatorTrace run_filtered_estimator(const ObservationPath& x_path, const ObservationPath& z_path,
                                      const SchemeConfig& cfg, const GaussianPosterior& prior,
                                      const Matrix& A, double gamma) {
    if (cfg.variant != SchemeVariant::high_freq)
        throw ConfigError("filtered estimator uses the high_freq variant");
    if (x_path.dim() != z_path.dim() || x_path.n_fine() != z_path.n_fine() ||
        x_path.delta_tau() != z_path.delta_tau())
        throw ConfigError("filtered and observed paths are on different grids");
    return run_kernel(z_path, x_path, cfg, prior, A, gamma);
}

// ---------------------------------------------------------------------------
// Particle ensemble
// ---------------------------------------------------------------------------

PriorSampler gaussian_prior(double mean, double variance) {
    if (!(variance >= 0.0)) throw ConfigError("prior variance must be nonnegative");
    const double sd = std::sqrt(variance);
    return [mean, sd](std::mt19937_64& eng) {
        std::normal_distribution<double> n(0.0, 1.0);
        return mean + sd * n(eng);
    };
}

namespace {

GaussianPosterior empirical_moments(const std::vector<double>& th) {
    double mean = 0.0;
    for (double v : th) mean += v;
    mean /= static_cast<double>(th.size());
    double var = 0.0;
    for (double v : th) var += (v - mean) * (v - mean);
    return {mean, var / static_cast<double>(th.size())};
}

} // namespace

EstimatorTrace run_ensemble(const ObservationPath& path, const SchemeConfig& cfg,
                            const PriorSampler& prior, std::size_t n_particles, std::uint64_t seed,
                            const Matrix& A, double gamma, InnovationKind kind) {
    if (n_particles < 2) throw ConfigError("ensemble needs at least 2 particles");
    check_dims(path, A);
    StepKernel kernel(A, gamma, cfg);
    const std::size_t L = cfg.inner_steps(path.delta_tau());
    const std::size_t n = outer_steps(path, L);
    const int d = path.dim();

    std::mt19937_64 prior_eng(derive_seed(seed, StreamTag::prior));
    std::vector<double> th(n_particles);
    for (double& v : th) v = prior(prior_eng);
    NoiseStream noise(seed, StreamTag::innovation);
    const double dt = cfg.delta_t;
    const double s = std::sqrt(gamma * dt);

    EstimatorTrace tr;
    GaussianPosterior mom = empirical_moments(th);
    tr.times.push_back(0.0);
    tr.mu.push_back(mom.mu);
    tr.sigma.push_back(mom.sigma);
    for (std::size_t step = 0; step < n; ++step) {
        const StepTerms t = kernel.terms(mom.sigma, path, path, step * L, L);
        if (kind == InnovationKind::deterministic) {
            for (double& v : th) v += t.data - 0.5 * t.rate * (v + mom.mu) * dt;
        } else {
            const Vector& a = kernel.a();
            for (double& v : th) {
                double ax = 0.0;
                for (int i = 0; i < d; ++i) ax += a[i] * noise.normal();
                v += t.data - t.rate * v * dt - t.k * ax * s;
            }
        }
        mom = empirical_moments(th);
        tr.times.push_back(static_cast<double>(step + 1) * dt);
        tr.mu.push_back(mom.mu);
        tr.sigma.push_back(mom.sigma);
    }
    if (!std::isfinite(mom.mu) || !std::isfinite(mom.sigma))
        throw NumericError("ensemble produced non-finite moments");
    return tr;
}

// ---------------------------------------------------------------------------
// Stochastic gradient descent
// ---------------------------------------------------------------------------

double sgd_learning_rate(double alpha_bar, double c, double t) {
    if (t <= 0.0) return alpha_bar;
    return std::min(alpha_bar, 1.0 / (c * t));
}

SgdTrace run_sgd(const ObservationPath& path, const SchemeConfig& cfg, double alpha_bar,
                 double theta_0, const Matrix& A, double gamma) {
    if (!(alpha_bar >= 0.0)) throw ConfigError("alpha_bar must be nonnegative");
    if (cfg.variant == SchemeVariant::strat_midpoint)
        throw ConfigError("SGD supports subsampled, high_freq and high_freq_corrected");
    check_dims(path, A);
    cfg.validate(path.dim());
    const double c = frobenius(A.transpose() * A, stationary_covariance(LinearModel(A, gamma))) / gamma;
    const std::size_t L = cfg.inner_steps(path.delta_tau());
    const std::size_t n = outer_steps(path, L);
    const double dt = cfg.delta_t;
    const double corr = cfg.variant == SchemeVariant::high_freq_corrected
                            ? 0.5 * gamma * dt * frobenius(A.transpose(), *cfg.correction_M)
                            : 0.0;

    SgdTrace tr;
    double theta = theta_0;
    tr.times.push_back(0.0);
    tr.theta.push_back(theta);
    tr.alpha.push_back(sgd_learning_rate(alpha_bar, c, 0.0));
    for (std::size_t s = 0; s < n; ++s) {
        const std::size_t from = s * L;
        const double t = static_cast<double>(s) * dt;
        const Vector a = A * path.state(from);
        double J = 0.0;
        if (cfg.variant == SchemeVariant::subsampled) {
            J = a.dot(path.state(from + L) - path.state(from));
        } else {
            J = j_integral(path, A, from, from + L) - corr;
        }
        const double alpha = sgd_learning_rate(alpha_bar, c, t);
        theta += alpha / gamma * (J - theta * a.squaredNorm() * dt);
        tr.times.push_back(static_cast<double>(s + 1) * dt);
        tr.theta.push_back(theta);
        tr.alpha.push_back(sgd_learning_rate(alpha_bar, c, static_cast<double>(s + 1) * dt));
    }
    return tr;
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

void write_trace_csv(std::ostream& out, const EstimatorTrace& trace) {
    out << "t,mu,sigma\n";
    out << std::setprecision(std::numeric_limits<double>::max_digits10);
    for (std::size_t i = 0; i < trace.times.size(); ++i)
        out << trace.times[i] << ',' << trace.mu[i] << ',' << trace.sigma[i] << '\n';
}

void write_trace_csv(const std::string& file, const EstimatorTrace& trace) {
    std::ofstream out(file);
    if (!out) throw IoError("cannot open '" + file + "' for writing");
    write_trace_csv(out, trace);
    if (!out) throw IoError("write to '" + file + "' failed");
}

} // namespace enkbf
