#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>

#include "enkbf/models.hpp"

namespace enkbf {

enum class PathSource { reference, two_scale, fast_process, filtered, external };

struct PathOrigin {
    PathSource kind = PathSource::reference;
    double epsilon = 0.0;   // two_scale / fast_process
    double delta = 0.0;     // filtered
    int delta_noise = 0;    // filtered
};

/// Fine-grid trajectory, one column per time τ_l = l·Δτ.
class ObservationPath {
public:
    ObservationPath(Matrix states, double delta_tau, std::uint64_t seed, PathOrigin origin = {});

    int dim() const { return static_cast<int>(states_.rows()); }
    std::size_t n_fine() const { return static_cast<std::size_t>(states_.cols()) - 1; }
    double delta_tau() const { return delta_tau_; }
    double duration() const { return static_cast<double>(n_fine()) * delta_tau_; }
    double time(std::size_t l) const { return static_cast<double>(l) * delta_tau_; }

    const Matrix& states() const { return states_; }
    auto state(std::size_t l) const { return states_.col(static_cast<Eigen::Index>(l)); }
    const double* data(std::size_t l) const { return states_.data() + l * states_.rows(); }

    std::uint64_t seed() const { return seed_; }
    const PathOrigin& origin() const { return origin_; }

private:
    Matrix states_;
    double delta_tau_;
    std::uint64_t seed_;
    PathOrigin origin_;
};

/// Initial state and standard-normal increments ξ_l (d × n_fine) for the
/// Brownian motion W†. Sharing one driver couples reference and two-scale runs.
struct NoiseDriver {
    Vector x0;
    Matrix xi;
    double delta_tau = 0.0;
    std::uint64_t seed = 0;
};

/// Number of fine steps in [0, T]; T must be an integer multiple of Δτ.
std::size_t fine_steps(double T, double delta_tau);

/// X₀ ∼ N(0, C) and i.i.d. ξ_l from the (seed, purpose) streams.
NoiseDriver make_noise_driver(const LinearModel& model, double T, double delta_tau, std::uint64_t seed);

/// Euler–Maruyama for dX = AX dt + γ^{1/2} dW.
ObservationPath simulate_reference(const LinearModel& model, double T, double delta_tau,
                                   std::uint64_t seed);
ObservationPath simulate_reference(const LinearModel& model, const NoiseDriver& noise);

struct TwoScaleBundle {
    ObservationPath x_path;
    ObservationPath p_path;
};

/// Joint Euler–Maruyama of dX = AX dt + γ^{1/2}ε⁻¹MP dt, dP = −ε⁻¹MP dt + dW,
/// with P₀ drawn from its stationary law. When `shared` is given, X₀ and the
/// increments of W are taken from it.
TwoScaleBundle simulate_two_scale(const TwoScaleModel& model, double T, double delta_tau,
                                  std::uint64_t seed, const NoiseDriver* shared = nullptr);

/// Euler–Maruyama of dZ = δ⁻¹(X − Z)dt + δ_noise √2 dV on the grid of x, Z₀ = X₀.
ObservationPath simulate_filtered(const ObservationPath& x, const FilterConfig& filter,
                                  std::uint64_t seed);

struct IteratedIncrement {
    Vector first;     // X_{s,t}
    Matrix second;    // Σ (X_l − X_s) ⊗ (X_{l+1} − X_l)
    std::size_t from = 0;
    std::size_t to = 0;
};

/// Pieces of the exact identity
///   second = ½(first ⊗ first − quadratic) + ½ commutator
/// with quadratic = Σ ΔX_l ⊗ ΔX_l and commutator = Σ [X_{s,l}, ΔX_l],
/// [a, b] = a ⊗ b − b ⊗ a.
struct IteratedDecomposition {
    Matrix quadratic;
    Matrix commutator;
};

Vector increment(const ObservationPath& path, std::size_t from, std::size_t to);
IteratedIncrement iterated_integral(const ObservationPath& path, std::size_t from, std::size_t to);
IteratedDecomposition decompose_iterated_integral(const ObservationPath& path, std::size_t from,
                                                  std::size_t to);

/// Chen's relation for adjacent windows [s, u] and [u, t].
IteratedIncrement chen_combine(const IteratedIncrement& a, const IteratedIncrement& b);

/// Left-point sum Σ (A X_l)ᵀ (X_{l+1} − X_l) over [from, to).
double j_integral(const ObservationPath& path, const Matrix& A, std::size_t from, std::size_t to);

/// Σ (A G_l)ᵀ (X_{l+1} − X_l): gain states from `gain`, increments from `data`.
double mixed_j_integral(const ObservationPath& gain, const ObservationPath& data, const Matrix& A,
                        std::size_t from, std::size_t to);

/// CSV with header t,x_1..x_d and, when `extra` is set, <prefix>_1..<prefix>_d.
void write_path_csv(std::ostream& out, const ObservationPath& path,
                    const ObservationPath* extra = nullptr, const std::string& extra_prefix = "p");
void write_path_csv(const std::string& file, const ObservationPath& path,
                    const ObservationPath* extra = nullptr, const std::string& extra_prefix = "p");

/// Reads the x_* columns of a path CSV; Δτ is taken from the t column.
ObservationPath read_path_csv(const std::string& file);

/// Sample covariance of the states, pooled over a set of paths.
Matrix sample_covariance(std::span<const ObservationPath> paths);

} // namespace enkbf
