#pragma once

#include "mrlab/common.hpp"
#include "mrlab/geometry.hpp"
#include "mrlab/quadrature.hpp"

#include <functional>
#include <span>
#include <vector>

namespace mrlab {

using DensityFn = std::function<cplx(std::span<const double>)>;

/// Node-count rule: per axis ceil(kappa_N * (|x'_a|max * side_a + |x_n|max * osc(phi) + base)).
struct NodeRule {
    double kappa = 1.0;
    double base = 24.0;
};

/// Complex density on a tensor Gauss-Legendre grid over a support box inside the patch domain.
class SampledDensity {
public:
    SampledDensity() = default;
    /// Samples `fn` on a grid with explicit per-axis node counts.
    SampledDensity(PatchPtr patch, Box support, std::vector<std::size_t> counts, DensityFn fn);
    /// Raw node values (no generator: the density cannot be resampled).
    SampledDensity(PatchPtr patch, Box support, std::vector<std::size_t> counts, std::vector<cplx> values);

    /// Grid sized so that all |x| <= x_budget can be resolved.
    static SampledDensity from_function(PatchPtr patch, Box support, DensityFn fn, double x_budget,
                                        NodeRule rule = {});

    [[nodiscard]] const HypersurfacePatch& patch() const { return *patch_; }
    [[nodiscard]] const PatchPtr& patch_ptr() const { return patch_; }
    [[nodiscard]] const Box& support() const { return grid_.box(); }
    [[nodiscard]] const TensorGrid& grid() const { return grid_; }
    [[nodiscard]] const std::vector<cplx>& values() const { return values_; }
    [[nodiscard]] const std::vector<double>& weights() const { return weights_; }
    [[nodiscard]] bool has_generator() const { return static_cast<bool>(fn_); }
    [[nodiscard]] const DensityFn& generator() const { return fn_; }
    [[nodiscard]] const NodeRule& rule() const { return rule_; }
    /// Oscillation (max - min) of phi over the support box.
    [[nodiscard]] double phi_oscillation() const { return phi_osc_; }
    /// max over the support box of |xi|.
    [[nodiscard]] double max_frequency() const;

    [[nodiscard]] double l2_norm() const;
    [[nodiscard]] double l1_norm() const;

    /// Node counts required to resolve the given coordinate ranges.
    [[nodiscard]] std::vector<std::size_t> required_counts(std::span<const double> max_abs_param,
                                                           double max_abs_normal) const;
    /// Same density on a different grid (requires a generator).
    [[nodiscard]] SampledDensity resampled(std::vector<std::size_t> counts) const;
    /// Density multiplied pointwise by m(xi) (generator composed when present).
    [[nodiscard]] SampledDensity multiplied(const std::function<cplx(std::span<const double>)>& m) const;
    /// Returns *this if the grid resolves the ranges, a resampled copy if a generator exists,
    /// and throws ResolutionError otherwise.
    [[nodiscard]] SampledDensity ensure_resolution(std::span<const double> max_abs_param, double max_abs_normal) const;

private:
    void finish_setup();

    PatchPtr patch_;
    TensorGrid grid_;
    std::vector<cplx> values_;
    std::vector<double> weights_;
    DensityFn fn_;
    NodeRule rule_;
    double phi_osc_ = 0.0;
};

/// Smooth random density: prod (1 - t_a^2)^p times a complex Gaussian combination of tensor
/// Legendre polynomials of per-axis degree < modes, with t the normalised box coordinates.
/// Normalised to unit L2 norm.
DensityFn smooth_random_profile(const Box& support, std::uint64_t seed, int modes = 4, int envelope_power = 8);
SampledDensity smooth_random_density(PatchPtr patch, Box support, std::uint64_t seed, double x_budget,
                                     int modes = 4, int envelope_power = 8, NodeRule rule = {});

struct ExtensionValues {
    std::vector<cplx> values;
    /// max |difference| against a doubled-node evaluation; NaN when no generator is available.
    double error_estimate = 0.0;
};

/// E f(x) = int e^{i(x' . xi + x_n phi(xi))} f(xi) d xi, by direct tensor quadrature.
ExtensionValues evaluate_extension(const SampledDensity& f, std::span<const Vec> points, bool estimate_error = true);

/// Nyquist spacing bound pi / (sup|xi| + sup|phi|) for the density's support.
double nyquist_spacing(const SampledDensity& f);

/// E f on the midpoint grid of `cube` (structured separable sums over slices x_n = const).
SampledField evaluate_field(const SampledDensity& f, const Box& cube, std::size_t resolution);

/// E f restricted to the hyperplane x_n = xn, on a midpoint grid of an (n-1)-box in the
/// parameter coordinates.
SampledField slice_field(const SampledDensity& f, double xn, const Box& slice_box, std::size_t resolution);

/// Trace on x_n = 0, i.e. (2 pi)^{n-1} times the inverse Fourier transform of f.
SampledField boundary_trace(const SampledDensity& f, const Box& slice_box, std::size_t resolution);

/// (sum |prod_i F_i|^p * cell volume)^{1/p}; all fields must share one grid.
double lp_quasinorm(std::span<const SampledField> fields, double p);
double lp_quasinorm(const SampledField& field, double p);

/// L2 norm of E f(., x_n) over the whole hyperplane, via exact band-limited sampling on the
/// lattice (2 pi / L) Z^{n-1}, truncated to `resolution` points per axis.
double slice_mass(const SampledDensity& f, double xn, std::size_t resolution = 32);

/// Gradient components of E f on a field grid (ambient order).
std::vector<SampledField> evaluate_field_gradient(const SampledDensity& f, const Box& cube, std::size_t resolution);

struct CommutatorReport {
    double max_relative_discrepancy = 0.0;
    double max_lhs = 0.0;
};

/// Both sides of (x' - c + x_n grad phi(D'/i))^N E f = E((i d - c)^N f) at the given points;
/// for N = 2 the left side is |x' - c + x_n grad phi(xi0)|^2 E f and the right side the
/// A^2 + B^2 + 2BA + [A,B] assembly. The density must vanish to second order at the
/// support boundary.
CommutatorReport commutator_check(const SampledDensity& f, std::span<const double> c, int order,
                                  std::span<const Vec> points, std::span<const double> xi0 = {});

struct DecayEstimate {
    Vec direction;
    std::vector<double> radii;
    std::vector<double> magnitudes;
    std::vector<double> running_slope;  // slope between consecutive octave maxima, per radius
    double alpha_hat = 0.0;
    double fit_residual = 0.0;
    bool truncated = false;  // radii dropped at the quadrature noise floor / underflow
    bool degenerate = false; // |alpha_hat| below 0.05
};

std::vector<double> geometric_radii(double r_min, double r_max, std::size_t per_octave = 16);

DecayEstimate decay_fit(const SampledDensity& psi, const Vec& direction, std::span<const double> radii);

struct WorstDirection {
    DecayEstimate worst;
    std::vector<double> angles;
    std::vector<double> alphas;
    std::size_t degenerate_count = 0;
};
/// n = 2 only: scan `count` directions over [0, pi] and return the minimal alpha_hat.
WorstDirection decay_worst_direction(const SampledDensity& psi, std::span<const double> radii, std::size_t count = 181);

struct KernelProfile {
    Vec center;            // centre of the slab cube (x'_c, c_n)
    double R = 0.0;
    double slab_offset = 0.0;
    double l1_on_cube = 0.0;
    double bound = 0.0;    // R^{n-1} (1 + |c|)^{-alpha}
    double kappa = 0.0;    // l1 / bound
    std::vector<cplx> samples;
};

/// L1 norm of K(., c_n) = E chi(., c_n) over the (n-1)-cube of side R centred at c'.
KernelProfile kernel_profile(const SampledDensity& chi, std::span<const double> c_prime, double c_n, double R,
                             double alpha_hat);

}  // namespace mrlab
