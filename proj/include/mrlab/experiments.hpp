#pragma once

#include "mrlab/common.hpp"
#include "mrlab/geometry.hpp"
#include "mrlab/lattice.hpp"
#include "mrlab/oscillation.hpp"
#include "mrlab/quadrature.hpp"
#include "mrlab/sparse.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace mrlab {

/// Runs body(i) for i in [0, count) on up to `jobs` threads (0 = hardware concurrency).
/// Each index is processed exactly once; callers write results by index.
void parallel_for(std::size_t count, std::size_t jobs, const std::function<void(std::size_t)>& body);

using Family = std::vector<SubmanifoldSpec>;

/// k flat patches with normal axes 0..k-1 in R^n on [-hw, hw]^{n-1}. Surface i has codimension
/// codims[i]: it is the coordinate plane {xi_a = 0} for the next codims[i] ambient axes taken
/// in order from k, ..., n-1 (so all normal spaces are coordinate spaces and nu = 1).
Family coordinate_family(std::size_t n, std::span<const std::size_t> codims, double half_width, double mu,
                         double delta_geom);

/// Support box of a localized density: the graph neighbourhood |xi_graph - Phi(u)| <= width over
/// the free domain cut to [-delta, delta] (the cut stands in for B(0, delta)).
Box localized_support(const SubmanifoldSpec& spec, double width, double delta);

/// f(xi) = width^{-c/2} g(u, (xi_graph - Phi(u)) / width) with g a smooth random profile of unit
/// L2 norm on free box x [-1, 1]^c; exactly unit L2 norm and supported in the graph
/// neighbourhood of width `width` (hence in the metric one).
SampledDensity sample_localized_density(const SubmanifoldSpec& spec, double width, double delta, std::uint64_t seed,
                                        double x_budget, int modes = 4, int envelope_power = 8);

/// Number of nonzero nodes failing the metric test neighborhood_contains(spec, width, xi).
std::size_t support_audit(const SampledDensity& f, const SubmanifoldSpec& spec, double width);

struct FlattenedDensity {
    TensorGrid grid;  // over (free coords, graph offsets)
    std::vector<cplx> values;
    double h_norm = 0.0;
    double f_norm = 0.0;             // ||f||_2 on a doubled grid
    double norm_ratio = 0.0;         // ||h||_2 / ||f||_2
    double max_normal_offset = 0.0;  // max ||xi_graph - Phi(xi_free)||_inf over nonzero nodes of f
};

/// h(xi', xi'') = f(xi', Phi(xi') + xi''), resampled on a grid over free box x [-w, w]^c.
FlattenedDensity flatten_density(const SampledDensity& f, const SubmanifoldSpec& spec, double width);

/// min(1, (R mu + 10 delta)^{c/2}).
double c_factor(double mu, double delta, double R, double c);

struct SliceBound {
    double lhs = 0.0;
    double distance_factor = 0.0;  // <d(q, q') / R>^{-N}
    double bound = 0.0;            // distance_factor (R mu + 10 delta)^{c/2} ||f||_2
    double ratio = 0.0;
    double tilde_rhs = 0.0;        // distance_factor ||chi~_{q'} F^{-1} f||_{L2}
    double tilde_ratio = 0.0;
};

/// lhs = ||chi_{q'} F^{-1} f||_{L2(q)} for hyperplane lattice cubes q, q' of side R (parameter
/// coordinates), F^{-1} the unitary inverse transform of the density.
SliceBound localized_slice_bound(const SampledDensity& f, const SubmanifoldSpec& spec, const LatticeIndex& q_prime,
                                 const LatticeIndex& q, int N, double R, double delta, std::size_t points_per_side = 16);

struct RefinedRhs {
    double value = 0.0;           // the weighted square sum, square-rooted
    double point_constant = 0.0;  // the same sum for a unit point mass at the slice centre of Q
    double normalized = 0.0;      // value / (point_constant (2 pi)^{(n-1)/2} ||f||_2)
    double tail_bound = 0.0;  // estimate of the truncated part
    double outside_mass = 0.0;
    std::size_t cubes = 0;
};

/// Minimum N with 2N - n^2 > n.
int refined_min_order(std::size_t n);

/// (sum_{q'} <d(pi Q, q') / R>^{-w} ||<(x' - c(q')) / R>^N chi_{q'} E f(., c_{Q,a})||^2)^{1/2} over the
/// q' within T cubes of pi Q. w < 0 selects 2N - n^2.
RefinedRhs refined_rhs(const SampledDensity& f, const Vec& q_center, double R, int N, double w = -1.0, int T = 2,
                       std::size_t points_per_side = 16);

struct LedgerEntry {
    double R = 0.0;
    double delta = 0.0;
    std::vector<double> mu;
    double A_hat = 0.0;
    double mean = 0.0;
    std::size_t trials = 0;
    std::uint64_t seed_best = 0;
    std::vector<double> per_trial;
};

struct ConstantLedger {
    std::vector<LedgerEntry> entries;
    void add(LedgerEntry e);
    /// Slope of log A_hat against log R over the entries.
    [[nodiscard]] double fitted_growth() const;
};

struct ConstantOptions {
    std::size_t trials = 8;
    std::uint64_t seed = 1;
    std::size_t resolution = 0;  // 0: automatic (Nyquist times oversample, at least min_resolution)
    double oversample = 2.0;
    std::size_t min_resolution = 24;
    bool padded_width = true;     // support width mu + 10/R; false: width mu
    std::size_t refine_steps = 0;  // hill-climbing steps from the best trial
    std::size_t jobs = 1;
    int modes = 4;
    int envelope_power = 8;
};

/// A_hat = max over trials of ||prod E_i f_i||_{L^{2/(k-1)}(Q)} / prod ||f_i||_2 with Q the
/// cube of side R centred at 0 (L^2 when k = 1). family[i].mu is the localization scale.
LedgerEntry best_constant_estimate(const Family& family, double R, double delta, const ConstantOptions& opt);

/// Automatic evaluation resolution used by best_constant_estimate.
std::size_t auto_resolution(const Family& family, double R, double delta, const ConstantOptions& opt);

struct GainCurve {
    std::vector<double> mu;
    std::vector<double> A_hat;
    std::vector<double> mean;
    double slope = 0.0;       // fit of log A_hat against log mu
    double mean_slope = 0.0;  // same for the trial means
    double band_lo = 0.0;     // 10% / 90% quantiles of per-seed slopes
    double band_hi = 0.0;
    double reference = 0.0;   // sum of c_i / 2 over the localized specs
};

/// Sweeps mu over the ladder for the listed specs (support width mu, common seeds per rung).
GainCurve localization_gain_curve(Family family, std::span<const std::size_t> localized,
                                  std::span<const double> ladder, double R, double delta, ConstantOptions opt);

struct RecursionCheck {
    double lhs = 0.0;  // A_hat(delta^{-1} R)
    double A_R = 0.0;
    double factor = 0.0;  // prod c_factor(mu_i, delta, R, c_i)
    double rhs = 0.0;
    double ratio = 0.0;
    bool within = false;
};

RecursionCheck recursion_check(const Family& family, double R, double delta, const ConstantOptions& opt,
                               double kappa_rec = 10.0);

struct CuantCheck {
    int N = 0;
    double product = 0.0;
    double kappa0 = 0.0;  // 11^{c/2} delta^{-c}
    double envelope = 0.0;  // kappa0^N mu^{c/2}
    bool holds = false;
};

/// prod_{m=1}^N c_factor(mu, delta, delta^m R, c) with R = 1/mu and the largest N such that
/// delta^{-1} <= delta^N R <= delta^{-2}.
CuantCheck cuant_check(double mu, double delta, double c);

struct EpsRemovalPlan {
    double p = 0.0, eps = 0.0, C = 0.0;
    std::size_t n = 0;
    double log_inv_eps = 0.0;
    double N = 0.0;
    double beta = 0.0;
    double beta_lo = 0.0;  // C / log(1/eps)
    double beta_hi = 0.0;  // 2C / log(1/eps)
    double q_bound = 0.0;            // p + (n+p+1) 2C / log(1/eps)
    double q_bound_statement = 0.0;  // p + (n+p+1) C / log(1/eps)
    double beta_limit = 0.0;         // 1 / (n+p+1)
    bool beta_in_range = false;
    bool chain_holds = false;
    std::string diagnostic;
};

/// Requires eps < e^{-C} and C > min(2, n-1) (InvalidArgument otherwise).
EpsRemovalPlan eps_removal_exponent(double p, std::size_t n, double eps, double C);

/// (p + n beta) / (1 - beta) < p + (n + p + 1) beta.
bool chain_inequality(double p, std::size_t n, double beta);

struct WeakTypeRecord {
    double volume_f = 0.0;
    double lambda = 0.0;
    double radius_sum = 0.0;  // sum_l R_l^{p eps}
    double rhs_scales = 0.0;  // lambda^{-p} radius_sum
    double kappa_scales = 0.0;
    double beta = 0.0;        // 1/N + p eps C^N
    double rhs_self = 0.0;    // N (lambda^{-n} |F|)^beta
    double kappa_self = 0.0;
};

WeakTypeRecord weak_type_assembly(const SuperlevelDecomposition& d, const SparseCollectionSet& cover, double p,
                                  double eps, std::size_t n);

}  // namespace mrlab
