#pragma once

#include "mrlab/common.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace mrlab {

/// Nonnegative table over a box of lattice coordinates. `coords` are ambient lattice axes in
/// increasing order; `extents[a]` is the number of points along coords[a]; values row-major.
struct LatticeTable {
    std::vector<std::size_t> coords;
    std::vector<std::size_t> extents;
    std::vector<double> values;

    [[nodiscard]] std::size_t size() const;
    /// Value at the ambient index z (only the entries listed in `coords` are read).
    [[nodiscard]] double at(std::span<const long> z) const;
};

/// g_i on L(H_i): a table over every lattice axis except the dropped one, with the H''_i
/// coordinates (ambient labels) declared in `double_prime`.
struct LatticeFunction {
    LatticeTable table;
    std::vector<std::size_t> double_prime;

    /// Moduli of complex values are stored.
    static LatticeFunction from_complex(std::vector<std::size_t> coords, std::vector<std::size_t> extents,
                                        std::span<const cplx> values, std::vector<std::size_t> double_prime = {});
};

/// The box L cap [0, m_1) x ... x [0, m_n) and the axis dropped by each projection pi_i.
struct LWConfig {
    std::vector<std::size_t> box;
    std::vector<std::size_t> dropped;

    [[nodiscard]] std::size_t n() const { return box.size(); }
    [[nodiscard]] std::size_t k() const { return dropped.size(); }
    /// Standard configuration: pi_i drops axis i.
    static LWConfig standard(std::vector<std::size_t> box, std::size_t k);
    /// Coordinates of g_i: all axes except dropped[i].
    [[nodiscard]] std::vector<std::size_t> function_coords(std::size_t i) const;
    [[nodiscard]] std::vector<std::size_t> function_extents(std::size_t i) const;
};

struct LWResult {
    double lhs = 0.0;
    double rhs = 0.0;
    double ratio = 0.0;
};

/// l^p quasi-norm of a finite sequence (p = infinity allowed), compensated accumulation.
double lp_sequence_norm(std::span<const double> a, double p);

/// lhs = || prod g_i(pi_i z) ||_{l^{2/(k-1)}(L cap box)}, rhs = prod ||g_i||_{l^2}.
LWResult lw_ratio(std::span<const LatticeFunction> g, const LWConfig& cfg);

/// (sum_{z'} sup_{z''} |g(z', z'')|^2)^{1/2} with z'' the double_prime coordinates.
double l2linf_norm(const LatticeFunction& g);

/// Same lhs as lw_ratio; rhs = prod l2linf_norm(g_i). Splits must be disjoint, avoid the
/// dropped axes and have total size at most n - k.
LWResult lw_refined_ratio(std::span<const LatticeFunction> g, const LWConfig& cfg);

struct HolderStep {
    const char* name = "";
    double lhs = 0.0;  // value at the worst slice
    double rhs = 0.0;
    double max_ratio = 0.0;
    bool holds = false;
};

struct HolderChain {
    std::vector<HolderStep> steps;
    bool all_hold = false;
};

/// Evaluates every intermediate inequality of the slice / Loomis-Whitney / Holder / embedding
/// chain behind the refined estimate and checks each with ratio <= 1 + tol.
HolderChain holder_chain_check(std::span<const LatticeFunction> g, const LWConfig& cfg, double tol = 1e-12);

/// Random instance: independent nonnegative tables, entries uniform on [0,1) with a random
/// fraction zeroed, using the given splits (one list of H'' axes per function).
std::vector<LatticeFunction> random_lw_instance(const LWConfig& cfg, std::span<const std::vector<std::size_t>> splits,
                                                std::uint64_t seed, double zero_fraction = 0.3);

struct ConstantSearch {
    double best_ratio = 0.0;
    std::vector<LatticeFunction> best;
};

/// Coordinate-ascent perturbation from random starts, maximising lw_refined_ratio (which
/// equals lw_ratio when all splits are empty).
ConstantSearch lw_constant_search(const LWConfig& cfg, std::span<const std::vector<std::size_t>> splits,
                                  std::size_t starts, std::size_t sweeps, std::uint64_t seed);

}  // namespace mrlab
