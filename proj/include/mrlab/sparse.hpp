#pragma once

#include "mrlab/common.hpp"
#include "mrlab/oscillation.hpp"

#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace mrlab {

struct StabilityReport {
    double C1 = 0.0;        // max_i sup |E_i f_i| over the grid
    double C2 = 0.0;        // max_i sup |grad E_i f_i| over the grid
    double C1_bound = 0.0;  // max_i ||f_i||_{L1}
    double C2_bound = 0.0;  // max_i || |(xi, phi(xi))| f_i ||_{L1}
    double c = 0.0;         // min(1, 1 / (2 k C1^{k-1} C2))
    std::size_t k = 0;
};

/// Constants of the perturbation estimate |prod E_i f_i(x) - prod E_i f_i(x0)| <= k C1^{k-1} C2 |x - x0|.
StabilityReport stability_radius(std::span<const SampledDensity> f, const Box& cube, std::size_t resolution);

struct PerturbationCheck {
    std::size_t pairs = 0;
    std::size_t violations = 0;
    double worst_ratio = 0.0;  // max |Delta prod| / (lambda / 2)
};

/// Samples pairs x, x0 in the cube with |x - x0| <= c lambda and checks the lambda/2 bound.
PerturbationCheck perturbation_check(std::span<const SampledDensity> f, const Box& cube, double c, double lambda,
                                     std::size_t pairs, std::uint64_t seed);

/// Pointwise product of fields sharing one grid.
SampledField product_field(std::span<const SampledField> fields);

struct SuperlevelDecomposition {
    double lambda = 0.0;
    double stability_radius = 0.0;
    std::vector<std::size_t> e_cells;  // flat grid indices with |P| >= lambda
    std::vector<std::size_t> f_cells;  // union of B_{c lambda}(x), x in E
    std::vector<std::size_t> g_cells;  // union of B_1(x), x in E
    double volume_e = 0.0;
    double volume_f = 0.0;
    double volume_g = 0.0;
    double halo_f = 0.0;  // one-cell halo volume of F (grid-resolution error bar)
    double halo_g = 0.0;
    bool f_in_half_level = true;  // F subset of E(lambda/2) on the grid
    double kappa = 0.0;           // |G| lambda^n / |F| (0 when F is empty)
};

SuperlevelDecomposition superlevel_extract(const SampledField& product, double lambda, double c);

/// Coordinates of the given grid cells.
std::vector<Vec> cell_centers(const SampledField& grid, std::span<const std::size_t> cells);

struct SparseCollection {
    double radius = 0.0;      // half side of the covering cubes
    double separation = 0.0;  // R^C N^C
    std::vector<Vec> centers;
};

struct SparseCollectionSet {
    std::size_t N = 1;
    double C = 2.0;
    std::vector<SparseCollection> collections;
    double measure = 0.0;          // |E| (number of unit cubes)
    double radius_cap = 0.0;       // |E|^{C^N} (may be infinite)
    double kappa_cover = 0.0;      // count / (N |E|^{1/N})
    bool radii_within_cap = true;  // every radius <= max(1, |E|^{C^N})
};

/// Multi-scale greedy cover of unit cubes (given by centres) by sparse collections of cubes.
SparseCollectionSet sparse_cover(std::span<const Vec> cube_centers, std::size_t N, double C = 2.0);

struct SparsityVerdict {
    bool sparse = true;
    std::optional<std::pair<std::size_t, std::size_t>> violation;
    double min_distance = 0.0;
};

/// Exhaustive pairwise check that the centres are R^C N^C separated.
SparsityVerdict is_sparse(std::span<const Vec> centers, double R, std::size_t N, double C);

/// Every unit cube lies inside some cube of some collection.
bool covers(const SparseCollectionSet& set, std::span<const Vec> cube_centers);

struct TTStarReport {
    double max_row_sum = 0.0;
    std::vector<double> row_sums;
    Mat pair_bounds;  // min(1, R^{n-1} <c_k - c_j>^{-alpha}), unit diagonal
    double exponent_threshold = 0.0;  // min(2, n-1) / alpha
    double sparsity_exponent = 0.0;   // largest C with the centres (R M)^C separated, M = family size
    bool sparse_regime = false;       // sparsity_exponent above the threshold
    bool bounded = false;             // max row sum <= kappa_TT
};

/// Schur test for the TT* kernel bounds of a family of cubes of radius R with the given centres.
TTStarReport tt_star_sparse_sum(std::span<const Vec> centers, double R, double alpha, double kappa_tt = 2.0);

/// max over hyperplane cubes q' of sum_j <d(pi_i Q_j, q') / R>^{-w}, the weight sum behind the
/// square-summed slice estimate; cubes Q_j of side R centred at `centers`.
double decay2_weight_sum(std::span<const Vec> centers, double R, std::size_t i, double w);

}  // namespace mrlab
