#pragma once

#include "mrlab/common.hpp"

#include <span>
#include <utility>
#include <vector>

namespace mrlab {

using LatticeIndex = std::vector<long>;

/// Cubes q(j) = prod [r(j_m - 1/2), r(j_m + 1/2)] in the coordinates of an orthonormal frame.
class CubeLattice {
public:
    CubeLattice(std::size_t n, double r);
    /// Frame columns are the orthonormal directions (n_1, ..., n_k, e_{k+1}, ...).
    CubeLattice(double r, Mat frame);

    [[nodiscard]] std::size_t dim() const { return n_; }
    [[nodiscard]] double scale() const { return r_; }
    [[nodiscard]] const Mat& frame() const { return frame_; }

    [[nodiscard]] Vec to_frame(const Vec& ambient) const { return frame_.transpose() * ambient; }
    [[nodiscard]] Vec to_ambient(const Vec& coords) const { return frame_ * coords; }

    /// c(q) in frame coordinates (r * j).
    [[nodiscard]] Vec center(const LatticeIndex& j) const;
    [[nodiscard]] Box cube(const LatticeIndex& j) const;
    /// Index of the cube containing a frame-coordinate point; ties go to the smaller index.
    [[nodiscard]] LatticeIndex locate(std::span<const double> x) const;
    /// Minimal set of cubes whose union contains the (frame-coordinate) region, row-major order.
    [[nodiscard]] std::vector<LatticeIndex> cubes_covering(const Box& region) const;
    /// Set distance between two closed cubes of this lattice.
    [[nodiscard]] double distance(const LatticeIndex& a, const LatticeIndex& b) const;

    /// Lattice of the hyperplane H_i = n_i^perp: frame with column i removed.
    [[nodiscard]] CubeLattice hyperplane(std::size_t i) const;
    /// Orthogonal projection of an ambient point onto H_i.
    [[nodiscard]] Vec project_point(const Vec& ambient, std::size_t i) const;

private:
    std::size_t n_;
    double r_;
    Mat frame_;
};

/// pi_i on indices: drop frame coordinate i.
LatticeIndex project_cube(const LatticeIndex& j, std::size_t i);

/// Index of pi_i q split as (L(H'_i), L(H''_i)); `primed` lists the coordinates of H_i
/// (after the drop) that belong to H'_i, the rest go to H''_i in increasing order.
std::pair<LatticeIndex, LatticeIndex> project_lattice_split(const LatticeIndex& j, std::size_t i,
                                                            std::span<const std::size_t> primed);

/// Set distance between closed lattice cubes of side r.
double cube_distance(const LatticeIndex& a, const LatticeIndex& b, double r);

/// One-dimensional factor of the bump profile: chi_1 = |psi|^2 / Z, where psi^ is
/// (1 - (xi/a)^2)^(m+1) on [-a, a] and a = pi / sqrt(dim). The tensor product over `dim`
/// axes has spectrum inside the ball of radius 2 pi (one cycle per unit length).
class BumpProfile {
public:
    explicit BumpProfile(std::size_t dim, int order = 8);

    [[nodiscard]] int order() const { return order_; }
    [[nodiscard]] double half_band() const { return a_; }
    /// Spectral support of chi_1 is [-2a, 2a] (angular frequency).
    [[nodiscard]] double band() const { return 2.0 * a_; }
    [[nodiscard]] double operator()(double y) const;
    /// chi_1^(xi) = int chi_1(y) e^{-i y xi} dy by high-resolution quadrature on [-L, L].
    [[nodiscard]] double transform(double xi, double L = 400.0) const;

private:
    [[nodiscard]] double psi(double y) const;

    int order_;
    int nu_;
    double a_;
    double psi_scale_;
    double inv_norm_;
};

/// chi_q(x) = chi_0((x - c(q)) / r) with chi_0 the tensor product of BumpProfile factors.
class BumpFamily {
public:
    explicit BumpFamily(CubeLattice lattice, int order = 8);

    [[nodiscard]] const CubeLattice& lattice() const { return lattice_; }
    [[nodiscard]] const BumpProfile& profile() const { return profile_; }
    [[nodiscard]] int order() const { return profile_.order(); }
    /// chi_0 at a dimensionless point.
    [[nodiscard]] double base(std::span<const double> y) const;
    /// chi_q at a frame-coordinate point.
    [[nodiscard]] double evaluate(const LatticeIndex& q, std::span<const double> x) const;

private:
    CubeLattice lattice_;
    BumpProfile profile_;
};

/// Max of |chi_0^| outside the spectral ball, relative to the peak chi_0^(0) = 1.
double bump_spectrum_check(const BumpFamily& family, std::size_t samples = 256);

struct PartitionReport {
    double max_deviation = 0.0;
    double truncation = 0.0;
    SampledField deviation;  // |sum chi_q - 1| on the evaluation grid (real values)
};

/// |sum_q chi_q(x) - 1| on the midpoint grid of `region` (frame coordinates), summing over
/// the cubes whose index lies within T of the point's own cube in every coordinate.
PartitionReport partition_check(const BumpFamily& family, const Box& region, std::size_t grid, double T = 20.0);

struct OrthogonalityReport {
    int N = 0;
    double ratio = 0.0;  // sum_q ||<(x - c(q))/r>^N chi_q g||^2 / ||g||^2
    double kappa = 0.0;  // sup of the weight sum over a period grid and the sample points
};

/// The weighted almost-orthogonality ratio for a function sampled on a midpoint grid in
/// frame coordinates; cubes within T (index distance) of each sample contribute.
OrthogonalityReport weighted_orthogonality_check(const SampledField& g, const BumpFamily& family, int N,
                                                 double T = 8.0, std::size_t period_grid = 12);

}  // namespace mrlab
