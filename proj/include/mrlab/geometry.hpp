#pragma once

#include "mrlab/common.hpp"
#include "mrlab/polynomial.hpp"

#include <memory>
#include <optional>
#include <span>
#include <vector>

namespace mrlab {

/// Graph-parametrised hypersurface piece: the ambient point has coordinate `normal_axis`
/// equal to phi(xi') and the remaining coordinates (in increasing order) equal to xi'.
struct HypersurfacePatch {
    std::size_t n = 2;
    Box domain;
    Polynomial phi;
    std::size_t normal_axis = 0;
    double delta_geom = 0.25;
    double smooth_bound = 1.0;

    /// Validates the standing normalisation (phi(0)=0, grad phi(0)=0 when 0 is in U, small
    /// diameter and slope measured against delta_geom).
    HypersurfacePatch(std::size_t n, Box domain, Polynomial phi, std::size_t normal_axis,
                      double delta_geom = 0.25, double smooth_bound = 1.0);

    static HypersurfacePatch flat(std::size_t n, std::size_t normal_axis, double half_width,
                                  double delta_geom = 0.25);
    static HypersurfacePatch paraboloid(std::size_t n, std::size_t normal_axis, double half_width,
                                        double delta_geom = 0.25);
    /// phi = sum_j xi_j^l.
    static HypersurfacePatch monomial(std::size_t n, std::size_t normal_axis, int l, double half_width,
                                      double delta_geom = 0.25);
    static HypersurfacePatch sphere_cap(std::size_t n, std::size_t normal_axis, double rho,
                                        double half_width, double delta_geom = 0.25);

    [[nodiscard]] std::size_t param_dim() const { return n - 1; }
    /// Ambient index carried by parameter coordinate j.
    [[nodiscard]] std::size_t param_axis(std::size_t j) const { return j < normal_axis ? j : j + 1; }

    [[nodiscard]] Vec embed(std::span<const double> xi) const;
    /// Columns are d Sigma / d xi_j.
    [[nodiscard]] Mat tangents(std::span<const double> xi) const;
    /// Unit normal with positive component along normal_axis.
    [[nodiscard]] Vec unit_normal(std::span<const double> xi) const;
    /// sup |phi| and sup |grad phi| estimated on a dense tensor grid of the domain.
    [[nodiscard]] double sup_phi() const;
    [[nodiscard]] double sup_grad() const;
};

using PatchPtr = std::shared_ptr<const HypersurfacePatch>;

/// Codimension-c graph submanifold M of the parameter domain: parameter coordinates
/// `graph_axes[g]` equal graph_maps[g] evaluated at the remaining (free) coordinates.
struct SubmanifoldSpec {
    PatchPtr parent;
    std::size_t codim = 0;
    std::vector<std::size_t> graph_axes;
    std::vector<Polynomial> graph_maps;
    double mu = 0.0;

    SubmanifoldSpec(PatchPtr parent, std::size_t codim, std::vector<Polynomial> graph_maps, double mu,
                    std::vector<std::size_t> graph_axes = {});
    /// M = U.
    static SubmanifoldSpec full(PatchPtr parent);

    [[nodiscard]] std::size_t free_dim() const { return parent->param_dim() - codim; }
    [[nodiscard]] const std::vector<std::size_t>& free_axes() const { return free_axes_; }
    /// Box of the free coordinates (projection of U).
    [[nodiscard]] Box free_domain() const;
    /// Parameter point (u, Phi(u)) for free coordinates u.
    [[nodiscard]] std::vector<double> lift(std::span<const double> u) const;
    /// Components xi_graph - Phi(xi_free).
    [[nodiscard]] std::vector<double> graph_residual(std::span<const double> xi) const;
    /// Jacobian of lift with respect to the free coordinates ((n-1) x free_dim).
    [[nodiscard]] Mat lift_jacobian(std::span<const double> u) const;

private:
    std::vector<std::size_t> free_axes_;
};

/// |V_1 ^ ... ^ V_k| for orthonormal bases given as column blocks.
double wedge_norm(std::span<const Mat> spaces);

/// Orthonormal basis (columns) of the normal space of Sigma(M) at the parameter point xi.
Mat normal_space(const SubmanifoldSpec& spec, std::span<const double> xi, double tol = 1e-9);

/// Deterministic nested sample points of a box: the centre first, then Halton points.
std::vector<std::vector<double>> nested_samples(const Box& box, std::size_t count);

/// Minimum of the wedge of hypersurface normals over all sample tuples.
double check_transversality(std::span<const HypersurfacePatch> family, std::size_t samples_per_surface);
/// Same for the normal spaces of submanifolds.
double check_transversality(std::span<const SubmanifoldSpec> family, std::size_t samples_per_surface);

class TransversalFamily {
public:
    TransversalFamily(std::vector<SubmanifoldSpec> subs, std::size_t samples_per_surface = 1);

    [[nodiscard]] std::size_t k() const { return subs_.size(); }
    [[nodiscard]] std::size_t n() const { return subs_.front().parent->n; }
    [[nodiscard]] const std::vector<SubmanifoldSpec>& submanifolds() const { return subs_; }
    [[nodiscard]] double nu() const { return nu_; }
    /// Normal spaces at the base point 0 of each submanifold.
    [[nodiscard]] std::vector<Mat> base_normals() const;

private:
    std::vector<SubmanifoldSpec> subs_;
    double nu_ = 0.0;
};

struct Orthogonalization {
    Mat A;
    Mat A_inv;
    double norm_A = 0.0;
    double norm_A_inv = 0.0;
    double nu = 0.0;
    /// (|A| + |A^-1|) * nu, so that |A| + |A^-1| <= kappa / nu.
    double kappa = 0.0;
    double condition = 0.0;
    bool ill_conditioned = false;
    /// Coordinate indices assigned to each normal block.
    std::vector<std::vector<std::size_t>> targets;
    /// A^{-T} applied to each normal frame; these are coordinate frames.
    std::vector<Mat> transformed_normals;
};

/// A with A^T e_{ij} = n_{ij}, where the e_{ij} are consecutive coordinate vectors.
Orthogonalization orthogonalize_normals(std::span<const Mat> normal_frames, double condition_threshold = 1e8);
Orthogonalization orthogonalize_normals(const TransversalFamily& family, double condition_threshold = 1e8);

struct TypeResult {
    bool finite = false;
    int order = 0;       // valid when finite
    int max_order = 0;
};

/// Order of contact of the patch with hyperplanes at x0, probed on a Fibonacci sphere of
/// directions together with the surface normal.
TypeResult finite_type_order(const HypersurfacePatch& patch, std::span<const double> x0, int max_order);

/// Distance from a parameter point to M (damped Gauss-Newton, multistart).
double distance_to_manifold(const SubmanifoldSpec& spec, std::span<const double> xi);

struct NeighborhoodMembership {
    bool metric = false;
    bool graph = false;
};
NeighborhoodMembership neighborhood_contains(const SubmanifoldSpec& spec, double eps, std::span<const double> xi);

/// Constant kappa with B_eps(M) inside graph-B_{kappa eps}(M) and conversely: 1 + sup |D Phi|.
double graph_dilation_constant(const SubmanifoldSpec& spec);

}  // namespace mrlab
