#pragma once

#include "mrlab/common.hpp"

#include <span>
#include <vector>

namespace mrlab {

struct GaussRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

/// n-point Gauss-Legendre rule on [a, b].
GaussRule gauss_legendre(std::size_t n, double a = -1.0, double b = 1.0);

/// Tensor product of per-axis Gauss-Legendre rules over a box. Flat index is row-major.
class TensorGrid {
public:
    TensorGrid() = default;
    TensorGrid(const Box& box, std::span<const std::size_t> counts);

    [[nodiscard]] std::size_t dim() const { return axes_.size(); }
    [[nodiscard]] std::size_t size() const { return size_; }
    [[nodiscard]] const Box& box() const { return box_; }
    [[nodiscard]] const GaussRule& axis(std::size_t a) const { return axes_[a]; }
    [[nodiscard]] std::vector<std::size_t> counts() const;

    /// Coordinates of flat node `idx` written into `out` (size dim()).
    void node(std::size_t idx, std::span<double> out) const;
    [[nodiscard]] double weight(std::size_t idx) const;
    [[nodiscard]] std::vector<double> all_weights() const;

private:
    Box box_;
    std::vector<GaussRule> axes_;
    std::size_t size_ = 0;
};

/// Barycentric Lagrange interpolation through arbitrary distinct nodes.
class BarycentricInterpolant {
public:
    explicit BarycentricInterpolant(std::vector<double> nodes);
    /// Interpolation coefficients l_j(x) so that p(x) = sum_j l_j(x) y_j.
    [[nodiscard]] std::vector<double> coefficients(double x) const;
    /// Spectral differentiation matrix D with (D y)_i = p'(x_i).
    [[nodiscard]] Mat differentiation_matrix() const;

private:
    std::vector<double> nodes_;
    std::vector<double> bary_;
};

}  // namespace mrlab
