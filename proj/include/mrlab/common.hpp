#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mrlab {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using cplx = std::complex<double>;

inline constexpr double kPi = 3.14159265358979323846;

// Error hierarchy. The CLI maps these onto exit codes 1/2/3.

/// A precondition on the inputs was violated.
class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// The requested evaluation exceeds what the quadrature / sampling grid can resolve.
class ResolutionError : public std::runtime_error {
public:
    ResolutionError(const std::string& what, std::size_t required)
        : std::runtime_error(what + " (required nodes per axis: " + std::to_string(required) + ")"),
          required_(required) {}
    [[nodiscard]] std::size_t required() const { return required_; }

private:
    std::size_t required_;
};

/// A numerical procedure failed to produce a trustworthy answer.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw InvalidArgument(msg);
}

/// Axis-aligned box [lo, hi] in R^d.
struct Box {
    std::vector<double> lo;
    std::vector<double> hi;

    Box() = default;
    Box(std::vector<double> l, std::vector<double> h);

    static Box centered(std::size_t dim, double half_width);

    [[nodiscard]] std::size_t dim() const { return lo.size(); }
    [[nodiscard]] double side(std::size_t axis) const { return hi[axis] - lo[axis]; }
    [[nodiscard]] double center(std::size_t axis) const { return 0.5 * (hi[axis] + lo[axis]); }
    [[nodiscard]] double diameter() const;
    [[nodiscard]] double volume() const;
    [[nodiscard]] bool contains(std::span<const double> x, double tol = 0.0) const;
    [[nodiscard]] bool contains(const Box& other, double tol = 0.0) const;
    /// Largest |x| over the box.
    [[nodiscard]] double max_norm() const;
};

/// Neumaier-compensated accumulator; summation order is the call order.
class CompensatedSum {
public:
    void add(double v) {
        const double t = sum_ + v;
        if (std::abs(sum_) >= std::abs(v))
            comp_ += (sum_ - t) + v;
        else
            comp_ += (v - t) + sum_;
        sum_ = t;
    }
    [[nodiscard]] double value() const { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

/// Japanese bracket <x> = sqrt(1 + x^2).
inline double bracket(double x) { return std::sqrt(1.0 + x * x); }

/// Least-squares slope and intercept of y against x; residual is the RMS misfit.
struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double residual = 0.0;
};
LineFit fit_line(std::span<const double> x, std::span<const double> y);

/// Uniform midpoint grid over a box with `resolution` cells per axis; values row-major.
struct SampledField {
    Box cube;
    std::size_t resolution = 0;
    std::vector<cplx> values;

    [[nodiscard]] std::size_t dim() const { return cube.dim(); }
    [[nodiscard]] double spacing(std::size_t axis) const { return cube.side(axis) / double(resolution); }
    [[nodiscard]] double cell_volume() const;
    [[nodiscard]] double coordinate(std::size_t axis, std::size_t i) const {
        return cube.lo[axis] + (double(i) + 0.5) * spacing(axis);
    }
    void point(std::size_t flat, std::span<double> out) const;
    [[nodiscard]] double scale() const { return cube.side(0); }
};

/// Row-major strides for a tensor of the given extents (last axis fastest).
std::vector<std::size_t> row_major_strides(std::span<const std::size_t> extents);

}  // namespace mrlab
