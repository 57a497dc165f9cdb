#pragma once

#include "mrlab/common.hpp"

#include <span>
#include <vector>

namespace mrlab {

/// Sparse multivariate polynomial with exact derivatives of any order.
class Polynomial {
public:
    struct Term {
        double coeff;
        std::vector<int> exponents;
    };

    Polynomial() = default;
    explicit Polynomial(std::size_t num_vars) : num_vars_(num_vars) {}

    static Polynomial zero(std::size_t num_vars) { return Polynomial(num_vars); }
    /// sum_j x_j^2 / 2
    static Polynomial half_square_norm(std::size_t num_vars);
    /// x_axis^power
    static Polynomial monomial(std::size_t num_vars, std::size_t axis, int power, double coeff = 1.0);
    /// Taylor polynomial of rho - sqrt(rho^2 - |x|^2) through total degree 2*order.
    static Polynomial sphere_cap(std::size_t num_vars, double rho, int order = 6);

    void add_term(double coeff, std::vector<int> exponents);

    [[nodiscard]] std::size_t num_vars() const { return num_vars_; }
    [[nodiscard]] const std::vector<Term>& terms() const { return terms_; }
    [[nodiscard]] bool is_zero() const { return terms_.empty(); }
    [[nodiscard]] int degree() const;

    [[nodiscard]] double operator()(std::span<const double> x) const;
    /// Mixed partial derivative d^alpha evaluated at x.
    [[nodiscard]] double derivative(std::span<const int> alpha, std::span<const double> x) const;
    [[nodiscard]] Vec gradient(std::span<const double> x) const;
    [[nodiscard]] Mat hessian(std::span<const double> x) const;
    [[nodiscard]] double laplacian(std::span<const double> x) const;

    Polynomial operator+(const Polynomial& other) const;
    Polynomial operator*(double s) const;

private:
    std::size_t num_vars_ = 0;
    std::vector<Term> terms_;
};

}  // namespace mrlab
