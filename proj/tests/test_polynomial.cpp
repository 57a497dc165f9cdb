#include "doctest.h"

#include "mrlab/polynomial.hpp"

#include <cmath>
#include <vector>

using mrlab::Polynomial;

TEST_CASE("half square norm: value, gradient, hessian") {
    auto p = Polynomial::half_square_norm(3);
    std::vector<double> x{0.3, -0.2, 0.5};
    CHECK(p(x) == doctest::Approx(0.5 * (0.09 + 0.04 + 0.25)).epsilon(1e-15));
    auto g = p.gradient(x);
    for (int i = 0; i < 3; ++i) CHECK(g[i] == doctest::Approx(x[i]));
    auto h = p.hessian(x);
    CHECK(h.isApprox(Eigen::MatrixXd::Identity(3, 3)));
    CHECK(p.laplacian(x) == doctest::Approx(3.0));
}

TEST_CASE("monomial derivatives use falling powers") {
    auto p = Polynomial::monomial(1, 0, 4);
    std::vector<double> x{0.7};
    for (int k = 0; k <= 5; ++k) {
        std::vector<int> a{k};
        double expect = 0.0;
        if (k <= 4) {
            double f = 1.0;
            for (int j = 0; j < k; ++j) f *= (4 - j);
            expect = f * std::pow(0.7, 4 - k);
        }
        CHECK(p.derivative(a, x) == doctest::Approx(expect).epsilon(1e-14));
    }
    CHECK(p.degree() == 4);
}

TEST_CASE("sphere cap Taylor polynomial approximates the cap") {
    const double rho = 2.0;
    auto p = Polynomial::sphere_cap(2, rho, 12);
    std::vector<double> x{0.1, -0.15};
    const double r2 = x[0] * x[0] + x[1] * x[1];
    const double exact = rho - std::sqrt(rho * rho - r2);
    CHECK(std::abs(p(x) - exact) < 1e-15);
    std::vector<double> z{0.0, 0.0};
    CHECK(p(z) == 0.0);
    CHECK(p.gradient(z).norm() == 0.0);
}

TEST_CASE("add_term merges and cancels") {
    Polynomial p(2);
    p.add_term(1.0, {1, 1});
    p.add_term(-1.0, {1, 1});
    CHECK(p.is_zero());
    CHECK_THROWS_AS(p.add_term(1.0, {1}), mrlab::InvalidArgument);
}
