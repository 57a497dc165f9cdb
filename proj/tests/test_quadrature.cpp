#include "doctest.h"

#include "mrlab/quadrature.hpp"

#include <cmath>

using namespace mrlab;

TEST_CASE("Gauss-Legendre integrates polynomials of degree 2n-1 exactly") {
    for (std::size_t n : {1u, 2u, 5u, 17u, 64u}) {
        auto r = gauss_legendre(n, -0.3, 1.1);
        for (std::size_t d = 0; d <= 2 * n - 1 && d <= 40; ++d) {
            double s = 0.0;
            for (std::size_t i = 0; i < n; ++i) s += r.weights[i] * std::pow(r.nodes[i], double(d));
            const double exact = (std::pow(1.1, double(d + 1)) - std::pow(-0.3, double(d + 1))) / double(d + 1);
            CHECK(s == doctest::Approx(exact).epsilon(1e-12));
        }
    }
}

TEST_CASE("Gauss-Legendre nodes are increasing and weights positive") {
    auto r = gauss_legendre(200);
    for (std::size_t i = 1; i < r.nodes.size(); ++i) CHECK(r.nodes[i] > r.nodes[i - 1]);
    for (double w : r.weights) CHECK(w > 0.0);
}

TEST_CASE("tensor grid weights sum to the box volume") {
    Box b({-1.0, 0.0, 2.0}, {1.0, 0.5, 2.25});
    std::vector<std::size_t> c{4, 3, 5};
    TensorGrid g(b, c);
    double s = 0.0;
    for (double w : g.all_weights()) s += w;
    CHECK(s == doctest::Approx(b.volume()).epsilon(1e-13));
    std::vector<double> x(3);
    g.node(g.size() - 1, x);
    CHECK(x[2] == g.axis(2).nodes.back());
}

TEST_CASE("spectral differentiation of a smooth function") {
    auto r = gauss_legendre(40, -1.0, 1.0);
    BarycentricInterpolant bi(r.nodes);
    auto d = bi.differentiation_matrix();
    Vec y(40), dy(40);
    for (int i = 0; i < 40; ++i) {
        y[i] = std::sin(3 * r.nodes[i]);
        dy[i] = 3 * std::cos(3 * r.nodes[i]);
    }
    CHECK((d * y - dy).lpNorm<Eigen::Infinity>() < 1e-10);
    auto c = bi.coefficients(0.123);
    double v = 0.0;
    for (int i = 0; i < 40; ++i) v += c[i] * y[i];
    CHECK(v == doctest::Approx(std::sin(0.369)).epsilon(1e-13));
}
