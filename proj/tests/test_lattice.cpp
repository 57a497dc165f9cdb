#include "doctest.h"

#include "mrlab/lattice.hpp"
#include "mrlab/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

using namespace mrlab;

namespace {

// Independent oracle for the profile: psi by Gauss-Legendre on the defining integral.
double profile_oracle(std::size_t dim, int order, double y) {
    const double a = kPi / std::sqrt(double(dim));
    const int nu = order + 1;
    auto rule = gauss_legendre(200, -1.0, 1.0);
    double psi = 0.0, norm = 0.0;
    for (std::size_t k = 0; k < rule.nodes.size(); ++k) {
        const double t = rule.nodes[k];
        psi += rule.weights[k] * std::pow(1 - t * t, nu) * std::cos(a * y * t);
        norm += rule.weights[k] * std::pow(1 - t * t, 2 * nu);
    }
    psi *= a / (2 * kPi);
    return psi * psi / (a / (2 * kPi) * norm);
}

double corner_distance(const Box& A, const Box& B) {
    const std::size_t n = A.dim();
    double best = INFINITY;
    for (std::size_t ca = 0; ca < (1u << n); ++ca)
        for (std::size_t cb = 0; cb < (1u << n); ++cb) {
            double s = 0;
            for (std::size_t m = 0; m < n; ++m) {
                const double x = (ca >> m & 1) ? A.hi[m] : A.lo[m];
                const double y = (cb >> m & 1) ? B.hi[m] : B.lo[m];
                s += (x - y) * (x - y);
            }
            best = std::min(best, std::sqrt(s));
        }
    return best;
}

}  // namespace

TEST_CASE("lattice round trip and point location") {
    CubeLattice lat(3, 0.7);
    for (long a = -5; a <= 5; ++a)
        for (long b = -5; b <= 5; ++b) {
            LatticeIndex j{a, b, a - b};
            Vec c = lat.center(j);
            CHECK(lat.locate(std::span<const double>(c.data(), 3)) == j);
            CHECK(lat.cube(j).contains(std::span<const double>(c.data(), 3)));
        }
    std::vector<double> tie{0.25, -0.25, 0.75};
    CHECK(CubeLattice(3, 0.5).locate(tie) == LatticeIndex{0, -1, 1});
    CHECK_THROWS_AS(CubeLattice(2, 0.0), InvalidArgument);
}

TEST_CASE("cubes_covering") {
    const double r = 0.5;
    CubeLattice lat(2, r);
    auto one = lat.cubes_covering(lat.cube({3, -2}));
    REQUIRE(one.size() == 1);
    CHECK(one[0] == LatticeIndex{3, -2});
    CubeLattice l3(3, r);
    CHECK(l3.cubes_covering(Box({0, 0, 0}, {2 * r, 2 * r, 2 * r})).size() == 27);
    auto pt = lat.cubes_covering(Box({0.25, 0.1}, {0.25, 0.1}));
    REQUIRE(pt.size() == 1);
    CHECK(pt[0] == LatticeIndex{0, 0});

    // brute force: cubes meeting the region in positive measure
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> ud(-3, 3), us(0.05, 2.5);
    for (int t = 0; t < 200; ++t) {
        std::vector<double> lo{ud(rng), ud(rng)}, hi{lo[0] + us(rng), lo[1] + us(rng)};
        Box region(lo, hi);
        auto got = lat.cubes_covering(region);
        std::set<LatticeIndex> expect;
        for (long a = -20; a <= 20; ++a)
            for (long b = -20; b <= 20; ++b) {
                Box q = lat.cube({a, b});
                bool meets = true;
                for (int m = 0; m < 2; ++m)
                    meets = meets && std::min(q.hi[m], hi[m]) - std::max(q.lo[m], lo[m]) > 0;
                if (meets) expect.insert({a, b});
            }
        CHECK(std::set<LatticeIndex>(got.begin(), got.end()) == expect);
        if (region.side(0) >= 2 * r && region.side(1) >= 2 * r)
            CHECK(double(got.size()) <= 4.0 * region.volume() / (r * r));
    }
}

TEST_CASE("projections, splits and distances") {
    LatticeIndex ones{1, 1, 1, 1};
    CHECK(project_cube(ones, 0) == LatticeIndex{1, 1, 1});
    CHECK(project_cube({4, 5, 6}, 1) == LatticeIndex{4, 6});
    std::vector<std::size_t> primed{2, 0};
    auto [p1, p2] = project_lattice_split({1, 2, 3, 4}, 1, primed);
    CHECK(p1 == LatticeIndex{4, 1});
    CHECK(p2 == LatticeIndex{3});
    CHECK_THROWS_AS(project_cube(ones, 4), InvalidArgument);
    CHECK(cube_distance(project_cube(ones, 0), project_cube(ones, 0), 1.0) == 0.0);

    std::mt19937_64 rng(5);
    std::uniform_int_distribution<long> ui(-6, 6);
    for (std::size_t n : {2u, 3u, 4u}) {
        CubeLattice lat(n, 0.3);
        for (int t = 0; t < 200; ++t) {
            LatticeIndex a(n), b(n);
            for (auto& v : a) v = ui(rng);
            for (auto& v : b) v = ui(rng);
            CHECK(std::abs(lat.distance(a, b) - corner_distance(lat.cube(a), lat.cube(b))) < 1e-12);
            const std::size_t i = std::size_t(t) % n;
            CubeLattice h = lat.hyperplane(i);
            auto pa = project_cube(a, i), pb = project_cube(b, i);
            CHECK(std::abs(h.distance(pa, pb) - corner_distance(h.cube(pa), h.cube(pb))) < 1e-12);
        }
    }
}

TEST_CASE("projection onto frame hyperplanes is idempotent") {
    std::mt19937_64 rng(9);
    std::normal_distribution<double> nd;
    Mat M(4, 4);
    for (long i = 0; i < 16; ++i) M.data()[i] = nd(rng);
    Mat Q = Eigen::HouseholderQR<Mat>(M).householderQ();
    CubeLattice lat(1.3, Q);
    for (int t = 0; t < 20; ++t) {
        Vec x = Vec::NullaryExpr(4, [&] { return nd(rng); });
        for (std::size_t i = 0; i < 4; ++i) {
            Vec p = lat.project_point(x, i);
            CHECK((lat.project_point(p, i) - p).norm() <= 1e-15 * (1 + x.norm()));
            CHECK(std::abs(p.dot(Q.col(long(i)))) < 1e-14 * (1 + x.norm()));
        }
        CHECK((lat.to_ambient(lat.to_frame(x)) - x).norm() < 1e-14 * (1 + x.norm()));
    }
    CHECK_THROWS_AS(CubeLattice(1.0, Mat::Ones(2, 2)), InvalidArgument);
}

TEST_CASE("bump profile: values, normalisation, nonnegativity") {
    for (std::size_t dim : {1u, 2u, 3u}) {
        for (int order : {2, 8}) {
            BumpProfile prof(dim, order);
            for (double y : {0.0, 0.1, 0.3, 0.9, 1.7, 4.0, 11.0}) {
                const double o = profile_oracle(dim, order, y);
                CHECK(std::abs(prof(y) - o) <= 1e-12 * profile_oracle(dim, order, 0.0));
            }
            // band-limited: the trapezoid rule with h = 1/2 is exact up to truncation
            CompensatedSum s;
            for (long k = -4000; k <= 4000; ++k) s.add(0.5 * prof(0.5 * double(k)));
            CHECK(s.value() == doctest::Approx(1.0).epsilon(1e-10));
            for (double y = -30; y <= 30; y += 0.173) CHECK(prof(y) >= 0.0);
        }
    }
    BumpFamily fam(CubeLattice(2, 0.25), 8);
    std::vector<double> c{0.5, -0.25};
    std::vector<double> zero{0.0, 0.0};
    CHECK(fam.evaluate({2, -1}, c) == doctest::Approx(fam.base(zero)).epsilon(1e-15));
    CHECK(fam.base(zero) == doctest::Approx(fam.profile()(0.0) * fam.profile()(0.0)));
    // int chi_q = r^n via the exact band-limited trapezoid rule
    const double r = 0.25, h = 0.5 * r;
    CompensatedSum tot;
    std::vector<double> x(2);
    for (long a = -400; a <= 400; ++a)
        for (long b = -400; b <= 400; ++b) {
            x[0] = 0.5 + h * double(a);
            x[1] = -0.25 + h * double(b);
            tot.add(h * h * fam.evaluate({2, -1}, x));
        }
    CHECK(tot.value() == doctest::Approx(r * r).epsilon(1e-10));
}

TEST_CASE("bump spectral leakage") {
    for (std::size_t n : {1u, 2u, 3u}) {
        BumpFamily fam(CubeLattice(n, 1.0), 8);
        CHECK(bump_spectrum_check(fam) <= 1e-10);
        // inside the band the transform is far from zero
        CHECK(fam.profile().transform(0.5 * fam.profile().band()) > 1e-3);
    }
}

TEST_CASE("partition of unity") {
    for (std::size_t n : {1u, 2u, 3u}) {
        BumpFamily fam(CubeLattice(n, 0.5), 8);
        std::vector<double> lo(n, -0.25), hi(n, 0.25);
        auto rep = partition_check(fam, Box(lo, hi), 16, 20.0);
        CHECK(rep.max_deviation <= 1e-8);
        // translation by one cube
        std::vector<double> lo2 = lo, hi2 = hi;
        lo2[0] += 0.5;
        hi2[0] += 0.5;
        auto rep2 = partition_check(fam, Box(lo2, hi2), 16, 20.0);
        for (std::size_t i = 0; i < rep.deviation.values.size(); ++i)
            CHECK(std::abs(rep.deviation.values[i] - rep2.deviation.values[i]) <= 1e-12);
        double prev = INFINITY;
        for (double T : {1.0, 2.0, 4.0, 8.0, 16.0, 20.0}) {
            const double d = partition_check(fam, Box(lo, hi), 16, T).max_deviation;
            CHECK(d <= prev + 1e-15);
            prev = d;
        }
        CHECK(partition_check(fam, Box(lo, hi), 16, 2.0).max_deviation >
              partition_check(fam, Box(lo, hi), 16, 20.0).max_deviation);
    }
    // unfactorised brute-force sum (n = 2)
    BumpFamily fam(CubeLattice(2, 1.0), 8);
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> ud(-3, 3);
    for (int t = 0; t < 5; ++t) {
        std::vector<double> x{ud(rng), ud(rng)};
        auto j0 = fam.lattice().locate(x);
        CompensatedSum s;
        for (long a = -20; a <= 20; ++a)
            for (long b = -20; b <= 20; ++b) s.add(fam.evaluate({j0[0] + a, j0[1] + b}, x));
        CHECK(std::abs(s.value() - 1.0) <= 1e-8);
    }
}

TEST_CASE("weighted almost-orthogonality") {
    BumpFamily fam(CubeLattice(2, 0.5), 8);
    double prev_kappa = 0.0;
    for (int N : {0, 1, 2, 4, 8}) {
        SampledField spike;
        spike.cube = Box::centered(2, 0.25);
        spike.resolution = 5;
        spike.values.assign(25, 0.0);
        spike.values[12] = cplx(1.0);
        auto single = weighted_orthogonality_check(spike, fam, N);
        CHECK(single.ratio <= single.kappa);
        CHECK(single.ratio > 0.0);
        std::vector<double> ratios;
        for (double half : {1.0, 2.0, 4.0}) {
            SampledField g;
            g.cube = Box::centered(2, half);
            g.resolution = std::size_t(16 * half);
            g.values.assign(g.resolution * g.resolution, cplx(1.0));
            auto rep = weighted_orthogonality_check(g, fam, N);
            CHECK(rep.ratio <= rep.kappa);
            ratios.push_back(rep.ratio);
        }
        CHECK(std::abs(ratios[2] - ratios[1]) <= 0.05 * ratios[2]);
        CHECK(single.kappa >= prev_kappa);
        prev_kappa = single.kappa;
    }
    // hyperplane lattice version
    BumpFamily hfam(CubeLattice(3, 0.5).hyperplane(2), 8);
    SampledField g;
    g.cube = Box::centered(2, 1.0);
    g.resolution = 12;
    std::mt19937_64 rng(12);
    std::normal_distribution<double> nd;
    for (int i = 0; i < 144; ++i) g.values.push_back(cplx(nd(rng), nd(rng)));
    auto rep = weighted_orthogonality_check(g, hfam, 2);
    CHECK(rep.ratio <= rep.kappa);
}
