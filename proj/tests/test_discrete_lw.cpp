#include "doctest.h"

#include "mrlab/discrete_lw.hpp"

#include <cmath>
#include <random>

using namespace mrlab;

namespace {

// Direct triple-loop reference for n = k = 3 (pi_i drops axis i).
double lhs_reference3(const std::vector<LatticeFunction>& g, std::size_t m0, std::size_t m1, std::size_t m2) {
    double s = 0.0;
    for (std::size_t a = 0; a < m0; ++a)
        for (std::size_t b = 0; b < m1; ++b)
            for (std::size_t c = 0; c < m2; ++c)
                s += g[0].table.values[b * m2 + c] * g[1].table.values[a * m2 + c] * g[2].table.values[a * m1 + b];
    return s;
}

double l2_reference(const LatticeFunction& g) {
    double s = 0.0;
    for (double v : g.table.values) s += v * v;
    return std::sqrt(s);
}

LatticeFunction constant_function(const LWConfig& cfg, std::size_t i, double v) {
    LatticeFunction g;
    g.table.coords = cfg.function_coords(i);
    g.table.extents = cfg.function_extents(i);
    g.table.values.assign(g.table.size(), v);
    return g;
}

}  // namespace

TEST_CASE("lw_ratio: constants, point masses, reference evaluation") {
    for (std::size_t m : {1u, 3u, 8u}) {
        auto cfg = LWConfig::standard({m, m, m}, 3);
        std::vector<LatticeFunction> g;
        for (std::size_t i = 0; i < 3; ++i) g.push_back(constant_function(cfg, i, 1.0));
        auto r = lw_ratio(g, cfg);
        CHECK(r.lhs == doctest::Approx(double(m * m * m)).epsilon(1e-14));
        CHECK(r.rhs == doctest::Approx(double(m * m * m)).epsilon(1e-14));
        CHECK(std::abs(r.ratio - 1.0) <= 1e-12);
    }
    auto cfg = LWConfig::standard({4, 5, 3}, 3);
    std::vector<LatticeFunction> g;
    for (std::size_t i = 0; i < 3; ++i) g.push_back(constant_function(cfg, i, 0.0));
    CHECK(lw_ratio(g, cfg).ratio == 0.0);
    // point mass at z0 = (2, 1, 0)
    g[0].table.values[1 * 3 + 0] = 1.0;
    g[1].table.values[2 * 3 + 0] = 1.0;
    g[2].table.values[2 * 5 + 1] = 1.0;
    CHECK(lw_ratio(g, cfg).ratio == doctest::Approx(1.0).epsilon(1e-15));

    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 2000; ++seed) {
        const std::size_t m0 = 1 + seed % 8, m1 = 1 + (seed / 8) % 8, m2 = 1 + (seed / 64) % 8;
        auto c = LWConfig::standard({m0, m1, m2}, 3);
        auto inst = random_lw_instance(c, {}, seed);
        auto r = lw_ratio(inst, c);
        CHECK(std::abs(r.lhs - lhs_reference3(inst, m0, m1, m2)) <= 1e-12 * r.lhs);
        CHECK(std::abs(r.rhs - l2_reference(inst[0]) * l2_reference(inst[1]) * l2_reference(inst[2])) <= 1e-12 * r.rhs);
        worst = std::max(worst, r.ratio);
    }
    CHECK(worst <= 1.0 + 1e-12);
}

TEST_CASE("lw_ratio invariances") {
    std::mt19937_64 rng(1);
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        auto cfg = LWConfig::standard({3, 4, 5}, 3);
        auto g = random_lw_instance(cfg, {}, seed);
        const double r0 = lw_ratio(g, cfg).ratio;
        auto h = g;
        const double lam[3] = {0.3, 7.0, 1e3};
        for (std::size_t i = 0; i < 3; ++i)
            for (auto& v : h[i].table.values) v *= lam[i];
        CHECK(std::abs(lw_ratio(h, cfg).ratio - r0) <= 1e-12 * r0);

        // monotonicity: restrict to the sub-box [0,2) x [0,3) x [0,4)
        auto sub = LWConfig::standard({2, 3, 4}, 3);
        std::vector<LatticeFunction> gs;
        for (std::size_t i = 0; i < 3; ++i) {
            LatticeFunction f = constant_function(sub, i, 0.0);
            std::vector<long> z(3);
            for (std::size_t f0 = 0; f0 < f.table.size(); ++f0) {
                std::size_t rest = f0;
                for (std::size_t a = f.table.coords.size(); a-- > 0;) {
                    z[f.table.coords[a]] = long(rest % f.table.extents[a]);
                    rest /= f.table.extents[a];
                }
                f.table.values[f0] = g[i].table.at(z);
            }
            gs.push_back(f);
        }
        CHECK(lw_ratio(gs, sub).lhs <= lw_ratio(g, cfg).lhs * (1 + 1e-15));

        // permutation: swap axes 0 and 2 (so pi_0 <-> pi_2)
        LWConfig perm;
        perm.box = {5, 4, 3};
        perm.dropped = {2, 1, 0};
        std::vector<LatticeFunction> gp(3);
        for (std::size_t i = 0; i < 3; ++i) {
            gp[i] = constant_function(perm, i, 0.0);
            std::vector<long> z(3), zo(3);
            for (std::size_t f0 = 0; f0 < gp[i].table.size(); ++f0) {
                std::size_t rest = f0;
                for (std::size_t a = gp[i].table.coords.size(); a-- > 0;) {
                    z[gp[i].table.coords[a]] = long(rest % gp[i].table.extents[a]);
                    rest /= gp[i].table.extents[a];
                }
                zo = {z[2], z[1], z[0]};
                gp[i].table.values[f0] = g[i].table.at(zo);
            }
        }
        CHECK(std::abs(lw_ratio(gp, perm).ratio - r0) <= 1e-12 * r0);
    }
}

TEST_CASE("l2linf_norm") {
    // separable a(z') b(z'') with max |b| = 1
    LatticeFunction g;
    g.table.coords = {1, 2};
    g.table.extents = {4, 3};
    const double a[4] = {0.5, -2.0, 1.0, 3.0}, b[3] = {0.2, -1.0, 0.7};
    for (double x : a)
        for (double y : b) g.table.values.push_back(std::abs(x * y));
    g.double_prime = {2};
    CHECK(l2linf_norm(g) == doctest::Approx(std::sqrt(0.25 + 4 + 1 + 9)).epsilon(1e-15));
    LatticeFunction one;
    one.table.coords = {0};
    one.table.extents = {1};
    one.table.values = {2.5};
    one.double_prime = {0};
    CHECK(l2linf_norm(one) == 2.5);
    std::vector<cplx> cv{cplx(3, 4)};
    CHECK(l2linf_norm(LatticeFunction::from_complex({0}, {1}, cv)) == doctest::Approx(5.0));

    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u;
    for (int t = 0; t < 50; ++t) {
        LatticeFunction h;
        h.table.coords = {0, 2, 3};
        h.table.extents = {3, 4, 5};
        for (int i = 0; i < 60; ++i) h.table.values.push_back(u(rng));
        h.double_prime = {2};
        CompensatedSum s;  // double loop: z' = (z0, z3), z'' = z2
        for (int i0 = 0; i0 < 3; ++i0)
            for (int i3 = 0; i3 < 5; ++i3) {
                double m = 0.0;
                for (int i2 = 0; i2 < 4; ++i2) m = std::max(m, h.table.values[std::size_t((i0 * 4 + i2) * 5 + i3)]);
                s.add(m * m);
            }
        CHECK(l2linf_norm(h) == std::sqrt(s.value()));
    }
}

TEST_CASE("refined ratio") {
    // empty splits reduce to lw_ratio
    auto cfg3 = LWConfig::standard({4, 3, 5}, 3);
    auto g = random_lw_instance(cfg3, {}, 11);
    CHECK(std::abs(lw_refined_ratio(g, cfg3).ratio - lw_ratio(g, cfg3).ratio) <= 1e-15);

    auto cfg = LWConfig::standard({3, 4, 3, 5}, 2);
    std::vector<std::vector<std::size_t>> splits{{2}, {3}};
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 300; ++seed) {
        auto h = random_lw_instance(cfg, splits, seed);
        worst = std::max(worst, lw_refined_ratio(h, cfg).ratio);
    }
    CHECK(worst <= 1.0 + 1e-12);

    // g_i constant along its H''_i axis: the refined rhs equals the l2 norm over H'_i
    auto h = random_lw_instance(cfg, splits, 99);
    for (std::size_t i = 0; i < 2; ++i) {
        auto& t = h[i].table;
        const std::size_t ax = splits[i][0];
        std::size_t pos = 0;
        while (t.coords[pos] != ax) ++pos;
        std::size_t stride = 1;
        for (std::size_t a = pos + 1; a < t.coords.size(); ++a) stride *= t.extents[a];
        for (std::size_t f = 0; f < t.values.size(); ++f) {
            const std::size_t idx = (f / stride) % t.extents[pos];
            t.values[f] = t.values[f - idx * stride];
        }
    }
    double rhs = 1.0;
    for (std::size_t i = 0; i < 2; ++i) {
        const std::size_t along = h[i].table.extents[h[i].table.coords[0] == splits[i][0] ? 0 : (h[i].table.coords[1] == splits[i][0] ? 1 : 2)];
        rhs *= l2_reference(h[i]) / std::sqrt(double(along));
    }
    CHECK(lw_refined_ratio(h, cfg).rhs == doctest::Approx(rhs).epsilon(1e-12));

    // inconsistent splits
    auto bad = random_lw_instance(cfg, splits, 1);
    bad[1].double_prime = {2};
    CHECK_THROWS_AS(lw_refined_ratio(bad, cfg), InvalidArgument);
    bad[1].double_prime = {0};
    CHECK_THROWS_AS(lw_refined_ratio(bad, cfg), InvalidArgument);
    CHECK_THROWS_AS(lw_ratio(bad, LWConfig::standard({3, 0, 3, 5}, 2)), InvalidArgument);
}

TEST_CASE("Holder chain") {
    auto cfg = LWConfig::standard({3, 3, 4, 3, 2}, 2);
    std::vector<std::vector<std::size_t>> splits{{2}, {3}};
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        auto g = random_lw_instance(cfg, splits, seed);
        auto chain = holder_chain_check(g, cfg);
        CHECK(chain.steps.size() == 5);
        CHECK(chain.all_hold);
    }
    auto cfg3 = LWConfig::standard({3, 3, 3, 3, 2}, 3);
    std::vector<std::vector<std::size_t>> s3{{3}, {}, {4}};
    for (std::uint64_t seed = 0; seed < 30; ++seed) CHECK(holder_chain_check(random_lw_instance(cfg3, s3, seed), cfg3).all_hold);

    // point mass: every step is an equality
    auto pm = random_lw_instance(cfg, splits, 5, 2.0);  // all zero
    std::vector<long> z0{1, 2, 3, 0, 1};
    for (std::size_t i = 0; i < 2; ++i) {
        auto& t = pm[i].table;
        std::size_t f = 0;
        for (std::size_t a = 0; a < t.coords.size(); ++a) f = f * t.extents[a] + std::size_t(z0[t.coords[a]]);
        t.values[f] = 1.0;
    }
    for (const auto& s : holder_chain_check(pm, cfg).steps) CHECK(s.max_ratio == doctest::Approx(1.0).epsilon(1e-15));

    const double a[2] = {1.0, 1.0};
    CHECK(lp_sequence_norm(a, 1.0) == doctest::Approx(2.0));
    CHECK(lp_sequence_norm(a, 2.0 / 3.0) == doctest::Approx(std::pow(2.0, 1.5)));
    CHECK(lp_sequence_norm(a, 1.0) <= lp_sequence_norm(a, 2.0 / 3.0));
}

TEST_CASE("constant search stays below the bound") {
    auto cfg = LWConfig::standard({3, 3, 3}, 3);
    auto res = lw_constant_search(cfg, {}, 3, 4, 7);
    CHECK(res.best_ratio <= 1.0 + 1e-12);
    CHECK(res.best_ratio > 0.5);
}
