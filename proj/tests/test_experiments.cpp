#include "doctest.h"

#include "mrlab/experiments.hpp"

#include <cmath>
#include <memory>

using namespace mrlab;

namespace {

PatchPtr share(HypersurfacePatch p) { return std::make_shared<const HypersurfacePatch>(std::move(p)); }

// paraboloid patch in R^3 with the curve xi_2 = 0.5 xi_1^2 as M (codimension 1)
SubmanifoldSpec curved_curve(double mu) {
    auto p = share(HypersurfacePatch::paraboloid(3, 2, 0.5, 2.0));
    return SubmanifoldSpec(p, 1, {Polynomial::monomial(1, 0, 2, 0.5)}, mu);
}

}  // namespace

TEST_CASE("localized densities: support, determinism, normalisation") {
    SUBCASE("c = 0 fills U cut to the delta box") {
        auto p = share(HypersurfacePatch::flat(3, 0, 0.5, 2.0));
        const auto spec = SubmanifoldSpec::full(p);
        const auto box = localized_support(spec, 0.1, 0.25);
        CHECK(box.lo == std::vector<double>{-0.25, -0.25});
        CHECK(box.hi == std::vector<double>{0.25, 0.25});
        const auto big = localized_support(spec, 0.1, 10.0);
        CHECK(big.lo == p->domain.lo);
        CHECK(big.hi == p->domain.hi);
    }
    SUBCASE("unit norm, deterministic per seed") {
        const auto spec = curved_curve(0.05);
        const auto f1 = sample_localized_density(spec, 0.05 + 10.0 / 64, 1.0, 7, 20.0);
        const auto f2 = sample_localized_density(spec, 0.05 + 10.0 / 64, 1.0, 7, 20.0);
        const auto f3 = sample_localized_density(spec, 0.05 + 10.0 / 64, 1.0, 8, 20.0);
        CHECK(f1.l2_norm() == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(f1.values() == f2.values());
        CHECK(f1.values() != f3.values());
    }
    SUBCASE("support audit with width mu + 10/R") {
        const double mu = 0.02, R = 100.0, width = mu + 10.0 / R;
        const auto spec = curved_curve(mu);
        for (std::uint64_t seed = 0; seed < 3; ++seed) {
            const auto f = sample_localized_density(spec, width, 1.0, seed, 10.0);
            CHECK(support_audit(f, spec, width) == 0);
        }
    }
    SUBCASE("support collapses onto M as the width shrinks") {
        const auto spec = curved_curve(0.0);
        for (double w : {1e-2, 1e-4, 1e-6}) {
            const auto f = sample_localized_density(spec, w, 1.0, 3, 10.0);
            std::vector<double> xi(2);
            double worst = 0.0;
            for (std::size_t j = 0; j < f.values().size(); ++j) {
                if (f.values()[j] == cplx(0.0)) continue;
                f.grid().node(j, xi);
                worst = std::max(worst, std::abs(spec.graph_residual(xi)[0]));
            }
            CHECK(worst < w);
        }
    }
    SUBCASE("neighbourhood leaving the domain is refused") {
        const auto spec = curved_curve(0.0);
        CHECK_THROWS_AS(sample_localized_density(spec, 0.45, 1.0, 1, 10.0), InvalidArgument);
    }
}

TEST_CASE("flatten_density") {
    SUBCASE("flat M is the identity shear") {
        auto p = share(HypersurfacePatch::flat(3, 0, 0.5, 2.0));
        SubmanifoldSpec spec(p, 1, {Polynomial::zero(1)}, 0.05);
        const auto f = sample_localized_density(spec, 0.1, 1.0, 5, 10.0);
        const auto h = flatten_density(f, spec, 0.1);
        std::vector<double> y(2);
        double worst = 0.0;
        for (std::size_t j = 0; j < h.grid.size(); ++j) {
            h.grid.node(j, y);
            worst = std::max(worst, std::abs(h.values[j] - f.generator()(y)));
        }
        CHECK(worst == 0.0);
        CHECK(h.norm_ratio == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("curved M: L2 isometry and support bound") {
        const double mu = 0.01, delta = 0.5, R = 200.0, width = mu + 10.0 * delta / R;
        const auto spec = curved_curve(mu);
        double worst = 0.0, worst_offset = 0.0;
        for (std::uint64_t seed = 0; seed < 100; ++seed) {
            const auto f = sample_localized_density(spec, width, delta, seed, 4.0);
            const auto h = flatten_density(f, spec, width);
            worst = std::max(worst, std::abs(h.norm_ratio - 1.0));
            worst_offset = std::max(worst_offset, h.max_normal_offset);
        }
        CHECK(worst <= 1e-8);
        CHECK(worst_offset <= width);
    }
    SUBCASE("shear outside the grid is refused") {
        const auto spec = curved_curve(0.0);
        const auto f = sample_localized_density(spec, 0.05, 1.0, 2, 4.0);
        CHECK_THROWS_AS(flatten_density(f, spec, 0.2), InvalidArgument);
    }
}

TEST_CASE("c_factor") {
    CHECK(c_factor(0.1, 0.1, 10.0, 1.0) == 1.0);
    CHECK(c_factor(1e-4, 1e-3, 100.0, 1.0) == doctest::Approx(std::sqrt(0.02)).epsilon(1e-14));
    CHECK(c_factor(1e-4, 1e-3, 100.0, 1.0) == doctest::Approx(0.1414).epsilon(1e-3));
    for (double mu : {0.0, 1e-3, 0.5})
        for (double R : {1.0, 1e3}) CHECK(c_factor(mu, 0.01, R, 0.0) == 1.0);
    CHECK_THROWS_AS(c_factor(-1.0, 0.1, 1.0, 1.0), InvalidArgument);
}

TEST_CASE("localized slice bound") {
    auto p = share(HypersurfacePatch::flat(2, 1, 0.5, 2.0));
    const auto spec = SubmanifoldSpec::full(p);
    const double R = 8.0;
    SUBCASE("zero separation") {
        const auto f = sample_localized_density(spec, 1.0, 1.0, 4, 20.0);
        const auto b = localized_slice_bound(f, spec, {0}, {0}, 6, R, 0.1);
        CHECK(b.distance_factor == 1.0);
        CHECK(b.bound == doctest::Approx(f.l2_norm()).epsilon(1e-14));
        CHECK(b.lhs <= b.bound);
        CHECK(b.tilde_ratio <= 1.0);
    }
    SUBCASE("d / R = 3, N = 4 on 100 trials") {
        for (std::uint64_t seed = 0; seed < 100; ++seed) {
            const auto f = sample_localized_density(spec, 1.0, 1.0, seed, 40.0);
            const auto b = localized_slice_bound(f, spec, {4}, {0}, 4, R, 0.1);
            CHECK(b.distance_factor == doctest::Approx(0.01).epsilon(1e-12));
            CHECK(b.lhs <= b.bound);
        }
    }
    SUBCASE("mu -> 0 plateau") {
        auto p3 = share(HypersurfacePatch::flat(3, 0, 0.5, 2.0));
        const double delta = 0.05, Rq = 4.0;
        std::vector<double> ratios;
        for (double mu : {1e-3, 1e-5, 1e-7}) {
            SubmanifoldSpec s(p3, 1, {Polynomial::zero(1)}, mu);
            const auto f = sample_localized_density(s, mu + 10.0 * delta / Rq, 1.0, 9, 10.0);
            ratios.push_back(localized_slice_bound(f, s, {0, 0}, {0, 0}, 4, Rq, delta, 12).lhs / f.l2_norm());
        }
        CHECK(ratios[2] == doctest::Approx(ratios[1]).epsilon(1e-2));
        CHECK(ratios[1] == doctest::Approx(ratios[0]).epsilon(5e-2));
    }
}

TEST_CASE("refined right-hand side") {
    auto p = share(HypersurfacePatch::flat(2, 1, 0.5, 2.0));
    const auto spec = SubmanifoldSpec::full(p);
    const int N = refined_min_order(2);
    CHECK(N == 4);
    SUBCASE("single-cube concentration") {
        const auto f = sample_localized_density(spec, 1.0, 1.0, 2, 400.0);
        const auto r = refined_rhs(f, Vec::Zero(2), 256.0, N, -1.0, 1, 64);
        CHECK(r.normalized == doctest::Approx(1.0).epsilon(0.05));
    }
    SUBCASE("kappa bound on 50 random densities") {
        const double R = 4.0;
        double kappa = 0.0;
        for (std::uint64_t seed = 0; seed < 50; ++seed) {
            const auto f = sample_localized_density(spec, 1.0, 1.0, seed, 40.0);
            const auto r = refined_rhs(f, Vec::Zero(2), R, N, -1.0, 2, 16);
            kappa = std::max(kappa, r.normalized);
            CHECK(r.tail_bound >= 0.0);
        }
        // sup of the weighted orthogonality sum bounds the full weighted sum
        const BumpFamily fam(CubeLattice(1, R), 8);
        SampledField probe;
        probe.cube = Box::centered(1, 0.5 * R);
        probe.resolution = 4;
        probe.values.assign(4, cplx(1.0));
        const double K = refined_rhs(sample_localized_density(spec, 1.0, 1.0, 0, 40.0), Vec::Zero(2), R, N).point_constant;
        const double bound = std::sqrt(weighted_orthogonality_check(probe, fam, N).kappa) / K;
        MESSAGE("max normalized refined rhs " << kappa << " vs bound " << bound);
        CHECK(kappa <= bound);
    }
    SUBCASE("translation covariance") {
        const double R = 8.0;
        auto f = sample_localized_density(spec, 1.0, 1.0, 11, 80.0);
        const auto base = refined_rhs(f, Vec::Zero(2), R, N);
        const auto g = f.multiplied([R](std::span<const double> xi) { return std::polar(1.0, -R * xi[0]); });
        Vec shifted = Vec::Zero(2);
        shifted[0] = R;
        const auto moved = refined_rhs(g, shifted, R, N);
        CHECK(moved.value == doctest::Approx(base.value).epsilon(1e-6));
    }
    SUBCASE("weight monotonicity and refusal") {
        const auto f = sample_localized_density(spec, 1.0, 1.0, 13, 40.0);
        double prev = std::numeric_limits<double>::infinity();
        for (double w : {3.0, 5.0, 8.0, 12.0}) {
            const double v = refined_rhs(f, Vec::Zero(2), 4.0, N, w).value;
            CHECK(v <= prev);
            prev = v;
        }
        CHECK_THROWS_AS(refined_rhs(f, Vec::Zero(2), 4.0, N - 1), InvalidArgument);
    }
}

TEST_CASE("best constant estimates") {
    ConstantOptions opt;
    opt.trials = 6;
    SUBCASE("k = 1 slicing envelope") {
        std::vector<std::size_t> c{0};
        const auto fam = coordinate_family(2, c, 0.5, 0.0, 2.0);
        for (double R : {4.0, 16.0, 64.0}) {
            const auto e = best_constant_estimate(fam, R, 1.0, opt);
            CHECK(e.A_hat <= std::sqrt(2 * kPi) * std::sqrt(R));
        }
    }
    SUBCASE("k = n hyperplanes: bounded growth") {
        std::vector<std::size_t> c{0, 0};
        const auto fam = coordinate_family(2, c, 3.0, 0.0, 12.0);
        ConstantLedger L;
        for (double R : {8.0, 16.0, 32.0, 64.0}) L.add(best_constant_estimate(fam, R, 10.0, opt));
        CHECK(std::abs(L.fitted_growth()) <= 0.1);
        CHECK(L.entries.size() == 4);
    }
    SUBCASE("uniform envelope below delta^-2") {
        std::vector<std::size_t> c{0, 0};
        const auto fam = coordinate_family(2, c, 0.5, 0.0, 2.0);
        const double delta = 0.25;
        for (double R : {2.0, 8.0, 16.0}) CHECK(best_constant_estimate(fam, R, delta, opt).A_hat <= std::pow(delta, -10.0));
    }
    SUBCASE("monotone in the number of trials, records the seed") {
        std::vector<std::size_t> c{0, 0};
        const auto fam = coordinate_family(2, c, 0.5, 0.0, 2.0);
        ConstantOptions few = opt, many = opt;
        few.trials = 3;
        many.trials = 9;
        const auto a = best_constant_estimate(fam, 8.0, 1.0, few);
        const auto b = best_constant_estimate(fam, 8.0, 1.0, many);
        CHECK(a.A_hat <= b.A_hat);
        CHECK(b.per_trial[b.seed_best - many.seed] == b.A_hat);
    }
    SUBCASE("translation of the frequency supports") {
        auto p0 = share(HypersurfacePatch::flat(2, 1, 0.5, 2.0));
        HypersurfacePatch moved = *p0;
        moved.domain = Box({1.5}, {2.5});
        auto p1 = share(moved);
        const auto g = smooth_random_profile(p0->domain, 5);
        const auto f0 = SampledDensity::from_function(p0, p0->domain, g, 40.0);
        const auto f1 = SampledDensity::from_function(
            p1, p1->domain, [g](std::span<const double> xi) { return g(std::vector<double>{xi[0] - 2.0}); }, 40.0);
        const Box Q = Box::centered(2, 8.0);
        const auto a = lp_quasinorm(evaluate_field(f0, Q, 64), 2.0);
        const auto b = lp_quasinorm(evaluate_field(f1, Q, 64), 2.0);
        CHECK(std::abs(a - b) <= 1e-9 * a);
    }
    SUBCASE("monotone in mu on trial means") {
        std::vector<std::size_t> c{1, 0};
        auto fam = coordinate_family(3, c, 1.0, 0.0, 4.0);
        ConstantOptions o = opt;
        o.trials = 50;
        o.padded_width = false;
        double prev = 0.0;
        for (double mu : {0.05, 0.1, 0.2}) {
            fam[0].mu = mu;
            const auto e = best_constant_estimate(fam, 16.0, 10.0, o);
            CHECK(e.mean >= prev);
            prev = e.mean;
        }
    }
    SUBCASE("deterministic across worker counts") {
        std::vector<std::size_t> c{0, 0};
        const auto fam = coordinate_family(2, c, 0.5, 0.0, 2.0);
        ConstantOptions a = opt, b = opt;
        b.jobs = 3;
        CHECK(best_constant_estimate(fam, 8.0, 1.0, a).per_trial == best_constant_estimate(fam, 8.0, 1.0, b).per_trial);
    }
    SUBCASE("hill climbing never lowers the estimate") {
        std::vector<std::size_t> c{0, 0};
        const auto fam = coordinate_family(2, c, 0.5, 0.0, 2.0);
        ConstantOptions o = opt;
        o.refine_steps = 4;
        CHECK(best_constant_estimate(fam, 8.0, 1.0, o).A_hat >= best_constant_estimate(fam, 8.0, 1.0, opt).A_hat);
    }
}

TEST_CASE("localization gain curves") {
    ConstantOptions opt;
    opt.trials = 4;
    SUBCASE("c = 0 has no gain") {
        std::vector<std::size_t> c{0, 0};
        const auto fam = coordinate_family(3, c, 1.0, 0.1, 4.0);
        std::vector<double> ladder{0.25, 0.125, 0.0625};
        std::vector<std::size_t> loc{0};
        const auto g = localization_gain_curve(fam, loc, ladder, 16.0, 10.0, opt);
        CHECK(std::abs(g.slope) <= 0.05);
        CHECK(g.reference == 0.0);
    }
    SUBCASE("n = 4, two codimension-one pieces") {
        std::vector<std::size_t> c{1, 1};
        const auto fam = coordinate_family(4, c, 2.0, 0.1, 8.0);
        std::vector<double> ladder{0.25, 0.125, 0.0625};
        std::vector<std::size_t> loc{0, 1};
        opt.oversample = 1.2;
        const auto g = localization_gain_curve(fam, loc, ladder, 16.0, 10.0, opt);
        MESSAGE("n=4 slope " << g.slope << " band [" << g.band_lo << ", " << g.band_hi << "]");
        CHECK(g.reference == 1.0);
        CHECK(std::abs(g.slope - 1.0) <= 0.15);
    }
    SUBCASE("regime and ladder validation") {
        std::vector<std::size_t> c{1, 0};
        const auto fam = coordinate_family(3, c, 1.0, 0.1, 4.0);
        std::vector<double> ladder{0.25, 0.125};
        std::vector<std::size_t> loc{0};
        CHECK_THROWS_AS(localization_gain_curve(fam, loc, ladder, 4.0, 10.0, opt), InvalidArgument);
        std::vector<double> bad{0.25, 0.0};
        CHECK_THROWS_AS(localization_gain_curve(fam, loc, bad, 16.0, 10.0, opt), InvalidArgument);
    }
}

TEST_CASE("scale recursion") {
    SUBCASE("saturated factors reduce to a growth check") {
        std::vector<std::size_t> c{0, 0};
        const auto fam = coordinate_family(2, c, 1.0, 0.0, 4.0);
        ConstantOptions opt;
        opt.trials = 4;
        const auto r = recursion_check(fam, 64.0, 0.25, opt);
        CHECK(r.factor == 1.0);
        CHECK(r.ratio == doctest::Approx(r.lhs / r.A_R));
        CHECK(r.within);
    }
    SUBCASE("product identity inside the envelope") {
        for (double c : {0.0, 1.0, 2.0}) {
            const auto q = cuant_check(std::pow(2.0, -20), 1.0 / 16, c);
            CHECK(q.N >= 1);
            const double dN = std::pow(1.0 / 16, q.N) * std::pow(2.0, 20);
            CHECK(dN >= 16.0);
            CHECK(dN <= 256.0);
            double prod = 1.0;
            for (int m = 1; m <= q.N; ++m)
                prod *= std::min(1.0, std::pow(std::pow(1.0 / 16, m) + 10.0 / 16, 0.5 * c));
            CHECK(q.product == doctest::Approx(prod).epsilon(1e-15));
            CHECK(q.holds);
        }
        CHECK_THROWS_AS(cuant_check(0.5, 1.0 / 16, 1.0), InvalidArgument);
    }
}

TEST_CASE("epsilon removal arithmetic") {
    const double eps = std::exp(-100.0);
    const auto plan = eps_removal_exponent(1.0, 3, eps, 2.01);
    CHECK(plan.N == doctest::Approx(100.0 / 2.01).epsilon(1e-14));
    CHECK(plan.N == doctest::Approx(49.75).epsilon(1e-3));
    CHECK(plan.beta - 1.0 / plan.N == doctest::Approx(4.5e-29).epsilon(0.1));
    CHECK(plan.beta == doctest::Approx(0.0201).epsilon(1e-12));
    CHECK(plan.q_bound == doctest::Approx(1.201).epsilon(1e-12));
    CHECK(plan.q_bound_statement == doctest::Approx(1.1005).epsilon(1e-12));
    CHECK(plan.beta_in_range);
    CHECK(plan.chain_holds);
    CHECK(plan.beta * plan.log_inv_eps >= plan.C);
    CHECK(plan.beta * plan.log_inv_eps <= 2 * plan.C);

    double prev = plan.q_bound;
    for (double L : {150.0, 200.0, 400.0}) {
        const double q = eps_removal_exponent(1.0, 3, std::exp(-L), 2.01).q_bound;
        CHECK(q < prev);
        prev = q;
    }
    const double lim = 1.0 / 5.0;
    for (int i = 1; i < 1000; ++i) CHECK(chain_inequality(1.0, 3, lim * i / 1000.0));
    for (int i = 1; i < 100; ++i) CHECK_FALSE(chain_inequality(1.0, 3, lim + (1 - lim) * i / 100.0 * 0.99));

    CHECK_THROWS_AS(eps_removal_exponent(1.0, 3, eps, 2.0), InvalidArgument);
    CHECK_THROWS_AS(eps_removal_exponent(1.0, 3, 0.5, 2.01), InvalidArgument);
    const auto bad = eps_removal_exponent(1.0, 3, std::exp(-2.5), 2.01);
    CHECK_FALSE(bad.chain_holds);
    CHECK_FALSE(bad.diagnostic.empty());
}

TEST_CASE("weak-type assembly") {
    SUBCASE("empty superlevel set") {
        SuperlevelDecomposition d;
        d.lambda = 1.0;
        SparseCollectionSet s;
        const auto r = weak_type_assembly(d, s, 1.0, 0.1, 2);
        CHECK(r.volume_f == 0.0);
        CHECK(r.rhs_scales == 0.0);
        CHECK(r.rhs_self == 0.0);
    }
    SUBCASE("one scale, R = 1") {
        SuperlevelDecomposition d;
        d.lambda = 0.5;
        d.e_cells = {0};
        d.volume_f = 3.0;
        SparseCollectionSet s;
        s.N = 1;
        s.collections.push_back(SparseCollection{1.0, 1.0, {}});
        const auto r = weak_type_assembly(d, s, 1.5, 0.1, 2);
        CHECK(r.radius_sum == 1.0);
        CHECK(r.kappa_scales == doctest::Approx(3.0 * std::pow(0.5, 1.5)));
    }
    SUBCASE("paraboloid bilinear instance") {
        auto p1 = share(HypersurfacePatch::paraboloid(2, 1, 0.1));
        auto p2 = share(HypersurfacePatch(2, Box({0.3}, {0.5}), Polynomial::half_square_norm(1), 1, 1.0));
        const Box cube = Box::centered(2, 16.0);
        std::vector<SampledDensity> fs{smooth_random_density(p1, p1->domain, 1, 24.0),
                                       smooth_random_density(p2, p2->domain, 2, 24.0)};
        std::vector<SampledField> fields{evaluate_field(fs[0], cube, 96), evaluate_field(fs[1], cube, 96)};
        const auto P = product_field(fields);
        double peak = 0.0;
        for (const auto& z : P.values) peak = std::max(peak, std::abs(z));
        const auto st = stability_radius(fs, cube, 96);
        const auto d = superlevel_extract(P, 0.25 * peak, st.c);
        REQUIRE_FALSE(d.e_cells.empty());
        const auto centers = cell_centers(P, d.g_cells);
        const auto cover = sparse_cover(centers, 2, 2.0);
        const auto r = weak_type_assembly(d, cover, 2.0, 0.05, 2);
        MESSAGE("kappa_scales " << r.kappa_scales << " kappa_self " << r.kappa_self);
        CHECK(std::isfinite(r.kappa_scales));
        CHECK(std::isfinite(r.kappa_self));
        CHECK(r.kappa_scales > 0.0);
        CHECK(d.f_in_half_level);
    }
}
