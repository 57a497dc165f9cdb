#include "mrlab/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <thread>

namespace mrlab {

namespace {

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    std::uint64_t z = a * 0x9E3779B97F4A7C15ull + b + 0x632BE59BD9B4E019ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

double quantile(std::vector<double> v, double q) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const double pos = q * double(v.size() - 1);
    const std::size_t i = std::size_t(pos);
    const double t = pos - double(i);
    return i + 1 < v.size() ? (1 - t) * v[i] + t * v[i + 1] : v[i];
}

double field_l2_sq(const SampledField& F) {
    CompensatedSum s;
    for (const auto& z : F.values) s.add(std::norm(z));
    return s.value() * F.cell_volume();
}

std::size_t nyquist_points(double side, double nyq, double oversample = 1.0) {
    return static_cast<std::size_t>(std::ceil(oversample * side / nyq)) + 1;
}

/// Range of a graph map over a box, sampled on a tensor grid including the corners.
std::pair<double, double> map_range(const Polynomial& m, const Box& box) {
    if (m.is_zero()) return {0.0, 0.0};
    const std::size_t d = box.dim();
    const std::size_t per = 9;
    std::size_t total = 1;
    for (std::size_t a = 0; a < d; ++a) total *= per;
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    std::vector<double> u(d);
    for (std::size_t idx = 0; idx < total; ++idx) {
        std::size_t r = idx;
        for (std::size_t a = 0; a < d; ++a) {
            u[a] = box.lo[a] + box.side(a) * double(r % per) / double(per - 1);
            r /= per;
        }
        const double v = m(u);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    // pad for extrema between samples
    const double pad = 0.05 * (hi - lo);
    return {lo - pad, hi + pad};
}

}  // namespace

void parallel_for(std::size_t count, std::size_t jobs, const std::function<void(std::size_t)>& body) {
    if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());
    jobs = std::min(jobs, count);
    if (jobs <= 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < jobs; ++t)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++) {
                try {
                    body(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!error) error = std::current_exception();
                }
            }
        });
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

Family coordinate_family(std::size_t n, std::span<const std::size_t> codims, double half_width, double mu,
                         double delta_geom) {
    const std::size_t k = codims.size();
    require(k >= 1 && k <= n, "coordinate_family: need 1 <= k <= n");
    const std::size_t total = std::accumulate(codims.begin(), codims.end(), std::size_t{0});
    require(total + k <= n, "coordinate_family: codimensions exceed n - k");
    Family fam;
    std::size_t next_axis = k;
    for (std::size_t i = 0; i < k; ++i) {
        auto patch = std::make_shared<const HypersurfacePatch>(HypersurfacePatch::flat(n, i, half_width, delta_geom));
        std::vector<std::size_t> axes;
        for (std::size_t g = 0; g < codims[i]; ++g, ++next_axis) axes.push_back(next_axis < i ? next_axis : next_axis - 1);
        std::vector<Polynomial> maps(codims[i], Polynomial::zero(n - 1 - codims[i]));
        fam.emplace_back(patch, codims[i], std::move(maps), mu, std::move(axes));
    }
    return fam;
}

Box localized_support(const SubmanifoldSpec& spec, double width, double delta) {
    require(delta > 0.0, "localized_support: delta must be positive");
    const auto& dom = spec.parent->domain;
    Box box = dom;
    for (std::size_t a : spec.free_axes()) {
        box.lo[a] = std::max(dom.lo[a], -delta);
        box.hi[a] = std::min(dom.hi[a], delta);
        require(box.hi[a] > box.lo[a], "localized_support: empty neighbourhood (domain misses B(0, delta))");
    }
    if (spec.codim == 0) return box;
    require(width > 0.0, "localized_support: width must be positive");
    std::vector<double> flo, fhi;
    for (std::size_t a : spec.free_axes()) {
        flo.push_back(box.lo[a]);
        fhi.push_back(box.hi[a]);
    }
    const Box free_box(flo, fhi);
    for (std::size_t g = 0; g < spec.codim; ++g) {
        const auto [lo, hi] = map_range(spec.graph_maps[g], free_box);
        const std::size_t a = spec.graph_axes[g];
        box.lo[a] = lo - width;
        box.hi[a] = hi + width;
        if (box.lo[a] < dom.lo[a] - 1e-14 || box.hi[a] > dom.hi[a] + 1e-14)
            throw InvalidArgument("localized_support: neighbourhood of width " + std::to_string(width) +
                                  " exits the patch domain");
    }
    return box;
}

SampledDensity sample_localized_density(const SubmanifoldSpec& spec, double width, double delta, std::uint64_t seed,
                                        double x_budget, int modes, int envelope_power) {
    const Box box = localized_support(spec, width, delta);
    const std::size_t c = spec.codim;
    std::vector<double> plo, phi;
    for (std::size_t a : spec.free_axes()) {
        plo.push_back(box.lo[a]);
        phi.push_back(box.hi[a]);
    }
    for (std::size_t g = 0; g < c; ++g) {
        plo.push_back(-1.0);
        phi.push_back(1.0);
    }
    const DensityFn g = smooth_random_profile(Box(plo, phi), seed, modes, envelope_power);
    const double scale = c == 0 ? 1.0 : std::pow(width, -0.5 * double(c));
    const SubmanifoldSpec sp = spec;
    DensityFn fn = [g, sp, width, scale](std::span<const double> xi) -> cplx {
        std::vector<double> y;
        y.reserve(xi.size());
        for (std::size_t a : sp.free_axes()) y.push_back(xi[a]);
        if (sp.codim > 0) {
            for (double r : sp.graph_residual(xi)) y.push_back(r / width);
        }
        return scale * g(y);
    };
    NodeRule rule;
    rule.base = std::max(rule.base, double(2 * envelope_power + modes + 2));
    return SampledDensity::from_function(spec.parent, box, std::move(fn), x_budget, rule);
}

std::size_t support_audit(const SampledDensity& f, const SubmanifoldSpec& spec, double width) {
    std::size_t failures = 0;
    std::vector<double> xi(f.grid().dim());
    for (std::size_t j = 0; j < f.values().size(); ++j) {
        if (f.values()[j] == cplx(0.0)) continue;
        f.grid().node(j, xi);
        if (!neighborhood_contains(spec, width, xi).metric) ++failures;
    }
    return failures;
}

FlattenedDensity flatten_density(const SampledDensity& f, const SubmanifoldSpec& spec, double width) {
    require(f.has_generator(), "flatten_density: the density needs a generator to be resampled");
    require(width > 0.0, "flatten_density: width must be positive");
    const std::size_t d = f.patch().param_dim();
    const Box& sup = f.support();
    const auto counts = f.grid().counts();
    std::vector<double> lo, hi;
    std::vector<std::size_t> hc;
    for (std::size_t a : spec.free_axes()) {
        lo.push_back(sup.lo[a]);
        hi.push_back(sup.hi[a]);
        hc.push_back(2 * counts[a]);
    }
    for (std::size_t g = 0; g < spec.codim; ++g) {
        lo.push_back(-width);
        hi.push_back(width);
        hc.push_back(2 * counts[spec.graph_axes[g]]);
    }
    FlattenedDensity out;
    out.grid = TensorGrid(Box(lo, hi), hc);
    out.values.resize(out.grid.size());
    std::vector<double> y(d), xi(d), u(spec.free_dim());
    double excess = 0.0;
    CompensatedSum hs;
    for (std::size_t j = 0; j < out.grid.size(); ++j) {
        out.grid.node(j, y);
        for (std::size_t a = 0; a < u.size(); ++a) {
            u[a] = y[a];
            xi[spec.free_axes()[a]] = y[a];
        }
        for (std::size_t g = 0; g < spec.codim; ++g) {
            const double v = spec.graph_maps[g](u) + y[u.size() + g];
            const std::size_t a = spec.graph_axes[g];
            xi[a] = v;
            excess = std::max({excess, sup.lo[a] - v, v - sup.hi[a]});
        }
        out.values[j] = f.generator()(xi);
        hs.add(out.grid.weight(j) * std::norm(out.values[j]));
    }
    if (excess > 1e-12)
        throw InvalidArgument("flatten_density: shear exits the density grid; required padding " +
                              std::to_string(excess));
    out.h_norm = std::sqrt(hs.value());
    auto fine = counts;
    for (auto& c : fine) c *= 2;
    // match the flattened spacing across the band (it is thin inside its bounding box when M curves)
    for (std::size_t g = 0; g < spec.codim; ++g) {
        const std::size_t a = spec.graph_axes[g];
        const double side = sup.hi[a] - sup.lo[a];
        fine[a] = std::max(fine[a], static_cast<std::size_t>(std::ceil(double(hc[u.size() + g]) * side / (2.0 * width))));
    }
    out.f_norm = f.resampled(fine).l2_norm();
    out.norm_ratio = out.h_norm / out.f_norm;
    for (std::size_t j = 0; j < f.values().size(); ++j) {
        if (f.values()[j] == cplx(0.0)) continue;
        f.grid().node(j, xi);
        for (double r : spec.graph_residual(xi)) out.max_normal_offset = std::max(out.max_normal_offset, std::abs(r));
    }
    return out;
}

double c_factor(double mu, double delta, double R, double c) {
    if (mu < 0.0 || delta < 0.0 || R < 0.0 || c < 0.0) throw InvalidArgument("c_factor: negative input");
    if (c == 0.0) return 1.0;
    return std::min(1.0, std::pow(R * mu + 10.0 * delta, 0.5 * c));
}

SliceBound localized_slice_bound(const SampledDensity& f, const SubmanifoldSpec& spec, const LatticeIndex& q_prime,
                                 const LatticeIndex& q, int N, double R, double delta, std::size_t pps) {
    const std::size_t d = f.patch().param_dim();
    require(q.size() == d && q_prime.size() == d, "localized_slice_bound: cube indices have wrong dimension");
    require(R > 0.0 && N >= 0, "localized_slice_bound: invalid R or N");
    const CubeLattice lat(d, R);
    const BumpFamily fam(lat, 8);
    const double unitary = std::pow(2.0 * kPi, -0.5 * double(d));
    const double nyq = nyquist_spacing(f);

    SliceBound out;
    const Box qbox = lat.cube(q);
    const std::size_t res = std::max(pps, nyquist_points(R, nyq));
    const SampledField F = boundary_trace(f, qbox, res);
    std::vector<double> x(d);
    CompensatedSum s;
    for (std::size_t j = 0; j < F.values.size(); ++j) {
        F.point(j, x);
        s.add(std::norm(fam.evaluate(q_prime, x) * unitary * F.values[j]));
    }
    out.lhs = std::sqrt(s.value() * F.cell_volume());
    out.distance_factor = std::pow(bracket(cube_distance(q, q_prime, R) / R), -double(N));
    const double gain = spec.codim == 0 ? 1.0 : std::pow(R * spec.mu + 10.0 * delta, 0.5 * double(spec.codim));
    out.bound = out.distance_factor * gain * f.l2_norm();
    out.ratio = out.lhs / out.bound;

    // chi~ adapted to 4q', peak one, integrated over 12 R around c(q')
    const Vec c = lat.center(q_prime);
    std::vector<double> lo(d), hi(d), y(d), zero(d, 0.0);
    for (std::size_t a = 0; a < d; ++a) {
        lo[a] = c[long(a)] - 6.0 * R;
        hi[a] = c[long(a)] + 6.0 * R;
    }
    const Box tbox(lo, hi);
    const std::size_t tres = std::max(4 * pps, nyquist_points(12.0 * R, nyq));
    const SampledField G = boundary_trace(f, tbox, tres);
    const double peak = fam.base(zero);
    CompensatedSum t;
    for (std::size_t j = 0; j < G.values.size(); ++j) {
        G.point(j, x);
        for (std::size_t a = 0; a < d; ++a) y[a] = (x[a] - c[long(a)]) / (4.0 * R);
        t.add(std::norm(fam.base(y) / peak * unitary * G.values[j]));
    }
    out.tilde_rhs = out.distance_factor * std::sqrt(t.value() * G.cell_volume());
    out.tilde_ratio = out.tilde_rhs > 0.0 ? out.lhs / out.tilde_rhs : 0.0;
    return out;
}

int refined_min_order(std::size_t n) { return int((n * n + n) / 2) + 1; }

RefinedRhs refined_rhs(const SampledDensity& f, const Vec& q_center, double R, int N, double w, int T,
                       std::size_t pps) {
    const auto& p = f.patch();
    const std::size_t n = p.n, d = n - 1;
    require(std::size_t(q_center.size()) == n, "refined_rhs: cube centre has wrong dimension");
    require(R > 0.0 && T >= 0, "refined_rhs: invalid R or truncation");
    if (w < 0.0) w = 2.0 * N - double(n * n);
    if (!(w > double(n)))
        throw InvalidArgument("refined_rhs: weight exponent " + std::to_string(w) + " <= n; minimum admissible N is " +
                              std::to_string(refined_min_order(n)));
    const CubeLattice lat(d, R);
    const BumpFamily fam(lat, 8);
    std::vector<double> cp(d);
    for (std::size_t j = 0; j < d; ++j) cp[j] = q_center[long(p.param_axis(j))];
    const double xa = q_center[long(p.normal_axis)];
    const LatticeIndex j0 = lat.locate(cp);

    std::vector<double> lo(d), hi(d);
    for (std::size_t a = 0; a < d; ++a) {
        lo[a] = R * (double(j0[a] - T) - 0.5);
        hi[a] = R * (double(j0[a] + T) + 0.5);
    }
    const Box B(lo, hi);
    const double side = hi[0] - lo[0];
    const std::size_t res = std::max(std::size_t(2 * T + 1) * pps, nyquist_points(side, nyquist_spacing(f)));
    const SampledField F = slice_field(f, xa, B, res);

    RefinedRhs out;
    CompensatedSum total, point;
    LatticeIndex qp(d);
    std::vector<long> off(d, -T);
    std::vector<double> x(d);
    while (true) {
        for (std::size_t a = 0; a < d; ++a) qp[a] = j0[a] + off[a];
        const Vec c = lat.center(qp);
        const double weight = std::pow(bracket(cube_distance(j0, qp, R) / R), -w);
        CompensatedSum s;
        for (std::size_t j = 0; j < F.values.size(); ++j) {
            F.point(j, x);
            double r2 = 0.0;
            for (std::size_t a = 0; a < d; ++a) {
                const double t = (x[a] - c[long(a)]) / R;
                r2 += t * t;
            }
            const double loc = std::pow(1.0 + r2, 0.5 * N) * fam.evaluate(qp, x);
            s.add(loc * loc * std::norm(F.values[j]));
        }
        total.add(weight * s.value() * F.cell_volume());
        double r2 = 0.0;
        for (std::size_t a = 0; a < d; ++a) {
            const double t = (cp[a] - c[long(a)]) / R;
            r2 += t * t;
        }
        const double loc = std::pow(1.0 + r2, 0.5 * N) * fam.evaluate(qp, cp);
        point.add(weight * loc * loc);
        ++out.cubes;
        std::size_t a = d;
        bool done = true;
        while (a-- > 0) {
            if (++off[a] <= T) {
                done = false;
                break;
            }
            off[a] = -T;
        }
        if (done) break;
    }
    out.value = std::sqrt(total.value());
    out.point_constant = std::sqrt(point.value());
    const double full = slice_mass(f, xa);
    out.normalized = out.value / (out.point_constant * std::pow(2.0 * kPi, 0.5 * double(d)) * f.l2_norm());
    out.outside_mass = std::sqrt(std::max(0.0, full * full - field_l2_sq(F)));
    // kappa of the weighted orthogonality estimate bounds the untruncated sum
    SampledField probe;
    probe.cube = Box::centered(d, 0.5 * R);
    probe.resolution = 4;
    probe.values.assign(std::size_t(std::pow(4.0, double(d))), cplx(1.0));
    const double kappa = weighted_orthogonality_check(probe, fam, N).kappa;
    out.tail_bound = std::pow(bracket(double(T)), -0.5 * w) * std::sqrt(kappa) * full;
    return out;
}

// ---------------------------------------------------------------------------------------------

void ConstantLedger::add(LedgerEntry e) { entries.push_back(std::move(e)); }

double ConstantLedger::fitted_growth() const {
    require(entries.size() >= 2, "fitted_growth: need at least two entries");
    std::vector<double> x, y;
    for (const auto& e : entries) {
        if (!(e.A_hat > 0.0)) throw NumericError("fitted_growth: non-positive constant estimate");
        x.push_back(std::log(e.R));
        y.push_back(std::log(e.A_hat));
    }
    return fit_line(x, y).slope;
}

namespace {

void validate_family(const Family& family) {
    require(!family.empty(), "family is empty");
    const std::size_t n = family.front().parent->n;
    for (const auto& s : family) require(s.parent->n == n, "family mixes ambient dimensions");
    require(family.size() <= n, "family: k > n");
}

std::vector<double> family_widths(const Family& family, double R, bool padded_width) {
    std::vector<double> w;
    for (const auto& s : family) {
        const double v = padded_width ? s.mu + 10.0 / R : s.mu;
        if (s.codim > 0 && !(v > 0.0)) throw InvalidArgument("localization width must be positive (mu > 0)");
        w.push_back(s.codim == 0 ? 1.0 : v);
    }
    return w;
}

double product_ratio(const std::vector<SampledDensity>& f, const Box& Q, std::size_t res, double p) {
    std::vector<SampledField> fields;
    double norms = 1.0;
    for (const auto& fi : f) {
        fields.push_back(evaluate_field(fi, Q, res));
        norms *= fi.l2_norm();
    }
    if (!(norms > 0.0)) throw NumericError("best_constant_estimate: vanishing density");
    const double v = lp_quasinorm(fields, p) / norms;
    if (!std::isfinite(v)) throw NumericError("best_constant_estimate: non-finite ratio");
    return v;
}

}  // namespace

std::size_t auto_resolution(const Family& family, double R, double delta, const ConstantOptions& opt) {
    validate_family(family);
    const auto widths = family_widths(family, R, opt.padded_width);
    double nyq = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < family.size(); ++i)
        nyq = std::min(nyq, nyquist_spacing(sample_localized_density(family[i], widths[i], delta, 0, 0.0, opt.modes,
                                                                     opt.envelope_power)));
    return std::max(opt.min_resolution, static_cast<std::size_t>(std::ceil(opt.oversample * R / nyq)));
}

LedgerEntry best_constant_estimate(const Family& family, double R, double delta, const ConstantOptions& opt) {
    validate_family(family);
    require(R > 0.0, "best_constant_estimate: R must be positive");
    require(opt.trials >= 1, "best_constant_estimate: need at least one trial");
    const std::size_t n = family.front().parent->n, k = family.size();
    const double p = k == 1 ? 2.0 : 2.0 / double(k - 1);
    const Box Q = Box::centered(n, 0.5 * R);
    const double budget = Q.max_norm();
    const auto widths = family_widths(family, R, opt.padded_width);
    const std::size_t res = opt.resolution ? opt.resolution : auto_resolution(family, R, delta, opt);

    auto sample = [&](std::uint64_t seed) {
        std::vector<SampledDensity> f;
        for (std::size_t i = 0; i < k; ++i)
            f.push_back(sample_localized_density(family[i], widths[i], delta, mix_seed(seed, i), budget, opt.modes,
                                                 opt.envelope_power));
        return f;
    };

    LedgerEntry e;
    e.R = R;
    e.delta = delta;
    for (const auto& s : family) e.mu.push_back(s.mu);
    e.trials = opt.trials;
    e.per_trial.assign(opt.trials, 0.0);
    parallel_for(opt.trials, opt.jobs, [&](std::size_t t) {
        e.per_trial[t] = product_ratio(sample(opt.seed + t), Q, res, p);
    });
    const auto best = std::max_element(e.per_trial.begin(), e.per_trial.end());
    e.A_hat = *best;
    e.seed_best = opt.seed + std::uint64_t(best - e.per_trial.begin());
    e.mean = std::accumulate(e.per_trial.begin(), e.per_trial.end(), 0.0) / double(opt.trials);

    if (opt.refine_steps > 0) {
        // hill climbing: mix in fresh random directions, keep improvements
        auto current = sample(e.seed_best);
        for (std::size_t step = 0; step < opt.refine_steps; ++step) {
            const double alpha = 0.5 * std::pow(0.8, double(step));
            auto fresh = sample(mix_seed(e.seed_best, 1000 + step));
            std::vector<SampledDensity> cand;
            for (std::size_t i = 0; i < k; ++i) {
                const DensityFn a = current[i].generator(), b = fresh[i].generator();
                DensityFn mixed = [a, b, alpha](std::span<const double> xi) { return a(xi) + alpha * b(xi); };
                NodeRule rule = current[i].rule();
                cand.push_back(SampledDensity::from_function(current[i].patch_ptr(), current[i].support(),
                                                             std::move(mixed), budget, rule));
            }
            const double v = product_ratio(cand, Q, res, p);
            if (v > e.A_hat) {
                e.A_hat = v;
                current = std::move(cand);
            }
        }
    }
    return e;
}

GainCurve localization_gain_curve(Family family, std::span<const std::size_t> localized,
                                  std::span<const double> ladder, double R, double delta, ConstantOptions opt) {
    validate_family(family);
    require(ladder.size() >= 2, "localization_gain_curve: need at least two rungs");
    for (std::size_t i : localized) require(i < family.size(), "localization_gain_curve: invalid surface index");
    const double mu_min = *std::min_element(ladder.begin(), ladder.end());
    const double mu_max = *std::max_element(ladder.begin(), ladder.end());
    require(mu_min > 0.0, "localization_gain_curve: mu must be positive");
    if (R * mu_min < 1.0 - 1e-12)
        throw InvalidArgument("localization_gain_curve: R must be at least max 1/mu (regime R >= mu^{-1})");
    opt.padded_width = false;
    GainCurve out;
    for (std::size_t i : localized) out.reference += 0.5 * double(family[i].codim);
    if (opt.resolution == 0) {
        Family widest = family;
        for (std::size_t i : localized) widest[i].mu = mu_max;
        opt.resolution = auto_resolution(widest, R, delta, opt);
    }
    std::vector<std::vector<double>> trials;
    for (double mu : ladder) {
        for (std::size_t i : localized) family[i].mu = mu;
        const auto e = best_constant_estimate(family, R, delta, opt);
        out.mu.push_back(mu);
        out.A_hat.push_back(e.A_hat);
        out.mean.push_back(e.mean);
        trials.push_back(e.per_trial);
    }
    std::vector<double> lx, ly, lm;
    for (std::size_t r = 0; r < out.mu.size(); ++r) {
        lx.push_back(std::log(out.mu[r]));
        ly.push_back(std::log(out.A_hat[r]));
        lm.push_back(std::log(out.mean[r]));
    }
    out.slope = fit_line(lx, ly).slope;
    out.mean_slope = fit_line(lx, lm).slope;
    std::vector<double> per_seed;
    for (std::size_t t = 0; t < opt.trials; ++t) {
        std::vector<double> y;
        for (const auto& row : trials) y.push_back(std::log(row[t]));
        per_seed.push_back(fit_line(lx, y).slope);
    }
    out.band_lo = quantile(per_seed, 0.1);
    out.band_hi = quantile(per_seed, 0.9);
    return out;
}

RecursionCheck recursion_check(const Family& family, double R, double delta, const ConstantOptions& opt,
                               double kappa_rec) {
    require(delta > 0.0 && delta < 1.0, "recursion_check: delta must lie in (0, 1)");
    RecursionCheck out;
    out.lhs = best_constant_estimate(family, R / delta, delta, opt).A_hat;
    out.A_R = best_constant_estimate(family, R, delta, opt).A_hat;
    out.factor = 1.0;
    for (const auto& s : family) out.factor *= c_factor(s.mu, delta, R, double(s.codim));
    out.rhs = out.A_R * out.factor;
    out.ratio = out.lhs / out.rhs;
    out.within = out.ratio <= kappa_rec;
    return out;
}

CuantCheck cuant_check(double mu, double delta, double c) {
    require(mu > 0.0 && mu < 1.0, "cuant_check: mu must lie in (0, 1)");
    require(delta > 0.0 && delta < 1.0, "cuant_check: delta must lie in (0, 1)");
    require(c >= 0.0, "cuant_check: negative codimension");
    const double R = 1.0 / mu;
    CuantCheck out;
    for (int N = 1; std::pow(delta, N) * R >= 1.0 / delta; ++N)
        if (std::pow(delta, N) * R <= 1.0 / (delta * delta)) out.N = N;
    if (out.N == 0) throw InvalidArgument("cuant_check: no N with delta^-1 <= delta^N / mu <= delta^-2");
    out.product = 1.0;
    for (int m = 1; m <= out.N; ++m) out.product *= c_factor(mu, delta, std::pow(delta, m) * R, c);
    out.kappa0 = std::pow(11.0, 0.5 * c) * std::pow(delta, -c);
    out.envelope = std::pow(out.kappa0, out.N) * std::pow(mu, 0.5 * c);
    out.holds = out.product <= out.envelope;
    return out;
}

bool chain_inequality(double p, std::size_t n, double beta) {
    require(beta < 1.0, "chain_inequality: beta must be below 1");
    return (p + double(n) * beta) / (1.0 - beta) < p + (double(n) + p + 1.0) * beta;
}

EpsRemovalPlan eps_removal_exponent(double p, std::size_t n, double eps, double C) {
    require(p > 0.0, "eps_removal_exponent: p must be positive");
    require(n >= 1, "eps_removal_exponent: n must be positive");
    require(eps > 0.0 && eps < 1.0, "eps_removal_exponent: eps must lie in (0, 1)");
    if (!(C > std::min(2.0, double(n) - 1.0)))
        throw InvalidArgument("eps_removal_exponent: C must exceed min(2, n-1)");
    if (!(eps < std::exp(-C))) throw InvalidArgument("eps_removal_exponent: eps must be below e^{-C}");
    EpsRemovalPlan out;
    out.p = p;
    out.n = n;
    out.eps = eps;
    out.C = C;
    out.log_inv_eps = -std::log(eps);
    out.N = out.log_inv_eps / C;
    out.beta = 1.0 / out.N + std::exp(std::log(p) + std::log(eps) + out.N * std::log(C));
    out.beta_lo = C / out.log_inv_eps;
    out.beta_hi = 2.0 * C / out.log_inv_eps;
    const double np1 = double(n) + p + 1.0;
    out.q_bound = p + np1 * out.beta_hi;
    out.q_bound_statement = p + np1 * out.beta_lo;
    out.beta_limit = 1.0 / np1;
    out.beta_in_range = out.beta_lo <= out.beta && out.beta <= out.beta_hi;
    out.chain_holds = out.beta < 1.0 && chain_inequality(p, n, out.beta);
    if (!out.chain_holds)
        out.diagnostic = "beta = " + std::to_string(out.beta) + " >= 1/(n+p+1) = " + std::to_string(out.beta_limit) +
                         ": the chain inequality fails";
    else if (!out.beta_in_range)
        out.diagnostic = "beta outside [C, 2C] / log(1/eps)";
    return out;
}

WeakTypeRecord weak_type_assembly(const SuperlevelDecomposition& d, const SparseCollectionSet& cover, double p,
                                  double eps, std::size_t n) {
    require(p > 0.0 && eps > 0.0, "weak_type_assembly: p and eps must be positive");
    WeakTypeRecord out;
    out.lambda = d.lambda;
    out.beta = 1.0 / double(cover.N) + p * eps * std::pow(cover.C, double(cover.N));
    if (d.e_cells.empty()) return out;
    out.volume_f = d.volume_f;
    CompensatedSum s;
    for (const auto& col : cover.collections) s.add(std::pow(col.radius, p * eps));
    out.radius_sum = s.value();
    out.rhs_scales = std::pow(d.lambda, -p) * out.radius_sum;
    out.kappa_scales = out.volume_f / out.rhs_scales;
    out.rhs_self = double(cover.N) * std::pow(std::pow(d.lambda, -double(n)) * out.volume_f, out.beta);
    out.kappa_self = out.volume_f / out.rhs_self;
    return out;
}

}  // namespace mrlab
