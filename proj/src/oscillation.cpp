#include "mrlab/oscillation.hpp"

#include <algorithm>
#include <limits>
#include <random>

namespace mrlab {

namespace {

using RowMatC = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatC = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic>;

double phi_oscillation_on(const HypersurfacePatch& p, const Box& box) {
    if (p.phi.is_zero()) return 0.0;
    const std::size_t d = box.dim();
    const std::size_t per = d <= 1 ? 257 : (d == 2 ? 33 : 13);
    std::size_t total = 1;
    for (std::size_t a = 0; a < d; ++a) total *= per;
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    std::vector<double> x(d);
    for (std::size_t idx = 0; idx < total; ++idx) {
        std::size_t r = idx;
        for (std::size_t a = d; a-- > 0;) {
            x[a] = box.lo[a] + box.side(a) * double(r % per) / double(per - 1);
            r /= per;
        }
        const double v = p.phi(x);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    return hi - lo;
}

// Flattened node data for direct sums.
struct NodeCache {
    std::size_t d = 0;
    std::vector<double> xi;   // size * d
    std::vector<double> phi;  // size
    std::vector<double> w;    // size

    explicit NodeCache(const SampledDensity& f) : d(f.grid().dim()) {
        const std::size_t m = f.grid().size();
        xi.resize(m * d);
        phi.resize(m);
        w = f.weights();
        for (std::size_t j = 0; j < m; ++j) {
            std::span<double> x(xi.data() + j * d, d);
            f.grid().node(j, x);
            phi[j] = f.patch().phi(x);
        }
    }

    // sum_j w_j v_j exp(i(x' . xi_j + xn phi_j))
    [[nodiscard]] cplx sum(const std::vector<cplx>& v, std::span<const double> xp, double xn) const {
        cplx s = 0.0;
        for (std::size_t j = 0; j < w.size(); ++j) {
            double ph = xn * phi[j];
            for (std::size_t a = 0; a < d; ++a) ph += xp[a] * xi[j * d + a];
            s += w[j] * v[j] * std::polar(1.0, ph);
        }
        return s;
    }
};

void split_point(const HypersurfacePatch& p, const Vec& x, std::vector<double>& xp, double& xn) {
    xp.resize(p.param_dim());
    for (std::size_t a = 0; a < p.param_dim(); ++a) xp[a] = x[static_cast<Eigen::Index>(p.param_axis(a))];
    xn = x[static_cast<Eigen::Index>(p.normal_axis)];
}

// S(x') = sum_j g_j e^{i x' . xi_j} on the tensor grid coords[0] x ... x coords[d-1].
std::vector<cplx> separable_sum(const TensorGrid& grid, std::vector<cplx> g,
                                const std::vector<std::vector<double>>& coords) {
    const std::size_t d = grid.dim();
    std::vector<std::size_t> shape = grid.counts();
    for (std::size_t a = 0; a < d; ++a) {
        const auto& nodes = grid.axis(a).nodes;
        const std::size_t N = nodes.size(), M = coords[a].size();
        MatC E(M, N);
        for (std::size_t m = 0; m < M; ++m)
            for (std::size_t j = 0; j < N; ++j) E(m, j) = std::polar(1.0, coords[a][m] * nodes[j]);
        std::size_t A = 1, B = 1;
        for (std::size_t b = 0; b < a; ++b) A *= shape[b];
        for (std::size_t b = a + 1; b < d; ++b) B *= shape[b];
        std::vector<cplx> out(A * M * B);
        for (std::size_t blk = 0; blk < A; ++blk) {
            Eigen::Map<const RowMatC> in(g.data() + blk * N * B, N, B);
            Eigen::Map<RowMatC> o(out.data() + blk * M * B, M, B);
            o.noalias() = E * in;
        }
        g.swap(out);
        shape[a] = M;
    }
    return g;
}

std::vector<double> midpoints(double lo, double hi, std::size_t r) {
    std::vector<double> c(r);
    const double h = (hi - lo) / double(r);
    for (std::size_t i = 0; i < r; ++i) c[i] = lo + (double(i) + 0.5) * h;
    return c;
}

double max_abs(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

// Apply a per-axis matrix to the node-value tensor along axis a.
std::vector<cplx> apply_along(const TensorGrid& grid, const std::vector<cplx>& v, std::size_t a, const Mat& D) {
    const auto shape = grid.counts();
    std::size_t A = 1, B = 1;
    for (std::size_t b = 0; b < a; ++b) A *= shape[b];
    for (std::size_t b = a + 1; b < shape.size(); ++b) B *= shape[b];
    const std::size_t N = shape[a];
    std::vector<cplx> out(v.size());
    const MatC Dc = D.cast<cplx>();
    for (std::size_t blk = 0; blk < A; ++blk) {
        Eigen::Map<const RowMatC> in(v.data() + blk * N * B, N, B);
        Eigen::Map<RowMatC> o(out.data() + blk * N * B, N, B);
        o.noalias() = Dc * in;
    }
    return out;
}

}  // namespace

// ---------------------------------------------------------------------------------------------
// SampledDensity

SampledDensity::SampledDensity(PatchPtr patch, Box support, std::vector<std::size_t> counts, DensityFn fn)
    : patch_(std::move(patch)), fn_(std::move(fn)) {
    require(patch_ != nullptr, "SampledDensity: missing patch");
    require(support.dim() == patch_->param_dim(), "SampledDensity: support box has wrong dimension");
    require(patch_->domain.contains(support, 1e-12), "SampledDensity: support box must lie inside U");
    require(static_cast<bool>(fn_), "SampledDensity: empty generator");
    grid_ = TensorGrid(support, counts);
    values_.resize(grid_.size());
    std::vector<double> x(grid_.dim());
    for (std::size_t j = 0; j < grid_.size(); ++j) {
        grid_.node(j, x);
        values_[j] = fn_(x);
    }
    finish_setup();
}

SampledDensity::SampledDensity(PatchPtr patch, Box support, std::vector<std::size_t> counts, std::vector<cplx> values)
    : patch_(std::move(patch)), values_(std::move(values)) {
    require(patch_ != nullptr, "SampledDensity: missing patch");
    require(support.dim() == patch_->param_dim(), "SampledDensity: support box has wrong dimension");
    require(patch_->domain.contains(support, 1e-12), "SampledDensity: support box must lie inside U");
    grid_ = TensorGrid(support, counts);
    require(values_.size() == grid_.size(), "SampledDensity: value count does not match the grid");
    finish_setup();
}

void SampledDensity::finish_setup() {
    weights_ = grid_.all_weights();
    phi_osc_ = phi_oscillation_on(*patch_, grid_.box());
    for (const auto& v : values_)
        if (!std::isfinite(v.real()) || !std::isfinite(v.imag()))
            throw NumericError("SampledDensity: non-finite density value");
}

SampledDensity SampledDensity::from_function(PatchPtr patch, Box support, DensityFn fn, double x_budget,
                                             NodeRule rule) {
    require(x_budget >= 0.0, "SampledDensity: x_budget must be non-negative");
    require(patch != nullptr, "SampledDensity: missing patch");
    const double osc = phi_oscillation_on(*patch, support);
    std::vector<std::size_t> counts(support.dim());
    for (std::size_t a = 0; a < support.dim(); ++a)
        counts[a] = static_cast<std::size_t>(
            std::ceil(rule.kappa * (x_budget * support.side(a) + x_budget * osc + rule.base)));
    SampledDensity f(std::move(patch), std::move(support), counts, std::move(fn));
    f.rule_ = rule;
    return f;
}

double SampledDensity::max_frequency() const { return grid_.box().max_norm(); }

double SampledDensity::l2_norm() const {
    CompensatedSum s;
    for (std::size_t j = 0; j < values_.size(); ++j) s.add(weights_[j] * std::norm(values_[j]));
    return std::sqrt(s.value());
}

double SampledDensity::l1_norm() const {
    CompensatedSum s;
    for (std::size_t j = 0; j < values_.size(); ++j) s.add(weights_[j] * std::abs(values_[j]));
    return s.value();
}

std::vector<std::size_t> SampledDensity::required_counts(std::span<const double> xp, double xn) const {
    std::vector<std::size_t> c(grid_.dim());
    for (std::size_t a = 0; a < c.size(); ++a)
        c[a] = static_cast<std::size_t>(
            std::ceil(rule_.kappa * (std::abs(xp[a]) * grid_.box().side(a) + std::abs(xn) * phi_osc_ + rule_.base)));
    return c;
}

SampledDensity SampledDensity::resampled(std::vector<std::size_t> counts) const {
    if (!fn_) throw ResolutionError("SampledDensity: cannot resample a density without generator",
                                    *std::max_element(counts.begin(), counts.end()));
    SampledDensity f(patch_, grid_.box(), std::move(counts), fn_);
    f.rule_ = rule_;
    return f;
}

SampledDensity SampledDensity::multiplied(const std::function<cplx(std::span<const double>)>& m) const {
    SampledDensity f = *this;
    std::vector<double> x(grid_.dim());
    for (std::size_t j = 0; j < values_.size(); ++j) {
        grid_.node(j, x);
        f.values_[j] *= m(x);
    }
    if (fn_) {
        auto g = fn_;
        f.fn_ = [g, m](std::span<const double> x) { return g(x) * m(x); };
    }
    return f;
}

SampledDensity SampledDensity::ensure_resolution(std::span<const double> xp, double xn) const {
    auto req = required_counts(xp, xn);
    const auto have = grid_.counts();
    bool ok = true;
    for (std::size_t a = 0; a < req.size(); ++a) {
        ok = ok && have[a] >= req[a];
        req[a] = std::max(req[a], have[a]);
    }
    if (ok) return *this;
    if (!fn_)
        throw ResolutionError("requested |x| exceeds the density's resolution budget",
                              *std::max_element(req.begin(), req.end()));
    return resampled(req);
}

// ---------------------------------------------------------------------------------------------

DensityFn smooth_random_profile(const Box& support, std::uint64_t seed, int modes, int p) {
    require(modes >= 1 && p >= 0, "smooth_random_profile: invalid modes/envelope power");
    const std::size_t d = support.dim();
    std::size_t total = 1;
    for (std::size_t a = 0; a < d; ++a) total *= static_cast<std::size_t>(modes);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0.0, std::sqrt(0.5));
    std::vector<cplx> coef(total);
    for (auto& c : coef) {
        const double re = nd(rng);
        const double im = nd(rng);
        c = cplx(re, im);
    }
    std::vector<double> center(d), half(d);
    for (std::size_t a = 0; a < d; ++a) {
        center[a] = support.center(a);
        half[a] = 0.5 * support.side(a);
        require(half[a] > 0.0, "smooth_random_profile: degenerate support box");
    }
    auto raw = [=](std::span<const double> x) -> cplx {
        double env = 1.0;
        std::vector<double> t(d);
        for (std::size_t a = 0; a < d; ++a) {
            t[a] = (x[a] - center[a]) / half[a];
            if (std::abs(t[a]) >= 1.0) return 0.0;
            env *= std::pow(1.0 - t[a] * t[a], p);
        }
        // tensor Legendre values per axis
        std::vector<double> P(d * static_cast<std::size_t>(modes));
        for (std::size_t a = 0; a < d; ++a) {
            double p0 = 1.0, p1 = t[a];
            P[a * modes] = 1.0;
            if (modes > 1) P[a * modes + 1] = p1;
            for (int k = 2; k < modes; ++k) {
                const double p2 = ((2.0 * k - 1.0) * t[a] * p1 - (k - 1.0) * p0) / k;
                P[a * modes + k] = p2;
                p0 = p1;
                p1 = p2;
            }
        }
        cplx s = 0.0;
        for (std::size_t idx = 0; idx < coef.size(); ++idx) {
            std::size_t r = idx;
            double b = 1.0;
            for (std::size_t a = d; a-- > 0;) {
                b *= P[a * modes + r % modes];
                r /= modes;
            }
            s += coef[idx] * b;
        }
        return env * s;
    };
    // exact normalisation: |f|^2 is a polynomial of degree 2(2p + modes - 1) per axis
    const std::vector<std::size_t> counts(d, static_cast<std::size_t>(2 * p + modes + 2));
    TensorGrid g(support, counts);
    CompensatedSum s;
    std::vector<double> x(d);
    for (std::size_t j = 0; j < g.size(); ++j) {
        g.node(j, x);
        s.add(g.weight(j) * std::norm(raw(x)));
    }
    const double scale = 1.0 / std::sqrt(s.value());
    return [raw, scale](std::span<const double> x) { return scale * raw(x); };
}

SampledDensity smooth_random_density(PatchPtr patch, Box support, std::uint64_t seed, double x_budget, int modes,
                                     int envelope_power, NodeRule rule) {
    rule.base = std::max(rule.base, double(2 * envelope_power + modes + 2));
    auto fn = smooth_random_profile(support, seed, modes, envelope_power);
    return SampledDensity::from_function(std::move(patch), std::move(support), std::move(fn), x_budget, rule);
}

// ---------------------------------------------------------------------------------------------

ExtensionValues evaluate_extension(const SampledDensity& f0, std::span<const Vec> points, bool estimate_error) {
    const auto& p = f0.patch();
    std::vector<double> xpmax(p.param_dim(), 0.0);
    double xnmax = 0.0;
    std::vector<double> xp;
    double xn = 0.0;
    for (const auto& x : points) {
        require(static_cast<std::size_t>(x.size()) == p.n, "evaluate_extension: point has wrong dimension");
        require(x.allFinite(), "evaluate_extension: non-finite point");
        split_point(p, x, xp, xn);
        for (std::size_t a = 0; a < xp.size(); ++a) xpmax[a] = std::max(xpmax[a], std::abs(xp[a]));
        xnmax = std::max(xnmax, std::abs(xn));
    }
    const SampledDensity f = f0.ensure_resolution(xpmax, xnmax);
    auto run = [&](const SampledDensity& g) {
        NodeCache cache(g);
        std::vector<cplx> out(points.size());
        std::vector<double> xq;
        double xr = 0.0;
        for (std::size_t i = 0; i < points.size(); ++i) {
            split_point(p, points[i], xq, xr);
            out[i] = cache.sum(g.values(), xq, xr);
        }
        return out;
    };
    ExtensionValues res;
    res.values = run(f);
    if (!estimate_error) return res;
    if (!f.has_generator()) {
        res.error_estimate = std::numeric_limits<double>::quiet_NaN();
        return res;
    }
    auto counts = f.grid().counts();
    for (auto& c : counts) c *= 2;
    const auto fine = run(f.resampled(counts));
    for (std::size_t i = 0; i < fine.size(); ++i)
        res.error_estimate = std::max(res.error_estimate, std::abs(fine[i] - res.values[i]));
    return res;
}

double nyquist_spacing(const SampledDensity& f) {
    double sphi = 0.0;
    const auto& g = f.grid();
    std::vector<double> x(g.dim());
    for (std::size_t j = 0; j < g.size(); ++j) {
        g.node(j, x);
        sphi = std::max(sphi, std::abs(f.patch().phi(x)));
    }
    return kPi / (f.max_frequency() + sphi);
}

SampledField slice_field(const SampledDensity& f0, double xn, const Box& slice_box, std::size_t r) {
    const auto& p = f0.patch();
    require(slice_box.dim() == p.param_dim(), "slice_field: slice box has wrong dimension");
    require(r >= 1, "slice_field: resolution must be positive");
    std::vector<std::vector<double>> coords(p.param_dim());
    std::vector<double> xpmax(p.param_dim());
    for (std::size_t a = 0; a < coords.size(); ++a) {
        coords[a] = midpoints(slice_box.lo[a], slice_box.hi[a], r);
        xpmax[a] = max_abs(coords[a]);
    }
    const SampledDensity f = f0.ensure_resolution(xpmax, std::abs(xn));
    NodeCache cache(f);
    std::vector<cplx> g(f.values().size());
    for (std::size_t j = 0; j < g.size(); ++j) g[j] = cache.w[j] * f.values()[j] * std::polar(1.0, xn * cache.phi[j]);
    SampledField out;
    out.cube = slice_box;
    out.resolution = r;
    out.values = separable_sum(f.grid(), std::move(g), coords);
    return out;
}

SampledField boundary_trace(const SampledDensity& f, const Box& slice_box, std::size_t r) {
    return slice_field(f, 0.0, slice_box, r);
}

SampledField evaluate_field(const SampledDensity& f0, const Box& cube, std::size_t r) {
    const auto& p = f0.patch();
    require(cube.dim() == p.n, "evaluate_field: cube has wrong dimension");
    require(r >= 1, "evaluate_field: resolution must be positive");
    const double nyq = nyquist_spacing(f0);
    for (std::size_t a = 0; a < p.n; ++a) {
        if (cube.side(a) / double(r) > nyq * (1 + 1e-12))
            throw ResolutionError("evaluate_field: grid spacing violates the Nyquist bound",
                                  static_cast<std::size_t>(std::ceil(cube.side(a) / nyq)));
    }
    const std::size_t d = p.param_dim();
    std::vector<std::vector<double>> coords(d);
    std::vector<double> xpmax(d);
    for (std::size_t a = 0; a < d; ++a) {
        const std::size_t ax = p.param_axis(a);
        coords[a] = midpoints(cube.lo[ax], cube.hi[ax], r);
        xpmax[a] = max_abs(coords[a]);
    }
    const auto xn_coords = midpoints(cube.lo[p.normal_axis], cube.hi[p.normal_axis], r);
    const SampledDensity f = f0.ensure_resolution(xpmax, max_abs(xn_coords));
    NodeCache cache(f);

    SampledField out;
    out.cube = cube;
    out.resolution = r;
    std::size_t total = 1;
    for (std::size_t a = 0; a < p.n; ++a) total *= r;
    out.values.assign(total, cplx(0.0));
    // ambient strides and the offsets of slice entries
    std::vector<std::size_t> stride(p.n, 1);
    for (std::size_t a = p.n - 1; a-- > 0;) stride[a] = stride[a + 1] * r;
    std::size_t slice_size = total / r;
    std::vector<std::size_t> offset(slice_size);
    for (std::size_t q = 0; q < slice_size; ++q) {
        std::size_t rem = q, off = 0;
        for (std::size_t a = d; a-- > 0;) {
            off += (rem % r) * stride[p.param_axis(a)];
            rem /= r;
        }
        offset[q] = off;
    }
    const bool flat = p.phi.is_zero();
    std::vector<cplx> slice;
    for (std::size_t s = 0; s < r; ++s) {
        if (!flat || s == 0) {
            std::vector<cplx> g(f.values().size());
            for (std::size_t j = 0; j < g.size(); ++j)
                g[j] = cache.w[j] * f.values()[j] * (flat ? cplx(1.0) : std::polar(1.0, xn_coords[s] * cache.phi[j]));
            slice = separable_sum(f.grid(), std::move(g), coords);
        }
        const std::size_t base = s * stride[p.normal_axis];
        for (std::size_t q = 0; q < slice_size; ++q) out.values[offset[q] + base] = slice[q];
    }
    return out;
}

double lp_quasinorm(std::span<const SampledField> fields, double p) {
    require(p > 0.0, "lp_quasinorm: p must be positive");
    require(!fields.empty(), "lp_quasinorm: no fields");
    const auto& f0 = fields.front();
    for (const auto& f : fields) {
        require(f.resolution == f0.resolution && f.cube.lo == f0.cube.lo && f.cube.hi == f0.cube.hi &&
                    f.values.size() == f0.values.size(),
                "lp_quasinorm: fields live on different grids");
    }
    CompensatedSum s;
    for (std::size_t i = 0; i < f0.values.size(); ++i) {
        double v = 1.0;
        for (const auto& f : fields) v *= std::abs(f.values[i]);
        s.add(std::pow(v, p));
    }
    return std::pow(s.value() * f0.cell_volume(), 1.0 / p);
}

double lp_quasinorm(const SampledField& field, double p) {
    return lp_quasinorm(std::span<const SampledField>(&field, 1), p);
}

double slice_mass(const SampledDensity& f0, double xn, std::size_t M) {
    require(M >= 2, "slice_mass: resolution must be >= 2");
    const std::size_t d = f0.patch().param_dim();
    const Box& sup = f0.support();
    std::vector<std::vector<double>> coords(d);
    std::vector<double> xpmax(d);
    double cell = 1.0;
    const long half = static_cast<long>(M / 2);
    for (std::size_t a = 0; a < d; ++a) {
        const double step = 2.0 * kPi / sup.side(a);
        for (long m = -half; m <= half; ++m) coords[a].push_back(step * double(m));
        xpmax[a] = step * double(half);
        cell *= step;
    }
    const SampledDensity f = f0.ensure_resolution(xpmax, std::abs(xn));
    NodeCache cache(f);
    std::vector<cplx> g(f.values().size());
    for (std::size_t j = 0; j < g.size(); ++j) g[j] = cache.w[j] * f.values()[j] * std::polar(1.0, xn * cache.phi[j]);
    const auto S = separable_sum(f.grid(), std::move(g), coords);
    CompensatedSum s;
    for (const auto& v : S) s.add(std::norm(v));
    return std::sqrt(s.value() * cell);
}

std::vector<SampledField> evaluate_field_gradient(const SampledDensity& f, const Box& cube, std::size_t r) {
    const auto& p = f.patch();
    std::vector<SampledField> out(p.n);
    for (std::size_t a = 0; a < p.param_dim(); ++a) {
        auto g = f.multiplied([a](std::span<const double> x) { return cplx(0.0, x[a]); });
        out[p.param_axis(a)] = evaluate_field(g, cube, r);
    }
    const auto patch = f.patch_ptr();
    auto g = f.multiplied([patch](std::span<const double> x) { return cplx(0.0, patch->phi(x)); });
    out[p.normal_axis] = evaluate_field(g, cube, r);
    return out;
}

CommutatorReport commutator_check(const SampledDensity& f0, std::span<const double> c, int order,
                                  std::span<const Vec> points, std::span<const double> xi0_in) {
    const auto& p = f0.patch();
    const std::size_t d = p.param_dim();
    require(order == 1 || order == 2, "commutator_check: order must be 1 or 2");
    require(c.size() == d, "commutator_check: centre must lie in the hyperplane (n-1 coordinates)");
    std::vector<double> xi0(d, 0.0);
    if (!xi0_in.empty()) {
        require(xi0_in.size() == d, "commutator_check: xi0 has wrong dimension");
        xi0.assign(xi0_in.begin(), xi0_in.end());
    }
    std::vector<double> xpmax(d, 0.0);
    double xnmax = 0.0;
    std::vector<double> xp;
    double xn = 0.0;
    for (const auto& x : points) {
        split_point(p, x, xp, xn);
        for (std::size_t a = 0; a < d; ++a) xpmax[a] = std::max(xpmax[a], std::abs(xp[a]));
        xnmax = std::max(xnmax, std::abs(xn));
    }
    const SampledDensity f = f0.ensure_resolution(xpmax, xnmax);
    const auto& grid = f.grid();
    NodeCache cache(f);
    const std::size_t m_nodes = grid.size();

    std::vector<Mat> D(d);
    for (std::size_t a = 0; a < d; ++a) D[a] = BarycentricInterpolant(grid.axis(a).nodes).differentiation_matrix();
    // D_m g = i d_m g - c_m g
    auto Dm = [&](const std::vector<cplx>& g, std::size_t m) {
        auto out = apply_along(grid, g, m, D[m]);
        for (std::size_t j = 0; j < out.size(); ++j) out[j] = cplx(0.0, 1.0) * out[j] - c[m] * g[j];
        return out;
    };
    std::vector<std::vector<double>> dphi(d, std::vector<double>(m_nodes));
    std::vector<double> lap(m_nodes);
    {
        std::vector<double> x(d);
        for (std::size_t j = 0; j < m_nodes; ++j) {
            grid.node(j, x);
            const Vec g = p.phi.gradient(x);
            for (std::size_t a = 0; a < d; ++a) dphi[a][j] = g[a];
            lap[j] = p.phi.laplacian(x);
        }
    }
    const Vec g0 = p.phi.gradient(xi0);
    const auto& fv = f.values();

    CommutatorReport rep;
    double maxdiff = 0.0;
    if (order == 1) {
        std::vector<std::vector<cplx>> rhs_dens(d), mult_dens(d);
        for (std::size_t m = 0; m < d; ++m) {
            rhs_dens[m] = Dm(fv, m);
            mult_dens[m].resize(m_nodes);
            for (std::size_t j = 0; j < m_nodes; ++j) mult_dens[m][j] = dphi[m][j] * fv[j];
        }
        for (const auto& x : points) {
            split_point(p, x, xp, xn);
            const cplx ef = cache.sum(fv, xp, xn);
            for (std::size_t m = 0; m < d; ++m) {
                const cplx lhs = (xp[m] - c[m]) * ef + xn * cache.sum(mult_dens[m], xp, xn);
                const cplx rhs = cache.sum(rhs_dens[m], xp, xn);
                rep.max_lhs = std::max(rep.max_lhs, std::abs(lhs));
                maxdiff = std::max(maxdiff, std::abs(lhs - rhs));
            }
        }
    } else {
        // A^2 term, BA term, B^2 term and the commutator term as node densities
        std::vector<cplx> a2(m_nodes, 0.0), ba(m_nodes, 0.0), b2(m_nodes, 0.0), comm(m_nodes);
        for (std::size_t m = 0; m < d; ++m) {
            const auto d1 = Dm(fv, m);
            const auto d2 = Dm(d1, m);
            for (std::size_t j = 0; j < m_nodes; ++j) {
                const double b = g0[m] - dphi[m][j];
                a2[j] += d2[j];
                ba[j] += b * d1[j];
                b2[j] += b * b * fv[j];
            }
        }
        for (std::size_t j = 0; j < m_nodes; ++j) comm[j] = lap[j] * fv[j];
        for (const auto& x : points) {
            split_point(p, x, xp, xn);
            double w = 0.0;
            for (std::size_t m = 0; m < d; ++m) {
                const double t = xp[m] - c[m] + xn * g0[m];
                w += t * t;
            }
            const cplx lhs = w * cache.sum(fv, xp, xn);
            const cplx rhs = cache.sum(a2, xp, xn) + 2.0 * xn * cache.sum(ba, xp, xn) +
                             xn * xn * cache.sum(b2, xp, xn) - cplx(0.0, xn) * cache.sum(comm, xp, xn);
            rep.max_lhs = std::max(rep.max_lhs, std::abs(lhs));
            maxdiff = std::max(maxdiff, std::abs(lhs - rhs));
        }
    }
    rep.max_relative_discrepancy = rep.max_lhs > 0 ? maxdiff / rep.max_lhs : maxdiff;
    return rep;
}

std::vector<double> geometric_radii(double r_min, double r_max, std::size_t per_octave) {
    require(r_min > 0.0 && r_max > r_min && per_octave >= 1, "geometric_radii: invalid range");
    std::vector<double> r;
    for (std::size_t k = 0;; ++k) {
        const double v = r_min * std::exp2(double(k) / double(per_octave));
        if (v > r_max * (1 + 1e-12)) break;
        r.push_back(v);
    }
    if (r.back() < r_max * (1 - 1e-12)) r.push_back(r_max);
    return r;
}

DecayEstimate decay_fit(const SampledDensity& psi, const Vec& direction, std::span<const double> radii) {
    require(radii.size() >= 2, "decay_fit: need at least two radii");
    require(std::abs(direction.norm() - 1.0) < 1e-12, "decay_fit: direction must be a unit vector");
    for (std::size_t i = 1; i < radii.size(); ++i) require(radii[i] > radii[i - 1], "decay_fit: radii must increase");
    require(radii.front() > 0.0 && radii.back() / radii.front() >= 100.0 * (1 - 1e-12),
            "decay_fit: radii must span at least two decades");
    DecayEstimate est;
    est.direction = direction;
    std::vector<Vec> pts;
    for (double r : radii) pts.push_back(r * direction);
    pts.push_back(Vec::Zero(direction.size()));
    const auto ev = evaluate_extension(psi, pts, false);
    const double at0 = std::abs(ev.values.back());
    double peak = at0;
    for (std::size_t i = 0; i < radii.size(); ++i) peak = std::max(peak, std::abs(ev.values[i]));
    const double floor = std::max(1e-300, 1e-12 * peak);
    for (std::size_t i = 0; i < radii.size(); ++i) {
        const double m = std::abs(ev.values[i]);
        if (m < floor) {
            est.truncated = true;
            break;
        }
        est.radii.push_back(radii[i]);
        est.magnitudes.push_back(m);
    }
    // per-octave maxima (upper envelope)
    std::vector<double> lr, lm;
    std::vector<std::size_t> octave_of(est.radii.size());
    {
        long cur = -1;
        for (std::size_t i = 0; i < est.radii.size(); ++i) {
            const long o = static_cast<long>(std::floor(std::log2(est.radii[i] / est.radii.front()) + 1e-9));
            if (o != cur) {
                lr.push_back(std::log(est.radii[i]));
                lm.push_back(std::log(est.magnitudes[i]));
                cur = o;
            } else if (std::log(est.magnitudes[i]) > lm.back()) {
                lr.back() = std::log(est.radii[i]);
                lm.back() = std::log(est.magnitudes[i]);
            }
            octave_of[i] = lr.size() - 1;
        }
    }
    if (lr.size() < 2) throw NumericError("decay_fit: fewer than two octaves above the quadrature noise floor");
    std::vector<double> slopes;
    for (std::size_t k = 0; k + 1 < lr.size(); ++k) slopes.push_back((lm[k + 1] - lm[k]) / (lr[k + 1] - lr[k]));
    std::vector<double> sorted = slopes;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t s = sorted.size();
    const double med = s % 2 ? sorted[s / 2] : 0.5 * (sorted[s / 2 - 1] + sorted[s / 2]);
    est.alpha_hat = -med;
    est.fit_residual = lr.size() >= 2 ? fit_line(lr, lm).residual : 0.0;
    est.running_slope.resize(est.radii.size());
    for (std::size_t i = 0; i < est.radii.size(); ++i)
        est.running_slope[i] = slopes[std::min(octave_of[i], slopes.size() - 1)];
    est.degenerate = std::abs(est.alpha_hat) < 0.05;
    return est;
}

WorstDirection decay_worst_direction(const SampledDensity& psi, std::span<const double> radii, std::size_t count) {
    require(psi.patch().n == 2, "decay_worst_direction: implemented for n = 2");
    require(count >= 2, "decay_worst_direction: need at least two directions");
    WorstDirection out;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < count; ++k) {
        const double th = kPi * double(k) / double(count - 1);
        Vec dir(2);
        dir << std::cos(th), std::sin(th);
        double a = std::numeric_limits<double>::infinity();
        try {
            auto est = decay_fit(psi, dir, radii);
            a = est.alpha_hat;
            if (est.degenerate) ++out.degenerate_count;
            if (a < best) {
                best = a;
                out.worst = std::move(est);
            }
        } catch (const NumericError&) {
            // decays to the noise floor within one octave: fast decay, not a candidate
        }
        out.angles.push_back(th);
        out.alphas.push_back(a);
    }
    if (!std::isfinite(best)) throw NumericError("decay_worst_direction: no direction produced a fit");
    return out;
}

KernelProfile kernel_profile(const SampledDensity& chi, std::span<const double> c_prime, double c_n, double R,
                             double alpha_hat) {
    const auto& p = chi.patch();
    const std::size_t d = p.param_dim();
    require(c_prime.size() == d, "kernel_profile: c' must have n-1 coordinates");
    require(R > 0.0, "kernel_profile: R must be positive");
    KernelProfile kp;
    kp.R = R;
    kp.slab_offset = c_n;
    kp.center = Vec(p.n);
    for (std::size_t a = 0; a < d; ++a) kp.center[static_cast<Eigen::Index>(p.param_axis(a))] = c_prime[a];
    kp.center[static_cast<Eigen::Index>(p.normal_axis)] = c_n;
    std::vector<double> lo(d), hi(d);
    for (std::size_t a = 0; a < d; ++a) {
        lo[a] = c_prime[a] - 0.5 * R;
        hi[a] = c_prime[a] + 0.5 * R;
    }
    const auto nq = static_cast<std::size_t>(std::ceil(R * chi.max_frequency()) + 32);
    TensorGrid g(Box(lo, hi), std::vector<std::size_t>(d, nq));
    std::vector<Vec> pts;
    std::vector<double> x(d);
    for (std::size_t j = 0; j < g.size(); ++j) {
        g.node(j, x);
        Vec y(p.n);
        for (std::size_t a = 0; a < d; ++a) y[static_cast<Eigen::Index>(p.param_axis(a))] = x[a];
        y[static_cast<Eigen::Index>(p.normal_axis)] = c_n;
        pts.push_back(y);
    }
    kp.samples = evaluate_extension(chi, pts, false).values;
    CompensatedSum s;
    for (std::size_t j = 0; j < g.size(); ++j) s.add(g.weight(j) * std::abs(kp.samples[j]));
    kp.l1_on_cube = s.value();
    kp.bound = std::pow(R, double(d)) * std::pow(1.0 + kp.center.norm(), -alpha_hat);
    kp.kappa = kp.l1_on_cube / kp.bound;
    return kp;
}

}  // namespace mrlab
