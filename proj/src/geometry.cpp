#include "mrlab/geometry.hpp"

#include <algorithm>
#include <functional>
#include <limits>
#include <numeric>

namespace mrlab {

namespace {

constexpr int kPrimes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37};

double radical_inverse(std::size_t i, int base) {
    double f = 1.0, r = 0.0;
    while (i > 0) {
        f /= base;
        r += f * static_cast<double>(i % base);
        i /= base;
    }
    return r;
}

// Uniform tensor sample of a box with `per_axis` points per axis (endpoints included).
std::vector<std::vector<double>> uniform_grid(const Box& box, std::size_t per_axis) {
    const std::size_t d = box.dim();
    std::vector<std::vector<double>> pts;
    if (d == 0) return {{}};
    std::size_t total = 1;
    for (std::size_t a = 0; a < d; ++a) total *= per_axis;
    pts.reserve(total);
    std::vector<double> x(d);
    for (std::size_t idx = 0; idx < total; ++idx) {
        std::size_t r = idx;
        for (std::size_t a = d; a-- > 0;) {
            const std::size_t k = r % per_axis;
            r /= per_axis;
            x[a] = per_axis == 1 ? box.center(a)
                                 : box.lo[a] + box.side(a) * static_cast<double>(k) / static_cast<double>(per_axis - 1);
        }
        pts.push_back(x);
    }
    return pts;
}

std::size_t grid_density(std::size_t d) { return d <= 1 ? 257 : (d == 2 ? 33 : 11); }

// Deterministic quasi-uniform unit vectors in R^n.
std::vector<Vec> sphere_points(std::size_t n, std::size_t count) {
    std::vector<Vec> out;
    out.reserve(count);
    if (n == 2) {
        for (std::size_t i = 0; i < count; ++i) {
            const double t = kPi * (static_cast<double>(i) + 0.5) / static_cast<double>(count);
            Vec v(2);
            v << std::cos(t), std::sin(t);
            out.push_back(v);
        }
        return out;
    }
    if (n == 3) {
        const double golden = kPi * (3.0 - std::sqrt(5.0));
        for (std::size_t i = 0; i < count; ++i) {
            const double z = 1.0 - 2.0 * (static_cast<double>(i) + 0.5) / static_cast<double>(count);
            const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
            const double t = golden * static_cast<double>(i);
            Vec v(3);
            v << r * std::cos(t), r * std::sin(t), z;
            out.push_back(v);
        }
        return out;
    }
    // Higher dimensions: Halton points pushed through Box-Muller, then normalised.
    for (std::size_t i = 1; out.size() < count; ++i) {
        Vec v(n);
        for (std::size_t a = 0; a < n; a += 2) {
            const double u1 = std::max(radical_inverse(i, kPrimes[a % 12]), 1e-12);
            const double u2 = radical_inverse(i, kPrimes[(a + 1) % 12]);
            const double rad = std::sqrt(-2.0 * std::log(u1));
            v[a] = rad * std::cos(2 * kPi * u2);
            if (a + 1 < n) v[a + 1] = rad * std::sin(2 * kPi * u2);
        }
        const double nv = v.norm();
        if (nv > 0) out.push_back(v / nv);
    }
    return out;
}

Mat orthonormal_complement(const Mat& basis, std::size_t n) {
    if (basis.cols() == 0) return Mat::Identity(n, n);
    Eigen::HouseholderQR<Mat> qr(basis);
    Mat q = qr.householderQ() * Mat::Identity(n, n);
    return q.rightCols(n - basis.cols());
}

void check_orthonormal(const Mat& b, double tol, const char* what) {
    const Mat g = b.transpose() * b - Mat::Identity(b.cols(), b.cols());
    if (b.cols() > 0 && g.cwiseAbs().maxCoeff() > tol)
        throw InvalidArgument(std::string(what) + ": basis is not orthonormal to tolerance");
}

}  // namespace

// ---------------------------------------------------------------------------------------------
// HypersurfacePatch

HypersurfacePatch::HypersurfacePatch(std::size_t n_, Box domain_, Polynomial phi_, std::size_t normal_axis_,
                                     double delta_geom_, double smooth_bound_)
    : n(n_), domain(std::move(domain_)), phi(std::move(phi_)), normal_axis(normal_axis_),
      delta_geom(delta_geom_), smooth_bound(smooth_bound_) {
    require(n >= 2, "HypersurfacePatch: ambient dimension must be >= 2");
    require(domain.dim() == n - 1, "HypersurfacePatch: domain must have dimension n-1");
    require(phi.num_vars() == n - 1, "HypersurfacePatch: phi must have n-1 variables");
    require(normal_axis < n, "HypersurfacePatch: normal_axis out of range");
    require(delta_geom > 0.0, "HypersurfacePatch: delta_geom must be positive");
    require(smooth_bound > 0.0, "HypersurfacePatch: smooth_bound must be positive");
    require(domain.diameter() <= delta_geom * (1 + 1e-12), "HypersurfacePatch: diam(U) exceeds delta_geom");
    std::vector<double> zero(n - 1, 0.0);
    if (domain.contains(zero)) {
        require(std::abs(phi(zero)) <= 1e-12, "HypersurfacePatch: phi(0) must vanish");
        require(phi.gradient(zero).norm() <= 1e-12, "HypersurfacePatch: grad phi(0) must vanish");
    }
    require(sup_grad() <= delta_geom * (1 + 1e-12), "HypersurfacePatch: |grad phi| exceeds delta_geom on U");
}

HypersurfacePatch HypersurfacePatch::flat(std::size_t n, std::size_t axis, double hw, double dg) {
    return HypersurfacePatch(n, Box::centered(n - 1, hw), Polynomial::zero(n - 1), axis, dg);
}

HypersurfacePatch HypersurfacePatch::paraboloid(std::size_t n, std::size_t axis, double hw, double dg) {
    return HypersurfacePatch(n, Box::centered(n - 1, hw), Polynomial::half_square_norm(n - 1), axis, dg);
}

HypersurfacePatch HypersurfacePatch::monomial(std::size_t n, std::size_t axis, int l, double hw, double dg) {
    require(l >= 2, "monomial patch: exponent must be >= 2");
    Polynomial p(n - 1);
    for (std::size_t j = 0; j + 1 < n; ++j) p = p + Polynomial::monomial(n - 1, j, l);
    double fact = 1.0;
    for (int j = 2; j <= l; ++j) fact *= j;
    return HypersurfacePatch(n, Box::centered(n - 1, hw), p, axis, dg, fact);
}

HypersurfacePatch HypersurfacePatch::sphere_cap(std::size_t n, std::size_t axis, double rho, double hw, double dg) {
    require(hw * std::sqrt(double(n - 1)) < rho, "sphere_cap: domain must lie inside the ball of radius rho");
    return HypersurfacePatch(n, Box::centered(n - 1, hw), Polynomial::sphere_cap(n - 1, rho, 12), axis, dg);
}

Vec HypersurfacePatch::embed(std::span<const double> xi) const {
    Vec y(n);
    for (std::size_t j = 0; j + 1 < n; ++j) y[param_axis(j)] = xi[j];
    y[normal_axis] = phi(xi);
    return y;
}

Mat HypersurfacePatch::tangents(std::span<const double> xi) const {
    Mat t = Mat::Zero(n, n - 1);
    const Vec g = phi.gradient(xi);
    for (std::size_t j = 0; j + 1 < n; ++j) {
        t(param_axis(j), j) = 1.0;
        t(normal_axis, j) = g[j];
    }
    return t;
}

Vec HypersurfacePatch::unit_normal(std::span<const double> xi) const {
    const Vec g = phi.gradient(xi);
    Vec v(n);
    for (std::size_t j = 0; j + 1 < n; ++j) v[param_axis(j)] = -g[j];
    v[normal_axis] = 1.0;
    return v / v.norm();
}

double HypersurfacePatch::sup_phi() const {
    double m = 0.0;
    for (const auto& x : uniform_grid(domain, grid_density(n - 1))) m = std::max(m, std::abs(phi(x)));
    return m;
}

double HypersurfacePatch::sup_grad() const {
    double m = 0.0;
    for (const auto& x : uniform_grid(domain, grid_density(n - 1))) m = std::max(m, phi.gradient(x).norm());
    return m;
}

// ---------------------------------------------------------------------------------------------
// SubmanifoldSpec

SubmanifoldSpec::SubmanifoldSpec(PatchPtr parent_, std::size_t codim_, std::vector<Polynomial> maps, double mu_,
                                 std::vector<std::size_t> axes)
    : parent(std::move(parent_)), codim(codim_), graph_axes(std::move(axes)), graph_maps(std::move(maps)), mu(mu_) {
    require(parent != nullptr, "SubmanifoldSpec: missing parent patch");
    const std::size_t d = parent->param_dim();
    require(codim <= d, "SubmanifoldSpec: codimension exceeds parameter dimension");
    require(graph_maps.size() == codim, "SubmanifoldSpec: need one graph map per codimension");
    require(mu >= 0.0, "SubmanifoldSpec: mu must be non-negative");
    if (graph_axes.empty())
        for (std::size_t g = 0; g < codim; ++g) graph_axes.push_back(d - codim + g);
    require(graph_axes.size() == codim, "SubmanifoldSpec: graph_axes size mismatch");
    std::vector<bool> used(d, false);
    for (std::size_t a : graph_axes) {
        require(a < d && !used[a], "SubmanifoldSpec: invalid or repeated graph axis");
        used[a] = true;
    }
    for (std::size_t a = 0; a < d; ++a)
        if (!used[a]) free_axes_.push_back(a);
    std::vector<double> zero(free_dim(), 0.0);
    for (const auto& m : graph_maps) {
        require(m.num_vars() == free_dim(), "SubmanifoldSpec: graph map arity must equal the free dimension");
        require(std::abs(m(zero)) <= 1e-12, "SubmanifoldSpec: 0 must lie on M");
    }
}

SubmanifoldSpec SubmanifoldSpec::full(PatchPtr parent) { return SubmanifoldSpec(std::move(parent), 0, {}, 0.0); }

Box SubmanifoldSpec::free_domain() const {
    std::vector<double> lo, hi;
    for (std::size_t a : free_axes_) {
        lo.push_back(parent->domain.lo[a]);
        hi.push_back(parent->domain.hi[a]);
    }
    return Box(lo, hi);
}

std::vector<double> SubmanifoldSpec::lift(std::span<const double> u) const {
    std::vector<double> xi(parent->param_dim());
    for (std::size_t a = 0; a < free_axes_.size(); ++a) xi[free_axes_[a]] = u[a];
    for (std::size_t g = 0; g < codim; ++g) xi[graph_axes[g]] = graph_maps[g](u);
    return xi;
}

std::vector<double> SubmanifoldSpec::graph_residual(std::span<const double> xi) const {
    std::vector<double> u(free_dim());
    for (std::size_t a = 0; a < u.size(); ++a) u[a] = xi[free_axes_[a]];
    std::vector<double> r(codim);
    for (std::size_t g = 0; g < codim; ++g) r[g] = xi[graph_axes[g]] - graph_maps[g](u);
    return r;
}

Mat SubmanifoldSpec::lift_jacobian(std::span<const double> u) const {
    Mat j = Mat::Zero(parent->param_dim(), free_dim());
    for (std::size_t a = 0; a < free_axes_.size(); ++a) j(free_axes_[a], a) = 1.0;
    for (std::size_t g = 0; g < codim; ++g) {
        const Vec grad = graph_maps[g].gradient(u);
        for (std::size_t a = 0; a < free_axes_.size(); ++a) j(graph_axes[g], a) = grad[a];
    }
    return j;
}

// ---------------------------------------------------------------------------------------------

double wedge_norm(std::span<const Mat> spaces) {
    if (spaces.empty()) return 1.0;
    const auto n = spaces.front().rows();
    Eigen::Index total = 0;
    for (const auto& s : spaces) {
        require(s.rows() == n, "wedge_norm: dimension mismatch between spaces");
        check_orthonormal(s, 1e-12, "wedge_norm");
        total += s.cols();
    }
    require(total <= n, "wedge_norm: more vectors than the ambient dimension");
    if (total == 0) return 1.0;
    Mat m(n, total);
    Eigen::Index c = 0;
    for (const auto& s : spaces) {
        m.middleCols(c, s.cols()) = s;
        c += s.cols();
    }
    Eigen::HouseholderQR<Mat> qr(m);
    const Mat& r = qr.matrixQR();
    double v = 1.0;
    for (Eigen::Index i = 0; i < total; ++i) v *= std::abs(r(i, i));
    return std::clamp(v, 0.0, 1.0);
}

Mat normal_space(const SubmanifoldSpec& spec, std::span<const double> xi, double tol) {
    const auto& p = *spec.parent;
    require(xi.size() == p.param_dim(), "normal_space: point has wrong dimension");
    if (!p.domain.contains(xi, tol)) throw InvalidArgument("normal_space: point outside the patch domain");
    for (double r : spec.graph_residual(xi))
        require(std::abs(r) <= tol, "normal_space: point does not lie on M");
    std::vector<double> u(spec.free_dim());
    for (std::size_t a = 0; a < u.size(); ++a) u[a] = xi[spec.free_axes()[a]];
    const Mat t = p.tangents(xi) * spec.lift_jacobian(u);
    // Canonical basis: the hypersurface normal first, then greedily the coordinate axes with
    // the largest component orthogonal to the tangent space and to the vectors already chosen.
    Mat nrm(p.n, spec.codim + 1);
    nrm.col(0) = p.unit_normal(xi);
    Mat q = t.cols() > 0 ? Mat(Eigen::HouseholderQR<Mat>(t).householderQ() * Mat::Identity(p.n, t.cols()))
                         : Mat(p.n, 0);
    auto residual = [&](Vec v, Eigen::Index chosen) {
        for (int pass = 0; pass < 2; ++pass) {
            if (q.cols() > 0) v -= q * (q.transpose() * v);
            for (Eigen::Index i = 0; i < chosen; ++i) v -= nrm.col(i) * nrm.col(i).dot(v);
        }
        return v;
    };
    for (Eigen::Index c = 1; c <= static_cast<Eigen::Index>(spec.codim); ++c) {
        Vec best;
        double bn = -1.0;
        for (std::size_t a = 0; a < p.n; ++a) {
            Vec r = residual(Vec::Unit(p.n, a), c);
            if (r.norm() > bn + 1e-12) {
                bn = r.norm();
                best = r;
            }
        }
        if (bn < 1e-8) throw NumericError("normal_space: degenerate tangent space");
        nrm.col(c) = best / bn;
    }
    return nrm;
}

std::vector<std::vector<double>> nested_samples(const Box& box, std::size_t count) {
    const std::size_t d = box.dim();
    if (d == 0) return {{}};
    std::vector<std::vector<double>> pts;
    std::vector<double> c(d);
    for (std::size_t a = 0; a < d; ++a) c[a] = box.center(a);
    pts.push_back(c);
    for (std::size_t i = 1; pts.size() < count; ++i) {
        std::vector<double> x(d);
        for (std::size_t a = 0; a < d; ++a) x[a] = box.lo[a] + box.side(a) * radical_inverse(i, kPrimes[a % 12]);
        pts.push_back(x);
    }
    return pts;
}

namespace {

double min_wedge_over_tuples(const std::vector<std::vector<Mat>>& frames) {
    const std::size_t k = frames.size();
    std::vector<std::size_t> idx(k, 0);
    std::vector<Mat> pick(k);
    double best = 1.0;
    while (true) {
        for (std::size_t i = 0; i < k; ++i) pick[i] = frames[i][idx[i]];
        best = std::min(best, wedge_norm(pick));
        std::size_t i = k;
        while (i-- > 0) {
            if (++idx[i] < frames[i].size()) break;
            idx[i] = 0;
        }
        if (i == static_cast<std::size_t>(-1)) break;
    }
    return best;
}

}  // namespace

double check_transversality(std::span<const HypersurfacePatch> family, std::size_t samples) {
    if (family.empty()) return 1.0;
    const std::size_t n = family.front().n;
    std::size_t total = 0;
    for (const auto& p : family) {
        if (p.n != n) return 0.0;
        ++total;
    }
    if (total > n) return 0.0;
    std::vector<std::vector<Mat>> frames;
    for (const auto& p : family) {
        std::vector<Mat> f;
        for (const auto& x : nested_samples(p.domain, std::max<std::size_t>(samples, 1))) {
            Mat m(n, 1);
            m.col(0) = p.unit_normal(x);
            f.push_back(m);
        }
        frames.push_back(std::move(f));
    }
    return min_wedge_over_tuples(frames);
}

double check_transversality(std::span<const SubmanifoldSpec> family, std::size_t samples) {
    if (family.empty()) return 1.0;
    const std::size_t n = family.front().parent->n;
    std::size_t total = 0;
    for (const auto& s : family) {
        if (s.parent->n != n) return 0.0;
        total += s.codim + 1;
    }
    if (total > n) return 0.0;
    std::vector<std::vector<Mat>> frames;
    for (const auto& s : family) {
        std::vector<Mat> f;
        for (const auto& u : nested_samples(s.free_domain(), std::max<std::size_t>(samples, 1))) {
            const auto xi = s.lift(u);
            if (!s.parent->domain.contains(xi, 1e-12)) continue;
            f.push_back(normal_space(s, xi));
        }
        if (f.empty()) {
            const std::vector<double> zero(s.free_dim(), 0.0);
            f.push_back(normal_space(s, s.lift(zero)));
        }
        frames.push_back(std::move(f));
    }
    return min_wedge_over_tuples(frames);
}

TransversalFamily::TransversalFamily(std::vector<SubmanifoldSpec> subs, std::size_t samples) : subs_(std::move(subs)) {
    require(!subs_.empty(), "TransversalFamily: need at least one surface");
    const std::size_t n = subs_.front().parent->n;
    require(subs_.size() <= n, "TransversalFamily: k must not exceed n");
    std::size_t csum = 0;
    for (const auto& s : subs_) {
        require(s.parent->n == n, "TransversalFamily: surfaces live in different ambient dimensions");
        csum += s.codim;
    }
    require(csum <= n - subs_.size(), "TransversalFamily: sum of codimensions exceeds n - k");
    nu_ = check_transversality(std::span<const SubmanifoldSpec>(subs_), samples);
    require(nu_ > 0.0, "TransversalFamily: normal spaces are not transversal (nu = 0)");
}

std::vector<Mat> TransversalFamily::base_normals() const {
    std::vector<Mat> out;
    for (const auto& s : subs_) {
        const std::vector<double> zero(s.free_dim(), 0.0);
        out.push_back(normal_space(s, s.lift(zero)));
    }
    return out;
}

Orthogonalization orthogonalize_normals(std::span<const Mat> frames, double threshold) {
    require(!frames.empty(), "orthogonalize_normals: no normal frames");
    const auto n = frames.front().rows();
    Orthogonalization out;
    out.nu = wedge_norm(frames);
    if (out.nu <= 1e-15) throw NumericError("orthogonalize_normals: normal frames are rank deficient (nu = 0)");
    Eigen::Index m = 0;
    for (const auto& f : frames) m += f.cols();
    Mat N(n, m);
    Eigen::Index c = 0;
    for (const auto& f : frames) {
        std::vector<std::size_t> t;
        for (Eigen::Index j = 0; j < f.cols(); ++j) t.push_back(static_cast<std::size_t>(c + j));
        out.targets.push_back(t);
        N.middleCols(c, f.cols()) = f;
        c += f.cols();
    }
    // Complete with the remaining coordinate axes projected off span(N) (modified Gram-Schmidt),
    // so that coordinate-aligned inputs give A = I.
    const Mat q = Eigen::HouseholderQR<Mat>(N).householderQ() * Mat::Identity(n, m);
    Mat W(n, n - m);
    bool ok = true;
    for (Eigen::Index j = 0; j < n - m; ++j) {
        Vec v = Vec::Unit(n, m + j);
        for (int pass = 0; pass < 2; ++pass) {
            v -= q * (q.transpose() * v);
            for (Eigen::Index i = 0; i < j; ++i) v -= W.col(i) * W.col(i).dot(v);
        }
        const double nv = v.norm();
        if (nv < 1e-8) {
            ok = false;
            break;
        }
        W.col(j) = v / nv;
    }
    if (!ok) W = orthonormal_complement(N, n);
    Mat At(n, n);
    At << N, W;
    out.A = At.transpose();
    out.A_inv = out.A.inverse();
    Eigen::JacobiSVD<Mat> svd(out.A);
    const Vec s = svd.singularValues();
    out.norm_A = s[0];
    out.norm_A_inv = 1.0 / s[s.size() - 1];
    out.condition = out.norm_A * out.norm_A_inv;
    out.kappa = (out.norm_A + out.norm_A_inv) * out.nu;
    out.ill_conditioned = out.condition > threshold;
    for (const auto& f : frames) out.transformed_normals.push_back(out.A_inv.transpose() * f);
    return out;
}

Orthogonalization orthogonalize_normals(const TransversalFamily& family, double threshold) {
    const auto frames = family.base_normals();
    return orthogonalize_normals(std::span<const Mat>(frames), threshold);
}

TypeResult finite_type_order(const HypersurfacePatch& patch, std::span<const double> x0, int max_order) {
    require(max_order >= 1, "finite_type_order: max_order must be >= 1");
    require(x0.size() == patch.param_dim() && patch.domain.contains(x0, 1e-12),
            "finite_type_order: point outside the patch domain");
    const std::size_t d = patch.param_dim();
    const double tau = 1e-8 * patch.smooth_bound;
    // D[l] = max over |alpha| = l of |d^alpha phi(x0)|.
    std::vector<double> D(static_cast<std::size_t>(max_order) + 1, 0.0);
    std::vector<int> alpha(d, 0);
    for (int l = 2; l <= max_order; ++l) {
        // enumerate multi-indices of total order l
        std::function<void(std::size_t, int)> rec = [&](std::size_t a, int left) {
            if (a + 1 == d) {
                alpha[a] = left;
                D[l] = std::max(D[l], std::abs(patch.phi.derivative(alpha, x0)));
                return;
            }
            for (int t = 0; t <= left; ++t) {
                alpha[a] = t;
                rec(a + 1, left - t);
            }
        };
        rec(0, l);
    }
    const Vec g = patch.phi.gradient(x0);
    auto dirs = sphere_points(patch.n, 64 * patch.n);
    for (std::size_t a = 0; a < patch.n; ++a) dirs.push_back(Vec::Unit(patch.n, a));
    dirs.push_back(patch.unit_normal(x0));

    TypeResult res;
    res.max_order = max_order;
    int worst = 1;
    for (const auto& eta : dirs) {
        const double en = eta[patch.normal_axis];
        double first = 0.0;
        for (std::size_t j = 0; j < d; ++j)
            first = std::max(first, std::abs(eta[patch.param_axis(j)] + en * g[j]));
        int ord = 0;
        if (first > tau) {
            ord = 1;
        } else {
            for (int l = 2; l <= max_order; ++l) {
                if (std::abs(en) * D[l] > tau) {
                    ord = l;
                    break;
                }
            }
        }
        if (ord == 0) {
            res.finite = false;
            return res;
        }
        worst = std::max(worst, ord);
    }
    res.finite = true;
    res.order = worst;
    return res;
}

double distance_to_manifold(const SubmanifoldSpec& spec, std::span<const double> xi) {
    const auto& dom = spec.parent->domain;
    const std::size_t d = spec.parent->param_dim();
    require(xi.size() == d, "distance_to_manifold: point has wrong dimension");
    if (spec.codim == 0) {
        double s = 0.0;
        for (std::size_t a = 0; a < d; ++a) {
            const double e = std::max({dom.lo[a] - xi[a], 0.0, xi[a] - dom.hi[a]});
            s += e * e;
        }
        return std::sqrt(s);
    }
    const Box fd = spec.free_domain();
    const std::size_t m = spec.free_dim();
    auto sqdist = [&](const std::vector<double>& u) {
        const auto p = spec.lift(u);
        double s = 0.0;
        for (std::size_t a = 0; a < d; ++a) s += (p[a] - xi[a]) * (p[a] - xi[a]);
        return s;
    };
    if (m == 0) return std::sqrt(sqdist({}));
    auto clamp = [&](std::vector<double>& u) {
        for (std::size_t a = 0; a < m; ++a) u[a] = std::clamp(u[a], fd.lo[a], fd.hi[a]);
    };
    std::vector<std::vector<double>> starts = uniform_grid(fd, m == 1 ? 9 : (m == 2 ? 5 : 3));
    {
        std::vector<double> u(m);
        for (std::size_t a = 0; a < m; ++a) u[a] = xi[spec.free_axes()[a]];
        clamp(u);
        starts.push_back(u);
    }
    double best = std::numeric_limits<double>::infinity();
    for (auto u : starts) {
        double f = sqdist(u);
        double lambda = 1e-6;
        for (int it = 0; it < 50; ++it) {
            const auto p = spec.lift(u);
            Vec r(d);
            for (std::size_t a = 0; a < d; ++a) r[a] = p[a] - xi[a];
            const Mat J = spec.lift_jacobian(u);
            const Mat H = J.transpose() * J + lambda * Mat::Identity(m, m);
            const Vec step = -H.ldlt().solve(J.transpose() * r);
            // backtracking on the projected step
            double t = 1.0;
            bool accepted = false;
            std::vector<double> trial(m);
            for (int ls = 0; ls < 30; ++ls) {
                for (std::size_t a = 0; a < m; ++a) trial[a] = u[a] + t * step[a];
                clamp(trial);
                const double ft = sqdist(trial);
                if (ft <= f) {
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if (!accepted) break;
            double moved = 0.0;
            for (std::size_t a = 0; a < m; ++a) moved = std::max(moved, std::abs(trial[a] - u[a]));
            u = trial;
            f = sqdist(u);
            if (moved < 1e-10) break;
        }
        best = std::min(best, f);
    }
    return std::sqrt(best);
}

NeighborhoodMembership neighborhood_contains(const SubmanifoldSpec& spec, double eps, std::span<const double> xi) {
    require(eps > 0.0, "neighborhood_contains: eps must be positive");
    NeighborhoodMembership out;
    out.metric = distance_to_manifold(spec, xi) < eps;
    if (spec.codim == 0) {
        out.graph = out.metric;
        return out;
    }
    const Box fd = spec.free_domain();
    double s = 0.0;
    for (std::size_t a = 0; a < spec.free_dim(); ++a) {
        const double v = xi[spec.free_axes()[a]];
        const double e = std::max({fd.lo[a] - v, 0.0, v - fd.hi[a]});
        s += e * e;
    }
    bool inside = std::sqrt(s) < eps;
    for (double t : spec.graph_residual(xi)) inside = inside && std::abs(t) < eps;
    out.graph = inside;
    return out;
}

double graph_dilation_constant(const SubmanifoldSpec& spec) {
    if (spec.codim == 0) return 1.0;
    Box fd = spec.free_domain();
    for (std::size_t a = 0; a < fd.dim(); ++a) {
        const double c = fd.center(a), h = 0.75 * fd.side(a);
        fd.lo[a] = c - h;
        fd.hi[a] = c + h;
    }
    double lip = 0.0;
    for (const auto& u : uniform_grid(fd, grid_density(fd.dim()))) {
        Mat dphi(spec.codim, spec.free_dim());
        for (std::size_t g = 0; g < spec.codim; ++g) dphi.row(g) = spec.graph_maps[g].gradient(u).transpose();
        if (dphi.size() > 0) lip = std::max(lip, Eigen::JacobiSVD<Mat>(dphi).singularValues()[0]);
    }
    return 1.0 + lip + std::sqrt(static_cast<double>(spec.codim));
}

}  // namespace mrlab
