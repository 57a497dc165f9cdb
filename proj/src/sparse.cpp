#include "mrlab/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace mrlab {

namespace {

double field_sup(const SampledField& F) {
    double m = 0.0;
    for (const auto& z : F.values) m = std::max(m, std::abs(z));
    return m;
}

std::vector<std::vector<long>> ball_offsets(const SampledField& grid, double radius) {
    const std::size_t n = grid.dim();
    std::vector<long> reach(n);
    for (std::size_t a = 0; a < n; ++a) reach[a] = long(std::floor(radius / grid.spacing(a) + 1e-12));
    std::vector<std::vector<long>> out;
    std::vector<long> o(n);
    for (std::size_t a = 0; a < n; ++a) o[a] = -reach[a];
    while (true) {
        double d2 = 0.0;
        for (std::size_t a = 0; a < n; ++a) {
            const double t = double(o[a]) * grid.spacing(a);
            d2 += t * t;
        }
        if (d2 <= radius * radius * (1 + 1e-12)) out.push_back(o);
        std::size_t a = n;
        bool done = true;
        while (a-- > 0) {
            if (++o[a] <= reach[a]) {
                done = false;
                break;
            }
            o[a] = -reach[a];
        }
        if (done) break;
    }
    return out;
}

std::vector<char> dilate(const SampledField& grid, const std::vector<char>& mask,
                         const std::vector<std::vector<long>>& offsets) {
    const std::size_t n = grid.dim(), r = grid.resolution;
    std::vector<char> out(mask.size(), 0);
    std::vector<long> idx(n);
    for (std::size_t f = 0; f < mask.size(); ++f) {
        if (!mask[f]) continue;
        std::size_t rest = f;
        for (std::size_t a = n; a-- > 0;) {
            idx[a] = long(rest % r);
            rest /= r;
        }
        for (const auto& o : offsets) {
            std::size_t g = 0;
            bool inside = true;
            for (std::size_t a = 0; a < n; ++a) {
                const long v = idx[a] + o[a];
                if (v < 0 || v >= long(r)) {
                    inside = false;
                    break;
                }
                g = g * r + std::size_t(v);
            }
            if (inside) out[g] = 1;
        }
    }
    return out;
}

std::vector<std::size_t> indices_of(const std::vector<char>& mask) {
    std::vector<std::size_t> out;
    for (std::size_t f = 0; f < mask.size(); ++f)
        if (mask[f]) out.push_back(f);
    return out;
}

double inf_distance(const Vec& a, const Vec& b) { return (a - b).cwiseAbs().maxCoeff(); }

bool lex_less(const Vec& a, const Vec& b) {
    for (long i = 0; i < a.size(); ++i)
        if (a[i] != b[i]) return a[i] < b[i];
    return false;
}

}  // namespace

StabilityReport stability_radius(std::span<const SampledDensity> f, const Box& cube, std::size_t resolution) {
    require(!f.empty(), "stability_radius: need at least one density");
    StabilityReport rep;
    rep.k = f.size();
    std::vector<double> xi;
    for (const auto& fi : f) {
        rep.C1 = std::max(rep.C1, field_sup(evaluate_field(fi, cube, resolution)));
        const auto grad = evaluate_field_gradient(fi, cube, resolution);
        double g = 0.0;
        for (std::size_t c = 0; c < grad[0].values.size(); ++c) {
            double s = 0.0;
            for (const auto& comp : grad) s += std::norm(comp.values[c]);
            g = std::max(g, std::sqrt(s));
        }
        rep.C2 = std::max(rep.C2, g);
        double l1 = 0.0, l1w = 0.0;
        xi.resize(fi.patch().param_dim());
        for (std::size_t j = 0; j < fi.values().size(); ++j) {
            fi.grid().node(j, xi);
            const double m = fi.weights()[j] * std::abs(fi.values()[j]);
            l1 += m;
            l1w += m * fi.patch().embed(xi).norm();
        }
        rep.C1_bound = std::max(rep.C1_bound, l1);
        rep.C2_bound = std::max(rep.C2_bound, l1w);
    }
    if (rep.C1 == 0.0 && rep.C2 == 0.0) throw NumericError("stability_radius: all fields vanish on the grid");
    const double denom = 2.0 * double(rep.k) * std::pow(rep.C1, double(rep.k - 1)) * rep.C2;
    rep.c = denom > 0.0 ? std::min(1.0, 1.0 / denom) : 1.0;
    return rep;
}

PerturbationCheck perturbation_check(std::span<const SampledDensity> f, const Box& cube, double c, double lambda,
                                     std::size_t pairs, std::uint64_t seed) {
    require(c > 0.0 && lambda > 0.0, "perturbation_check: c and lambda must be positive");
    const std::size_t n = cube.dim();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> g;
    std::vector<Vec> xs, x0s;
    for (std::size_t p = 0; p < pairs; ++p) {
        Vec x(static_cast<Eigen::Index>(n)), d(static_cast<Eigen::Index>(n));
        for (std::size_t a = 0; a < n; ++a) x[long(a)] = cube.lo[a] + u(rng) * cube.side(a);
        for (std::size_t a = 0; a < n; ++a) d[long(a)] = g(rng);
        d *= c * lambda * std::pow(u(rng), 1.0 / double(n)) / d.norm();
        xs.push_back(x);
        x0s.push_back(x + d);
    }
    std::vector<cplx> P(pairs, 1.0), P0(pairs, 1.0);
    for (const auto& fi : f) {
        const auto a = evaluate_extension(fi, xs, false).values;
        const auto b = evaluate_extension(fi, x0s, false).values;
        for (std::size_t p = 0; p < pairs; ++p) {
            P[p] *= a[p];
            P0[p] *= b[p];
        }
    }
    PerturbationCheck rep;
    rep.pairs = pairs;
    for (std::size_t p = 0; p < pairs; ++p) {
        const double r = std::abs(P[p] - P0[p]) / (0.5 * lambda);
        rep.worst_ratio = std::max(rep.worst_ratio, r);
        if (r > 1.0) ++rep.violations;
    }
    return rep;
}

SampledField product_field(std::span<const SampledField> fields) {
    require(!fields.empty(), "product_field: need at least one field");
    SampledField P = fields[0];
    for (std::size_t i = 1; i < fields.size(); ++i) {
        require(fields[i].values.size() == P.values.size() && fields[i].resolution == P.resolution,
                "product_field: fields must share one grid");
        for (std::size_t c = 0; c < P.values.size(); ++c) P.values[c] *= fields[i].values[c];
    }
    return P;
}

SuperlevelDecomposition superlevel_extract(const SampledField& product, double lambda, double c) {
    require(lambda > 0.0, "superlevel_extract: lambda must be positive");
    require(c > 0.0, "superlevel_extract: stability radius must be positive");
    SuperlevelDecomposition d;
    d.lambda = lambda;
    d.stability_radius = c;
    const std::size_t n = product.dim();
    std::vector<char> E(product.values.size(), 0);
    for (std::size_t f = 0; f < E.size(); ++f) E[f] = std::abs(product.values[f]) >= lambda;
    const auto F = dilate(product, E, ball_offsets(product, c * lambda));
    const auto G = dilate(product, E, ball_offsets(product, 1.0));
    std::vector<std::vector<long>> unit;
    {
        std::vector<long> o(n, -1);
        while (true) {
            unit.push_back(o);
            std::size_t a = n;
            bool done = true;
            while (a-- > 0) {
                if (++o[a] <= 1) {
                    done = false;
                    break;
                }
                o[a] = -1;
            }
            if (done) break;
        }
    }
    d.e_cells = indices_of(E);
    d.f_cells = indices_of(F);
    d.g_cells = indices_of(G);
    const double cell = product.cell_volume();
    d.volume_e = cell * double(d.e_cells.size());
    d.volume_f = cell * double(d.f_cells.size());
    d.volume_g = cell * double(d.g_cells.size());
    d.halo_f = cell * double(indices_of(dilate(product, F, unit)).size()) - d.volume_f;
    d.halo_g = cell * double(indices_of(dilate(product, G, unit)).size()) - d.volume_g;
    for (std::size_t f : d.f_cells)
        if (std::abs(product.values[f]) < 0.5 * lambda) d.f_in_half_level = false;
    d.kappa = d.volume_f > 0.0 ? d.volume_g * std::pow(lambda, double(n)) / d.volume_f : 0.0;
    return d;
}

std::vector<Vec> cell_centers(const SampledField& grid, std::span<const std::size_t> cells) {
    std::vector<Vec> out;
    std::vector<double> x(grid.dim());
    for (std::size_t f : cells) {
        grid.point(f, x);
        out.push_back(Eigen::Map<Vec>(x.data(), long(x.size())));
    }
    return out;
}

SparsityVerdict is_sparse(std::span<const Vec> centers, double R, std::size_t N, double C) {
    require(R > 0.0 && N >= 1 && C > 0.0, "is_sparse: invalid parameters");
    const double sep = std::pow(R, C) * std::pow(double(N), C);
    SparsityVerdict v;
    v.min_distance = std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < centers.size(); ++a)
        for (std::size_t b = a + 1; b < centers.size(); ++b) {
            const double d = (centers[a] - centers[b]).norm();
            v.min_distance = std::min(v.min_distance, d);
            if (d < sep && v.sparse) {
                v.sparse = false;
                v.violation = std::make_pair(a, b);
            }
        }
    return v;
}

SparseCollectionSet sparse_cover(std::span<const Vec> cube_centers, std::size_t N, double C) {
    require(N >= 1, "sparse_cover: N must be at least 1");
    require(C > 0.0, "sparse_cover: C must be positive");
    SparseCollectionSet set;
    set.N = N;
    set.C = C;
    const std::size_t M = cube_centers.size();
    set.measure = double(M);
    set.radius_cap = M == 0 ? 1.0 : std::exp(std::pow(C, double(N)) * std::log(double(M)));
    if (M == 0) return set;
    const long n = cube_centers[0].size();
    for (const auto& c : cube_centers) require(c.size() == n, "sparse_cover: inconsistent dimensions");

    std::vector<std::size_t> residue(M);
    std::iota(residue.begin(), residue.end(), 0);
    std::stable_sort(residue.begin(), residue.end(),
                     [&](std::size_t a, std::size_t b) { return lex_less(cube_centers[a], cube_centers[b]); });
    const std::size_t budget = std::size_t(std::ceil(std::pow(double(M), 1.0 / double(N)) - 1e-12));
    double R = 1.0;
    while (!residue.empty()) {
        // radius of one cube covering the whole residue
        Vec lo = cube_centers[residue[0]], hi = lo;
        for (std::size_t i : residue) {
            lo = lo.cwiseMin(cube_centers[i]);
            hi = hi.cwiseMax(cube_centers[i]);
        }
        const double R_all = 0.5 * (hi - lo).maxCoeff() + 0.5;
        if (R >= R_all) {
            SparseCollection top;
            top.radius = R_all;
            top.separation = std::pow(R_all * double(N), C);
            top.centers.push_back(0.5 * (lo + hi));
            set.collections.push_back(top);
            break;
        }
        const double sep = std::pow(R * double(N), C);
        for (std::size_t made = 0; made < budget && !residue.empty(); ++made) {
            SparseCollection col;
            col.radius = R;
            col.separation = sep;
            for (std::size_t i : residue) {
                bool ok = true;
                for (const auto& c : col.centers)
                    if ((c - cube_centers[i]).norm() < sep) {
                        ok = false;
                        break;
                    }
                if (ok) col.centers.push_back(cube_centers[i]);
            }
            std::vector<std::size_t> keep;
            for (std::size_t i : residue) {
                bool covered = false;
                for (const auto& c : col.centers)
                    if (inf_distance(c, cube_centers[i]) <= R - 0.5 + 1e-12) {
                        covered = true;
                        break;
                    }
                if (!covered) keep.push_back(i);
            }
            residue.swap(keep);
            set.collections.push_back(std::move(col));
        }
        R = std::max(2.0 * R, std::min(std::pow(R * double(N), C), R_all));
    }
    for (const auto& col : set.collections)
        if (std::log(col.radius) > std::max(0.0, std::pow(C, double(N)) * std::log(double(M))) + 1e-12)
            set.radii_within_cap = false;
    set.kappa_cover = double(set.collections.size()) / (double(N) * std::pow(double(M), 1.0 / double(N)));
    return set;
}

bool covers(const SparseCollectionSet& set, std::span<const Vec> cube_centers) {
    for (const auto& p : cube_centers) {
        bool ok = false;
        for (const auto& col : set.collections) {
            for (const auto& c : col.centers)
                if (inf_distance(c, p) <= col.radius - 0.5 + 1e-9) {
                    ok = true;
                    break;
                }
            if (ok) break;
        }
        if (!ok) return false;
    }
    return true;
}

TTStarReport tt_star_sparse_sum(std::span<const Vec> centers, double R, double alpha, double kappa_tt) {
    if (!(alpha > 0.0))
        throw InvalidArgument(
            "tt_star_sparse_sum: alpha <= 0 (no decay); flat pieces need the hyperplane (Loomis-Whitney) pathway");
    require(R >= 1.0, "tt_star_sparse_sum: R must be at least 1");
    require(!centers.empty(), "tt_star_sparse_sum: empty family");
    const std::size_t M = centers.size();
    const long n = centers[0].size();
    TTStarReport rep;
    rep.pair_bounds = Mat::Identity(long(M), long(M));
    for (std::size_t a = 0; a < M; ++a)
        for (std::size_t b = 0; b < M; ++b)
            if (a != b)
                rep.pair_bounds(long(a), long(b)) =
                    std::min(1.0, std::pow(R, double(n - 1)) * std::pow(bracket((centers[a] - centers[b]).norm()), -alpha));
    for (std::size_t a = 0; a < M; ++a) {
        CompensatedSum s;
        for (std::size_t b = 0; b < M; ++b) s.add(rep.pair_bounds(long(a), long(b)));
        rep.row_sums.push_back(s.value());
        rep.max_row_sum = std::max(rep.max_row_sum, s.value());
    }
    rep.exponent_threshold = std::min(2.0, double(n - 1)) / alpha;
    if (M == 1) {
        rep.sparsity_exponent = std::numeric_limits<double>::infinity();
    } else {
        const double dmin = is_sparse(centers, R, M, 1.0).min_distance;
        const double base = R * double(M);
        rep.sparsity_exponent = dmin <= 0.0 ? 0.0 : std::log(dmin) / std::log(base);
    }
    rep.sparse_regime = rep.sparsity_exponent > rep.exponent_threshold;
    rep.bounded = rep.max_row_sum <= kappa_tt;
    return rep;
}

double decay2_weight_sum(std::span<const Vec> centers, double R, std::size_t i, double w) {
    require(!centers.empty(), "decay2_weight_sum: empty family");
    require(R > 0.0 && w > 0.0, "decay2_weight_sum: R and w must be positive");
    const long n = centers[0].size();
    require(long(i) < n, "decay2_weight_sum: invalid hyperplane index");
    // projected centres in H_i
    std::vector<Vec> proj;
    for (const auto& c : centers) {
        Vec p(n - 1);
        for (long a = 0, b = 0; a < n; ++a)
            if (a != long(i)) p[b++] = c[a];
        proj.push_back(p);
    }
    Vec lo = proj[0], hi = proj[0];
    for (const auto& p : proj) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    // candidate lattice cubes q' of side R covering the projections' bounding box
    std::vector<long> first(std::size_t(n - 1)), last(std::size_t(n - 1));
    for (long a = 0; a < n - 1; ++a) {
        first[std::size_t(a)] = long(std::floor(lo[a] / R)) - 1;
        last[std::size_t(a)] = long(std::ceil(hi[a] / R)) + 1;
    }
    double best = 0.0;
    std::vector<long> j = first;
    while (true) {
        CompensatedSum s;
        for (const auto& p : proj) {
            double d2 = 0.0;
            for (long a = 0; a < n - 1; ++a) {
                const double gap = std::max(0.0, std::abs(p[a] - R * double(j[std::size_t(a)])) - R);
                d2 += gap * gap;
            }
            s.add(std::pow(bracket(std::sqrt(d2) / R), -w));
        }
        best = std::max(best, s.value());
        long a = n - 1;
        bool done = true;
        while (a-- > 0) {
            if (++j[std::size_t(a)] <= last[std::size_t(a)]) {
                done = false;
                break;
            }
            j[std::size_t(a)] = first[std::size_t(a)];
        }
        if (done) break;
    }
    return best;
}

}  // namespace mrlab
