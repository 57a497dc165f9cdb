#include "mrlab/discrete_lw.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace mrlab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::size_t product(std::span<const std::size_t> e) {
    std::size_t s = 1;
    for (auto v : e) s *= v;
    return s;
}

bool contains(std::span<const std::size_t> s, std::size_t v) { return std::find(s.begin(), s.end(), v) != s.end(); }

// Ambient index of flat entry f of a table, written into z (other entries untouched).
void unflatten(const LatticeTable& t, std::size_t f, std::span<long> z) {
    for (std::size_t a = t.coords.size(); a-- > 0;) {
        z[t.coords[a]] = long(f % t.extents[a]);
        f /= t.extents[a];
    }
}

// Reduces over the listed ambient axes by an l^p norm (p = inf: sup of moduli).
LatticeTable reduce(const LatticeTable& t, std::span<const std::size_t> over, double p) {
    LatticeTable out;
    for (std::size_t a = 0; a < t.coords.size(); ++a)
        if (!contains(over, t.coords[a])) {
            out.coords.push_back(t.coords[a]);
            out.extents.push_back(t.extents[a]);
        }
    const std::size_t m = out.size();
    std::vector<CompensatedSum> acc(p == kInf ? 0 : m);
    out.values.assign(m, 0.0);
    const std::size_t maxc = t.coords.empty() ? 0 : *std::max_element(t.coords.begin(), t.coords.end());
    std::vector<long> z(maxc + 1, 0);
    for (std::size_t f = 0; f < t.values.size(); ++f) {
        unflatten(t, f, z);
        std::size_t o = 0;
        for (std::size_t a = 0; a < out.coords.size(); ++a) o = o * out.extents[a] + std::size_t(z[out.coords[a]]);
        const double v = std::abs(t.values[f]);
        if (p == kInf)
            out.values[o] = std::max(out.values[o], v);
        else
            acc[o].add(p == 2.0 ? v * v : std::pow(v, p));
    }
    if (p != kInf)
        for (std::size_t o = 0; o < m; ++o)
            out.values[o] = p == 2.0 ? std::sqrt(acc[o].value()) : std::pow(acc[o].value(), 1.0 / p);
    return out;
}

double safe_ratio(double lhs, double rhs) {
    if (lhs == 0.0) return 0.0;
    if (rhs == 0.0) return kInf;
    return lhs / rhs;
}

double lw_exponent(std::size_t k) { return k <= 1 ? kInf : 2.0 / double(k - 1); }

void validate(std::span<const LatticeFunction> g, const LWConfig& cfg) {
    const std::size_t n = cfg.n(), k = cfg.k();
    require(n >= 1, "lw: empty box");
    for (auto m : cfg.box) require(m >= 1, "lw: empty box");
    require(k >= 1 && k <= n, "lw: need 1 <= k <= n");
    for (std::size_t i = 0; i < k; ++i) {
        require(cfg.dropped[i] < n, "lw: dropped axis out of range");
        for (std::size_t j = 0; j < i; ++j) require(cfg.dropped[i] != cfg.dropped[j], "lw: repeated dropped axis");
    }
    require(g.size() == k, "lw: expected one function per projection");
    for (std::size_t i = 0; i < k; ++i) {
        require(g[i].table.coords == cfg.function_coords(i), "lw: function coordinates do not match pi_i");
        require(g[i].table.extents == cfg.function_extents(i), "lw: function extents do not match the box");
        require(g[i].table.values.size() == g[i].table.size(), "lw: table size mismatch");
        for (double v : g[i].table.values) require(v >= 0.0 && std::isfinite(v), "lw: values must be nonnegative");
    }
}

void validate_splits(std::span<const LatticeFunction> g, const LWConfig& cfg) {
    std::size_t total = 0;
    std::vector<bool> used(cfg.n(), false);
    for (std::size_t i = 0; i < g.size(); ++i)
        for (std::size_t a : g[i].double_prime) {
            require(a < cfg.n() && contains(g[i].table.coords, a), "lw: split axis is not a coordinate of g_i");
            require(!contains(cfg.dropped, a), "lw: split axis must not be a normal direction");
            require(!used[a], "lw: splits must be disjoint");
            used[a] = true;
            ++total;
        }
    require(total + cfg.k() <= cfg.n(), "lw: inconsistent splits (sum c_i > n - k)");
}

LatticeTable product_table(std::span<const LatticeFunction> g, const LWConfig& cfg) {
    LatticeTable P;
    for (std::size_t a = 0; a < cfg.n(); ++a) P.coords.push_back(a);
    P.extents = cfg.box;
    P.values.resize(P.size());
    std::vector<long> z(cfg.n());
    for (std::size_t f = 0; f < P.values.size(); ++f) {
        unflatten(P, f, z);
        double v = 1.0;
        for (const auto& gi : g) v *= gi.table.at(z);
        P.values[f] = v;
    }
    return P;
}

double full_norm(const LatticeTable& t, double p) { return lp_sequence_norm(t.values, p); }

}  // namespace

std::size_t LatticeTable::size() const { return product(extents); }

double LatticeTable::at(std::span<const long> z) const {
    std::size_t f = 0;
    for (std::size_t a = 0; a < coords.size(); ++a) {
        const long v = z[coords[a]];
        if (v < 0 || std::size_t(v) >= extents[a]) return 0.0;  // finite support
        f = f * extents[a] + std::size_t(v);
    }
    return values[f];
}

LatticeFunction LatticeFunction::from_complex(std::vector<std::size_t> coords, std::vector<std::size_t> extents,
                                              std::span<const cplx> values, std::vector<std::size_t> double_prime) {
    LatticeFunction g;
    g.table.coords = std::move(coords);
    g.table.extents = std::move(extents);
    require(values.size() == g.table.size(), "LatticeFunction: value count mismatch");
    for (const auto& v : values) g.table.values.push_back(std::abs(v));
    g.double_prime = std::move(double_prime);
    return g;
}

LWConfig LWConfig::standard(std::vector<std::size_t> box, std::size_t k) {
    LWConfig c;
    c.box = std::move(box);
    for (std::size_t i = 0; i < k; ++i) c.dropped.push_back(i);
    return c;
}

std::vector<std::size_t> LWConfig::function_coords(std::size_t i) const {
    std::vector<std::size_t> c;
    for (std::size_t a = 0; a < n(); ++a)
        if (a != dropped[i]) c.push_back(a);
    return c;
}

std::vector<std::size_t> LWConfig::function_extents(std::size_t i) const {
    std::vector<std::size_t> e;
    for (std::size_t a = 0; a < n(); ++a)
        if (a != dropped[i]) e.push_back(box[a]);
    return e;
}

double lp_sequence_norm(std::span<const double> a, double p) {
    require(p > 0.0, "lp_sequence_norm: p must be positive");
    if (p == kInf) {
        double m = 0.0;
        for (double v : a) m = std::max(m, std::abs(v));
        return m;
    }
    CompensatedSum s;
    if (p == 2.0) {
        for (double v : a) s.add(v * v);
        return std::sqrt(s.value());
    }
    for (double v : a) s.add(std::pow(std::abs(v), p));
    return std::pow(s.value(), 1.0 / p);
}

LWResult lw_ratio(std::span<const LatticeFunction> g, const LWConfig& cfg) {
    validate(g, cfg);
    LWResult r;
    r.lhs = full_norm(product_table(g, cfg), lw_exponent(cfg.k()));
    r.rhs = 1.0;
    for (const auto& gi : g) r.rhs *= full_norm(gi.table, 2.0);
    r.ratio = safe_ratio(r.lhs, r.rhs);
    return r;
}

double l2linf_norm(const LatticeFunction& g) {
    for (std::size_t a : g.double_prime)
        require(contains(g.table.coords, a), "l2linf_norm: split axis is not a coordinate");
    return full_norm(reduce(g.table, g.double_prime, kInf), 2.0);
}

LWResult lw_refined_ratio(std::span<const LatticeFunction> g, const LWConfig& cfg) {
    validate(g, cfg);
    validate_splits(g, cfg);
    LWResult r;
    r.lhs = full_norm(product_table(g, cfg), lw_exponent(cfg.k()));
    r.rhs = 1.0;
    for (const auto& gi : g) r.rhs *= l2linf_norm(gi);
    r.ratio = safe_ratio(r.lhs, r.rhs);
    return r;
}

HolderChain holder_chain_check(std::span<const LatticeFunction> g, const LWConfig& cfg, double tol) {
    validate(g, cfg);
    validate_splits(g, cfg);
    const std::size_t n = cfg.n(), k = cfg.k();
    const double p = lw_exponent(k), q = 2.0 / double(k);
    std::vector<std::size_t> zp = cfg.dropped, zpp, zppp;
    for (const auto& gi : g) zpp.insert(zpp.end(), gi.double_prime.begin(), gi.double_prime.end());
    for (std::size_t a = 0; a < n; ++a)
        if (!contains(zp, a) && !contains(zpp, a)) zppp.push_back(a);
    std::vector<std::size_t> zp_zpp = zp;
    zp_zpp.insert(zp_zpp.end(), zpp.begin(), zpp.end());

    const LatticeTable P = product_table(g, cfg);
    HolderChain chain;
    auto finish = [&](HolderStep s) {
        s.holds = s.max_ratio <= 1.0 + tol;
        chain.steps.push_back(s);
    };

    // 1. fixed (z', z'''): l^{2/(k-1)} over z'' against the l2 linf norms over z''.
    {
        const LatticeTable lhs = reduce(P, zpp, p);
        std::vector<LatticeTable> rhs;
        for (const auto& gi : g) {
            std::vector<std::size_t> rest;
            for (std::size_t a : zpp)
                if (!contains(gi.double_prime, a)) rest.push_back(a);
            rhs.push_back(reduce(reduce(gi.table, gi.double_prime, kInf), rest, 2.0));
        }
        HolderStep s{"slice", 0, 0, 0, false};
        std::vector<long> z(n, 0);
        for (std::size_t f = 0; f < lhs.values.size(); ++f) {
            unflatten(lhs, f, z);
            double r = 1.0;
            for (const auto& t : rhs) r *= t.at(z);
            const double ratio = safe_ratio(lhs.values[f], r);
            if (ratio >= s.max_ratio) {
                s.max_ratio = ratio;
                s.lhs = lhs.values[f];
                s.rhs = r;
            }
        }
        finish(s);
    }
    // 2. fixed z''': Loomis-Whitney in (z', z'').
    LatticeTable lhs2 = reduce(P, zp_zpp, p);
    {
        std::vector<LatticeTable> rhs;
        for (const auto& gi : g) {
            std::vector<std::size_t> rest;
            for (std::size_t a : gi.table.coords)
                if (!contains(zppp, a) && !contains(gi.double_prime, a)) rest.push_back(a);
            rhs.push_back(reduce(reduce(gi.table, gi.double_prime, kInf), rest, 2.0));
        }
        HolderStep s{"lw_slice", 0, 0, 0, false};
        std::vector<long> z(n, 0);
        for (std::size_t f = 0; f < lhs2.values.size(); ++f) {
            unflatten(lhs2, f, z);
            double r = 1.0;
            for (const auto& t : rhs) r *= t.at(z);
            const double ratio = safe_ratio(lhs2.values[f], r);
            if (ratio >= s.max_ratio) {
                s.max_ratio = ratio;
                s.lhs = lhs2.values[f];
                s.rhs = r;
            }
        }
        finish(s);
    }
    // 3. Holder in z''' with exponent 2/k.
    const double mixed = full_norm(lhs2, q);
    double rhs3 = 1.0;
    for (const auto& gi : g) rhs3 *= l2linf_norm(gi);
    finish({"holder", mixed, rhs3, safe_ratio(mixed, rhs3), false});
    // 4. embedding l^{2/(k-1)} <= l^{2/k}.
    const double full = full_norm(P, p);
    finish({"embedding", full, mixed, safe_ratio(full, mixed), false});
    // 5. the refined inequality itself.
    finish({"refined", full, rhs3, safe_ratio(full, rhs3), false});

    chain.all_hold = std::all_of(chain.steps.begin(), chain.steps.end(), [](const HolderStep& s) { return s.holds; });
    return chain;
}

std::vector<LatticeFunction> random_lw_instance(const LWConfig& cfg, std::span<const std::vector<std::size_t>> splits,
                                                std::uint64_t seed, double zero_fraction) {
    require(splits.empty() || splits.size() == cfg.k(), "random_lw_instance: one split per function");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<LatticeFunction> g(cfg.k());
    for (std::size_t i = 0; i < cfg.k(); ++i) {
        g[i].table.coords = cfg.function_coords(i);
        g[i].table.extents = cfg.function_extents(i);
        g[i].table.values.resize(g[i].table.size());
        for (auto& v : g[i].table.values) {
            const double keep = u(rng);
            const double val = u(rng);
            v = keep < zero_fraction ? 0.0 : val;
        }
        if (!splits.empty()) g[i].double_prime = splits[i];
    }
    return g;
}

ConstantSearch lw_constant_search(const LWConfig& cfg, std::span<const std::vector<std::size_t>> splits,
                                  std::size_t starts, std::size_t sweeps, std::uint64_t seed) {
    ConstantSearch out;
    std::mt19937_64 rng(seed);
    const double factors[] = {0.0, 0.5, 0.9, 1.1, 2.0};
    for (std::size_t s = 0; s < starts; ++s) {
        auto g = random_lw_instance(cfg, splits, rng(), 0.0);
        double cur = lw_refined_ratio(g, cfg).ratio;
        for (std::size_t sw = 0; sw < sweeps; ++sw) {
            bool improved = false;
            for (auto& gi : g)
                for (auto& v : gi.table.values) {
                    const double orig = v;
                    double best_v = orig;
                    for (double fac : factors) {
                        v = orig == 0.0 ? fac : orig * fac;
                        const double r = lw_refined_ratio(g, cfg).ratio;
                        if (r > cur * (1 + 1e-14)) {
                            cur = r;
                            best_v = v;
                            improved = true;
                        }
                    }
                    v = best_v;
                }
            if (!improved) break;
        }
        if (cur > out.best_ratio) {
            out.best_ratio = cur;
            out.best = g;
        }
    }
    return out;
}

}  // namespace mrlab
