#include "mrlab/lattice.hpp"

#include "mrlab/quadrature.hpp"

#include <algorithm>
#include <cmath>

namespace mrlab {

namespace {

long tie_low(double y) { return static_cast<long>(std::ceil(y - 0.5)); }
long tie_high(double y) { return static_cast<long>(std::floor(y + 0.5)); }

// int_{-1}^{1} (1 - t^2)^p dt
double beta_moment(int p) {
    return std::exp(0.5 * std::log(kPi) + std::lgamma(p + 1.0) - std::lgamma(p + 1.5));
}

// Visits every offset vector in {-w..w}^d in row-major order.
template <class F>
void for_each_offset(std::size_t d, long w, F&& fn) {
    std::vector<long> o(d, -w);
    if (d == 0) {
        fn(o);
        return;
    }
    while (true) {
        fn(o);
        std::size_t a = d;
        while (a-- > 0) {
            if (++o[a] <= w) break;
            o[a] = -w;
            if (a == 0) return;
        }
    }
}

}  // namespace

CubeLattice::CubeLattice(std::size_t n, double r) : CubeLattice(r, Mat::Identity(long(n), long(n))) {}

CubeLattice::CubeLattice(double r, Mat frame) : n_(std::size_t(frame.cols())), r_(r), frame_(std::move(frame)) {
    require(r > 0.0, "CubeLattice: scale must be positive");
    require(n_ >= 1 && frame_.rows() == frame_.cols(), "CubeLattice: frame must be square");
    require((frame_.transpose() * frame_ - Mat::Identity(long(n_), long(n_))).norm() < 1e-10,
            "CubeLattice: frame must be orthonormal");
}

Vec CubeLattice::center(const LatticeIndex& j) const {
    require(j.size() == n_, "CubeLattice: index dimension mismatch");
    Vec c(static_cast<Eigen::Index>(n_));
    for (std::size_t m = 0; m < n_; ++m) c[long(m)] = r_ * double(j[m]);
    return c;
}

Box CubeLattice::cube(const LatticeIndex& j) const {
    require(j.size() == n_, "CubeLattice: index dimension mismatch");
    std::vector<double> lo(n_), hi(n_);
    for (std::size_t m = 0; m < n_; ++m) {
        lo[m] = r_ * (double(j[m]) - 0.5);
        hi[m] = r_ * (double(j[m]) + 0.5);
    }
    return Box(lo, hi);
}

LatticeIndex CubeLattice::locate(std::span<const double> x) const {
    require(x.size() == n_, "CubeLattice: point dimension mismatch");
    LatticeIndex j(n_);
    for (std::size_t m = 0; m < n_; ++m) j[m] = tie_low(x[m] / r_);
    return j;
}

std::vector<LatticeIndex> CubeLattice::cubes_covering(const Box& region) const {
    require(region.dim() == n_, "cubes_covering: region dimension mismatch");
    std::vector<long> first(n_), last(n_);
    for (std::size_t m = 0; m < n_; ++m) {
        require(region.lo[m] <= region.hi[m], "cubes_covering: empty region");
        // first cube: the one containing lo whose upper face lies strictly beyond lo, unless the
        // region degenerates to that face; last cube: symmetric.
        long a = tie_high(region.lo[m] / r_);
        long b = tie_low(region.hi[m] / r_);
        if (a > b) a = b;
        first[m] = a;
        last[m] = b;
    }
    std::vector<LatticeIndex> out;
    LatticeIndex j = first;
    while (true) {
        out.push_back(j);
        std::size_t a = n_;
        bool done = true;
        while (a-- > 0) {
            if (++j[a] <= last[a]) {
                done = false;
                break;
            }
            j[a] = first[a];
        }
        if (done) break;
    }
    return out;
}

double CubeLattice::distance(const LatticeIndex& a, const LatticeIndex& b) const {
    require(a.size() == n_ && b.size() == n_, "CubeLattice: index dimension mismatch");
    return cube_distance(a, b, r_);
}

CubeLattice CubeLattice::hyperplane(std::size_t i) const {
    require(i < n_ && n_ >= 2, "hyperplane: invalid direction index");
    // coordinates on H_i are taken with respect to the remaining frame vectors
    return CubeLattice(r_, Mat::Identity(long(n_ - 1), long(n_ - 1)));
}

Vec CubeLattice::project_point(const Vec& ambient, std::size_t i) const {
    require(i < n_, "project_point: invalid direction index");
    require(std::size_t(ambient.size()) == n_, "project_point: dimension mismatch");
    const Vec ni = frame_.col(long(i));
    return ambient - ni * ni.dot(ambient);
}

LatticeIndex project_cube(const LatticeIndex& j, std::size_t i) {
    require(i < j.size(), "project_cube: invalid direction index");
    LatticeIndex p;
    for (std::size_t m = 0; m < j.size(); ++m)
        if (m != i) p.push_back(j[m]);
    return p;
}

std::pair<LatticeIndex, LatticeIndex> project_lattice_split(const LatticeIndex& j, std::size_t i,
                                                            std::span<const std::size_t> primed) {
    const LatticeIndex p = project_cube(j, i);
    std::vector<bool> in_primed(p.size(), false);
    for (std::size_t a : primed) {
        require(a < p.size(), "project_lattice_split: primed coordinate out of range");
        require(!in_primed[a], "project_lattice_split: repeated primed coordinate");
        in_primed[a] = true;
    }
    LatticeIndex first, second;
    for (std::size_t a : primed) first.push_back(p[a]);
    for (std::size_t a = 0; a < p.size(); ++a)
        if (!in_primed[a]) second.push_back(p[a]);
    return {first, second};
}

double cube_distance(const LatticeIndex& a, const LatticeIndex& b, double r) {
    require(a.size() == b.size(), "cube_distance: dimension mismatch");
    require(r > 0.0, "cube_distance: scale must be positive");
    double s = 0.0;
    for (std::size_t m = 0; m < a.size(); ++m) {
        const double gap = r * double(std::max(0L, std::abs(a[m] - b[m]) - 1));
        s += gap * gap;
    }
    return std::sqrt(s);
}

BumpProfile::BumpProfile(std::size_t dim, int order) : order_(order), nu_(order + 1) {
    require(dim >= 1, "BumpProfile: dimension must be positive");
    require(order >= 0 && order <= 40, "BumpProfile: order must lie in [0, 40]");
    a_ = kPi / std::sqrt(double(dim));
    // psi(y) = (a / 2 pi) * Gamma(nu+1) 2^(nu+1) j_nu(z) / z^nu with z = a |y|
    psi_scale_ = a_ / (2 * kPi) * std::exp(std::lgamma(nu_ + 1.0) + (nu_ + 1) * std::log(2.0));
    // int psi^2 = (1 / 2 pi) int |psi^|^2 = (a / 2 pi) int (1 - t^2)^(2 nu) dt
    inv_norm_ = 1.0 / (a_ / (2 * kPi) * beta_moment(2 * nu_));
}

double BumpProfile::psi(double y) const {
    const double z = a_ * std::abs(y);
    double g;
    if (z < 1.0) {
        // j_nu(z) / z^nu = sum_k (-z^2/2)^k / (k! (2 nu + 2k + 1)!!)
        double df = 1.0;
        for (int m = 1; m <= 2 * nu_ + 1; m += 2) df *= m;
        double term = 1.0 / df, sum = term;
        for (int k = 1; k < 30; ++k) {
            term *= -0.5 * z * z / (double(k) * double(2 * nu_ + 2 * k + 1));
            sum += term;
            if (std::abs(term) < 1e-18 * std::abs(sum)) break;
        }
        g = sum;
    } else {
        g = std::sph_bessel(unsigned(nu_), z) / std::pow(z, nu_);
    }
    return psi_scale_ * g;
}

double BumpProfile::operator()(double y) const {
    const double p = psi(y);
    return p * p * inv_norm_;
}

namespace {

struct CosineTable {
    std::vector<double> y, w;
};

CosineTable cosine_table(const BumpProfile& prof, double L) {
    CosineTable t;
    const auto rule = gauss_legendre(24, 0.0, 1.0);
    const long panels = long(std::ceil(L));
    for (long p = 0; p < panels; ++p)
        for (std::size_t k = 0; k < rule.nodes.size(); ++k) {
            const double y = double(p) + rule.nodes[k];
            t.y.push_back(y);
            t.w.push_back(2.0 * rule.weights[k] * prof(y));  // even integrand on [-L, L]
        }
    return t;
}

double cosine_transform(const CosineTable& t, double xi) {
    CompensatedSum s;
    for (std::size_t i = 0; i < t.y.size(); ++i) s.add(t.w[i] * std::cos(xi * t.y[i]));
    return s.value();
}

}  // namespace

double BumpProfile::transform(double xi, double L) const {
    require(L > 0.0, "BumpProfile::transform: L must be positive");
    return cosine_transform(cosine_table(*this, L), xi);
}

BumpFamily::BumpFamily(CubeLattice lattice, int order)
    : lattice_(std::move(lattice)), profile_(lattice_.dim(), order) {}

double BumpFamily::base(std::span<const double> y) const {
    require(y.size() == lattice_.dim(), "BumpFamily: point dimension mismatch");
    double v = 1.0;
    for (double c : y) v *= profile_(c);
    return v;
}

double BumpFamily::evaluate(const LatticeIndex& q, std::span<const double> x) const {
    require(q.size() == lattice_.dim() && x.size() == lattice_.dim(), "BumpFamily: dimension mismatch");
    const double r = lattice_.scale();
    double v = 1.0;
    for (std::size_t m = 0; m < x.size(); ++m) v *= profile_((x[m] - r * double(q[m])) / r);
    return v;
}

double bump_spectrum_check(const BumpFamily& family, std::size_t samples) {
    require(samples >= 2, "bump_spectrum_check: need at least two samples");
    const auto& prof = family.profile();
    const auto table = cosine_table(prof, 400.0);
    const double peak = cosine_transform(table, 0.0);
    const double b = prof.band();
    double leak = 0.0;
    for (std::size_t k = 0; k < samples; ++k) {
        const double xi = b * (1.0 + 3.0 * double(k) / double(samples - 1));
        leak = std::max(leak, std::abs(cosine_transform(table, xi)));
    }
    return leak / peak;
}

PartitionReport partition_check(const BumpFamily& family, const Box& region, std::size_t grid, double T) {
    const auto& lat = family.lattice();
    const std::size_t n = lat.dim();
    require(region.dim() == n, "partition_check: region dimension mismatch");
    require(grid >= 1, "partition_check: grid must be positive");
    require(T >= 0.0, "partition_check: truncation must be nonnegative");
    const long w = long(std::floor(T));
    PartitionReport rep;
    rep.truncation = T;
    rep.deviation.cube = region;
    rep.deviation.resolution = grid;
    // The truncated lattice sum factorises over axes.
    std::vector<std::vector<double>> axis_sum(n, std::vector<double>(grid));
    for (std::size_t m = 0; m < n; ++m)
        for (std::size_t i = 0; i < grid; ++i) {
            const double y = rep.deviation.coordinate(m, i) / lat.scale();
            const long j0 = tie_low(y);
            CompensatedSum s;
            for (long j = j0 - w; j <= j0 + w; ++j) s.add(family.profile()(y - double(j)));
            axis_sum[m][i] = s.value();
        }
    std::size_t total = 1;
    for (std::size_t m = 0; m < n; ++m) total *= grid;
    rep.deviation.values.resize(total);
    for (std::size_t f = 0; f < total; ++f) {
        double prod = 1.0;
        std::size_t rest = f;
        for (std::size_t m = n; m-- > 0;) {
            prod *= axis_sum[m][rest % grid];
            rest /= grid;
        }
        const double dev = std::abs(prod - 1.0);
        rep.deviation.values[f] = dev;
        rep.max_deviation = std::max(rep.max_deviation, dev);
    }
    return rep;
}

namespace {

double weight_sum(const BumpFamily& family, std::span<const double> y, int N, long w) {
    const std::size_t n = y.size();
    const auto& prof = family.profile();
    std::vector<long> j0(n);
    std::vector<std::vector<double>> chi2(n, std::vector<double>(std::size_t(2 * w + 1)));
    std::vector<std::vector<double>> d2(n, std::vector<double>(std::size_t(2 * w + 1)));
    for (std::size_t m = 0; m < n; ++m) {
        j0[m] = tie_low(y[m]);
        for (long o = -w; o <= w; ++o) {
            const double t = y[m] - double(j0[m] + o);
            const double c = prof(t);
            chi2[m][std::size_t(o + w)] = c * c;
            d2[m][std::size_t(o + w)] = t * t;
        }
    }
    CompensatedSum s;
    for_each_offset(n, w, [&](const std::vector<long>& o) {
        double c = 1.0, r2 = 0.0;
        for (std::size_t m = 0; m < n; ++m) {
            c *= chi2[m][std::size_t(o[m] + w)];
            r2 += d2[m][std::size_t(o[m] + w)];
        }
        s.add(std::pow(1.0 + r2, N) * c);
    });
    return s.value();
}

}  // namespace

OrthogonalityReport weighted_orthogonality_check(const SampledField& g, const BumpFamily& family, int N, double T,
                                                 std::size_t period_grid) {
    const auto& lat = family.lattice();
    const std::size_t n = lat.dim();
    require(g.dim() == n, "weighted_orthogonality_check: grid dimension mismatch");
    require(N >= 0, "weighted_orthogonality_check: N must be nonnegative");
    require(T >= 1.0, "weighted_orthogonality_check: truncation must be at least 1");
    const long w = long(std::floor(T));
    OrthogonalityReport rep;
    rep.N = N;
    CompensatedSum num, den;
    std::vector<double> x(n), y(n);
    for (std::size_t f = 0; f < g.values.size(); ++f) {
        const double m2 = std::norm(g.values[f]);
        den.add(m2);
        if (m2 == 0.0) continue;
        g.point(f, x);
        for (std::size_t a = 0; a < n; ++a) y[a] = x[a] / lat.scale();
        const double W = weight_sum(family, y, N, w);
        rep.kappa = std::max(rep.kappa, W);
        num.add(m2 * W);
    }
    require(den.value() > 0.0, "weighted_orthogonality_check: g vanishes identically");
    rep.ratio = num.value() / den.value();
    SampledField period;
    period.cube = Box(std::vector<double>(n, 0.0), std::vector<double>(n, 1.0));
    period.resolution = period_grid;
    std::size_t total = 1;
    for (std::size_t a = 0; a < n; ++a) total *= period_grid;
    for (std::size_t f = 0; f < total; ++f) {
        period.point(f, y);
        rep.kappa = std::max(rep.kappa, weight_sum(family, y, N, w));
    }
    return rep;
}

}  // namespace mrlab
