#include "mrlab/common.hpp"

#include <algorithm>
#include <numeric>

namespace mrlab {

Box::Box(std::vector<double> l, std::vector<double> h) : lo(std::move(l)), hi(std::move(h)) {
    require(lo.size() == hi.size(), "Box: lo/hi dimension mismatch");
    for (std::size_t i = 0; i < lo.size(); ++i)
        require(lo[i] <= hi[i], "Box: lo > hi on axis " + std::to_string(i));
}

Box Box::centered(std::size_t dim, double half_width) {
    return Box(std::vector<double>(dim, -half_width), std::vector<double>(dim, half_width));
}

double Box::diameter() const {
    double s = 0.0;
    for (std::size_t i = 0; i < dim(); ++i) s += side(i) * side(i);
    return std::sqrt(s);
}

double Box::volume() const {
    double v = 1.0;
    for (std::size_t i = 0; i < dim(); ++i) v *= side(i);
    return v;
}

bool Box::contains(std::span<const double> x, double tol) const {
    if (x.size() != dim()) return false;
    for (std::size_t i = 0; i < dim(); ++i)
        if (x[i] < lo[i] - tol || x[i] > hi[i] + tol) return false;
    return true;
}

bool Box::contains(const Box& other, double tol) const {
    if (other.dim() != dim()) return false;
    for (std::size_t i = 0; i < dim(); ++i)
        if (other.lo[i] < lo[i] - tol || other.hi[i] > hi[i] + tol) return false;
    return true;
}

double Box::max_norm() const {
    double s = 0.0;
    for (std::size_t i = 0; i < dim(); ++i) {
        const double m = std::max(std::abs(lo[i]), std::abs(hi[i]));
        s += m * m;
    }
    return std::sqrt(s);
}

LineFit fit_line(std::span<const double> x, std::span<const double> y) {
    require(x.size() == y.size() && x.size() >= 2, "fit_line: need at least two points");
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    require(sxx > 0.0, "fit_line: abscissae are all equal");
    LineFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double r = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double e = y[i] - (f.intercept + f.slope * x[i]);
        r += e * e;
    }
    f.residual = std::sqrt(r / n);
    return f;
}

std::vector<std::size_t> row_major_strides(std::span<const std::size_t> extents) {
    std::vector<std::size_t> s(extents.size(), 1);
    for (std::size_t i = extents.size(); i-- > 1;) s[i - 1] = s[i] * extents[i];
    return s;
}

double SampledField::cell_volume() const {
    double v = 1.0;
    for (std::size_t a = 0; a < dim(); ++a) v *= spacing(a);
    return v;
}

void SampledField::point(std::size_t flat, std::span<double> out) const {
    for (std::size_t a = dim(); a-- > 0;) {
        out[a] = coordinate(a, flat % resolution);
        flat /= resolution;
    }
}

}  // namespace mrlab
