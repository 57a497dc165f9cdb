#include "mrlab/quadrature.hpp"

#include <algorithm>

namespace mrlab {

GaussRule gauss_legendre(std::size_t n, double a, double b) {
    require(n >= 1, "gauss_legendre: need at least one node");
    GaussRule r;
    r.nodes.resize(n);
    r.weights.resize(n);
    const double half = 0.5 * (b - a);
    const double mid = 0.5 * (b + a);
    const std::size_t m = (n + 1) / 2;
    for (std::size_t i = 0; i < m; ++i) {
        double x = std::cos(kPi * (static_cast<double>(i) + 0.75) / (static_cast<double>(n) + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            for (std::size_t k = 2; k <= n; ++k) {
                const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / static_cast<double>(k);
                p0 = p1;
                p1 = p2;
            }
            if (n == 1) {
                p1 = x;
                p0 = 1.0;
            }
            dp = static_cast<double>(n) * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        // Recompute derivative at the converged root for the weight.
        double p0 = 1.0, p1 = x;
        for (std::size_t k = 2; k <= n; ++k) {
            const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / static_cast<double>(k);
            p0 = p1;
            p1 = p2;
        }
        dp = (n == 1) ? 1.0 : static_cast<double>(n) * (x * p1 - p0) / (x * x - 1.0);
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        r.nodes[i] = mid - half * x;
        r.nodes[n - 1 - i] = mid + half * x;
        r.weights[i] = r.weights[n - 1 - i] = half * w;
    }
    if (n == 1) {
        r.nodes[0] = mid;
        r.weights[0] = 2.0 * half;
    }
    return r;
}

TensorGrid::TensorGrid(const Box& box, std::span<const std::size_t> counts) : box_(box) {
    require(counts.size() == box.dim(), "TensorGrid: counts/box dimension mismatch");
    size_ = 1;
    for (std::size_t a = 0; a < box.dim(); ++a) {
        axes_.push_back(gauss_legendre(counts[a], box.lo[a], box.hi[a]));
        size_ *= counts[a];
    }
}

std::vector<std::size_t> TensorGrid::counts() const {
    std::vector<std::size_t> c;
    for (const auto& ax : axes_) c.push_back(ax.nodes.size());
    return c;
}

void TensorGrid::node(std::size_t idx, std::span<double> out) const {
    for (std::size_t a = dim(); a-- > 0;) {
        const std::size_t n = axes_[a].nodes.size();
        out[a] = axes_[a].nodes[idx % n];
        idx /= n;
    }
}

double TensorGrid::weight(std::size_t idx) const {
    double w = 1.0;
    for (std::size_t a = dim(); a-- > 0;) {
        const std::size_t n = axes_[a].nodes.size();
        w *= axes_[a].weights[idx % n];
        idx /= n;
    }
    return w;
}

std::vector<double> TensorGrid::all_weights() const {
    std::vector<double> w(size_);
    for (std::size_t i = 0; i < size_; ++i) w[i] = weight(i);
    return w;
}

BarycentricInterpolant::BarycentricInterpolant(std::vector<double> nodes) : nodes_(std::move(nodes)) {
    const std::size_t n = nodes_.size();
    require(n >= 1, "BarycentricInterpolant: empty node set");
    // Scale differences by the interval length to avoid under/overflow for large n.
    const auto [mn, mx] = std::minmax_element(nodes_.begin(), nodes_.end());
    const double scale = (*mx - *mn) > 0 ? 4.0 / (*mx - *mn) : 1.0;
    bary_.assign(n, 1.0);
    for (std::size_t j = 0; j < n; ++j) {
        double logabs = 0.0;
        int sign = 1;
        for (std::size_t k = 0; k < n; ++k) {
            if (k == j) continue;
            const double d = (nodes_[j] - nodes_[k]) * scale;
            require(d != 0.0, "BarycentricInterpolant: repeated node");
            logabs += std::log(std::abs(d));
            if (d < 0) sign = -sign;
        }
        bary_[j] = sign * std::exp(-logabs);
    }
    // Normalise to O(1) magnitudes.
    double mxw = 0.0;
    for (double b : bary_) mxw = std::max(mxw, std::abs(b));
    for (double& b : bary_) b /= mxw;
}

std::vector<double> BarycentricInterpolant::coefficients(double x) const {
    const std::size_t n = nodes_.size();
    std::vector<double> c(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        if (x == nodes_[j]) {
            c[j] = 1.0;
            return c;
        }
    }
    double denom = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        c[j] = bary_[j] / (x - nodes_[j]);
        denom += c[j];
    }
    for (double& v : c) v /= denom;
    return c;
}

Mat BarycentricInterpolant::differentiation_matrix() const {
    const std::size_t n = nodes_.size();
    Mat d = Mat::Zero(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        double diag = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            d(i, j) = (bary_[j] / bary_[i]) / (nodes_[i] - nodes_[j]);
            diag -= d(i, j);
        }
        d(i, i) = diag;
    }
    return d;
}

}  // namespace mrlab
