#include "mrlab/polynomial.hpp"

#include <algorithm>
#include <functional>

namespace mrlab {

namespace {

double falling_power(int e, int k) {
    double r = 1.0;
    for (int j = 0; j < k; ++j) r *= static_cast<double>(e - j);
    return r;
}

double int_pow(double x, int e) {
    double r = 1.0;
    for (int j = 0; j < e; ++j) r *= x;
    return r;
}

}  // namespace

Polynomial Polynomial::half_square_norm(std::size_t num_vars) {
    Polynomial p(num_vars);
    for (std::size_t j = 0; j < num_vars; ++j) {
        std::vector<int> e(num_vars, 0);
        e[j] = 2;
        p.add_term(0.5, std::move(e));
    }
    return p;
}

Polynomial Polynomial::monomial(std::size_t num_vars, std::size_t axis, int power, double coeff) {
    require(axis < num_vars, "Polynomial::monomial: axis out of range");
    Polynomial p(num_vars);
    std::vector<int> e(num_vars, 0);
    e[axis] = power;
    p.add_term(coeff, std::move(e));
    return p;
}

Polynomial Polynomial::sphere_cap(std::size_t num_vars, double rho, int order) {
    require(rho > 0.0, "sphere_cap: radius must be positive");
    // rho*(1 - sqrt(1 - s)) with s = |x|^2/rho^2; binomial series coefficients of -sqrt(1-s).
    std::vector<double> c(order + 1, 0.0);
    double a = 1.0;  // binom(1/2, k) * (-1)^k
    for (int k = 1; k <= order; ++k) {
        a *= (0.5 - (k - 1)) / k * -1.0;
        c[k] = -a;
    }
    Polynomial p(num_vars);
    // Expand (sum x_j^2)^k by enumerating compositions of k into num_vars parts.
    std::vector<int> parts(num_vars, 0);
    for (int k = 1; k <= order; ++k) {
        const double scale = rho * c[k] / int_pow(rho * rho, k);
        std::function<void(std::size_t, int, double)> rec = [&](std::size_t idx, int left, double mult) {
            if (idx + 1 == num_vars) {
                parts[idx] = left;
                std::vector<int> e(num_vars);
                for (std::size_t j = 0; j < num_vars; ++j) e[j] = 2 * parts[j];
                double m = mult;
                for (int j = 1; j <= left; ++j) m /= j;
                p.add_term(scale * m, std::move(e));
                return;
            }
            for (int t = 0; t <= left; ++t) {
                parts[idx] = t;
                double m = mult;
                for (int j = 1; j <= t; ++j) m /= j;
                rec(idx + 1, left - t, m);
            }
        };
        double kfact = 1.0;
        for (int j = 2; j <= k; ++j) kfact *= j;
        rec(0, k, kfact);
    }
    return p;
}

void Polynomial::add_term(double coeff, std::vector<int> exponents) {
    require(exponents.size() == num_vars_, "Polynomial::add_term: exponent arity mismatch");
    for (int e : exponents) require(e >= 0, "Polynomial::add_term: negative exponent");
    if (coeff == 0.0) return;
    for (auto& t : terms_) {
        if (t.exponents == exponents) {
            t.coeff += coeff;
            if (t.coeff == 0.0)
                terms_.erase(terms_.begin() + (&t - terms_.data()));
            return;
        }
    }
    terms_.push_back({coeff, std::move(exponents)});
}

int Polynomial::degree() const {
    int d = 0;
    for (const auto& t : terms_) {
        int s = 0;
        for (int e : t.exponents) s += e;
        d = std::max(d, s);
    }
    return d;
}

double Polynomial::operator()(std::span<const double> x) const {
    std::vector<int> zero(num_vars_, 0);
    return derivative(zero, x);
}

double Polynomial::derivative(std::span<const int> alpha, std::span<const double> x) const {
    require(alpha.size() == num_vars_ && x.size() == num_vars_, "Polynomial::derivative: arity mismatch");
    double sum = 0.0;
    for (const auto& t : terms_) {
        double v = t.coeff;
        for (std::size_t j = 0; j < num_vars_ && v != 0.0; ++j) {
            const int e = t.exponents[j];
            if (alpha[j] > e) {
                v = 0.0;
                break;
            }
            v *= falling_power(e, alpha[j]) * int_pow(x[j], e - alpha[j]);
        }
        sum += v;
    }
    return sum;
}

Vec Polynomial::gradient(std::span<const double> x) const {
    Vec g(num_vars_);
    std::vector<int> a(num_vars_, 0);
    for (std::size_t j = 0; j < num_vars_; ++j) {
        a[j] = 1;
        g[j] = derivative(a, x);
        a[j] = 0;
    }
    return g;
}

Mat Polynomial::hessian(std::span<const double> x) const {
    Mat h(num_vars_, num_vars_);
    std::vector<int> a(num_vars_, 0);
    for (std::size_t i = 0; i < num_vars_; ++i) {
        for (std::size_t j = i; j < num_vars_; ++j) {
            ++a[i];
            ++a[j];
            h(i, j) = h(j, i) = derivative(a, x);
            --a[i];
            --a[j];
        }
    }
    return h;
}

double Polynomial::laplacian(std::span<const double> x) const { return hessian(x).trace(); }

Polynomial Polynomial::operator+(const Polynomial& other) const {
    require(other.num_vars_ == num_vars_, "Polynomial::+: arity mismatch");
    Polynomial r = *this;
    for (const auto& t : other.terms_) r.add_term(t.coeff, t.exponents);
    return r;
}

Polynomial Polynomial::operator*(double s) const {
    Polynomial r(num_vars_);
    for (const auto& t : terms_) r.add_term(t.coeff * s, t.exponents);
    return r;
}

}  // namespace mrlab
