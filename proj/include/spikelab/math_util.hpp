#pragma once

// Small numerical helpers shared across the library: angular constants for
// reducing radial integrals over R^N, Gauss-Legendre rules, the upper
// incomplete gamma function (for analytic exponential-tail integrals), a
// Halton sequence for quasi-uniform sampling, and an FNV-1a hash used to
// stamp output files with their configuration.

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string_view>
#include <vector>

namespace spikelab {

inline constexpr double pi = 3.141592653589793238462643383279502884;

/// Surface area of the unit sphere S^{n-1} in R^n: 2 pi^{n/2} / Gamma(n/2).
inline double unit_sphere_area(int n) {
    if (n < 1) throw std::invalid_argument("unit_sphere_area: n must be >= 1");
    return 2.0 * std::pow(pi, 0.5 * n) / std::tgamma(0.5 * n);
}

/// First moment of the inward cosine over the lower half sphere:
///   a_N = integral over {w in S^{N-1} : w.e <= 0} of (w.e) dsigma(w),
/// which equals -|S^{N-2}|/(N-1) for N >= 2 and -1 for N = 1. Always < 0.
inline double halfspace_cosine_moment(int n) {
    if (n < 1) throw std::invalid_argument("halfspace_cosine_moment: n >= 1");
    if (n == 1) return -1.0;
    return -unit_sphere_area(n - 1) / static_cast<double>(n - 1);
}

struct QuadratureRule {
    std::vector<double> nodes;   // on [-1, 1]
    std::vector<double> weights; // sum to 2
};

/// Gauss-Legendre rule with n points, computed by Newton iteration on P_n.
inline QuadratureRule gauss_legendre(int n) {
    if (n < 1) throw std::invalid_argument("gauss_legendre: n >= 1");
    QuadratureRule rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double x = std::cos(pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            // recurrence for P_n(x) and P_n'(x)
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            double dx = p1 / dp;
            x -= dx;
            if (std::fabs(dx) < 1e-15) break;
        }
        rule.nodes[i] = -x;
        rule.nodes[n - 1 - i] = x;
        double w = 2.0 / ((1.0 - x * x) * dp * dp);
        rule.weights[i] = w;
        rule.weights[n - 1 - i] = w;
    }
    if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
    return rule;
}

/// Upper incomplete gamma function Gamma(a, x) = int_x^inf t^{a-1} e^{-t} dt,
/// evaluated by the Lentz continued fraction. Requires x > a + 1 (the only
/// regime the tail integrals need; r_max is always far beyond the shape
/// parameter).
inline double upper_incomplete_gamma(double a, double x) {
    if (!(x > a + 1.0))
        throw std::domain_error("upper_incomplete_gamma: requires x > a + 1");
    const double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i <= 500; ++i) {
        double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::fabs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        double delta = d * c;
        h *= delta;
        if (std::fabs(delta - 1.0) < 1e-16) break;
    }
    // Gamma(a,x) = e^{-x} x^a * CF; compute in logs to dodge overflow.
    return std::exp(-x + a * std::log(x)) * h;
}

/// Halton low-discrepancy sequence value for a given index and prime base.
inline double halton(std::uint64_t index, std::uint64_t base) {
    double f = 1.0, r = 0.0;
    while (index > 0) {
        f /= static_cast<double>(base);
        r += f * static_cast<double>(index % base);
        index /= base;
    }
    return r;
}

/// Quasi-uniform direction on S^{n-1}: Box-Muller applied to Halton pairs,
/// then normalized. Deterministic in (index, offset).
inline std::vector<double> halton_direction(int n, std::uint64_t index,
                                            std::uint64_t offset = 0) {
    static constexpr std::array<std::uint64_t, 8> primes = {2,  3,  5,  7,
                                                            11, 13, 17, 19};
    std::vector<double> dir(n);
    const std::uint64_t i = index + offset + 1; // skip the all-zeros element
    for (int k = 0; k < (n + 1) / 2; ++k) {
        double u1 = halton(i, primes[(2 * k) % primes.size()]);
        double u2 = halton(i, primes[(2 * k + 1) % primes.size()]);
        u1 = std::max(u1, 1e-12);
        double rad = std::sqrt(-2.0 * std::log(u1));
        dir[2 * k] = rad * std::cos(2.0 * pi * u2);
        if (2 * k + 1 < n) dir[2 * k + 1] = rad * std::sin(2.0 * pi * u2);
    }
    double norm = 0.0;
    for (double v : dir) norm += v * v;
    norm = std::sqrt(norm);
    if (norm < 1e-12) return halton_direction(n, index + 1000003, offset);
    for (double& v : dir) v /= norm;
    return dir;
}

/// FNV-1a 64-bit hash; stable across platforms, used for config stamping.
inline std::uint64_t fnv1a64(std::string_view data) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

} // namespace spikelab
