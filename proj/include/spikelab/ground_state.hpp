#pragma once

// Radial ground state of  -Delta u + u = u^p  in R^N, computed by shooting.
//
// The radial profile solves u'' + (N-1)/r u' = u - u^p with u'(0) = 0 and
// u(r) -> 0. Shooting on alpha = u(0) splits initial heights into solutions
// that cross zero (alpha too large) and solutions that turn back up before
// reaching zero (alpha too small); the ground state sits on the boundary.
// Because the decaying solution is exponentially unstable under forward
// integration, the profile is assembled from a forward shot down to a
// matching height and a backward integration of the same equation started
// on the asymptotic tail  u ~ A r^{-(N-1)/2} e^{-r} (1 + a1/r + a2/r^2),
// with the amplitude A matched by a secant iteration. Backward integration
// is stable for the decaying branch, so the assembled grid reaches
// u < 1e-12 in double precision.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "spikelab/errors.hpp"
#include "spikelab/math_util.hpp"
#include "spikelab/ode.hpp"

namespace spikelab {

/// Tabulated radial ground state with derivative values and an exponential
/// tail model valid past the last grid point.
struct RadialProfile {
    int dimension = 0;
    double exponent = 0.0;   // p
    double alpha = 0.0;      // u(0)
    double tol = 0.0;        // achieved shooting tolerance (bracket width)
    double c_tail = 0.0;     // u(r) ~ c_tail r^{-(N-1)/2} e^{-r} for r > r_max
    std::vector<double> r;   // r[0] = 0, strictly increasing
    std::vector<double> u;   // positive, strictly decreasing
    std::vector<double> du;  // du[0] = 0

    double r_max() const { return r.back(); }
    std::size_t size() const { return r.size(); }
};

enum class ShotClass { CROSS, REBOUND, DECAYED };

/// Outcome of a single shot; profile is present only for DECAYED.
struct ShotOutcome {
    ShotClass kind;
    double r_event = 0.0; // where the classification fired
    std::optional<RadialProfile> profile;
};

namespace detail {

inline double upow(double u, double p) {
    // u stays positive on every integration path we classify; the guard only
    // protects the step that crosses zero.
    return u > 0.0 ? std::pow(u, p) : 0.0;
}

struct RadialRhs {
    int n;
    double p;
    std::array<double, 2> operator()(double r,
                                     const std::array<double, 2>& y) const {
        double acc = y[0] - upow(y[0], p);
        if (r > 0.0) acc -= (n - 1) / r * y[1];
        return {y[1], acc};
    }
};

// Series start removing the (N-1)/r singularity:
// u(r) = alpha + (alpha - alpha^p) r^2 / (2N) + O(r^4).
inline std::array<double, 2> series_start(int n, double p, double alpha,
                                          double r0) {
    double c = alpha - upow(alpha, p);
    return {alpha + c * r0 * r0 / (2.0 * n), c * r0 / n};
}

// Classification-only forward integration. decay_height <= 0 disables the
// DECAYED event, which is what the bisection loop wants.
struct RawShot {
    ShotClass kind;
    double r_end;
    std::array<double, 2> state;
};

inline RawShot integrate_classified(int n, double p, double alpha,
                                    double r_limit, double decay_height,
                                    const OdeOptions& opts) {
    const double r0 = 1e-8;
    std::array<double, 2> y = series_start(n, p, alpha, r0);
    RawShot shot{ShotClass::REBOUND, r_limit, y};
    bool fired = false;
    try {
        double r_reached = integrate_ode<2>(
            RadialRhs{n, p}, r0, y, r_limit, opts,
            [&](double r, const std::array<double, 2>& s,
                const std::array<double, 2>&) {
                if (s[0] <= 0.0) {
                    shot = {ShotClass::CROSS, r, s};
                    fired = true;
                    return false;
                }
                if (s[1] > 0.0) {
                    shot = {ShotClass::REBOUND, r, s};
                    fired = true;
                    return false;
                }
                if (decay_height > 0.0 && s[0] < decay_height) {
                    shot = {ShotClass::DECAYED, r, s};
                    fired = true;
                    return false;
                }
                return true;
            });
        if (!fired) {
            // Reached r_limit with u positive and decreasing the whole way.
            if (y[0] < 1e-12) {
                shot = {ShotClass::DECAYED, r_reached, y};
            } else {
                throw NumericalError(
                    "shoot: no classification by r_limit (u(r_limit) = " +
                    std::to_string(y[0]) + ")");
            }
        }
    } catch (const OdeStepUnderflow& e) {
        throw NumericalError(std::string("shoot: nonconvergent integration; "
                                         "last r = ") +
                             std::to_string(e.t_last));
    }
    return shot;
}

// Asymptotic tail  u = A r^{-s} e^{-r} (1 + a1/r + a2/r^2), s = (N-1)/2,
// a1 = s(s-1)/2, a2 = -(s+1)(2-s) a1 / 4. For N = 3 both corrections vanish.
struct TailModel {
    double s, a1, a2;
    explicit TailModel(int n) {
        s = 0.5 * (n - 1);
        a1 = 0.5 * s * (s - 1.0);
        a2 = -0.25 * (s + 1.0) * (2.0 - s) * a1;
    }
    double value(double A, double r) const {
        return A * std::pow(r, -s) * std::exp(-r) *
               (1.0 + a1 / r + a2 / (r * r));
    }
    double deriv(double A, double r) const {
        double core = std::pow(r, -s) * std::exp(-r);
        double poly = 1.0 + a1 / r + a2 / (r * r);
        double dpoly = -a1 / (r * r) - 2.0 * a2 / (r * r * r);
        return A * core * (dpoly - (1.0 + s / r) * poly);
    }
};

} // namespace detail

/// Integrate a single shot u(0) = alpha. Returns CROSS when u reaches zero,
/// REBOUND when u starts increasing while positive, and DECAYED (with the
/// assembled profile) when the trajectory enters the decay funnel and the
/// tail continuation reaches u < 1e-12 before r_limit.
ShotOutcome shoot(int N, double p, double alpha, double r_limit);

/// Ground state by bisection between a CROSS and a REBOUND bracket.
/// Requires 1 < p < (N+2)/(N-2) for N >= 3.
RadialProfile solve_ground_state(int N, double p, double tol);

/// Profile value at r >= 0 (quintic Hermite on the grid, tail model beyond).
double eval(const RadialProfile& profile, double r);
/// Profile derivative at r >= 0.
double eval_deriv(const RadialProfile& profile, double r);

/// Integral 0..inf of u^power_u * (u')^power_du * r^(N-1+moment_k) dr,
/// grid quadrature plus the analytic tail contribution.
double radial_moment(const RadialProfile& profile, double power_u,
                     int power_du, int moment_k);

/// Nehari defect: int(|grad u|^2 + u^2) - int u^{p+1} over R^N.
double nehari_residual(const RadialProfile& profile);
/// Pohozaev defect: (N-2)/2 int|grad u|^2 + N/2 int u^2 - N/(p+1) int u^{p+1}.
double pohozaev_residual(const RadialProfile& profile);

/// CSV export (columns r,u,du) with a JSON header line; import inverts it.
void save_profile(const RadialProfile& profile, const std::string& path);
RadialProfile load_profile(const std::string& path);

// ---------------------------------------------------------------------------

namespace detail {

// Assemble the full profile: forward trajectory on [0, r_match], backward
// tail continuation on [r_match, r_end], resampled on a log grid by forcing
// the integrator through the grid nodes.
inline RadialProfile assemble_profile(int n, double p, double alpha,
                                      double bracket_width, double r_limit) {
    const double r0 = 1e-8;
    const TailModel tail(n);

    // Forward stage: relative control with a floor tied to alpha. u stays
    // above the matching height, so this is effectively relative control.
    OdeOptions opts;
    opts.abs_tol = 1e-15 * alpha;
    opts.rel_tol = 1e-12;
    // Backward stage: the state spans fourteen orders of magnitude, so the
    // control must be purely relative.
    OdeOptions opts_back = opts;
    opts_back.abs_tol = 1e-280;

    // Forward shot down to the matching height. Matching this high keeps the
    // forward contamination (bracket_width * e^r) far below u itself.
    const double u_match = 1e-2 * alpha;
    std::array<double, 2> y = detail::series_start(n, p, alpha, r0);
    double r_match = 0.0;
    std::array<double, 2> y_match{};
    integrate_ode<2>(RadialRhs{n, p}, r0, y, r_limit, opts,
                     [&](double r, const std::array<double, 2>& s,
                         const std::array<double, 2>&) {
                         if (s[0] <= 0.0 || s[1] > 0.0)
                             throw NumericalError(
                                 "ground state: shot left the decay funnel "
                                 "before the matching height");
                         if (s[0] < u_match) {
                             r_match = r;
                             y_match = s;
                             return false;
                         }
                         return true;
                     });
    if (r_match == 0.0)
        throw NumericalError("ground state: matching height not reached "
                             "within r_limit");

    // End of the grid: smallest R with tail value ~ 3e-13.
    double A_est = y_match[0] * std::pow(r_match, tail.s) * std::exp(r_match);
    double r_end = r_match + 5.0;
    while (tail.value(A_est, r_end) > 3e-13) r_end += 0.5;
    if (r_end > r_limit)
        throw NumericalError("ground state: r_limit too small for the tail "
                             "to decay below 1e-12");

    // Secant iteration on the tail amplitude: integrate backward from r_end
    // and match the forward value at r_match. Backward integration of the
    // decaying branch is stable.
    // State convention for backward runs: w(tau) = (u, u') at r = r_end - tau,
    // so dw0/dtau = -u' and dw1/dtau = -u'' = -u + u^p + (N-1)/r u'.
    auto rhs_back = [n, p, r_end](double tau, const std::array<double, 2>& w) {
        double r = r_end - tau;
        return std::array<double, 2>{
            -w[1], -w[0] + upow(w[0], p) + (n - 1) / r * w[1]};
    };
    auto backward_value = [&](double A) {
        std::array<double, 2> z = {tail.value(A, r_end), tail.deriv(A, r_end)};
        integrate_ode<2>(rhs_back, 0.0, z, r_end - r_match, opts_back,
                         [](double, const std::array<double, 2>&,
                            const std::array<double, 2>&) { return true; });
        return z;
    };
    double A0 = A_est, A1 = A_est * 1.02;
    double g0 = backward_value(A0)[0] - y_match[0];
    double amplitude = A0;
    if (std::fabs(g0) > 1e-12 * y_match[0]) {
        for (int it = 0; it < 60; ++it) {
            double g1 = backward_value(A1)[0] - y_match[0];
            amplitude = A1;
            if (std::fabs(g1) <= 1e-12 * y_match[0]) break;
            double step = g1 * (A1 - A0) / (g1 - g0);
            A0 = A1;
            g0 = g1;
            A1 -= step;
        }
    }

    // Log grid: r = 0, then n_grid points log-spaced on [r_lo, r_end].
    const int n_grid = 4000;
    const double r_lo = 1e-3;
    RadialProfile prof;
    prof.dimension = n;
    prof.exponent = p;
    prof.alpha = alpha;
    prof.tol = bracket_width;
    prof.r.reserve(n_grid + 1);
    prof.u.reserve(n_grid + 1);
    prof.du.reserve(n_grid + 1);
    prof.r.push_back(0.0);
    prof.u.push_back(alpha);
    prof.du.push_back(0.0);
    std::vector<double> grid(n_grid);
    for (int i = 0; i < n_grid; ++i)
        grid[i] = r_lo * std::pow(r_end / r_lo, double(i) / (n_grid - 1));
    grid.back() = r_end;

    // Forward sweep through the grid nodes up to r_match.
    y = detail::series_start(n, p, alpha, r0);
    double r_cur = r0;
    std::size_t gi = 0;
    for (; gi < grid.size() && grid[gi] <= r_match; ++gi) {
        integrate_ode<2>(RadialRhs{n, p}, r_cur, y, grid[gi], opts,
                         [](double, const std::array<double, 2>&,
                            const std::array<double, 2>&) { return true; });
        r_cur = grid[gi];
        prof.r.push_back(r_cur);
        prof.u.push_back(y[0]);
        prof.du.push_back(y[1]);
    }
    // Backward sweep from r_end down through the remaining nodes.
    std::array<double, 2> z = {tail.value(amplitude, r_end),
                               tail.deriv(amplitude, r_end)};
    std::vector<double> rs, us, dus;
    double tau_cur = 0.0;
    for (std::size_t gj = grid.size(); gj-- > gi;) {
        integrate_ode<2>(rhs_back, tau_cur, z, r_end - grid[gj], opts_back,
                         [](double, const std::array<double, 2>&,
                            const std::array<double, 2>&) { return true; });
        tau_cur = r_end - grid[gj];
        rs.push_back(grid[gj]);
        us.push_back(z[0]);
        dus.push_back(z[1]);
    }
    for (std::size_t k = rs.size(); k-- > 0;) {
        prof.r.push_back(rs[k]);
        prof.u.push_back(us[k]);
        prof.du.push_back(dus[k]);
    }

    // Tail amplitude for the model past r_max: least squares over the last
    // decade of u against the asymptotic form (amplitude is already the
    // matched value; the fit just re-certifies it on the final grid).
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < prof.r.size(); ++i) {
        if (prof.u[i] <= 10.0 * prof.u.back() && prof.r[i] > 0.0) {
            double m = tail.value(1.0, prof.r[i]);
            num += m * prof.u[i];
            den += m * m;
        }
    }
    prof.c_tail = den > 0.0 ? num / den : amplitude;

    // Sanity: positive, strictly decreasing, below 1e-12 at the end.
    for (std::size_t i = 0; i + 1 < prof.u.size(); ++i)
        if (!(prof.u[i] > prof.u[i + 1]) || !(prof.u[i + 1] > 0.0))
            throw NumericalError("ground state: assembled profile is not "
                                 "strictly decreasing and positive");
    if (!(prof.u.back() < 1e-12))
        throw NumericalError("ground state: tail did not reach 1e-12");
    return prof;
}

} // namespace detail

inline ShotOutcome shoot(int N, double p, double alpha, double r_limit) {
    if (N < 1) throw PreconditionError("shoot: N must be >= 1");
    if (!(p > 1.0)) throw PreconditionError("shoot: p must be > 1");
    if (!(alpha > 0.0)) throw PreconditionError("shoot: alpha must be > 0");
    if (!(r_limit > 0.0)) throw PreconditionError("shoot: r_limit > 0");
    OdeOptions opts;
    // Decay funnel: once u has fallen this far with u' < 0 the trajectory is
    // on the stable manifold to integration accuracy.
    double decay_height = 1e-5 * alpha;
    detail::RawShot raw =
        detail::integrate_classified(N, p, alpha, r_limit, decay_height, opts);
    ShotOutcome out{raw.kind, raw.r_end, std::nullopt};
    if (raw.kind == ShotClass::DECAYED)
        out.profile = detail::assemble_profile(N, p, alpha, 0.0, r_limit);
    return out;
}

inline RadialProfile solve_ground_state(int N, double p, double tol) {
    if (N < 1) throw PreconditionError("solve_ground_state: N must be >= 1");
    if (!(p > 1.0)) throw PreconditionError("solve_ground_state: p > 1");
    if (N >= 3 && !(p < double(N + 2) / double(N - 2)))
        throw PreconditionError(
            "solve_ground_state: supercritical exponent, need p < "
            "(N+2)/(N-2)");
    if (!(tol > 0.0)) throw PreconditionError("solve_ground_state: tol > 0");

    OdeOptions opts;
    const double r_limit = 60.0;
    auto classify = [&](double a) {
        return detail::integrate_classified(N, p, a, r_limit, -1.0, opts).kind;
    };

    // Bracket: rebound side below, cross side above, scanned in [1e-6, 1e6].
    double lo = 0.0, hi = 0.0;
    for (double a = 1.5; a <= 1e6; a *= 2.0) {
        ShotClass c = classify(a);
        if (c == ShotClass::CROSS) {
            hi = a;
            break;
        }
        lo = a;
    }
    if (hi == 0.0)
        throw NumericalError("solve_ground_state: no CROSS found in "
                             "[1e-6, 1e6]");
    if (lo == 0.0) {
        for (double a = hi / 2.0; a >= 1e-6; a /= 2.0) {
            if (classify(a) == ShotClass::REBOUND) {
                lo = a;
                break;
            }
            hi = a;
        }
    }
    if (lo == 0.0)
        throw NumericalError("solve_ground_state: no REBOUND found in "
                             "[1e-6, 1e6]");

    // Bisect to the requested width or to the internal quality floor,
    // whichever is tighter; the tail amplitude match inherits the bracket
    // error amplified by e^{r_match}, so a loose bracket would degrade the
    // integral identities even when u(0) itself looks fine. The floor stays
    // above the level where roundoff makes the classification unreliable.
    double quality = std::max(1e-13 * std::max(1.0, hi), 64.0 * 2.2e-16 * hi);
    double width_target = std::min(tol, quality);
    while (hi - lo > width_target) {
        double mid = 0.5 * (lo + hi);
        if (classify(mid) == ShotClass::CROSS)
            hi = mid;
        else
            lo = mid;
    }
    double alpha = 0.5 * (lo + hi);
    return detail::assemble_profile(N, p, alpha, hi - lo, r_limit);
}

namespace detail {

// Quintic Hermite pieces: the grid stores (u, u'), and u'' comes for free
// from the ODE, so each cell interpolates with two-point fifth-degree data.
inline double ode_second_derivative(const RadialProfile& prof, std::size_t i) {
    double r = prof.r[i], u = prof.u[i], du = prof.du[i];
    double acc = u - upow(u, prof.exponent);
    if (r > 0.0)
        acc -= (prof.dimension - 1) / r * du;
    else
        acc = (u - upow(u, prof.exponent)) / prof.dimension; // series limit
    return acc;
}

struct HermiteCell {
    double r0, h;
    std::array<double, 6> c; // coefficients in t = (r - r0)/h
    double value(double r) const {
        double t = (r - r0) / h;
        return ((((c[5] * t + c[4]) * t + c[3]) * t + c[2]) * t + c[1]) * t +
               c[0];
    }
    double deriv(double r) const {
        double t = (r - r0) / h;
        return ((((5 * c[5] * t + 4 * c[4]) * t + 3 * c[3]) * t + 2 * c[2]) *
                    t +
                c[1]) /
               h;
    }
};

inline HermiteCell hermite_cell(const RadialProfile& prof, std::size_t i) {
    double h = prof.r[i + 1] - prof.r[i];
    double f0 = prof.u[i], f1 = prof.u[i + 1];
    double d0 = prof.du[i] * h, d1 = prof.du[i + 1] * h;
    double s0 = ode_second_derivative(prof, i) * h * h;
    double s1 = ode_second_derivative(prof, i + 1) * h * h;
    HermiteCell cell;
    cell.r0 = prof.r[i];
    cell.h = h;
    // two-point quintic Hermite in t on [0,1]
    cell.c[0] = f0;
    cell.c[1] = d0;
    cell.c[2] = 0.5 * s0;
    cell.c[3] = -10 * f0 + 10 * f1 - 6 * d0 - 4 * d1 - 1.5 * s0 + 0.5 * s1;
    cell.c[4] = 15 * f0 - 15 * f1 + 8 * d0 + 7 * d1 + 1.5 * s0 - s1;
    cell.c[5] = -6 * f0 + 6 * f1 - 3 * d0 - 3 * d1 - 0.5 * s0 + 0.5 * s1;
    return cell;
}

inline std::size_t locate_cell(const RadialProfile& prof, double r) {
    auto it = std::upper_bound(prof.r.begin(), prof.r.end(), r);
    std::size_t i = static_cast<std::size_t>(it - prof.r.begin());
    if (i == 0) return 0;
    if (i >= prof.r.size()) return prof.r.size() - 2;
    return i - 1;
}

} // namespace detail

inline double eval(const RadialProfile& profile, double r) {
    if (r < 0.0) throw PreconditionError("eval: r must be >= 0");
    if (r >= profile.r_max()) {
        detail::TailModel tail(profile.dimension);
        return tail.value(profile.c_tail, r);
    }
    return detail::hermite_cell(profile, detail::locate_cell(profile, r))
        .value(r);
}

inline double eval_deriv(const RadialProfile& profile, double r) {
    if (r < 0.0) throw PreconditionError("eval_deriv: r must be >= 0");
    if (r >= profile.r_max()) {
        detail::TailModel tail(profile.dimension);
        return tail.deriv(profile.c_tail, r);
    }
    return detail::hermite_cell(profile, detail::locate_cell(profile, r))
        .deriv(r);
}

namespace detail {

// Integral of the tail model contribution: u^a (u')^b r^m past r_max,
// expanded into upper incomplete gamma terms. b is even, so (u')^b carries
// (1 + s/r + correction)^b; the correction polynomial is truncated at 1/r^2,
// consistent with the model itself.
inline double tail_moment(const RadialProfile& prof, double a, int b,
                          double m) {
    if (prof.u.back() <= 0.0) return 0.0;
    TailModel tail(prof.dimension);
    double c = prof.c_tail;
    double R = prof.r_max();
    double w = a + b;           // e^{-w r} rate
    if (w <= 0.0) return 0.0;   // guarded by the caller
    // write u^a (u')^b = c^w e^{-w r} r^{m - s w} * poly(1/r), poly from the
    // model's algebra; expand to second order in 1/r.
    double s = tail.s, a1 = tail.a1, a2 = tail.a2;
    // u = c r^-s e^-r (1 + a1/r + a2/r^2); u' = -u * (1 + s/r + q2/r^2 + ...)
    // with q2 from d/dr log of the polynomial part.
    // log u = log c - s log r - r + log(1 + a1/r + a2/r^2)
    // u'/u = -1 - s/r + (-a1/r^2 - 2a2/r^3)/(1 + a1/r + ...)
    //      = -(1 + s/r + a1/r^2 + O(r^-3))
    // (u')^b = u^b (1 + s/r + a1/r^2)^b since b is even.
    // (1 + a1/r + a2/r^2)^w ~ 1 + w a1 / r + (w a2 + w(w-1)/2 a1^2)/r^2.
    double p0 = 1.0;
    double p1 = w * a1;
    double p2 = w * a2 + 0.5 * w * (w - 1.0) * a1 * a1;
    if (b > 0) {
        // multiply by (1 + s/r + a1/r^2)^b ~ 1 + b s / r +
        //   (b a1 + b(b-1)/2 s^2)/r^2
        double q1 = b * s;
        double q2 = b * a1 + 0.5 * b * (b - 1.0) * s * s;
        double n1 = p1 + q1;
        double n2 = p2 + p1 * q1 + q2;
        p1 = n1;
        p2 = n2;
    }
    double mu = m - s * w; // r^mu leading power
    double amp = std::pow(c, w);
    // int_R^inf r^{mu - j} e^{-w r} dr = Gamma(mu - j + 1, w R) / w^{mu-j+1}
    auto term = [&](double shift, double coeff) {
        double aa = mu - shift + 1.0;
        double x = w * R;
        if (!(x > aa + 1.0)) return 0.0; // tail numerically negligible anyway
        return coeff * upper_incomplete_gamma(aa, x) / std::pow(w, aa);
    };
    return amp * (term(0.0, p0) + term(1.0, p1) + term(2.0, p2));
}

} // namespace detail

namespace detail {

// Integral 0..inf of u^a (u')^b r^m dr over the grid plus the analytic tail.
// Needs a + b > 0 (decay) and m > -1 (integrability at 0).
inline double r_power_integral(const RadialProfile& profile, double power_u,
                               int power_du, double m) {
    static const QuadratureRule rule = gauss_legendre(7);
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < profile.size(); ++i) {
        detail::HermiteCell cell = detail::hermite_cell(profile, i);
        double a = profile.r[i], b = profile.r[i + 1];
        double mid = 0.5 * (a + b), half = 0.5 * (b - a);
        double acc = 0.0;
        for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
            double r = mid + half * rule.nodes[q];
            double uv = cell.value(r);
            double dv = cell.deriv(r);
            double f = std::pow(std::max(uv, 0.0), power_u);
            for (int j = 0; j < power_du; ++j) f *= dv;
            f *= std::pow(r, m);
            acc += rule.weights[q] * f;
        }
        total += acc * half;
    }
    total += detail::tail_moment(profile, power_u, power_du, m);
    return total;
}

} // namespace detail

inline double radial_moment(const RadialProfile& profile, double power_u,
                            int power_du, int moment_k) {
    if (power_u < 0.0)
        throw PreconditionError("radial_moment: power_u must be >= 0");
    if (power_du < 0 || power_du % 2 != 0)
        throw PreconditionError("radial_moment: power_du must be even >= 0");
    if (moment_k < 0)
        throw PreconditionError("radial_moment: moment_k must be >= 0");
    if (power_u + power_du == 0)
        throw PreconditionError(
            "radial_moment: integrand r^(N-1+k) with no decay diverges");
    return detail::r_power_integral(profile, power_u, power_du,
                                    profile.dimension - 1 + moment_k);
}

inline double nehari_residual(const RadialProfile& profile) {
    double area = unit_sphere_area(profile.dimension);
    double grad2 = radial_moment(profile, 0.0, 2, 0);
    double u2 = radial_moment(profile, 2.0, 0, 0);
    double up1 = radial_moment(profile, profile.exponent + 1.0, 0, 0);
    return area * (grad2 + u2 - up1);
}

inline double pohozaev_residual(const RadialProfile& profile) {
    double n = profile.dimension;
    double p = profile.exponent;
    double area = unit_sphere_area(profile.dimension);
    double grad2 = radial_moment(profile, 0.0, 2, 0);
    double u2 = radial_moment(profile, 2.0, 0, 0);
    double up1 = radial_moment(profile, p + 1.0, 0, 0);
    return area * (0.5 * (n - 2.0) * grad2 + 0.5 * n * u2 -
                   n / (p + 1.0) * up1);
}

inline void save_profile(const RadialProfile& profile,
                         const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("save_profile: cannot open " + path);
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "# {\"N\": %d, \"p\": %.17g, \"alpha\": %.17g, "
                  "\"c_tail\": %.17g, \"tol\": %.17g}\n",
                  profile.dimension, profile.exponent, profile.alpha,
                  profile.c_tail, profile.tol);
    out << buf << "r,u,du\n";
    for (std::size_t i = 0; i < profile.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", profile.r[i],
                      profile.u[i], profile.du[i]);
        out << buf;
    }
}

inline RadialProfile load_profile(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("load_profile: cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || line.rfind("# {", 0) != 0)
        throw Error("load_profile: missing JSON header line");
    RadialProfile prof;
    auto grab = [&](const char* key) {
        std::size_t pos = line.find(key);
        if (pos == std::string::npos)
            throw Error(std::string("load_profile: header lacks ") + key);
        pos = line.find(':', pos);
        return std::stod(line.substr(pos + 1));
    };
    prof.dimension = static_cast<int>(grab("\"N\""));
    prof.exponent = grab("\"p\"");
    prof.alpha = grab("\"alpha\"");
    prof.c_tail = grab("\"c_tail\"");
    prof.tol = grab("\"tol\"");
    std::getline(in, line); // column header
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        double r, u, du;
        if (std::sscanf(line.c_str(), "%lg,%lg,%lg", &r, &u, &du) != 3)
            throw Error("load_profile: malformed row: " + line);
        prof.r.push_back(r);
        prof.u.push_back(u);
        prof.du.push_back(du);
    }
    if (prof.size() < 2) throw Error("load_profile: too few rows");
    return prof;
}

} // namespace spikelab
