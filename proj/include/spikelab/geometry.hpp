#pragma once

// Boundary geometry from an implicit description Omega = {phi < 0}: outward
// normals, tangent frames, principal curvatures and mean curvature, Newton
// projection onto the boundary, and quasi-uniform boundary sampling. Named
// shapes (ball, ellipsoid) are built on the same implicit path.
//
// Sign conventions: nu = grad(phi)/|grad(phi)| points outward; the shape
// operator restricted to the tangent space is P Hess(phi) P / |grad(phi)|,
// which gives lambda_i = 1/R > 0 on a ball of radius R and H = mean(lambda).

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "spikelab/errors.hpp"
#include "spikelab/expression.hpp"
#include "spikelab/math_util.hpp"

namespace spikelab {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline std::span<const double> as_span(const Vector& v) {
    return {v.data(), static_cast<std::size_t>(v.size())};
}

/// Point on the boundary with its local frame and curvature data.
struct BoundaryPoint {
    Vector q;               // coordinates
    Vector nu;              // outward unit normal
    Matrix frame;           // N x (N-1), orthonormal, orthogonal to nu
    Vector curvatures;      // principal curvatures, ascending
    double mean_curvature = 0.0;
};

/// Implicit bounded domain Omega = {phi < 0} with a bounding box.
class DomainSpec {
public:
    DomainSpec(PotentialField phi, Vector box_lo, Vector box_hi)
        : phi_(std::move(phi)), lo_(std::move(box_lo)), hi_(std::move(box_hi)) {
        if (lo_.size() != hi_.size() || lo_.size() != phi_.dimension())
            throw PreconditionError("DomainSpec: dimension mismatch");
    }

    static DomainSpec ball(const Vector& center, double radius) {
        if (!(radius > 0.0)) throw PreconditionError("ball: radius > 0");
        int n = static_cast<int>(center.size());
        std::string src;
        for (int i = 0; i < n; ++i) {
            if (i) src += " + ";
            src += "(x" + std::to_string(i + 1) + " - " +
                   num(center[i]) + ")^2";
        }
        src += " - " + num(radius * radius);
        Vector lo = center.array() - 1.5 * radius;
        Vector hi = center.array() + 1.5 * radius;
        DomainSpec d(PotentialField::parse(src, n), lo, hi);
        d.interior_ = center;
        return d;
    }

    static DomainSpec ellipsoid(const Vector& semi_axes,
                                const Vector& center) {
        int n = static_cast<int>(semi_axes.size());
        if (center.size() != n)
            throw PreconditionError("ellipsoid: center/axes size mismatch");
        std::string src;
        for (int i = 0; i < n; ++i) {
            if (!(semi_axes[i] > 0.0))
                throw PreconditionError("ellipsoid: semi-axes > 0");
            if (i) src += " + ";
            src += "((x" + std::to_string(i + 1) + " - " + num(center[i]) +
                   ") / " + num(semi_axes[i]) + ")^2";
        }
        src += " - 1";
        Vector lo = center - 1.5 * semi_axes;
        Vector hi = center + 1.5 * semi_axes;
        DomainSpec d(PotentialField::parse(src, n), lo, hi);
        d.interior_ = center;
        return d;
    }

    static DomainSpec ellipsoid(const Vector& semi_axes) {
        return ellipsoid(semi_axes, Vector::Zero(semi_axes.size()));
    }

    int dimension() const { return phi_.dimension(); }
    const PotentialField& phi() const { return phi_; }
    const Vector& box_lo() const { return lo_; }
    const Vector& box_hi() const { return hi_; }
    double diameter() const { return (hi_ - lo_).norm(); }

    double phi_at(const Vector& x) const { return phi_.value(as_span(x)); }
    Vector grad_phi(const Vector& x) const {
        auto g = phi_.gradient(as_span(x));
        return Eigen::Map<const Vector>(g.data(), g.size());
    }
    bool inside(const Vector& x) const { return phi_at(x) < 0.0; }

    /// Some interior point, located by a Halton scan if not known a priori.
    Vector interior_point() const {
        if (interior_) return *interior_;
        double best = 0.0;
        Vector arg;
        for (int i = 0; i < 4096; ++i) {
            Vector x(dimension());
            static constexpr int primes[6] = {2, 3, 5, 7, 11, 13};
            for (int k = 0; k < dimension(); ++k)
                x[k] = lo_[k] + (hi_[k] - lo_[k]) *
                                    halton(static_cast<std::uint64_t>(i + 1),
                                           primes[k % 6]);
            double v = phi_at(x);
            if (v < best) {
                best = v;
                arg = x;
            }
        }
        if (best >= 0.0)
            throw NumericalError("DomainSpec: no interior point found in the "
                                 "bounding box");
        interior_ = arg;
        return arg;
    }

private:
    static std::string num(double v) {
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return buf;
    }

    PotentialField phi_;
    Vector lo_, hi_;
    mutable std::optional<Vector> interior_;
};

namespace detail {

// Deterministic orthonormal completion of the unit vector nu: reflect the
// largest-component axis onto nu and keep the images of the other axes.
inline Matrix tangent_frame(const Vector& nu) {
    int n = static_cast<int>(nu.size());
    int k = 0;
    for (int i = 1; i < n; ++i)
        if (std::fabs(nu[i]) > std::fabs(nu[k])) k = i;
    double s = nu[k] >= 0.0 ? 1.0 : -1.0;
    Vector w = nu;
    w[k] += s;
    double wn2 = w.squaredNorm();
    Matrix frame(n, n - 1);
    int col = 0;
    for (int j = 0; j < n; ++j) {
        if (j == k) continue;
        Vector e = Vector::Zero(n);
        e[j] = 1.0;
        frame.col(col++) = e - (2.0 * w[j] / wn2) * w;
    }
    return frame;
}

} // namespace detail

/// Principal curvatures and mean curvature at a boundary point Q, from the
/// shape operator of the implicit surface.
inline void fill_frame_and_curvature(const DomainSpec& domain,
                                     BoundaryPoint& bp) {
    Vector g = domain.grad_phi(bp.q);
    double gn = g.norm();
    if (!(gn > 1e-12))
        throw NumericalError("curvature_at: degenerate gradient of phi");
    bp.nu = g / gn;
    bp.frame = detail::tangent_frame(bp.nu);
    int n = domain.dimension();
    auto h = domain.phi().hessian(as_span(bp.q));
    Eigen::Map<const Matrix> hess(h.data(), n, n);
    Matrix shape = (bp.frame.transpose() * hess * bp.frame) / gn;
    shape = 0.5 * (shape + shape.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> es(shape);
    bp.curvatures = es.eigenvalues(); // ascending
    bp.mean_curvature = bp.curvatures.mean();
}

inline std::pair<Vector, double> curvature_at(const DomainSpec& domain,
                                              const Vector& q) {
    BoundaryPoint bp;
    bp.q = q;
    fill_frame_and_curvature(domain, bp);
    return {bp.curvatures, bp.mean_curvature};
}

/// Newton projection along grad(phi) to |phi| < 1e-12, then frame and
/// curvature fill-in.
inline BoundaryPoint project_to_boundary(const DomainSpec& domain, Vector x) {
    for (int it = 0; it < 50; ++it) {
        double v = domain.phi_at(x);
        if (std::fabs(v) < 1e-12) {
            BoundaryPoint bp;
            bp.q = std::move(x);
            fill_frame_and_curvature(domain, bp);
            return bp;
        }
        Vector g = domain.grad_phi(x);
        double g2 = g.squaredNorm();
        if (!(g2 > 1e-24))
            throw NumericalError("project_to_boundary: vanishing gradient");
        x -= (v / g2) * g;
    }
    throw NumericalError("project_to_boundary: no convergence in 50 "
                         "iterations");
}

/// Step along a tangent vector and re-project.
inline BoundaryPoint tangent_step(const DomainSpec& domain,
                                  const BoundaryPoint& q, const Vector& v,
                                  double t) {
    return project_to_boundary(domain, q.q + t * v);
}

/// Quasi-uniform boundary sample: low-discrepancy directions from an
/// interior point, first boundary hit by bisection, Newton-polished.
/// Deterministic for a fixed seed.
inline std::vector<BoundaryPoint> sample_boundary(const DomainSpec& domain,
                                                  int n,
                                                  std::uint64_t seed = 0) {
    if (n < 1) throw PreconditionError("sample_boundary: n >= 1");
    Vector c = domain.interior_point();
    double t_max = domain.diameter();
    std::vector<BoundaryPoint> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        auto dirv = halton_direction(domain.dimension(),
                                     static_cast<std::uint64_t>(i),
                                     seed * 7919ull);
        Vector dir = Eigen::Map<const Vector>(dirv.data(), dirv.size());
        // march to the first sign change, then bisect
        double t0 = 0.0, t1 = -1.0;
        const int steps = 64;
        for (int s = 1; s <= steps; ++s) {
            double t = t_max * s / steps;
            if (domain.phi_at(c + t * dir) >= 0.0) {
                t1 = t;
                t0 = t_max * (s - 1) / steps;
                break;
            }
        }
        if (t1 < 0.0) continue; // direction never left the box: skip
        for (int b = 0; b < 60; ++b) {
            double tm = 0.5 * (t0 + t1);
            (domain.phi_at(c + tm * dir) < 0.0 ? t0 : t1) = tm;
        }
        out.push_back(project_to_boundary(domain, c + t1 * dir));
    }
    if (out.empty())
        throw NumericalError("sample_boundary: no boundary hits");
    return out;
}

/// Sampled validation of the positivity / bounded-Hessian assumptions on
/// the closure of Omega.
struct AssumptionCertificate {
    double min_value = 0.0;
    double max_hessian_abs = 0.0;
    int samples = 0;
    bool passed = false;
};

inline AssumptionCertificate validate_assumptions(const PotentialField& field,
                                                  const DomainSpec& domain,
                                                  int n_samples = 100000) {
    if (field.dimension() != domain.dimension())
        throw PreconditionError("validate_assumptions: dimension mismatch");
    AssumptionCertificate cert;
    cert.min_value = std::numeric_limits<double>::infinity();
    int n = domain.dimension();
    static constexpr int primes[6] = {2, 3, 5, 7, 11, 13};
    auto visit = [&](const Vector& x) {
        double v = field.value(as_span(x));
        cert.min_value = std::min(cert.min_value, v);
        auto h = field.hessian(as_span(x));
        for (double e : h)
            cert.max_hessian_abs = std::max(cert.max_hessian_abs,
                                            std::fabs(e));
        ++cert.samples;
    };
    for (int i = 0; cert.samples < n_samples && i < 50 * n_samples; ++i) {
        Vector x(n);
        for (int k = 0; k < n; ++k)
            x[k] = domain.box_lo()[k] +
                   (domain.box_hi()[k] - domain.box_lo()[k]) *
                       halton(static_cast<std::uint64_t>(i + 1), primes[k % 6]);
        if (domain.phi_at(x) <= 0.0) visit(x);
    }
    // boundary closure
    for (const BoundaryPoint& bp :
         sample_boundary(domain, std::max(32, n_samples / 50)))
        visit(bp.q);
    cert.passed = cert.min_value > 0.0;
    return cert;
}

} // namespace spikelab
