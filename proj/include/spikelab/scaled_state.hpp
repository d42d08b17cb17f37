#pragma once

// The anchored ground state U^Q(x) = V(Q)^{1/(p-1)} Ubar(x sqrt(V(Q)/J(Q)))
// and the half-space / boundary-trace integrals of it that the energy
// expansion needs. Every integral over R^N or a half space reduces to a 1-D
// radial moment of Ubar times an angular constant, so the only quadrature
// anywhere is the one over the profile grid.

#include <Eigen/Dense>
#include <cmath>
#include <memory>

#include "spikelab/errors.hpp"
#include "spikelab/geometry.hpp"
#include "spikelab/ground_state.hpp"
#include "spikelab/math_util.hpp"

namespace spikelab {

enum class HalfspaceIntegrand { GRAD_SQ, U_SQ };

/// Immutable scaled ground state anchored at a boundary point.
class ScaledGroundState {
public:
    ScaledGroundState(std::shared_ptr<const RadialProfile> profile,
                      BoundaryPoint anchor, double j_q, double v_q)
        : profile_(std::move(profile)), anchor_(std::move(anchor)), j_(j_q),
          v_(v_q) {
        if (!profile_) throw PreconditionError("ScaledGroundState: profile");
        if (!(j_ > 0.0) || !(v_ > 0.0))
            throw PreconditionError(
                "ScaledGroundState: J(Q) and V(Q) must be positive");
        p_ = profile_->exponent;
        alpha_ = std::pow(v_, 1.0 / (p_ - 1.0));
        beta_ = std::sqrt(v_ / j_);
    }

    const RadialProfile& profile() const { return *profile_; }
    const BoundaryPoint& anchor() const { return anchor_; }
    int dimension() const { return profile_->dimension; }
    double exponent() const { return p_; }
    double amplitude() const { return alpha_; }
    double rate() const { return beta_; }
    double j_value() const { return j_; }
    double v_value() const { return v_; }

    /// U^Q at x (relative to the anchor).
    double evaluate(const Vector& x) const {
        return alpha_ * eval(*profile_, beta_ * x.norm());
    }
    double evaluate_radial(double r) const {
        return alpha_ * eval(*profile_, beta_ * r);
    }
    /// grad U^Q at x; zero at the origin by radial symmetry.
    Vector gradient(const Vector& x) const {
        double r = x.norm();
        if (r == 0.0) return Vector::Zero(x.size());
        return (alpha_ * beta_ * eval_deriv(*profile_, beta_ * r) / r) * x;
    }
    double radial_derivative(double r) const {
        return alpha_ * beta_ * eval_deriv(*profile_, beta_ * r);
    }

    /// Integral over the half space R^N_+ of (U^Q)^q, q > 1. By symmetry this
    /// is half the full-space integral, and the scaling is closed-form:
    /// alpha^q beta^{-N} * (1/2) |S^{N-1}| * int r^{N-1} Ubar^q dr.
    double halfspace_power_integral(double q) const {
        if (!(q > 1.0))
            throw PreconditionError("halfspace_power_integral: q > 1");
        int n = dimension();
        double radial = detail::r_power_integral(*profile_, q, 0, n - 1.0);
        return 0.5 * unit_sphere_area(n) * std::pow(alpha_, q) *
               std::pow(beta_, -n) * radial;
    }

    /// Integral over {x . nu(Q) <= 0} of (x . mu) g(x) dx with g radial
    /// (|grad U^Q|^2 or (U^Q)^2). The tangential part of mu integrates to
    /// zero by odd symmetry; the normal part reduces to the cosine moment
    /// a_N < 0 times a radial moment weighted by r^N.
    double halfspace_first_moment(const Vector& mu,
                                  HalfspaceIntegrand g) const {
        if (std::fabs(mu.norm() - 1.0) > 1e-12)
            throw PreconditionError(
                "halfspace_first_moment: mu must be a unit vector");
        return halfspace_linear_moment(mu, g);
    }

    /// Same as halfspace_first_moment but linear in w (no unit normalization);
    /// used with w = grad J(Q) or grad V(Q).
    double halfspace_linear_moment(const Vector& w,
                                   HalfspaceIntegrand g) const {
        int n = dimension();
        double cos_m = halfspace_cosine_moment(n);
        double radial;
        if (g == HalfspaceIntegrand::U_SQ)
            radial = alpha_ * alpha_ * std::pow(beta_, -(n + 1.0)) *
                     detail::r_power_integral(*profile_, 2.0, 0,
                                              static_cast<double>(n));
        else
            radial = alpha_ * alpha_ * std::pow(beta_, 1.0 - n) *
                     detail::r_power_integral(*profile_, 0.0, 2,
                                              static_cast<double>(n));
        return w.dot(anchor_.nu) * cos_m * radial;
    }

    /// Boundary-trace moments of Theorem 5.1:
    ///   Abar = 1/2 int_{R^{N-1}} [U^Q(x',0)]^{p+1} |x'|^2 dx'
    ///   Bbar = (N-1)/4 int_{R^{N-1}} [U^Q(x',0)]^2 dx'
    std::pair<double, double> boundary_trace_moments() const {
        int n = dimension();
        if (n < 2)
            throw PreconditionError("boundary_trace_moments: N >= 2");
        double ring = unit_sphere_area(n - 1);
        double a_bar = 0.5 * ring * std::pow(alpha_, p_ + 1.0) *
                       std::pow(beta_, -(n + 1.0)) *
                       detail::r_power_integral(*profile_, p_ + 1.0, 0,
                                                static_cast<double>(n));
        double b_bar = 0.25 * (n - 1.0) * ring * alpha_ * alpha_ *
                       std::pow(beta_, -(n - 1.0)) *
                       detail::r_power_integral(*profile_, 2.0, 0, n - 2.0);
        return {a_bar, b_bar};
    }

    /// Limit energy F^Q(U^Q) = (1/2 - 1/(p+1)) int_{R^N_+} (U^Q)^{p+1},
    /// which equals c0 * Gamma(Q).
    double limit_energy() const {
        return (0.5 - 1.0 / (p_ + 1.0)) * halfspace_power_integral(p_ + 1.0);
    }

private:
    std::shared_ptr<const RadialProfile> profile_;
    BoundaryPoint anchor_;
    double j_, v_, p_, alpha_ = 0.0, beta_ = 0.0;
};

} // namespace spikelab
