#pragma once

// The auxiliary boundary functionals that locate spike concentration:
//   Gamma(Q) = V(Q)^{(p+1)/(p-1) - N/2} J(Q)^{N/2}
//   Sigma(Q) = 1/2 int_{x.nu<=0} J'(Q)[x] |grad U^Q|^2
//            + 1/2 int_{x.nu<=0} V'(Q)[x] (U^Q)^2
//            - 1/2 Bbar^Q J(Q) H(Q) - (1/2 - 1/(p+1)) Abar^Q H(Q)
// and the reduced form Sigma_bar for boundary-constant J, V, written with
// the constants k1..k4 (k4 < 0; the curvature term enters as +k4 H, which is
// the sign that makes Sigma_bar coincide with Sigma).

#include <Eigen/Dense>
#include <cmath>
#include <memory>
#include <optional>
#include <string>

#include "spikelab/errors.hpp"
#include "spikelab/expression.hpp"
#include "spikelab/geometry.hpp"
#include "spikelab/ground_state.hpp"
#include "spikelab/math_util.hpp"
#include "spikelab/scaled_state.hpp"

namespace spikelab {

/// Named constants of the expansion at a boundary point.
struct ExpansionConstants {
    double c0;     // (1/2 - 1/(p+1)) int_{R^N_+} Ubar^{p+1}
    double a_bar;  // Abar^Q
    double b_bar;  // Bbar^Q
    double c1;     // 1/2 Bbar + (1/2 - 1/(p+1)) Abar, of Ubar itself
    double c2;     // -1/2 int_{x.nu<=0} (x.nu) Ubar^2 dx  (> 0)
    double k1, k2, k3, k4;
};

/// Epsilon-free problem data: dimension, exponent, domain, coefficient
/// fields, and the ground-state profile with its cached radial moments.
class ProblemData {
public:
    ProblemData(int n, double p, DomainSpec domain, PotentialField j_field,
                PotentialField v_field,
                std::shared_ptr<const RadialProfile> profile)
        : n_(n), p_(p), domain_(std::move(domain)), j_(std::move(j_field)),
          v_(std::move(v_field)), profile_(std::move(profile)) {
        if (n_ >= 3 && !(p_ < double(n_ + 2) / double(n_ - 2)))
            throw PreconditionError("ProblemData: supercritical exponent");
        if (profile_->dimension != n_ || profile_->exponent != p_)
            throw PreconditionError("ProblemData: profile does not match "
                                    "(N, p)");
        if (j_.dimension() != n_ || v_.dimension() != n_)
            throw PreconditionError("ProblemData: field dimension mismatch");
        // radial moments of Ubar reused by every functional below
        m_up1_base_ = detail::r_power_integral(*profile_, p_ + 1.0, 0,
                                               n_ - 1.0);
        m_u2_n_ = detail::r_power_integral(*profile_, 2.0, 0, double(n_));
        m_grad2_n_ = detail::r_power_integral(*profile_, 0.0, 2, double(n_));
        m_up1_n_ = detail::r_power_integral(*profile_, p_ + 1.0, 0,
                                            double(n_));
        m_u2_nm2_ = detail::r_power_integral(*profile_, 2.0, 0, n_ - 2.0);
    }

    /// Solve the ground state and assemble problem data in one step.
    static ProblemData make(int n, double p, DomainSpec domain,
                            PotentialField j_field, PotentialField v_field,
                            double gs_tol = 1e-12) {
        auto prof = std::make_shared<RadialProfile>(
            solve_ground_state(n, p, gs_tol));
        return ProblemData(n, p, std::move(domain), std::move(j_field),
                           std::move(v_field), std::move(prof));
    }

    int dimension() const { return n_; }
    double exponent() const { return p_; }
    const DomainSpec& domain() const { return domain_; }
    const PotentialField& j_field() const { return j_; }
    const PotentialField& v_field() const { return v_; }
    const RadialProfile& profile() const { return *profile_; }
    std::shared_ptr<const RadialProfile> profile_ptr() const {
        return profile_;
    }

    double j_at(const Vector& x) const { return j_.value(as_span(x)); }
    double v_at(const Vector& x) const { return v_.value(as_span(x)); }
    Vector grad_j(const Vector& x) const { return to_vec(j_.gradient(as_span(x))); }
    Vector grad_v(const Vector& x) const { return to_vec(v_.gradient(as_span(x))); }

    ScaledGroundState state_at(const BoundaryPoint& q) const {
        return ScaledGroundState(profile_, q, j_at(q.q), v_at(q.q));
    }

    /// Relative variation of a field over boundary samples.
    double boundary_variation(const PotentialField& f) const {
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (const BoundaryPoint& bp : boundary_probe()) {
            double v = f.value(as_span(bp.q));
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        return (hi - lo) / std::max({std::fabs(hi), std::fabs(lo), 1e-300});
    }

    double j_boundary_variation() const {
        if (!jvar_cache_) jvar_cache_ = boundary_variation(j_);
        return *jvar_cache_;
    }
    double v_boundary_variation() const {
        if (!vvar_cache_) vvar_cache_ = boundary_variation(v_);
        return *vvar_cache_;
    }
    double boundary_variation_of_gamma() const {
        if (!gvar_cache_) {
            double e_v = (p_ + 1.0) / (p_ - 1.0) - 0.5 * n_;
            double lo = std::numeric_limits<double>::infinity(), hi = -lo;
            for (const BoundaryPoint& bp : boundary_probe()) {
                double g = std::pow(v_.value(as_span(bp.q)), e_v) *
                           std::pow(j_.value(as_span(bp.q)), 0.5 * n_);
                lo = std::min(lo, g);
                hi = std::max(hi, g);
            }
            gvar_cache_ =
                (hi - lo) / std::max({std::fabs(hi), std::fabs(lo), 1e-300});
        }
        return *gvar_cache_;
    }

    /// True when both J and V vary on the boundary by less than the shared
    /// detection threshold (1e-8 relative).
    bool boundary_constant_coefficients() const {
        return j_boundary_variation() < bc_threshold &&
               v_boundary_variation() < bc_threshold;
    }

    static constexpr double bc_threshold = 1e-8;

    // cached radial moments of Ubar
    double m_up1_base() const { return m_up1_base_; } // r^{N-1} Ubar^{p+1}
    double m_u2_n() const { return m_u2_n_; }         // r^N Ubar^2
    double m_grad2_n() const { return m_grad2_n_; }   // r^N Ubar'^2
    double m_up1_n() const { return m_up1_n_; }       // r^N Ubar^{p+1}
    double m_u2_nm2() const { return m_u2_nm2_; }     // r^{N-2} Ubar^2

private:
    static Vector to_vec(const std::vector<double>& v) {
        return Eigen::Map<const Vector>(v.data(), v.size());
    }
    const std::vector<BoundaryPoint>& boundary_probe() const {
        if (probe_.empty()) probe_ = sample_boundary(domain_, 256, 1);
        return probe_;
    }

    int n_;
    double p_;
    DomainSpec domain_;
    PotentialField j_, v_;
    std::shared_ptr<const RadialProfile> profile_;
    double m_up1_base_, m_u2_n_, m_grad2_n_, m_up1_n_, m_u2_nm2_;
    mutable std::vector<BoundaryPoint> probe_;
    mutable std::optional<double> jvar_cache_, vvar_cache_, gvar_cache_;
};

inline double gamma_exponent_v(int n, double p) {
    return (p + 1.0) / (p - 1.0) - 0.5 * n;
}

/// Gamma(Q) = V^{(p+1)/(p-1) - N/2} J^{N/2}.
inline double gamma_value(const ProblemData& data, const BoundaryPoint& q) {
    double jv = data.j_at(q.q), vv = data.v_at(q.q);
    return std::pow(vv, gamma_exponent_v(data.dimension(), data.exponent())) *
           std::pow(jv, 0.5 * data.dimension());
}

/// Tangential gradient of Gamma at Q (ambient coordinates, in the span of
/// the tangent frame), by the chain rule through grad J and grad V.
inline Vector gamma_tangential_gradient(const ProblemData& data,
                                        const BoundaryPoint& q) {
    double jv = data.j_at(q.q), vv = data.v_at(q.q);
    double g = gamma_value(data, q);
    double ev = gamma_exponent_v(data.dimension(), data.exponent());
    Vector full = g * (ev / vv * data.grad_v(q.q) +
                       0.5 * data.dimension() / jv * data.grad_j(q.q));
    Vector tang = Vector::Zero(q.q.size());
    for (int i = 0; i < q.frame.cols(); ++i)
        tang += q.frame.col(i).dot(full) * q.frame.col(i);
    return tang;
}

/// Sigma(Q) assembled from half-space first moments, boundary-trace moments
/// and the mean curvature.
inline double sigma_value(const ProblemData& data, const BoundaryPoint& q) {
    ScaledGroundState state = data.state_at(q);
    auto [a_bar, b_bar] = state.boundary_trace_moments();
    double p = data.exponent();
    double jterm = 0.5 * state.halfspace_linear_moment(
                             data.grad_j(q.q), HalfspaceIntegrand::GRAD_SQ);
    double vterm = 0.5 * state.halfspace_linear_moment(
                             data.grad_v(q.q), HalfspaceIntegrand::U_SQ);
    return jterm + vterm -
           0.5 * b_bar * state.j_value() * q.mean_curvature -
           (0.5 - 1.0 / (p + 1.0)) * a_bar * q.mean_curvature;
}

/// Constants of the expansion at Q. c1 and c2 are the Ubar-based constants
/// of the boundary-constant example; k1..k4 use C_J = J(Q), C_V = V(Q).
inline ExpansionConstants constants(const ProblemData& data,
                                    const BoundaryPoint& q) {
    int n = data.dimension();
    double p = data.exponent();
    double cj = data.j_at(q.q), cv = data.v_at(q.q);
    ExpansionConstants out{};
    double energy_factor = 0.5 - 1.0 / (p + 1.0);
    out.c0 = energy_factor * 0.5 * unit_sphere_area(n) * data.m_up1_base();

    double alpha = std::pow(cv, 1.0 / (p - 1.0));
    double beta = std::sqrt(cv / cj);
    double ring = unit_sphere_area(n - 1);
    out.a_bar = 0.5 * ring * std::pow(alpha, p + 1.0) *
                std::pow(beta, -(n + 1.0)) * data.m_up1_n();
    out.b_bar = 0.25 * (n - 1.0) * ring * alpha * alpha *
                std::pow(beta, -(n - 1.0)) * data.m_u2_nm2();

    // Ubar-based constants (J = V = 1 normalization)
    double a_unit = 0.5 * ring * data.m_up1_n();
    double b_unit = 0.25 * (n - 1.0) * ring * data.m_u2_nm2();
    out.c1 = 0.5 * b_unit + energy_factor * a_unit;
    out.c2 = -0.5 * halfspace_cosine_moment(n) * data.m_u2_n();

    out.k1 = std::pow(cv, (p + 1.0) / (p - 1.0)) / (2.0 * cj);
    out.k2 = std::sqrt(cv / cj);
    out.k3 = 0.5 * std::pow(cv, 2.0 / (p - 1.0));
    out.k4 = -0.5 * out.b_bar * cj - energy_factor * out.a_bar;
    return out;
}

/// Reusable Sigma_bar evaluator for boundary-constant coefficients; the
/// k-constants and radial moments are captured once. Throws on construction
/// when J or V varies on the boundary.
class SigmaBarEvaluator {
public:
    explicit SigmaBarEvaluator(const ProblemData& data) : data_(&data) {
        if (data.j_boundary_variation() >= ProblemData::bc_threshold)
            throw PreconditionError(
                "sigma_bar: J is not constant on the boundary (relative "
                "variation above 1e-8); use sigma instead");
        if (data.v_boundary_variation() >= ProblemData::bc_threshold)
            throw PreconditionError(
                "sigma_bar: V is not constant on the boundary (relative "
                "variation above 1e-8); use sigma instead");
        BoundaryPoint probe = sample_boundary(data.domain(), 1, 1)[0];
        ExpansionConstants k = constants(data, probe);
        int n = data.dimension();
        double cos_m = halfspace_cosine_moment(n);
        double k2_pow = std::pow(k.k2, -(n + 1.0));
        j_coef_ = k.k1 * cos_m * k2_pow * data.m_grad2_n();
        v_coef_ = k.k3 * cos_m * k2_pow * data.m_u2_n();
        k4_ = k.k4;
    }

    double operator()(const BoundaryPoint& q) const {
        return j_coef_ * data_->grad_j(q.q).dot(q.nu) +
               v_coef_ * data_->grad_v(q.q).dot(q.nu) +
               k4_ * q.mean_curvature;
    }

private:
    const ProblemData* data_;
    double j_coef_, v_coef_, k4_;
};

/// Sigma_bar(Q); see SigmaBarEvaluator for the boundary-constancy
/// precondition.
inline double sigma_bar_value(const ProblemData& data,
                              const BoundaryPoint& q) {
    return SigmaBarEvaluator(data)(q);
}

} // namespace spikelab
