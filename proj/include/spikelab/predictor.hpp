#pragma once

// Locating and classifying boundary critical points of Gamma or Sigma_bar:
// multistart damped tangential Newton on the gradient, finite-difference
// boundary Hessians with step-halving verification, duplicate merging, and
// clustering of degenerate critical families (symmetry orbits like equators
// are flagged, not classified).

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "spikelab/auxiliary.hpp"
#include "spikelab/errors.hpp"
#include "spikelab/geometry.hpp"

namespace spikelab {

enum class BoundaryFunctional { GAMMA, SIGMA_BAR };
enum class CriticalKind { MIN, MAX, SADDLE, DEGENERATE };

inline const char* to_string(BoundaryFunctional f) {
    return f == BoundaryFunctional::GAMMA ? "GAMMA" : "SIGMA_BAR";
}
inline const char* to_string(CriticalKind k) {
    switch (k) {
    case CriticalKind::MIN: return "MIN";
    case CriticalKind::MAX: return "MAX";
    case CriticalKind::SADDLE: return "SADDLE";
    case CriticalKind::DEGENERATE: return "DEGENERATE";
    }
    return "?";
}

struct CriticalPointReport {
    BoundaryPoint location;
    BoundaryFunctional functional = BoundaryFunctional::GAMMA;
    double value = 0.0;
    double gradient_norm = 0.0;
    Vector hessian_eigenvalues; // tangential, ascending
    CriticalKind kind = CriticalKind::DEGENERATE;
    bool nondegenerate = false;
    bool tag_thm1a = false, tag_thm1b = false, tag_thm2 = false;
    bool converged = false;
    int iterations = 0;
    double hessian_check = 0.0; // step-halving discrepancy, max entry
    bool degenerate_family = false;
    int family_size = 1;
};

struct PredictorOptions {
    int n_starts = 100;
    std::uint64_t seed = 0;
    double stationarity_tol = 1e-9;
    double hessian_step = 1e-4;
    double gradient_step = 1e-5;
    int max_iterations = 200;
    double merge_radius_factor = 1e-5; // times the boundary diameter
};

struct ScanEntry {
    BoundaryPoint point;
    double value;
};

namespace detail {

struct BoundaryObjective {
    std::function<double(const BoundaryPoint&)> value;
    // exact tangential gradient in frame coordinates, when available
    std::function<Eigen::VectorXd(const BoundaryPoint&)> exact_gradient;
};

inline Eigen::VectorXd fd_gradient(const DomainSpec& domain,
                                   const BoundaryObjective& f,
                                   const BoundaryPoint& q, double h) {
    int m = static_cast<int>(q.frame.cols());
    Eigen::VectorXd g(m);
    for (int i = 0; i < m; ++i) {
        BoundaryPoint plus = tangent_step(domain, q, q.frame.col(i), h);
        BoundaryPoint minus = tangent_step(domain, q, q.frame.col(i), -h);
        g[i] = (f.value(plus) - f.value(minus)) / (2.0 * h);
    }
    return g;
}

inline Eigen::VectorXd objective_gradient(const DomainSpec& domain,
                                          const BoundaryObjective& f,
                                          const BoundaryPoint& q, double h) {
    if (f.exact_gradient) return f.exact_gradient(q);
    return fd_gradient(domain, f, q, h);
}

inline Eigen::MatrixXd fd_hessian(const DomainSpec& domain,
                                  const BoundaryObjective& f,
                                  const BoundaryPoint& q, double h) {
    int m = static_cast<int>(q.frame.cols());
    Eigen::MatrixXd hess(m, m);
    double f0 = f.value(q);
    for (int i = 0; i < m; ++i) {
        double fp = f.value(tangent_step(domain, q, q.frame.col(i), h));
        double fm = f.value(tangent_step(domain, q, q.frame.col(i), -h));
        hess(i, i) = (fp + fm - 2.0 * f0) / (h * h);
        for (int j = i + 1; j < m; ++j) {
            Vector dij = q.frame.col(i) + q.frame.col(j);
            Vector dmj = q.frame.col(i) - q.frame.col(j);
            double fpp = f.value(tangent_step(domain, q, dij, h));
            double fmm = f.value(tangent_step(domain, q, dij, -h));
            double fpm = f.value(tangent_step(domain, q, dmj, h));
            double fmp = f.value(tangent_step(domain, q, dmj, -h));
            hess(i, j) = hess(j, i) =
                (fpp + fmm - fpm - fmp) / (4.0 * h * h);
        }
    }
    return hess;
}

inline CriticalPointReport
refine_on_objective(const ProblemData& data, const BoundaryObjective& f,
                    BoundaryFunctional func, const BoundaryPoint& start,
                    const PredictorOptions& opts) {
    const DomainSpec& domain = data.domain();
    double len = domain.diameter() / 3.0; // length scale of the boundary
    double h_g = opts.gradient_step * std::max(1.0, len);
    BoundaryPoint q = start;
    Eigen::VectorXd g = objective_gradient(domain, f, q, h_g);
    double mu = 1e-3;
    int it = 0;
    bool stationary = g.norm() <= opts.stationarity_tol;
    for (; it < opts.max_iterations && !stationary; ++it) {
        Eigen::MatrixXd hess = fd_hessian(domain, f, q, opts.hessian_step);
        bool moved = false;
        for (int attempt = 0; attempt < 12; ++attempt) {
            Eigen::MatrixXd damped = hess;
            double scale = std::max(1.0, hess.cwiseAbs().maxCoeff());
            damped.diagonal().array() += mu * scale;
            Eigen::VectorXd delta = damped.ldlt().solve(-g);
            if (!delta.allFinite()) {
                mu *= 8.0;
                continue;
            }
            double cap = 0.25 * std::max(1.0, len);
            if (delta.norm() > cap) delta *= cap / delta.norm();
            Vector step = Vector::Zero(q.q.size());
            for (int i = 0; i < q.frame.cols(); ++i)
                step += delta[i] * q.frame.col(i);
            BoundaryPoint trial = project_to_boundary(domain, q.q + step);
            Eigen::VectorXd g_trial = objective_gradient(domain, f, trial, h_g);
            if (g_trial.norm() < g.norm()) {
                q = trial;
                g = g_trial;
                mu = std::max(mu / 3.0, 1e-12);
                moved = true;
                break;
            }
            mu *= 8.0;
        }
        if (g.norm() <= opts.stationarity_tol) {
            stationary = true;
            break;
        }
        if (!moved) break; // stuck: report as-is below
    }

    CriticalPointReport rep;
    rep.location = q;
    rep.functional = func;
    rep.value = f.value(q);
    rep.gradient_norm = g.norm();
    rep.iterations = it;
    rep.converged = stationary;

    // classification Hessian with step-halving verification
    double h = opts.hessian_step * std::max(1.0, len);
    Eigen::MatrixXd h1 = fd_hessian(domain, f, q, h);
    Eigen::MatrixXd h2 = fd_hessian(domain, f, q, 0.5 * h);
    rep.hessian_check = (h1 - h2).cwiseAbs().maxCoeff();
    Eigen::MatrixXd hess = (4.0 * h2 - h1) / 3.0; // step-halving extrapolation
    hess = 0.5 * (hess + hess.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(hess);
    rep.hessian_eigenvalues = es.eigenvalues();

    double lam_max = rep.hessian_eigenvalues.cwiseAbs().maxCoeff();
    double tol_deg = 1e-6 * std::max(1.0, lam_max);
    int pos = 0, neg = 0, zero = 0;
    for (int i = 0; i < rep.hessian_eigenvalues.size(); ++i) {
        double l = rep.hessian_eigenvalues[i];
        if (l > tol_deg) ++pos;
        else if (l < -tol_deg) ++neg;
        else ++zero;
    }
    rep.nondegenerate = zero == 0;
    if (!rep.converged || zero > 0)
        rep.kind = CriticalKind::DEGENERATE;
    else if (neg == 0)
        rep.kind = CriticalKind::MIN;
    else if (pos == 0)
        rep.kind = CriticalKind::MAX;
    else
        rep.kind = CriticalKind::SADDLE;

    if (rep.converged && rep.nondegenerate) {
        if (func == BoundaryFunctional::GAMMA) {
            rep.tag_thm1a = true;
            rep.tag_thm1b = rep.kind == CriticalKind::MIN ||
                            rep.kind == CriticalKind::MAX;
        } else {
            rep.tag_thm2 = rep.kind == CriticalKind::MIN ||
                           rep.kind == CriticalKind::MAX;
        }
    }
    return rep;
}

inline BoundaryObjective make_objective(const ProblemData& data,
                                        BoundaryFunctional func) {
    BoundaryObjective f;
    if (func == BoundaryFunctional::GAMMA) {
        double variation = data.boundary_variation_of_gamma();
        if (variation < ProblemData::bc_threshold)
            throw PreconditionError(
                "refine_critical_point: Gamma is constant on the boundary "
                "(variation " +
                std::to_string(variation) +
                " < 1e-8); concentration is curvature-driven here -- call "
                "the predictor with SIGMA_BAR");
        f.value = [&data](const BoundaryPoint& q) {
            return gamma_value(data, q);
        };
        f.exact_gradient = [&data](const BoundaryPoint& q) {
            Vector full = gamma_tangential_gradient(data, q);
            Eigen::VectorXd g(q.frame.cols());
            for (int i = 0; i < q.frame.cols(); ++i)
                g[i] = q.frame.col(i).dot(full);
            return g;
        };
    } else {
        auto eval = std::make_shared<SigmaBarEvaluator>(data);
        f.value = [eval](const BoundaryPoint& q) { return (*eval)(q); };
    }
    return f;
}

} // namespace detail

/// Evaluate the chosen functional on a quasi-uniform boundary sample.
inline std::vector<ScanEntry> scan_landscape(const ProblemData& data,
                                             BoundaryFunctional func, int n,
                                             std::uint64_t seed = 0) {
    detail::BoundaryObjective f = detail::make_objective(data, func);
    std::vector<ScanEntry> out;
    out.reserve(static_cast<std::size_t>(n));
    for (BoundaryPoint& bp : sample_boundary(data.domain(), n, seed)) {
        double v = f.value(bp);
        out.push_back({std::move(bp), v});
    }
    return out;
}

/// Refine a single start to a stationary point of the functional and
/// classify it. Non-convergence is reported, not thrown.
inline CriticalPointReport
refine_critical_point(const ProblemData& data, BoundaryFunctional func,
                      const BoundaryPoint& start,
                      const PredictorOptions& opts = {}) {
    return detail::refine_on_objective(
        data, detail::make_objective(data, func), func, start, opts);
}

/// End-to-end prediction: dispatch on the boundary variation of Gamma,
/// multistart refinement, duplicate merging, degenerate-family clustering,
/// deterministic ordering (value descending, then lexicographic).
inline std::vector<CriticalPointReport>
predict_concentration(const ProblemData& data,
                      const PredictorOptions& opts = {}) {
    BoundaryFunctional func =
        data.boundary_variation_of_gamma() >= ProblemData::bc_threshold
            ? BoundaryFunctional::GAMMA
            : BoundaryFunctional::SIGMA_BAR;
    detail::BoundaryObjective f = detail::make_objective(data, func);

    std::vector<BoundaryPoint> starts =
        sample_boundary(data.domain(), opts.n_starts, opts.seed);
    // boundary diameter from the start sample
    Vector lo = starts[0].q, hi = starts[0].q;
    for (const BoundaryPoint& s : starts) {
        lo = lo.cwiseMin(s.q);
        hi = hi.cwiseMax(s.q);
    }
    double diam = (hi - lo).norm();
    double merge_radius = opts.merge_radius_factor * diam;

    std::vector<CriticalPointReport> found;
    for (const BoundaryPoint& s : starts) {
        CriticalPointReport rep =
            detail::refine_on_objective(data, f, func, s, opts);
        if (rep.converged) found.push_back(std::move(rep));
    }

    // merge duplicates (keep the smallest gradient norm)
    std::vector<CriticalPointReport> merged;
    for (CriticalPointReport& rep : found) {
        bool absorbed = false;
        for (CriticalPointReport& kept : merged) {
            if ((kept.location.q - rep.location.q).norm() <= merge_radius) {
                if (rep.gradient_norm < kept.gradient_norm) kept = rep;
                absorbed = true;
                break;
            }
        }
        if (!absorbed) merged.push_back(std::move(rep));
    }

    // cluster degenerate reports with equal values into families
    std::vector<CriticalPointReport> out;
    std::vector<bool> used(merged.size(), false);
    for (std::size_t i = 0; i < merged.size(); ++i) {
        if (used[i]) continue;
        if (merged[i].kind != CriticalKind::DEGENERATE) {
            out.push_back(merged[i]);
            continue;
        }
        std::vector<std::size_t> cluster{i};
        double vtol = 1e-6 * std::max(1.0, std::fabs(merged[i].value));
        for (std::size_t j = i + 1; j < merged.size(); ++j) {
            if (used[j] || merged[j].kind != CriticalKind::DEGENERATE)
                continue;
            if (std::fabs(merged[j].value - merged[i].value) <= vtol) {
                cluster.push_back(j);
                used[j] = true;
            }
        }
        CriticalPointReport rep = merged[cluster[0]];
        for (std::size_t j : cluster)
            if (merged[j].gradient_norm < rep.gradient_norm)
                rep = merged[j];
        rep.degenerate_family = cluster.size() > 1;
        rep.family_size = static_cast<int>(cluster.size());
        out.push_back(std::move(rep));
    }

    std::sort(out.begin(), out.end(),
              [](const CriticalPointReport& a, const CriticalPointReport& b) {
                  if (a.value != b.value) return a.value > b.value;
                  for (int i = 0; i < a.location.q.size(); ++i)
                      if (a.location.q[i] != b.location.q[i])
                          return a.location.q[i] < b.location.q[i];
                  return false;
              });
    return out;
}

/// Post-hoc invariant check used by the tests and the CLI.
inline bool report_satisfies_invariants(const CriticalPointReport& rep,
                                        double stationarity_tol = 1e-9) {
    if (rep.converged && rep.gradient_norm > stationarity_tol) return false;
    double lam_max =
        rep.hessian_eigenvalues.size()
            ? rep.hessian_eigenvalues.cwiseAbs().maxCoeff()
            : 0.0;
    double tol_deg = 1e-6 * std::max(1.0, lam_max);
    int pos = 0, neg = 0, zero = 0;
    for (int i = 0; i < rep.hessian_eigenvalues.size(); ++i) {
        double l = rep.hessian_eigenvalues[i];
        if (l > tol_deg) ++pos;
        else if (l < -tol_deg) ++neg;
        else ++zero;
    }
    bool nondeg = zero == 0;
    if (nondeg != rep.nondegenerate) return false;
    CriticalKind expect;
    if (!rep.converged || zero > 0) expect = CriticalKind::DEGENERATE;
    else if (neg == 0) expect = CriticalKind::MIN;
    else if (pos == 0) expect = CriticalKind::MAX;
    else expect = CriticalKind::SADDLE;
    return expect == rep.kind;
}

} // namespace spikelab
