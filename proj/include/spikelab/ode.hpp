#pragma once

// Adaptive Dormand-Prince 5(4) integrator for small fixed-size systems.
// Supports exact landing on requested output points and an observer that can
// stop the integration (event classification is done by the caller on the
// accepted states).

#include <array>
#include <cmath>
#include <functional>
#include <stdexcept>

namespace spikelab {

struct OdeOptions {
    double abs_tol = 1e-13;
    double rel_tol = 1e-12;
    double initial_step = 1e-4;
    double max_step = 0.5;
};

/// Thrown when the step size underflows; carries the last state reached.
class OdeStepUnderflow : public std::runtime_error {
public:
    OdeStepUnderflow(double t, std::string what)
        : std::runtime_error(std::move(what)), t_last(t) {}
    double t_last;
};

namespace detail {

template <std::size_t Dim> using OdeState = std::array<double, Dim>;

template <std::size_t Dim, typename Rhs> class DormandPrince {
public:
    DormandPrince(Rhs rhs, OdeOptions opts) : rhs_(rhs), opts_(opts) {}

    /// Integrate from (t, y) to t_end. The observer is called after every
    /// accepted step as observer(t, y, dydt); returning false stops the run.
    /// Returns the final time reached.
    template <typename Observer>
    double run(double t, OdeState<Dim>& y, double t_end, Observer&& observer) {
        OdeState<Dim> k1 = rhs_(t, y);
        double h = std::min(opts_.initial_step, t_end - t);
        while (t < t_end) {
            h = std::min({h, opts_.max_step, t_end - t});
            if (!(h > std::fabs(t) * 1e-15 + 1e-300))
                throw OdeStepUnderflow(t, "ode: step size underflow");

            OdeState<Dim> k2, k3, k4, k5, k6, k7, y5, y4;
            stage(y, k1, h, {0.2}, k2, t + 0.2 * h);
            stage(y, {&k1, &k2}, h, {3.0 / 40, 9.0 / 40}, k3, t + 0.3 * h);
            stage(y, {&k1, &k2, &k3}, h, {44.0 / 45, -56.0 / 15, 32.0 / 9},
                  k4, t + 0.8 * h);
            stage(y, {&k1, &k2, &k3, &k4}, h,
                  {19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561,
                   -212.0 / 729},
                  k5, t + 8.0 / 9.0 * h);
            stage(y, {&k1, &k2, &k3, &k4, &k5}, h,
                  {9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176,
                   -5103.0 / 18656},
                  k6, t + h);
            for (std::size_t i = 0; i < Dim; ++i)
                y5[i] = y[i] + h * (35.0 / 384 * k1[i] + 500.0 / 1113 * k3[i] +
                                    125.0 / 192 * k4[i] -
                                    2187.0 / 6784 * k5[i] + 11.0 / 84 * k6[i]);
            k7 = rhs_(t + h, y5);
            for (std::size_t i = 0; i < Dim; ++i)
                y4[i] = y[i] +
                        h * (5179.0 / 57600 * k1[i] + 7571.0 / 16695 * k3[i] +
                             393.0 / 640 * k4[i] - 92097.0 / 339200 * k5[i] +
                             187.0 / 2100 * k6[i] + 1.0 / 40 * k7[i]);

            double err = 0.0;
            for (std::size_t i = 0; i < Dim; ++i) {
                double scale =
                    opts_.abs_tol +
                    opts_.rel_tol * std::max(std::fabs(y[i]), std::fabs(y5[i]));
                double e = (y5[i] - y4[i]) / scale;
                err += e * e;
            }
            err = std::sqrt(err / Dim);

            if (err <= 1.0) {
                t += h;
                y = y5;
                k1 = k7; // FSAL
                if (!observer(t, y, k1)) return t;
            }
            double factor = 0.9 * std::pow(std::max(err, 1e-10), -0.2);
            h *= std::clamp(factor, 0.2, 5.0);
        }
        return t;
    }

private:
    void stage(const OdeState<Dim>& y, const OdeState<Dim>& k1, double h,
               std::array<double, 1> a, OdeState<Dim>& out, double t_stage) {
        OdeState<Dim> tmp;
        for (std::size_t i = 0; i < Dim; ++i) tmp[i] = y[i] + h * a[0] * k1[i];
        out = rhs_(t_stage, tmp);
    }

    void stage(const OdeState<Dim>& y,
               std::initializer_list<const OdeState<Dim>*> ks, double h,
               std::initializer_list<double> as, OdeState<Dim>& out,
               double t_stage) {
        OdeState<Dim> tmp = y;
        auto ai = as.begin();
        for (const OdeState<Dim>* k : ks) {
            for (std::size_t i = 0; i < Dim; ++i) tmp[i] += h * (*ai) * (*k)[i];
            ++ai;
        }
        out = rhs_(t_stage, tmp);
    }

    Rhs rhs_;
    OdeOptions opts_;
};

} // namespace detail

/// Convenience front end: integrate y' = rhs(t, y) from t0 to t1, calling
/// observer after each accepted step. Observer returning false stops early.
template <std::size_t Dim, typename Rhs, typename Observer>
double integrate_ode(Rhs&& rhs, double t0, std::array<double, Dim>& y,
                     double t1, const OdeOptions& opts, Observer&& observer) {
    detail::DormandPrince<Dim, Rhs&> stepper(rhs, opts);
    return stepper.run(t0, y, t1, observer);
}

} // namespace spikelab
