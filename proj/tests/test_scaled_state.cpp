#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "helpers.hpp"
#include "spikelab/scaled_state.hpp"

using namespace spikelab;
using Catch::Approx;
using testutil::vec3;

namespace {

ScaledGroundState make_state(int n, double p, double jq, double vq) {
    DomainSpec ball = DomainSpec::ball(Vector::Zero(n), 1.0);
    Vector x = Vector::Zero(n);
    x[0] = 1.0;
    BoundaryPoint bp = project_to_boundary(ball, x);
    return ScaledGroundState(testutil::cached_profile(n, p), bp, jq, vq);
}

// direct 3-D tensor-product quadrature over the half space {x . nu <= 0},
// box half-width L, composite Gauss cells
double brute_halfspace_first_moment(const ScaledGroundState& state,
                                    const Vector& mu, bool grad_sq,
                                    double L, int cells, int order) {
    QuadratureRule rule = gauss_legendre(order);
    const Vector& nu = state.anchor().nu;
    double h = L / cells;
    double total = 0.0;
    Vector x(3);
    for (int ci = 0; ci < 2 * cells; ++ci)
        for (int cj = 0; cj < 2 * cells; ++cj)
            for (int ck = 0; ck < 2 * cells; ++ck) {
                double acc = 0.0;
                for (std::size_t a = 0; a < rule.nodes.size(); ++a)
                    for (std::size_t b = 0; b < rule.nodes.size(); ++b)
                        for (std::size_t c = 0; c < rule.nodes.size(); ++c) {
                            x[0] = -L + (ci + 0.5 * (1 + rule.nodes[a])) * h;
                            x[1] = -L + (cj + 0.5 * (1 + rule.nodes[b])) * h;
                            x[2] = -L + (ck + 0.5 * (1 + rule.nodes[c])) * h;
                            if (x.dot(nu) > 0.0) continue;
                            double g;
                            if (grad_sq) {
                                Vector gr = state.gradient(x);
                                g = gr.squaredNorm();
                            } else {
                                double u = state.evaluate(x);
                                g = u * u;
                            }
                            acc += rule.weights[a] * rule.weights[b] *
                                   rule.weights[c] * x.dot(mu) * g;
                        }
                total += acc * h * h * h / 8.0;
            }
    return total;
}

} // namespace

TEST_CASE("scaled state reduces to Ubar for unit coefficients") {
    auto state = make_state(3, 3.0, 1.0, 1.0);
    auto prof = testutil::cached_profile(3, 3.0);
    CHECK(state.amplitude() == Approx(1.0));
    CHECK(state.rate() == Approx(1.0));
    for (double r : {0.0, 0.7, 2.0, 8.0})
        CHECK(state.evaluate_radial(r) == Approx(eval(*prof, r)).margin(0.0));
}

TEST_CASE("amplitude scaling, gradient symmetry, max at origin") {
    // V = 4, J = 1, p = 3: alpha = 4^{1/2} = 2
    auto state = make_state(3, 3.0, 1.0, 4.0);
    auto prof = testutil::cached_profile(3, 3.0);
    CHECK(state.evaluate(Vector::Zero(3)) ==
          Approx(2.0 * eval(*prof, 0.0)).epsilon(1e-14));

    Vector x = vec3(0.3, -0.2, 0.5);
    Vector gp = state.gradient(x), gm = state.gradient(-x);
    CHECK((gp + gm).norm() < 1e-14);
    CHECK(state.gradient(Vector::Zero(3)).norm() == 0.0);

    // evaluate(0) is the global max
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> dist(-5.0, 5.0);
    double u0 = state.evaluate(Vector::Zero(3));
    for (int s = 0; s < 100; ++s) {
        Vector y = vec3(dist(rng), dist(rng), dist(rng));
        REQUIRE(state.evaluate(y) < u0);
    }
}

TEST_CASE("half-space power integral and the closed-form scaling law") {
    auto base = make_state(3, 3.0, 1.0, 1.0);
    double p1 = 4.0; // p + 1
    double base_integral = base.halfspace_power_integral(p1);

    // half of full space by symmetry
    auto prof = testutil::cached_profile(3, 3.0);
    double full = unit_sphere_area(3) * radial_moment(*prof, 4.0, 0, 0);
    CHECK(base_integral == Approx(0.5 * full).epsilon(1e-12));

    // V = 1, J = 2: factor J^{N/2} = 2^{3/2}
    auto j2 = make_state(3, 3.0, 2.0, 1.0);
    CHECK(j2.halfspace_power_integral(p1) ==
          Approx(std::pow(2.0, 1.5) * base_integral).epsilon(1e-12));

    // general scaling: V^{(p+1)/(p-1) - N/2} J^{N/2}
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> dist(0.4, 3.0);
    for (int s = 0; s < 20; ++s) {
        double jq = dist(rng), vq = dist(rng);
        auto st = make_state(3, 3.0, jq, vq);
        double expect = std::pow(vq, 2.0 - 1.5) * std::pow(jq, 1.5) *
                        base_integral;
        REQUIRE(st.halfspace_power_integral(p1) ==
                Approx(expect).epsilon(1e-8));
    }

    // joint scaling (J,V) -> (sJ, sV) multiplies by s^{q/(p-1)}
    auto s2 = make_state(3, 3.0, 2.0 * 1.3, 2.0 * 0.9);
    auto s1 = make_state(3, 3.0, 1.3, 0.9);
    CHECK(s2.rate() == Approx(s1.rate()).epsilon(1e-14));
    CHECK(s2.halfspace_power_integral(p1) ==
          Approx(std::pow(2.0, p1 / 2.0) * s1.halfspace_power_integral(p1))
              .epsilon(1e-12));

    CHECK_THROWS_AS(base.halfspace_power_integral(0.5), PreconditionError);
}

TEST_CASE("tangential first moments vanish") {
    auto state = make_state(3, 3.0, 1.5, 0.8);
    const Vector& nu = state.anchor().nu;
    std::mt19937_64 rng(29);
    std::normal_distribution<double> gauss;
    for (int s = 0; s < 20; ++s) {
        Vector v = vec3(gauss(rng), gauss(rng), gauss(rng));
        Vector t = (v - v.dot(nu) * nu).normalized();
        REQUIRE(std::fabs(state.halfspace_first_moment(
                    t, HalfspaceIntegrand::U_SQ)) < 1e-10);
        REQUIRE(std::fabs(state.halfspace_first_moment(
                    t, HalfspaceIntegrand::GRAD_SQ)) < 1e-10);
    }
    // linearity in the normal component
    Vector mix = (0.6 * nu + 0.8 * state.anchor().frame.col(0)).normalized();
    double full = state.halfspace_first_moment(nu, HalfspaceIntegrand::U_SQ);
    double part = state.halfspace_first_moment(mix, HalfspaceIntegrand::U_SQ);
    CHECK(part == Approx(mix.dot(nu) * full).epsilon(1e-10));

    Vector not_unit = 2.0 * nu;
    CHECK_THROWS_AS(
        state.halfspace_first_moment(not_unit, HalfspaceIntegrand::U_SQ),
        PreconditionError);
}

TEST_CASE("normal first moment against direct 3-D tensor quadrature") {
    auto state = make_state(3, 3.0, 1.0, 1.0);
    const Vector& nu = state.anchor().nu;
    double lib_u = state.halfspace_first_moment(nu, HalfspaceIntegrand::U_SQ);
    double brute_u =
        brute_halfspace_first_moment(state, nu, false, 25.0, 25, 6);
    CHECK(lib_u == Approx(brute_u).epsilon(1e-4));
    CHECK(lib_u < 0.0); // inward moment of a positive integrand

    double lib_g =
        state.halfspace_first_moment(nu, HalfspaceIntegrand::GRAD_SQ);
    double brute_g =
        brute_halfspace_first_moment(state, nu, true, 25.0, 25, 6);
    CHECK(lib_g == Approx(brute_g).epsilon(1e-4));
}

TEST_CASE("angular constant against Monte Carlo") {
    // a_N = int over {w.e <= 0} of (w.e) dsigma = -|S^{N-2}|/(N-1)
    std::mt19937_64 rng(2024);
    std::normal_distribution<double> gauss;
    for (int n : {2, 3, 5}) {
        const long samples = 10000000;
        double sum = 0.0, sum2 = 0.0;
        for (long s = 0; s < samples; ++s) {
            double first = gauss(rng), norm2 = first * first;
            for (int i = 1; i < n; ++i) {
                double g = gauss(rng);
                norm2 += g * g;
            }
            double c = first / std::sqrt(norm2);
            double v = c <= 0.0 ? c : 0.0;
            sum += v;
            sum2 += v * v;
        }
        double mean = sum / samples;
        double sigma = std::sqrt((sum2 / samples - mean * mean) / samples);
        double mc = unit_sphere_area(n) * mean;
        double exact = halfspace_cosine_moment(n);
        REQUIRE(std::fabs(mc - exact) <=
                3.0 * unit_sphere_area(n) * sigma);
    }
}

TEST_CASE("boundary trace moments: scaling and positivity") {
    auto base = make_state(3, 3.0, 1.0, 1.0);
    auto [a0, b0] = base.boundary_trace_moments();
    CHECK(a0 > 0.0);
    CHECK(b0 > 0.0);

    // definition unwound for the unit case
    auto prof = testutil::cached_profile(3, 3.0);
    double ring = unit_sphere_area(2);
    CHECK(a0 == Approx(0.5 * ring * radial_moment(*prof, 4.0, 0, 1))
                    .epsilon(1e-12));

    // scaling: Abar ~ alpha^{p+1} beta^{-(N+1)}, Bbar ~ alpha^2 beta^{-(N-1)}
    double jq = 1.7, vq = 0.6, p = 3.0;
    auto st = make_state(3, p, jq, vq);
    double alpha = std::pow(vq, 1.0 / (p - 1.0));
    double beta = std::sqrt(vq / jq);
    auto [a1, b1] = st.boundary_trace_moments();
    CHECK(a1 == Approx(std::pow(alpha, p + 1.0) * std::pow(beta, -4.0) * a0)
                    .epsilon(1e-10));
    CHECK(b1 == Approx(alpha * alpha * std::pow(beta, -2.0) * b0)
                    .epsilon(1e-10));

    // direct quadrature oracle for the trace integrals (2-D radial)
    QuadratureRule rule = gauss_legendre(8);
    double direct_a = 0.0;
    int cells = 60;
    double L = 30.0 / beta, h = L / cells;
    for (int c = 0; c < cells; ++c) {
        for (std::size_t g = 0; g < rule.nodes.size(); ++g) {
            double s = (c + 0.5 * (1.0 + rule.nodes[g])) * h;
            double tr = st.evaluate_radial(s);
            direct_a += rule.weights[g] * 0.5 * h * std::pow(tr, p + 1.0) *
                        s * s * s; // |x'|^2 times the 2-D radial measure s
        }
    }
    direct_a *= 0.5 * 2.0 * pi; // the 1/2 prefactor and the angular factor
    CHECK(a1 == Approx(direct_a).epsilon(1e-7));
}

TEST_CASE("limit energy") {
    auto base = make_state(3, 3.0, 1.0, 1.0);
    // p = 3: F = 1/4 int U^4 over the half space
    CHECK(base.limit_energy() ==
          Approx(0.25 * base.halfspace_power_integral(4.0)).epsilon(1e-14));
    CHECK(base.limit_energy() > 0.0);
}
