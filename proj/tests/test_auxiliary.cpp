#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "helpers.hpp"
#include "spikelab/auxiliary.hpp"

using namespace spikelab;
using Catch::Approx;
using testutil::vec3;

namespace {

BoundaryPoint at(const ProblemData& data, const Vector& x) {
    return project_to_boundary(data.domain(), x);
}

// brute-force half-space linear-weight integral by 3-D tensor quadrature
double brute_linear_moment(const ProblemData& data, const BoundaryPoint& q,
                           bool grad_sq, double L, int cells, int order) {
    ScaledGroundState state = data.state_at(q);
    QuadratureRule rule = gauss_legendre(order);
    Vector w = grad_sq ? data.grad_j(q.q) : data.grad_v(q.q);
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
                            if (x.dot(q.nu) > 0.0) continue;
                            double g;
                            if (grad_sq) g = state.gradient(x).squaredNorm();
                            else {
                                double u = state.evaluate(x);
                                g = u * u;
                            }
                            acc += rule.weights[a] * rule.weights[b] *
                                   rule.weights[c] * w.dot(x) * g;
                        }
                total += acc * h * h * h / 8.0;
            }
    return total;
}

} // namespace

TEST_CASE("gamma formula") {
    // J(Q) = 2, V(Q) = 1 at Q = (1,0,0): Gamma = 2^{3/2} for N=3, p=3
    auto data = testutil::make_ball_problem(3, 3.0, "1.5 + 0.5*x1^2", "1");
    BoundaryPoint q = at(data, vec3(1, 0, 0));
    CHECK(gamma_value(data, q) == Approx(std::pow(2.0, 1.5)).epsilon(1e-12));

    auto unit = testutil::make_ball_problem(3, 3.0, "1", "1");
    for (const BoundaryPoint& bp : sample_boundary(unit.domain(), 10))
        CHECK(gamma_value(unit, bp) == Approx(1.0).epsilon(1e-14));
}

TEST_CASE("gamma equals the limit energy over c0") {
    auto data = testutil::make_ball_problem(3, 3.0, "1 + x3^2/2",
                                            "1 + x1^2");
    for (const BoundaryPoint& bp : sample_boundary(data.domain(), 8, 5)) {
        ScaledGroundState st = data.state_at(bp);
        ExpansionConstants k = constants(data, bp);
        REQUIRE(gamma_value(data, bp) ==
                Approx(st.limit_energy() / k.c0).epsilon(1e-8));
    }
}

TEST_CASE("gamma tangential gradient") {
    auto flat = testutil::make_ball_problem(3, 3.0, "1", "1");
    BoundaryPoint q0 = at(flat, vec3(0.6, -0.64, 0.48));
    CHECK(gamma_tangential_gradient(flat, q0).norm() < 1e-14);

    auto data = testutil::make_ball_problem(3, 3.0, "1", "1 + x1^2");
    BoundaryPoint q = at(data, vec3(0.5, 0.5, 1.0));
    Vector g = gamma_tangential_gradient(data, q);
    // matches tangential central differences with step halving
    for (int i = 0; i < 2; ++i) {
        auto fd = [&](double h) {
            BoundaryPoint p = tangent_step(data.domain(), q, q.frame.col(i), h);
            BoundaryPoint m =
                tangent_step(data.domain(), q, q.frame.col(i), -h);
            return (gamma_value(data, p) - gamma_value(data, m)) / (2 * h);
        };
        double d1 = fd(1e-4), d2 = fd(5e-5);
        double richardson = (4 * d2 - d1) / 3;
        REQUIRE(q.frame.col(i).dot(g) ==
                Approx(richardson).margin(1e-6 * std::max(1.0, richardson)));
    }
    // rotational symmetry: V depends on x1 only, so the gradient along the
    // orbit direction (rotation around the x1 axis) vanishes
    Vector orbit = vec3(0.0, -q.q[2], q.q[1]);
    orbit -= orbit.dot(q.nu) * q.nu;
    if (orbit.norm() > 1e-12)
        CHECK(std::fabs(g.dot(orbit.normalized())) < 1e-10);
}

TEST_CASE("sigma reduces to -C1 H for unit coefficients") {
    auto data = testutil::make_ball_problem(3, 3.0, "1", "1");
    for (const BoundaryPoint& bp : sample_boundary(data.domain(), 12, 2)) {
        ExpansionConstants k = constants(data, bp);
        REQUIRE(sigma_value(data, bp) ==
                Approx(-k.c1 * bp.mean_curvature).epsilon(1e-8));
    }
    // on the unit ball H = 1, so sigma = -C1 everywhere
    BoundaryPoint q = at(data, vec3(0, 0, 1));
    ExpansionConstants k = constants(data, q);
    CHECK(sigma_value(data, q) == Approx(-k.c1).epsilon(1e-10));
}

TEST_CASE("tangential-only coefficient variation drops the moment terms") {
    // V = 1 + x2^2 has a tangential gradient at Q = (1,0,0)
    auto data = testutil::make_ball_problem(3, 3.0, "1", "1 + x2^2");
    BoundaryPoint q = at(data, vec3(1, 0, 0));
    CHECK(std::fabs(data.grad_v(q.q).dot(q.nu)) < 1e-13);
    ExpansionConstants k = constants(data, q);
    // only the curvature terms survive
    CHECK(sigma_value(data, q) ==
          Approx(-(0.5 * k.b_bar * data.j_at(q.q) + 0.25 * k.a_bar) *
                 q.mean_curvature)
              .epsilon(1e-10));
}

TEST_CASE("sigma against brute-force 3-D quadrature") {
    // unit ball, J = 1, V = 1 + x1^2, Q = (1,0,0): grad V(Q) = 2 nu
    auto data = testutil::make_ball_problem(3, 3.0, "1", "1 + x1^2");
    BoundaryPoint q = at(data, vec3(1, 0, 0));
    double vterm_brute =
        0.5 * brute_linear_moment(data, q, false, 20.0, 20, 6);
    ScaledGroundState st = data.state_at(q);
    auto [a_bar, b_bar] = st.boundary_trace_moments();
    double sigma_brute = vterm_brute -
                         0.5 * b_bar * st.j_value() * q.mean_curvature -
                         0.25 * a_bar * q.mean_curvature;
    CHECK(sigma_value(data, q) == Approx(sigma_brute).epsilon(1e-3));

    // and a configuration with a varying J as well
    auto data2 = testutil::make_ball_problem(3, 3.0, "1 + (x1-1)^2/4",
                                             "1 + x1^2");
    BoundaryPoint q2 = at(data2, vec3(1, 0, 0));
    ScaledGroundState st2 = data2.state_at(q2);
    auto [a2, b2] = st2.boundary_trace_moments();
    double brute = 0.5 * brute_linear_moment(data2, q2, true, 20.0, 20, 6) +
                   0.5 * brute_linear_moment(data2, q2, false, 20.0, 20, 6) -
                   0.5 * b2 * st2.j_value() * q2.mean_curvature -
                   0.25 * a2 * q2.mean_curvature;
    CHECK(sigma_value(data2, q2) == Approx(brute).epsilon(1e-3));
}

TEST_CASE("sigma_bar coincides with sigma for boundary-constant fields") {
    // V = 2 - (x1^2+x2^2+x3^2) is 1 on the unit sphere with a purely normal
    // gradient; J likewise with a different profile
    auto data = testutil::make_ball_problem(
        3, 3.0, "1 + (1 - x1^2 - x2^2 - x3^2)/2", "2 - x1^2 - x2^2 - x3^2");
    CHECK(data.boundary_constant_coefficients());
    SigmaBarEvaluator sbar(data);
    for (const BoundaryPoint& bp : sample_boundary(data.domain(), 50, 9)) {
        double s = sigma_value(data, bp);
        double sb = sbar(bp);
        REQUIRE(sb == Approx(s).margin(1e-8 * std::max(1.0, std::fabs(s))));
    }
}

TEST_CASE("sigma_bar rejects boundary-varying fields naming the culprit") {
    auto data = testutil::make_ball_problem(3, 3.0, "1", "1 + x1^2");
    BoundaryPoint q = at(data, vec3(1, 0, 0));
    try {
        sigma_bar_value(data, q);
        FAIL("expected PreconditionError");
    } catch (const PreconditionError& e) {
        CHECK(std::string(e.what()).find("V is not constant") !=
              std::string::npos);
    }
    auto dataj = testutil::make_ball_problem(3, 3.0, "1 + x2^2", "1");
    try {
        sigma_bar_value(dataj, at(dataj, vec3(1, 0, 0)));
        FAIL("expected PreconditionError");
    } catch (const PreconditionError& e) {
        CHECK(std::string(e.what()).find("J is not constant") !=
              std::string::npos);
    }
}

TEST_CASE("inward spike construction shifts sigma_bar by k C2") {
    // V = 1 + k' d(x) b(x): equal to 1 on the boundary, gradient at Q0
    // equal to -k nu(Q0) with k = k' |grad d(Q0)| b(Q0)
    const double kprime = 3.0, rho = 0.25;
    std::string d = "(1 - x1^2 - x2^2 - x3^2)";
    std::string b = "exp(-((x1)^2 + (x2)^2 + (x3-1)^2)/" +
                    std::to_string(rho * rho) + ")";
    auto spiked = testutil::make_ball_problem(
        3, 3.0, "1", "1 + " + std::to_string(kprime) + "*" + d + "*" + b);
    auto flat = testutil::make_ball_problem(3, 3.0, "1", "1");

    BoundaryPoint q0 = at(spiked, vec3(0, 0, 1));
    Vector gv = spiked.grad_v(q0.q);
    double k = -gv.dot(q0.nu);
    CHECK(k == Approx(2.0 * kprime).epsilon(1e-12)); // |grad d| = 2, b = 1
    CHECK((gv + k * q0.nu).norm() < 1e-12);          // purely inward

    ExpansionConstants kc = constants(flat, q0);
    double base = sigma_bar_value(flat, q0); // = -C1 H
    CHECK(base == Approx(-kc.c1 * q0.mean_curvature).epsilon(1e-10));
    double shifted = sigma_bar_value(spiked, q0);
    CHECK(shifted - base == Approx(k * kc.c2).epsilon(1e-8));
    CHECK(kc.c2 > 0.0);

    // k = 0 spike: sigma_bar = -C1 H everywhere
    for (const BoundaryPoint& bp : sample_boundary(flat.domain(), 10, 4))
        CHECK(sigma_bar_value(flat, bp) ==
              Approx(-kc.c1 * bp.mean_curvature).epsilon(1e-10));
}

TEST_CASE("constants: signs and special values") {
    auto data = testutil::make_ball_problem(3, 3.0, "1", "1");
    BoundaryPoint q = at(data, vec3(1, 0, 0));
    ExpansionConstants k = constants(data, q);
    CHECK(k.c0 > 0.0);
    CHECK(k.a_bar > 0.0);
    CHECK(k.b_bar > 0.0);
    CHECK(k.c1 > 0.0);
    CHECK(k.c2 > 0.0);
    CHECK(k.k1 > 0.0);
    CHECK(k.k2 == Approx(1.0)); // C_J = C_V
    CHECK(k.k3 > 0.0);
    CHECK(k.k4 < 0.0);

    // c0 against a doubled-resolution moment oracle: trapezoid pair on the
    // profile evaluation
    auto prof = testutil::cached_profile(3, 3.0);
    auto trap = [&](double h) {
        double acc = 0.0;
        long m = static_cast<long>(prof->r_max() / h);
        for (long i = 0; i <= m; ++i) {
            double r = i * h;
            double w = (i == 0 || i == m) ? 0.5 : 1.0;
            acc += w * std::pow(eval(*prof, r), 4.0) * r * r;
        }
        return acc * h;
    };
    double mom = (4.0 * trap(5e-5) - trap(1e-4)) / 3.0;
    double c0_oracle = 0.25 * 0.5 * unit_sphere_area(3) * mom;
    CHECK(k.c0 == Approx(c0_oracle).epsilon(1e-8));
}

TEST_CASE("gamma argmax is invariant under joint scaling of J and V") {
    auto base = testutil::make_ball_problem(3, 3.0, "1", "1 + x1^2");
    auto scaled = testutil::make_ball_problem(3, 3.0, "3", "3*(1 + x1^2)");
    double factor = std::pow(3.0, (3.0 + 1.0) / (3.0 - 1.0));
    for (const BoundaryPoint& bp : sample_boundary(base.domain(), 20, 6))
        REQUIRE(gamma_value(scaled, bp) ==
                Approx(factor * gamma_value(base, bp)).epsilon(1e-10));
}

TEST_CASE("sigma is frame independent") {
    auto data = testutil::make_ball_problem(3, 3.0, "1 + x3^2/3", "1 + x1^2");
    BoundaryPoint q = at(data, vec3(0.5, -0.7, 0.3));
    double s0 = sigma_value(data, q);
    // rotate the tangent frame by an arbitrary angle
    BoundaryPoint rotated = q;
    double c = std::cos(0.83), s = std::sin(0.83);
    Vector e0 = q.frame.col(0), e1 = q.frame.col(1);
    rotated.frame.col(0) = c * e0 + s * e1;
    rotated.frame.col(1) = -s * e0 + c * e1;
    CHECK(sigma_value(data, rotated) == Approx(s0).epsilon(1e-12));
}
