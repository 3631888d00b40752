#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "surfphase/cahn_hilliard.hpp"
#include "surfphase/errors.hpp"
#include "surfphase/mesh.hpp"
#include "surfphase/operators.hpp"

#include <cmath>
#include <numbers>

using namespace surfphase;
constexpr double pi = std::numbers::pi;

namespace {

Eigen::VectorXd nodal_z(const SurfaceMesh& m) { return m.vertex_positions.col(2); }

struct Rest {
    Eigen::MatrixX3d v;
    Eigen::VectorXd vn;
    explicit Rest(const SurfaceMesh& m)
        : v(Eigen::MatrixX3d::Zero(m.n_vertices(), 3)),
          vn(Eigen::VectorXd::Zero(m.n_vertices())) {}
};

} // namespace

TEST_CASE("initialize_phase bookkeeping and guard") {
    const SurfaceMesh m = build_icosphere(2, 1.0);
    const MaterialParams p;
    const Eigen::VectorXd phi = Eigen::VectorXd::Constant(m.n_vertices(), 0.25);
    const PhaseState st = initialize_phase(m, 0.5, phi, p);
    CHECK(st.time == 0.5);
    CHECK(st.separation_margin == doctest::Approx(0.75).epsilon(1e-14));
    CHECK(st.total_mass == doctest::Approx(0.25 * surface_area(m)).epsilon(1e-12));
    // constant phi: mu is the constant split potential derivative
    const double mu_expected = p.dF(0.25) - p.theta0 * 0.25;
    CHECK((st.mu.array() - mu_expected).abs().maxCoeff() <= 1e-10);

    CHECK_THROWS_AS(initialize_phase(m, 0.0, Eigen::VectorXd::Ones(m.n_vertices()), p),
                    ParameterError);
    CHECK_THROWS_AS(initialize_phase(m, 0.0, Eigen::VectorXd::Zero(5), p), ParameterError);
}

TEST_CASE("constants are equilibria") {
    const SurfaceMesh m = build_icosphere(2, 1.0);
    const MaterialParams p;
    const Rest rest(m);
    PhaseState st =
        initialize_phase(m, 0.0, Eigen::VectorXd::Constant(m.n_vertices(), 0.3), p);
    const double mu_expected = p.dF(0.3) - p.theta0 * 0.3;
    for (int k = 0; k < 5; ++k) {
        st = ch_step(m, m, st, rest.v, rest.vn, p, 1e-2);
        CHECK((st.phi.array() - 0.3).abs().maxCoeff() <= 1e-11);
        CHECK((st.mu.array() - mu_expected).abs().maxCoeff() <= 1e-9);
    }
}

TEST_CASE("mass conservation and Lyapunov decay at rest") {
    const SurfaceMesh m = build_icosphere(3, 1.0);
    const MaterialParams p;
    const Rest rest(m);
    PhaseState st = initialize_phase(
        m, 0.0, Eigen::VectorXd(0.3 * Eigen::VectorXd::Ones(m.n_vertices()) + 0.1 * nodal_z(m)),
        p);
    const double mass0 = st.total_mass;
    auto total = [&](const PhaseState& s) {
        const auto [gl, pot, diss] = ch_energy(m, s, p);
        (void)diss;
        return gl + pot;
    };
    double e_prev = total(st);
    for (int k = 0; k < 30; ++k) {
        st = ch_step(m, m, st, rest.v, rest.vn, p, 1e-2);
        CHECK(std::abs(st.total_mass - mass0) <= 1e-10 * std::abs(mass0));
        const double e = total(st);
        CHECK(e <= e_prev + 1e-12 * (1.0 + std::abs(e_prev)));
        CHECK(st.separation_margin >= p.eps_guard);
        e_prev = e;
    }
}

TEST_CASE("rigid rotation with zero mobility is pure transport") {
    const SurfaceMesh m = build_icosphere(3, 1.0);
    const int nv = m.n_vertices();
    const MaterialParams p;
    Eigen::VectorXd phi0(nv);
    for (int i = 0; i < nv; ++i) phi0[i] = 0.3 + 0.1 * m.vertex_positions(i, 0);
    Eigen::MatrixX3d v(nv, 3);
    const Eigen::Vector3d omega(0.0, 0.0, 2.0 * pi);
    for (int i = 0; i < nv; ++i)
        v.row(i) = omega.cross(Eigen::Vector3d(m.vertex_positions.row(i)));
    const Eigen::VectorXd vn = Eigen::VectorXd::Zero(nv);
    ChStepOptions opt;
    opt.mobility = 0.0;

    double err[2];
    int k = 0;
    for (int steps : {100, 200}) {
        PhaseState st = initialize_phase(m, 0.0, phi0, p);
        const double mass0 = st.total_mass;
        const double dt = 1.0 / steps;
        for (int n = 0; n < steps; ++n) st = ch_step(m, m, st, v, vn, p, dt, opt);
        // convection is exactly conservative
        CHECK(std::abs(st.total_mass - mass0) <= 1e-12 * std::abs(mass0));
        err[k++] = l2_norm(m, Eigen::VectorXd(st.phi - phi0));
    }
    // after one period the profile returns at first order in dt
    CHECK(err[1] <= 0.025);
    CHECK(err[0] / err[1] >= 1.6);
}

TEST_CASE("manufactured steady solution: spatial order two") {
    // phi* = 0.3 z is steady under the nodal source g = -Laplace(mu*),
    // mu*(z) = 0.6 z - 0.3 theta0 z + F'(0.3 z); on the unit sphere
    // Laplace f(z) = (1 - z^2) f'' - 2 z f'
    const MaterialParams p;
    const double th = p.theta, th0 = p.theta0;
    auto fp = [&](double z) { return 0.6 - 0.3 * th0 + 0.3 * th / (1.0 - 0.09 * z * z); };
    auto fpp = [&](double z) {
        const double d = 1.0 - 0.09 * z * z;
        return 0.054 * th * z / (d * d);
    };
    double err[3];
    int k = 0;
    for (int lvl : {3, 4, 5}) {
        const SurfaceMesh m = build_icosphere(lvl, 1.0);
        const int nv = m.n_vertices();
        Eigen::VectorXd phi0(nv), g(nv);
        for (int i = 0; i < nv; ++i) {
            const double z = m.vertex_positions(i, 2);
            phi0[i] = 0.3 * z;
            g[i] = 2.0 * z * fp(z) - (1.0 - z * z) * fpp(z);
        }
        PhaseState st = initialize_phase(m, 0.0, phi0, p);
        ChStepOptions opt;
        opt.forcing = g;
        const Rest rest(m);
        for (int n = 0; n < 10; ++n) st = ch_step(m, m, st, rest.v, rest.vn, p, 1e-3, opt);
        err[k++] = l2_norm(m, Eigen::VectorXd(st.phi - phi0));
    }
    const double order_34 = std::log2(err[0] / err[1]);
    const double order_45 = std::log2(err[1] / err[2]);
    CHECK(order_34 >= 1.8);
    CHECK(order_45 >= 1.8);
}

TEST_CASE("energy anchors") {
    const SurfaceMesh m = build_icosphere(4, 1.0);
    MaterialParams p;
    const Rest rest(m);
    (void)rest;

    PhaseState zero = initialize_phase(m, 0.0, Eigen::VectorXd::Zero(m.n_vertices()), p);
    const auto [gl0, pot0, diss0] = ch_energy(m, zero, p);
    CHECK(gl0 == 0.0);
    CHECK(pot0 == 0.0);
    CHECK(diss0 <= 1e-20);

    // gl energy of 0.5 z: 1/2 * 0.25 * ||grad z||^2 = (1/8)(8 pi / 3)
    PhaseState lin = initialize_phase(m, 0.0, Eigen::VectorXd(0.5 * nodal_z(m)), p);
    const auto [gl1, pot1, diss1] = ch_energy(m, lin, p);
    (void)pot1;
    (void)diss1;
    CHECK(gl1 == doctest::Approx(pi / 3.0).epsilon(0.01));

    // quadratic form: doubling phi quadruples the gradient energy
    PhaseState half = initialize_phase(m, 0.0, Eigen::VectorXd(0.25 * nodal_z(m)), p);
    const auto [gl2, pot2, diss2] = ch_energy(m, half, p);
    (void)pot2;
    (void)diss2;
    CHECK(gl1 == doctest::Approx(4.0 * gl2).epsilon(1e-12));
}

TEST_CASE("mean chemical potential report") {
    const SurfaceMesh m = build_icosphere(3, 1.0);
    const MaterialParams p;
    PhaseState zero = initialize_phase(m, 0.0, Eigen::VectorXd::Zero(m.n_vertices()), p);
    const auto [mu_bar, bound] = mean_mu_bound_report(m, zero, p, 0.0);
    CHECK(mu_bar <= 1e-12);
    CHECK(bound > 0.0);

    PhaseState tilted = initialize_phase(m, 0.0, Eigen::VectorXd(0.4 * nodal_z(m)), p);
    const auto [mb2, b2] = mean_mu_bound_report(m, tilted, p, 0.0);
    CHECK(std::isfinite(mb2));
    CHECK(std::isfinite(b2));
    CHECK(b2 > 0.0);

    CHECK_THROWS_AS(mean_mu_bound_report(m, zero, p, 1.0), ParameterError);
    CHECK_THROWS_AS(mean_mu_bound_report(m, zero, p, -0.9999999999), ParameterError);
}

TEST_CASE("separation monitor") {
    const SurfaceMesh m = build_icosphere(2, 1.0);
    const MaterialParams p;
    std::vector<PhaseState> traj;
    for (int k = 0; k < 4; ++k)
        traj.push_back(initialize_phase(m, 0.1 * k, Eigen::VectorXd::Zero(m.n_vertices()), p));
    auto [dmin, series] = separation_monitor(traj);
    CHECK(dmin == 1.0);
    CHECK(series.size() == 4);

    traj.push_back(
        initialize_phase(m, 0.5, Eigen::VectorXd::Constant(m.n_vertices(), 0.8), p));
    CHECK(separation_monitor(traj).first == doctest::Approx(0.2).epsilon(1e-14));
}

TEST_CASE("step failure carries the residual history") {
    const SurfaceMesh m = build_icosphere(2, 1.0);
    const MaterialParams p;
    const Rest rest(m);
    PhaseState st = initialize_phase(m, 0.0, Eigen::VectorXd(0.9 * nodal_z(m)), p);
    ChStepOptions strict;
    strict.max_newton = 1;
    strict.tolerance = 1e-16;
    try {
        (void)ch_step(m, m, st, rest.v, rest.vn, p, 1e-2, strict);
        FAIL("expected StepFailure");
    } catch (const StepFailure& e) {
        CHECK(!e.residual_history.empty());
        CHECK(e.residual_history.front() > 0.0);
    }
}

TEST_CASE("argument validation") {
    const SurfaceMesh m = build_icosphere(2, 1.0);
    const SurfaceMesh other = build_icosphere(1, 1.0);
    const MaterialParams p;
    const Rest rest(m);
    PhaseState st = initialize_phase(m, 0.0, Eigen::VectorXd::Zero(m.n_vertices()), p);
    CHECK_THROWS_AS(ch_step(m, m, st, rest.v, rest.vn, p, 0.0), ParameterError);
    CHECK_THROWS_AS(ch_step(other, m, st, rest.v, rest.vn, p, 1e-2), ParameterError);
    ChStepOptions bad;
    bad.forcing = Eigen::VectorXd::Zero(3);
    CHECK_THROWS_AS(ch_step(m, m, st, rest.v, rest.vn, p, 1e-2, bad), ParameterError);
}
