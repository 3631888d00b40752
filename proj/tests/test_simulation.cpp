#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "surfphase/errors.hpp"
#include "surfphase/operators.hpp"
#include "surfphase/simulation.hpp"

#include <cmath>
#include <limits>

using namespace surfphase;

TEST_CASE("config validation") {
    ScenarioConfig c;
    CHECK_NOTHROW(c.validate());

    ScenarioConfig bad = c;
    bad.surface.kind = "torus";
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = c;
    bad.dt = 0.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = c;
    bad.t_end = bad.dt / 2.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = c;
    bad.initial.mean = 1.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = c;
    bad.evolution.law = "spiral";
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = c;
    bad.initial.phase = "checkerboard";
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = c;
    bad.initial.velocity = "jet";
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("initial phase fields") {
    const SurfaceMesh m = build_icosphere(3, 1.0);
    ScenarioConfig c;

    c.initial.phase = "constant";
    c.initial.mean = 0.25;
    CHECK((build_initial_phi(m, c).array() - 0.25).abs().maxCoeff() <= 1e-15);

    c.initial.phase = "harmonic";
    c.initial.mean = 0.1;
    c.initial.amplitude = 0.2;
    const Eigen::VectorXd harm = build_initial_phi(m, c);
    for (int i = 0; i < m.n_vertices(); ++i) {
        const double z = m.vertex_positions(i, 2);
        CHECK(harm[i] ==
              doctest::Approx(0.1 + 0.2 * (3.0 * z * z - 1.0) / 2.0).epsilon(1e-12));
    }

    c.initial.phase = "spinodal";
    c.initial.mean = 0.05;
    c.initial.seed = 11;
    const Eigen::VectorXd s1 = build_initial_phi(m, c);
    const Eigen::VectorXd s2 = build_initial_phi(m, c);
    CHECK((s1 - s2).cwiseAbs().maxCoeff() == 0.0); // seed-deterministic
    c.initial.seed = 12;
    const Eigen::VectorXd s3 = build_initial_phi(m, c);
    CHECK((s1 - s3).cwiseAbs().maxCoeff() > 1e-4);
    // re-centered on the requested mean (lumped quadrature)
    const Eigen::VectorXd a = m.lumped_vertex_areas();
    CHECK(a.dot(s1) / a.sum() == doctest::Approx(0.05).epsilon(1e-10));
    CHECK(s1.cwiseAbs().maxCoeff() < 0.2);
}

TEST_CASE("ledger appends are screened") {
    EnergyLedger led;
    LedgerRow row;
    row.t = 0.0;
    led.append(row);
    row.t = 1e-3;
    CHECK_NOTHROW(led.append(row));
    CHECK_THROWS_AS(led.append(row), ParameterError); // non-increasing time
    row.t = 2e-3;
    row.E_tot = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(led.append(row), ParameterError);
    CHECK(led.rows.size() == 2);
}

TEST_CASE("constant phase at rest stays flat") {
    ScenarioConfig c;
    c.surface.subdivision = 2;
    c.initial.phase = "constant";
    c.initial.mean = 0.2;
    c.dt = 1e-3;
    c.t_end = 1e-2;
    const auto [traj, led] = simulate(c);
    CHECK(led.rows.size() == 11);
    CHECK(traj.phases.size() == led.rows.size());
    const LedgerRow& r0 = led.rows.front();
    for (const LedgerRow& r : led.rows) {
        CHECK(std::abs(r.E_tot - r0.E_tot) <= 1e-12 * (1.0 + std::abs(r0.E_tot)));
        CHECK(std::abs(r.mass - r0.mass) <= 1e-12 * std::abs(r0.mass));
        CHECK(r.E_kin <= 1e-20);
        CHECK(r.div_res <= 1e-12);
        CHECK(r.sep_margin == doctest::Approx(0.8).epsilon(1e-9));
    }
    const EnergyReport rep = verify_energy_inequality(led, c.material);
    CHECK(rep.C_hat <= 1e-8);
    CHECK(rep.residuals.size() == led.rows.size() - 1);
}

TEST_CASE("spinodal run: conservation, decay, separation") {
    ScenarioConfig c;
    c.surface.subdivision = 3;
    c.initial.phase = "spinodal";
    c.initial.mean = 0.0;
    c.initial.seed = 7;
    c.dt = 1e-3;
    c.t_end = 0.03;
    const auto [traj, led] = simulate(c);
    const double mass0 = led.rows.front().mass;
    const double scale = std::max(std::abs(mass0), 1e-6 * led.rows.front().area);
    for (size_t k = 1; k < led.rows.size(); ++k) {
        CHECK(std::abs(led.rows[k].mass - mass0) <= 1e-10 * scale);
        CHECK(led.rows[k].E_tot <=
              led.rows[k - 1].E_tot + 1e-12 * (1.0 + std::abs(led.rows[k - 1].E_tot)));
        CHECK(led.rows[k].div_res <= 1e-12);
    }
    const auto [delta_min, series] = separation_monitor(traj.phases);
    CHECK(delta_min >= c.material.eps_guard);
    CHECK(series.size() == led.rows.size());
    CHECK(verify_energy_inequality(led, c.material).C_hat <= 1e-8);
}

TEST_CASE("oscillating sphere: area preserved, energy report finite") {
    ScenarioConfig c;
    c.surface.subdivision = 2;
    c.evolution.law = "oscillating";
    c.evolution.amplitude = 0.1;
    c.evolution.frequency = 6.283;
    c.initial.phase = "harmonic";
    c.initial.mean = 0.1;
    c.initial.amplitude = 0.3;
    c.dt = 1e-3;
    c.t_end = 0.05;
    const auto [traj, led] = simulate(c);
    const double area0 = led.rows.front().area;
    for (const LedgerRow& r : led.rows)
        CHECK(std::abs(r.area - area0) / area0 <= 1e-3);
    // the mesh actually moved
    CHECK((traj.final_mesh.vertex_positions - traj.initial_mesh.vertex_positions)
              .cwiseAbs()
              .maxCoeff() > 1e-5);
    const EnergyReport rep = verify_energy_inequality(led, c.material);
    CHECK(std::isfinite(rep.C_hat));
    CHECK(rep.C_hat >= 0.0);
}

TEST_CASE("halving dt moves the final energy by little") {
    double etot[2];
    int k = 0;
    for (double dt : {1e-3, 5e-4}) {
        ScenarioConfig c;
        c.surface.subdivision = 2;
        c.evolution.law = "oscillating";
        c.evolution.amplitude = 0.1;
        c.evolution.frequency = 6.283;
        c.initial.phase = "harmonic";
        c.initial.mean = 0.1;
        c.initial.amplitude = 0.3;
        c.dt = dt;
        c.t_end = 0.05;
        etot[k++] = simulate(c).second.rows.back().E_tot;
    }
    CHECK(std::abs(etot[0] - etot[1]) <= 0.05 * (1.0 + std::abs(etot[1])));
}

TEST_CASE("runs are deterministic") {
    ScenarioConfig c;
    c.surface.subdivision = 2;
    c.initial.phase = "spinodal";
    c.initial.mean = 0.1;
    c.initial.seed = 3;
    c.initial.velocity = "rotation";
    c.initial.rotation_rate = 0.5;
    c.dt = 1e-3;
    c.t_end = 5e-3;
    const auto run1 = simulate(c);
    const auto run2 = simulate(c);
    REQUIRE(run1.second.rows.size() == run2.second.rows.size());
    for (size_t k = 0; k < run1.second.rows.size(); ++k) {
        const LedgerRow& a = run1.second.rows[k];
        const LedgerRow& b = run2.second.rows[k];
        CHECK(a.E_tot == b.E_tot);
        CHECK(a.mass == b.mass);
        CHECK(a.div_res == b.div_res);
        CHECK(a.rho_transport_res == b.rho_transport_res);
    }
    CHECK((run1.first.final_phase.phi - run2.first.final_phase.phi).cwiseAbs().maxCoeff() ==
          0.0);
    CHECK((run1.first.final_flow.V - run2.first.final_flow.V).cwiseAbs().maxCoeff() == 0.0);
    // the rotation start actually carries kinetic energy
    CHECK(run1.second.rows.front().E_kin > 1e-3);
}

TEST_CASE("snapshots are recorded on request") {
    ScenarioConfig c;
    c.surface.subdivision = 2;
    c.initial.phase = "constant";
    c.initial.mean = 0.1;
    c.dt = 1e-3;
    c.t_end = 6e-3;
    c.output.snapshot_every = 2;
    const auto [traj, led] = simulate(c);
    CHECK(traj.snapshots.size() >= 3);
    for (const auto& [t, snap] : traj.snapshots) {
        CHECK(t >= 0.0);
        CHECK(snap.n_vertices() == traj.initial_mesh.n_vertices());
    }
}
