#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "surfphase/errors.hpp"
#include "surfphase/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

using namespace surfphase;
constexpr double pi = std::numbers::pi;

TEST_CASE("icosphere combinatorics") {
    const SurfaceMesh ico = build_icosphere(0, 1.0);
    CHECK(ico.n_vertices() == 12);
    CHECK(ico.n_triangles() == 20);

    const SurfaceMesh m2 = build_icosphere(2, 1.0);
    CHECK(m2.n_vertices() == 162);
    CHECK(m2.n_triangles() == 320);

    for (int i = 0; i < m2.n_vertices(); ++i)
        CHECK(m2.vertex_positions.row(i).norm() == doctest::Approx(1.0).epsilon(1e-12));

    CHECK_THROWS_AS(build_icosphere(-1, 1.0), ParameterError);
    CHECK_THROWS_AS(build_icosphere(9, 1.0), ParameterError);
    CHECK_THROWS_AS(build_icosphere(2, 0.0), ParameterError);
}

TEST_CASE("icosahedron area matches the polyhedral formula") {
    const SurfaceMesh ico = build_icosphere(0, 1.0);
    const Eigen::Vector3d p0 = ico.vertex_positions.row(ico.triangles(0, 0));
    const Eigen::Vector3d p1 = ico.vertex_positions.row(ico.triangles(0, 1));
    const double a = (p0 - p1).norm();
    CHECK(surface_area(ico) == doctest::Approx(5.0 * std::sqrt(3.0) * a * a).epsilon(1e-12));
}

TEST_CASE("area and volume approach the sphere values") {
    const SurfaceMesh m4 = build_icosphere(4, 1.0);
    CHECK(surface_area(m4) == doctest::Approx(4.0 * pi).epsilon(0.002));
    CHECK(volume_enclosed(m4) == doctest::Approx(4.0 * pi / 3.0).epsilon(0.005));

    const SurfaceMesh big = build_icosphere(3, 2.0);
    CHECK(surface_area(big) == doctest::Approx(16.0 * pi).epsilon(0.01));
}

TEST_CASE("recovered geometry on spheres") {
    const SurfaceMesh m = build_icosphere(3, 1.0);
    for (int i = 0; i < m.n_vertices(); ++i) {
        CHECK(m.vertex_normals.row(i).norm() == doctest::Approx(1.0).epsilon(1e-12));
        // outward normals on a sphere align with position
        CHECK(m.vertex_normals.row(i).dot(m.vertex_positions.row(i)) > 0.99);
        CHECK(std::abs(m.vertex_mean_curvature[i] - 2.0) <= 0.05);
        const Eigen::Matrix3d& S = m.vertex_shape_operator[i];
        CHECK((S - S.transpose()).norm() <= 1e-12);
        CHECK(std::abs(S.trace() - m.vertex_mean_curvature[i]) <= 1e-10);
        CHECK((S * Eigen::Vector3d(m.vertex_normals.row(i))).norm() <= 1e-8);
        // principal curvatures (1, 1): eigenvalues of S are {~1, ~1, 0}
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(S);
        CHECK(es.eigenvalues()[0] == doctest::Approx(0.0).epsilon(1e-6));
        CHECK(es.eigenvalues()[1] == doctest::Approx(1.0).epsilon(0.05));
        CHECK(es.eigenvalues()[2] == doctest::Approx(1.0).epsilon(0.05));
    }

    const SurfaceMesh r2 = build_icosphere(4, 2.0);
    double worst = 0.0;
    for (int i = 0; i < r2.n_vertices(); ++i)
        worst = std::max(worst, std::abs(r2.vertex_mean_curvature[i] - 1.0));
    CHECK(worst <= 0.025);
}

TEST_CASE("curvature max-norm error decreases from level 3 to 5") {
    double prev = 1e300;
    for (int lvl = 3; lvl <= 5; ++lvl) {
        const SurfaceMesh m = build_icosphere(lvl, 1.0);
        double err = 0.0;
        for (int i = 0; i < m.n_vertices(); ++i)
            err = std::max(err, std::abs(m.vertex_mean_curvature[i] - 2.0));
        CHECK(err < prev);
        prev = err;
    }
}

TEST_CASE("connectivity validation") {
    SurfaceMesh m = build_icosphere(1, 1.0);
    CHECK_NOTHROW(validate_connectivity(m));

    SurfaceMesh broken = m;
    broken.triangles(0, 1) = broken.triangles(0, 0); // repeated vertex
    CHECK_THROWS_AS(validate_connectivity(broken), GeometryError);

    broken = m;
    broken.triangles(3, 2) = m.n_vertices(); // out of range
    CHECK_THROWS_AS(validate_connectivity(broken), GeometryError);

    // removing a triangle opens the surface
    SurfaceMesh open_mesh = m;
    open_mesh.triangles = m.triangles.topRows(m.n_triangles() - 1).eval();
    CHECK_THROWS_AS(validate_connectivity(open_mesh), GeometryError);
}

TEST_CASE("degenerate triangles are rejected") {
    SurfaceMesh m = build_icosphere(1, 1.0);
    m.vertex_positions.row(m.triangles(0, 1)) = m.vertex_positions.row(m.triangles(0, 0));
    CHECK_THROWS_AS(recover_geometry(m), GeometryError);
}

TEST_CASE("geometry recovery is independent of triangle enumeration") {
    const SurfaceMesh m = build_icosphere(2, 1.0);
    SurfaceMesh permuted = m;
    std::vector<int> order(m.n_triangles());
    for (int t = 0; t < m.n_triangles(); ++t) order[t] = t;
    std::shuffle(order.begin(), order.end(), std::mt19937(42));
    for (int t = 0; t < m.n_triangles(); ++t)
        permuted.triangles.row(t) = m.triangles.row(order[t]);
    const SurfaceMesh r = recover_geometry(permuted);
    for (int i = 0; i < m.n_vertices(); ++i) {
        CHECK(std::abs(r.vertex_mean_curvature[i] - m.vertex_mean_curvature[i]) <= 1e-12);
        CHECK((r.vertex_normals.row(i) - m.vertex_normals.row(i)).norm() <= 1e-13);
    }
}

TEST_CASE("compatibility projection") {
    const SurfaceMesh m = build_icosphere(3, 1.0);
    const Eigen::VectorXd a = m.lumped_vertex_areas();
    const Eigen::VectorXd& H = m.vertex_mean_curvature;

    // constant speed is pure H-direction on the sphere: projected away up to
    // the (small) discrete variation of H across vertices
    Eigen::VectorXd ones = Eigen::VectorXd::Ones(m.n_vertices());
    const double h_spread = (H.array() - H.mean()).abs().maxCoeff();
    const Eigen::VectorXd p1 = project_compatible(m, ones);
    CHECK(p1.cwiseAbs().maxCoeff() <= h_spread + 1e-12);

    // odd field is already compatible
    Eigen::VectorXd z = m.vertex_positions.col(2);
    const Eigen::VectorXd pz = project_compatible(m, z);
    CHECK((pz - z).cwiseAbs().maxCoeff() <= 1e-10);

    // linearity: 1 + z projects to z
    const Eigen::VectorXd pboth = project_compatible(m, Eigen::VectorXd(ones + z));
    CHECK((pboth - z).cwiseAbs().maxCoeff() <= h_spread + 1e-11);

    // discrete compatibility integral vanishes, and the map is idempotent
    Eigen::VectorXd vn(m.n_vertices());
    for (int i = 0; i < m.n_vertices(); ++i)
        vn[i] = std::sin(3.0 * m.vertex_positions(i, 0)) + 0.2;
    const Eigen::VectorXd proj = project_compatible(m, vn);
    const double integral = a.dot(H.cwiseProduct(proj));
    const double scale = a.dot(H.cwiseProduct(vn).cwiseAbs());
    CHECK(std::abs(integral) <= 1e-12 * scale);
    CHECK((project_compatible(m, proj) - proj).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("normal flow integration") {
    const SurfaceMesh m = build_icosphere(2, 1.0);

    // zero speed leaves positions untouched
    const auto zero = [](const Eigen::Vector3d&, double) { return 0.0; };
    const SurfaceMesh still = evolve_step(m, zero, 0.0, 1e-2, false);
    CHECK((still.vertex_positions - m.vertex_positions).cwiseAbs().maxCoeff() == 0.0);

    // radial speed |x| grows the radius exponentially; Heun is second order
    const auto radial = [](const Eigen::Vector3d& x, double) { return x.norm(); };
    const double dt = 1e-2;
    const SurfaceMesh grown = evolve_step(m, radial, 0.0, dt, false);
    const double exact = std::exp(dt);
    for (int i = 0; i < m.n_vertices(); ++i)
        CHECK(grown.vertex_positions.row(i).norm() ==
              doctest::Approx(exact).epsilon(5.0 * dt * dt * dt));

    // Richardson: two half steps vs one full step differ at O(dt^3)
    const SurfaceMesh full = evolve_step(m, radial, 0.0, dt, false);
    SurfaceMesh halves = evolve_step(m, radial, 0.0, dt / 2.0, false);
    halves = evolve_step(halves, radial, dt / 2.0, dt / 2.0, false);
    const double gap =
        (full.vertex_positions - halves.vertex_positions).cwiseAbs().maxCoeff();
    CHECK(gap <= 2.0 * dt * dt * dt);
}

TEST_CASE("evolving surface bookkeeping") {
    const SurfaceMesh m = build_icosphere(2, 1.0);
    const auto vn = [](const Eigen::Vector3d& x, double t) {
        return 0.2 * std::cos(4.0 * t) * x.z();
    };
    const double dt = 1e-2, T = 10 * dt;
    const EvolvingSurface evo = evolve_surface(m, vn, T, dt);
    CHECK(evo.snapshots.size() == 11);
    CHECK(&evo.at(0.0) != nullptr);
    CHECK(evo.at(5 * dt).n_vertices() == m.n_vertices());
    CHECK_THROWS_AS(evo.at(2.0 * T), ParameterError);

    const double area0 = surface_area(evo.at(0.0));
    double max_vn = 0.0;
    for (const auto& [t, snap] : evo.snapshots) {
        CHECK(std::abs(surface_area(snap) - area0) / area0 <= 1e-3);
        CHECK(snap.triangles == m.triangles);
        for (int i = 0; i < m.n_vertices(); ++i)
            max_vn = std::max(max_vn, std::abs(vn(snap.vertex_positions.row(i), t)));
    }
    // vertex trajectories move at most max|v_n| dt per step
    const SurfaceMesh& s0 = evo.at(0.0);
    const SurfaceMesh& s1 = evo.at(dt);
    const double move =
        (s1.vertex_positions - s0.vertex_positions).rowwise().norm().maxCoeff();
    CHECK(move <= max_vn * dt * (1.0 + 1e-6));
}
