#include "surfphase/errors.hpp"
#include "surfphase/io.hpp"
#include "surfphase/operators.hpp"
#include "surfphase/simulation.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace {

std::string now_iso() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw surfphase::ConfigError("cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Runs one scenario, writes the artifact set, and returns the process exit
/// code (0 ok, 2 invariant violation, 1 failure).
int run_scenario(const std::string& config_text, const std::string& out_dir) {
    namespace fs = std::filesystem;
    using namespace surfphase;

    RunManifest manifest;
    manifest.started = now_iso();
    manifest.ledger_path = "ledger.csv";
    const std::string manifest_path = (fs::path(out_dir) / "manifest.json").string();

    ScenarioConfig config;
    try {
        config = parse_config(config_text);
        manifest.config_echo = print_config(config);

        auto [traj, ledger] = simulate(config);

        write_ledger_csv(ledger, (fs::path(out_dir) / "ledger.csv").string());
        render_timeseries_svg(ledger, {"E_tot", "E_kin", "dissipation"},
                              (fs::path(out_dir) / "energy.svg").string());
        render_timeseries_svg(ledger, {"mass", "sep_margin"},
                              (fs::path(out_dir) / "invariants.svg").string());
        write_mesh_obj(traj.final_mesh, traj.final_phase.phi,
                       (fs::path(out_dir) / "final.obj").string());
        manifest.snapshot_paths.push_back("final.obj");
        for (std::size_t k = 0; k < traj.snapshots.size(); ++k) {
            const std::string name = "snapshot_" + std::to_string(k) + ".obj";
            write_mesh_obj(traj.snapshots[k].second,
                           traj.phases[std::min(traj.phases.size() - 1,
                                                k * std::size_t(config.output.snapshot_every))]
                               .phi,
                           (fs::path(out_dir) / name).string());
            manifest.snapshot_paths.push_back(name);
        }

        const std::string violated = first_invariant_violation(config, ledger);
        if (!violated.empty()) {
            manifest.exit_status = 2;
            manifest.failure = "invariant violation in column " + violated;
            manifest.finished = now_iso();
            write_manifest(manifest, manifest_path);
            std::cerr << "invariant violation: " << violated << "\n";
            return 2;
        }
        manifest.finished = now_iso();
        write_manifest(manifest, manifest_path);
        std::cout << "ok: " << ledger.rows.size() - 1 << " steps, final E_tot = "
                  << ledger.rows.back().E_tot << "\n";
        return 0;
    } catch (const std::exception& e) {
        manifest.exit_status = 1;
        manifest.failure = e.what();
        manifest.finished = now_iso();
        try {
            write_manifest(manifest, manifest_path);
        } catch (...) {
        }
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

struct Check {
    std::string name;
    double measured;
    double threshold;
    bool larger_is_better;
    bool pass() const {
        return larger_is_better ? measured >= threshold : measured <= threshold;
    }
};

int verify_ops(int level) {
    using namespace surfphase;
    std::vector<Check> checks;
    // the published tolerances are pinned at level 4; coarser levels get the
    // second-order factor 4 per missing level
    const double slack = std::pow(4.0, std::max(0, 4 - level));

    const SurfaceMesh mesh = build_icosphere(level, 1.0);

    const Eigen::VectorXd evals = laplace_beltrami_eigenvalues(mesh, 16);
    const double targets[3] = {2.0, 6.0, 12.0};
    const int counts[3] = {3, 5, 7};
    const double tols[3] = {0.02, 0.04, 0.06};
    int idx = 1; // skip the constant mode
    for (int c = 0; c < 3; ++c) {
        double worst = 0.0;
        for (int k = 0; k < counts[c]; ++k, ++idx)
            worst = std::max(worst, std::abs(evals[idx] - targets[c]) / targets[c]);
        checks.push_back({"eigenvalue cluster l(l+1)=" + std::to_string(int(targets[c])),
                          worst, tols[c] * slack, false});
    }

    double h_err = 0.0;
    for (int i = 0; i < mesh.n_vertices(); ++i)
        h_err = std::max(h_err, std::abs(mesh.vertex_mean_curvature[i] - 2.0) / 2.0);
    checks.push_back({"mean curvature H = 2", h_err, 0.025 * slack, false});

    // The sampled rotation field is linear, so its strain in the discrete
    // tangent planes vanishes identically; the convergent quantity is the
    // strain measured against the exact sphere tangent planes.
    auto killing_strain = [](const SurfaceMesh& m) {
        Eigen::MatrixX3d v(m.n_vertices(), 3);
        const Eigen::Vector3d omega(0.3, -0.2, 0.9);
        for (int i = 0; i < m.n_vertices(); ++i)
            v.row(i) = omega.cross(Eigen::Vector3d(m.vertex_positions.row(i)));
        const auto grads = vector_gradient(m, v);
        std::vector<Eigen::Matrix3d> strain(m.n_triangles());
        for (int t = 0; t < m.n_triangles(); ++t) {
            Eigen::Vector3d c = Eigen::Vector3d::Zero();
            for (int k = 0; k < 3; ++k) c += m.vertex_positions.row(m.triangles(t, k));
            c.normalize();
            const Eigen::Matrix3d P = Eigen::Matrix3d::Identity() - c * c.transpose();
            strain[t] = P * (0.5 * (grads[t] + grads[t].transpose())) * P;
        }
        return std::pair{l2_norm_triangles(m, rate_of_strain(m, v)),
                         l2_norm_triangles(m, strain)};
    };
    const auto [disc_coarse, strain_coarse] = killing_strain(mesh);
    const auto [disc_fine, strain_fine] = killing_strain(build_icosphere(level + 1, 1.0));
    (void)disc_fine;
    checks.push_back({"Killing strain (discrete planes)", disc_coarse, 1e-12, false});
    checks.push_back({"Killing strain refinement ratio", strain_coarse / strain_fine, 1.7, true});

    // lift oracle on the unit sphere: vn = z gives H vn = 2z and Pi = z
    {
        Eigen::VectorXd vn = mesh.vertex_positions.col(2);
        vn = project_compatible(mesh, vn);
        const auto [Pi, u_hat] = compute_lift(mesh, vn);
        Eigen::VectorXd exact = mesh.vertex_positions.col(2);
        const Eigen::VectorXd a = mesh.lumped_vertex_areas();
        exact.array() -= a.dot(exact) / a.sum();
        const double err = l2_norm(mesh, Eigen::VectorXd(Pi - exact)) / l2_norm(mesh, exact);
        checks.push_back({"lift potential, vn = z", err, 0.02 * slack, false});

        const double compat =
            std::abs(a.dot(Eigen::VectorXd(mesh.vertex_mean_curvature.cwiseProduct(vn))));
        const double scale = a.dot(mesh.vertex_mean_curvature.cwiseProduct(vn).cwiseAbs());
        checks.push_back({"compatibility integral", compat / scale, 1e-10, false});
        (void)u_hat;
    }

    bool all = true;
    std::printf("%-36s %12s %12s  %s\n", "check", "measured", "threshold", "status");
    for (const auto& c : checks) {
        all = all && c.pass();
        std::printf("%-36s %12.4e %12.4e  %s\n", c.name.c_str(), c.measured, c.threshold,
                    c.pass() ? "PASS" : "FAIL");
    }
    return all ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"two-phase flow on an evolving surface"};
    app.require_subcommand(1);

    std::string config_path, out_dir = "out";
    double dt_override = -1.0, t_end_override = -1.0;
    long seed_override = -1;
    auto* run = app.add_subcommand("run", "run one scenario");
    run->add_option("config", config_path, "JSON scenario file")->required();
    run->add_option("--out", out_dir, "output directory");
    run->add_option("--dt", dt_override, "override stepping.dt");
    run->add_option("--t-end", t_end_override, "override stepping.t_end");
    run->add_option("--seed", seed_override, "override initial.seed");

    int level = 3;
    auto* verify = app.add_subcommand("verify-ops", "analytic operator battery");
    verify->add_option("--level", level, "icosphere subdivision level");

    std::string sweep_config, sweep_param;
    std::string sweep_out = "out";
    auto* sweep = app.add_subcommand("sweep", "serial parameter sweep");
    sweep->add_option("config", sweep_config, "JSON scenario file")->required();
    sweep->add_option("--param", sweep_param, "dotted.path=v1,v2,...")->required();
    sweep->add_option("--out", sweep_out, "output directory");

    CLI11_PARSE(app, argc, argv);

    try {
        if (app.got_subcommand(verify)) return verify_ops(level);

        if (app.got_subcommand(run)) {
            nlohmann::json doc = nlohmann::json::parse(read_file(config_path));
            if (dt_override > 0.0) doc["stepping"]["dt"] = dt_override;
            if (t_end_override > 0.0) doc["stepping"]["t_end"] = t_end_override;
            if (seed_override >= 0) doc["initial"]["seed"] = seed_override;
            return run_scenario(doc.dump(), out_dir);
        }

        // sweep
        const auto eq = sweep_param.find('=');
        if (eq == std::string::npos)
            throw surfphase::ConfigError("--param expects dotted.path=v1,v2,...");
        std::string pointer = "/" + sweep_param.substr(0, eq);
        for (auto& ch : pointer)
            if (ch == '.') ch = '/';
        std::vector<std::string> values;
        std::stringstream ss(sweep_param.substr(eq + 1));
        std::string tok;
        while (std::getline(ss, tok, ',')) values.push_back(tok);
        if (values.empty()) throw surfphase::ConfigError("--param has no values");

        const nlohmann::json base = nlohmann::json::parse(read_file(sweep_config));
        int worst = 0;
        for (std::size_t k = 0; k < values.size(); ++k) {
            nlohmann::json doc = base;
            try {
                doc[nlohmann::json::json_pointer(pointer)] = std::stod(values[k]);
            } catch (const std::invalid_argument&) {
                doc[nlohmann::json::json_pointer(pointer)] = values[k];
            }
            const std::string dir =
                (std::filesystem::path(sweep_out) / ("sweep_" + std::to_string(k))).string();
            std::cout << "[sweep " << k << "] " << sweep_param.substr(0, eq) << " = "
                      << values[k] << " -> " << dir << "\n";
            worst = std::max(worst, run_scenario(doc.dump(), dir));
        }
        return worst;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
