#include "surfphase/io.hpp"
#include "surfphase/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace surfphase {

namespace {

using nlohmann::json;

/// Atomic text write: temp file in the same directory, then rename.
void write_atomic(const std::string& path, const std::string& content) {
    namespace fs = std::filesystem;
    const fs::path target(path);
    if (target.has_parent_path()) fs::create_directories(target.parent_path());
    const fs::path tmp = target.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw ConfigError("cannot write " + tmp.string());
        out << content;
        if (!out.good()) throw ConfigError("write failed for " + tmp.string());
    }
    fs::rename(tmp, target);
}

std::string format17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void reject_unknown(const json& obj, const std::string& path,
                    std::initializer_list<const char*> allowed) {
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (std::find_if(allowed.begin(), allowed.end(), [&](const char* k) {
                return it.key() == k;
            }) == allowed.end())
            throw ConfigError(path + ": unknown key \"" + it.key() + "\"");
}

double get_number(const json& obj, const std::string& path, const char* key, double fallback) {
    if (!obj.contains(key)) return fallback;
    const json& v = obj.at(key);
    if (!v.is_number()) throw ConfigError(path + "." + key + ": expected a number");
    return v.get<double>();
}

long get_integer(const json& obj, const std::string& path, const char* key, long fallback) {
    if (!obj.contains(key)) return fallback;
    const json& v = obj.at(key);
    if (!v.is_number_integer()) throw ConfigError(path + "." + key + ": expected an integer");
    return v.get<long>();
}

std::string get_string(const json& obj, const std::string& path, const char* key,
                       const std::string& fallback) {
    if (!obj.contains(key)) return fallback;
    const json& v = obj.at(key);
    if (!v.is_string()) throw ConfigError(path + "." + key + ": expected a string");
    return v.get<std::string>();
}

bool get_bool(const json& obj, const std::string& path, const char* key, bool fallback) {
    if (!obj.contains(key)) return fallback;
    const json& v = obj.at(key);
    if (!v.is_boolean()) throw ConfigError(path + "." + key + ": expected a boolean");
    return v.get<bool>();
}

json object_at(const json& root, const char* key) {
    if (!root.contains(key)) return json::object();
    const json& v = root.at(key);
    if (!v.is_object()) throw ConfigError(std::string(key) + ": expected an object");
    return v;
}

} // namespace

const std::vector<std::string>& ledger_columns() {
    static const std::vector<std::string> cols = {
        "t",          "E_kin",     "E_grad",  "E_pot",      "E_tot",
        "dissipation", "mass",     "area",    "volume",     "sep_margin",
        "div_res",    "normal_res", "mean_mu", "mubar_ratio", "rho_transport_res"};
    return cols;
}

double ledger_value(const LedgerRow& row, const std::string& column) {
    if (column == "t") return row.t;
    if (column == "E_kin") return row.E_kin;
    if (column == "E_grad") return row.E_grad;
    if (column == "E_pot") return row.E_pot;
    if (column == "E_tot") return row.E_tot;
    if (column == "dissipation") return row.dissipation;
    if (column == "mass") return row.mass;
    if (column == "area") return row.area;
    if (column == "volume") return row.volume;
    if (column == "sep_margin") return row.sep_margin;
    if (column == "div_res") return row.div_res;
    if (column == "normal_res") return row.normal_res;
    if (column == "mean_mu") return row.mean_mu;
    if (column == "mubar_ratio") return row.mubar_ratio;
    if (column == "rho_transport_res") return row.rho_transport_res;
    throw ConfigError("unknown ledger column \"" + column + "\"");
}

ScenarioConfig parse_config(const std::string& text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config syntax error: ") + e.what());
    }
    if (!root.is_object()) throw ConfigError("config root must be a JSON object");
    reject_unknown(root, "config",
                   {"surface", "evolution", "initial", "material", "stepping", "output"});

    ScenarioConfig cfg;

    const json surface = object_at(root, "surface");
    reject_unknown(surface, "surface", {"kind", "radius", "subdivision"});
    cfg.surface.kind = get_string(surface, "surface", "kind", cfg.surface.kind);
    cfg.surface.radius = get_number(surface, "surface", "radius", cfg.surface.radius);
    cfg.surface.subdivision = static_cast<int>(
        get_integer(surface, "surface", "subdivision", cfg.surface.subdivision));

    const json evolution = object_at(root, "evolution");
    reject_unknown(evolution, "evolution",
                   {"law", "amplitude", "frequency", "compatibility_projection"});
    cfg.evolution.law = get_string(evolution, "evolution", "law", cfg.evolution.law);
    cfg.evolution.amplitude =
        get_number(evolution, "evolution", "amplitude", cfg.evolution.amplitude);
    cfg.evolution.frequency =
        get_number(evolution, "evolution", "frequency", cfg.evolution.frequency);
    cfg.evolution.compatibility_projection = get_bool(
        evolution, "evolution", "compatibility_projection",
        cfg.evolution.compatibility_projection);

    const json initial = object_at(root, "initial");
    reject_unknown(initial, "initial",
                   {"phase", "mean", "amplitude", "seed", "smoothing_passes", "velocity",
                    "rotation_rate", "rotation_axis"});
    cfg.initial.phase = get_string(initial, "initial", "phase", cfg.initial.phase);
    cfg.initial.mean = get_number(initial, "initial", "mean", cfg.initial.mean);
    cfg.initial.amplitude = get_number(initial, "initial", "amplitude", cfg.initial.amplitude);
    cfg.initial.seed = static_cast<unsigned>(
        get_integer(initial, "initial", "seed", static_cast<long>(cfg.initial.seed)));
    cfg.initial.smoothing_passes = static_cast<int>(
        get_integer(initial, "initial", "smoothing_passes", cfg.initial.smoothing_passes));
    cfg.initial.velocity = get_string(initial, "initial", "velocity", cfg.initial.velocity);
    cfg.initial.rotation_rate =
        get_number(initial, "initial", "rotation_rate", cfg.initial.rotation_rate);
    if (initial.contains("rotation_axis")) {
        const json& axis = initial.at("rotation_axis");
        if (!axis.is_array() || axis.size() != 3)
            throw ConfigError("initial.rotation_axis: expected an array of 3 numbers");
        for (int k = 0; k < 3; ++k) {
            if (!axis[k].is_number())
                throw ConfigError("initial.rotation_axis: expected an array of 3 numbers");
            cfg.initial.rotation_axis[k] = axis[k].get<double>();
        }
    }

    const json material = object_at(root, "material");
    reject_unknown(material, "material",
                   {"theta", "theta0", "rho1", "rho2", "nu1", "nu2", "eps_guard"});
    cfg.material.theta = get_number(material, "material", "theta", cfg.material.theta);
    cfg.material.theta0 = get_number(material, "material", "theta0", cfg.material.theta0);
    cfg.material.rho1_tilde = get_number(material, "material", "rho1", cfg.material.rho1_tilde);
    cfg.material.rho2_tilde = get_number(material, "material", "rho2", cfg.material.rho2_tilde);
    cfg.material.nu1 = get_number(material, "material", "nu1", cfg.material.nu1);
    cfg.material.nu2 = get_number(material, "material", "nu2", cfg.material.nu2);
    cfg.material.eps_guard =
        get_number(material, "material", "eps_guard", cfg.material.eps_guard);
    if (!(cfg.material.theta < cfg.material.theta0))
        throw ConfigError(
            "material: the convex split requires theta < theta0 strictly");

    const json stepping = object_at(root, "stepping");
    reject_unknown(stepping, "stepping", {"dt", "t_end", "penalty_weight"});
    cfg.dt = get_number(stepping, "stepping", "dt", cfg.dt);
    cfg.t_end = get_number(stepping, "stepping", "t_end", cfg.t_end);
    cfg.penalty_weight = get_number(stepping, "stepping", "penalty_weight", cfg.penalty_weight);

    const json output = object_at(root, "output");
    reject_unknown(output, "output", {"directory", "snapshot_every"});
    cfg.output.directory = get_string(output, "output", "directory", cfg.output.directory);
    cfg.output.snapshot_every = static_cast<int>(
        get_integer(output, "output", "snapshot_every", cfg.output.snapshot_every));

    cfg.validate();
    return cfg;
}

std::string print_config(const ScenarioConfig& cfg) {
    json root;
    root["surface"] = {{"kind", cfg.surface.kind},
                       {"radius", cfg.surface.radius},
                       {"subdivision", cfg.surface.subdivision}};
    root["evolution"] = {{"law", cfg.evolution.law},
                         {"amplitude", cfg.evolution.amplitude},
                         {"frequency", cfg.evolution.frequency},
                         {"compatibility_projection", cfg.evolution.compatibility_projection}};
    root["initial"] = {{"phase", cfg.initial.phase},
                       {"mean", cfg.initial.mean},
                       {"amplitude", cfg.initial.amplitude},
                       {"seed", cfg.initial.seed},
                       {"smoothing_passes", cfg.initial.smoothing_passes},
                       {"velocity", cfg.initial.velocity},
                       {"rotation_rate", cfg.initial.rotation_rate},
                       {"rotation_axis",
                        {cfg.initial.rotation_axis[0], cfg.initial.rotation_axis[1],
                         cfg.initial.rotation_axis[2]}}};
    root["material"] = {{"theta", cfg.material.theta},   {"theta0", cfg.material.theta0},
                        {"rho1", cfg.material.rho1_tilde}, {"rho2", cfg.material.rho2_tilde},
                        {"nu1", cfg.material.nu1},       {"nu2", cfg.material.nu2},
                        {"eps_guard", cfg.material.eps_guard}};
    root["stepping"] = {{"dt", cfg.dt},
                        {"t_end", cfg.t_end},
                        {"penalty_weight", cfg.penalty_weight}};
    root["output"] = {{"directory", cfg.output.directory},
                      {"snapshot_every", cfg.output.snapshot_every}};
    return root.dump(2) + "\n";
}

void write_ledger_csv(const EnergyLedger& ledger, const std::string& path) {
    std::ostringstream out;
    const auto& cols = ledger_columns();
    for (std::size_t c = 0; c < cols.size(); ++c)
        out << (c ? "," : "") << cols[c];
    out << "\n";
    for (const auto& row : ledger.rows) {
        for (std::size_t c = 0; c < cols.size(); ++c)
            out << (c ? "," : "") << format17(ledger_value(row, cols[c]));
        out << "\n";
    }
    write_atomic(path, out.str());
}

EnergyLedger read_ledger_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read " + path);
    std::string line;
    if (!std::getline(in, line)) throw ConfigError(path + ": empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::string expected;
    for (const auto& c : ledger_columns()) expected += (expected.empty() ? "" : ",") + c;
    if (line != expected) throw ConfigError(path + ": unexpected CSV header");

    EnergyLedger ledger;
    const auto& cols = ledger_columns();
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string cell;
        std::vector<double> values;
        while (std::getline(ss, cell, ',')) values.push_back(std::stod(cell));
        if (values.size() != cols.size())
            throw ConfigError(path + ": row with " + std::to_string(values.size()) +
                              " fields, expected " + std::to_string(cols.size()));
        LedgerRow row;
        row.t = values[0];
        row.E_kin = values[1];
        row.E_grad = values[2];
        row.E_pot = values[3];
        row.E_tot = values[4];
        row.dissipation = values[5];
        row.mass = values[6];
        row.area = values[7];
        row.volume = values[8];
        row.sep_margin = values[9];
        row.div_res = values[10];
        row.normal_res = values[11];
        row.mean_mu = values[12];
        row.mubar_ratio = values[13];
        row.rho_transport_res = values[14];
        ledger.append(row);
    }
    return ledger;
}

void write_mesh_obj(const SurfaceMesh& mesh, const Eigen::VectorXd& phi,
                    const std::string& path) {
    if (phi.size() != mesh.n_vertices())
        throw ParameterError("phase field length does not match vertex count");
    std::ostringstream out;
    out << "# triangulated surface with nodal phase field\n";
    out << "# phi:";
    for (int i = 0; i < phi.size(); ++i) out << " " << format17(phi[i]);
    out << "\n";
    for (int i = 0; i < mesh.n_vertices(); ++i)
        out << "v " << format17(mesh.vertex_positions(i, 0)) << " "
            << format17(mesh.vertex_positions(i, 1)) << " "
            << format17(mesh.vertex_positions(i, 2)) << "\n";
    for (int t = 0; t < mesh.n_triangles(); ++t)
        out << "f " << mesh.triangles(t, 0) + 1 << " " << mesh.triangles(t, 1) + 1 << " "
            << mesh.triangles(t, 2) + 1 << "\n";
    write_atomic(path, out.str());

    std::ostringstream colors;
    for (int i = 0; i < phi.size(); ++i) {
        const double s = std::clamp(0.5 * (phi[i] + 1.0), 0.0, 1.0); // -1 blue, +1 red
        colors << format17(s) << " 0 " << format17(1.0 - s) << "\n";
    }
    write_atomic(path + ".colors", colors.str());
}

void render_timeseries_svg(const EnergyLedger& ledger,
                           const std::vector<std::string>& columns,
                           const std::string& path) {
    if (ledger.rows.empty()) throw ConfigError("cannot plot an empty ledger");
    if (columns.empty()) throw ConfigError("no columns requested");
    const int width = 720, height = 420, margin = 50;
    double t0 = ledger.rows.front().t, t1 = ledger.rows.back().t;
    if (t1 <= t0) t1 = t0 + 1.0;
    double lo = 0.0, hi = 0.0;
    bool first = true;
    for (const auto& col : columns)
        for (const auto& row : ledger.rows) {
            const double v = ledger_value(row, col);
            if (first) lo = hi = v, first = false;
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    if (hi <= lo) hi = lo + 1.0;

    auto px = [&](double t) { return margin + (t - t0) / (t1 - t0) * (width - 2 * margin); };
    auto py = [&](double v) {
        return height - margin - (v - lo) / (hi - lo) * (height - 2 * margin);
    };
    static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                    "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<line x1=\"" << margin << "\" y1=\"" << height - margin << "\" x2=\""
        << width - margin << "\" y2=\"" << height - margin
        << "\" stroke=\"black\" stroke-width=\"1\"/>\n";
    out << "<line x1=\"" << margin << "\" y1=\"" << margin << "\" x2=\"" << margin
        << "\" y2=\"" << height - margin << "\" stroke=\"black\" stroke-width=\"1\"/>\n";
    out << "<text x=\"" << margin << "\" y=\"" << height - margin + 30
        << "\" font-size=\"11\">t = " << format17(t0) << " .. " << format17(t1)
        << "</text>\n";
    out << "<text x=\"5\" y=\"" << margin - 10 << "\" font-size=\"11\">range "
        << format17(lo) << " .. " << format17(hi) << "</text>\n";
    for (std::size_t c = 0; c < columns.size(); ++c) {
        const char* color = palette[c % 8];
        out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
        for (const auto& row : ledger.rows)
            out << px(row.t) << "," << py(ledger_value(row, columns[c])) << " ";
        out << "\"/>\n";
        out << "<text x=\"" << width - margin + 2 << "\" y=\"" << margin + 14 * (c + 1)
            << "\" font-size=\"11\" fill=\"" << color << "\">" << columns[c] << "</text>\n";
    }
    out << "</svg>\n";
    write_atomic(path, out.str());
}

std::string first_invariant_violation(const ScenarioConfig& config,
                                      const EnergyLedger& ledger) {
    const auto& rows = ledger.rows;
    if (rows.empty()) return "t";
    const double mass0 = rows.front().mass;
    const double area0 = rows.front().area;
    const bool moving =
        config.evolution.law != "stationary" && config.evolution.amplitude != 0.0;
    const bool check_area = !moving || config.evolution.compatibility_projection;
    const bool stationary_rest = !moving && config.initial.velocity == "zero";
    // scale floor keeps the relative test meaningful for mean-zero phases
    const double mass_scale = std::max(std::abs(mass0), 1e-6 * area0);
    // nodal quadrature keeps Psi >= F(0) - theta0/2 = -theta0/2 pointwise
    const double pot_floor = -0.5 * config.material.theta0 * 1.000001;

    for (std::size_t n = 0; n < rows.size(); ++n) {
        const LedgerRow& r = rows[n];
        if (r.sep_margin < config.material.eps_guard) return "sep_margin";
        if (std::abs(r.mass - mass0) > 1e-8 * mass_scale) return "mass";
        if (check_area && std::abs(r.area - area0) > 1e-3 * area0) return "area";
        if (r.E_pot < pot_floor * r.area) return "E_pot";
        if (r.div_res > 1e-8 * (1.0 + std::sqrt(r.E_kin))) return "div_res";
        if (stationary_rest && n > 0 &&
            r.E_tot > rows[n - 1].E_tot + 1e-12 * (1.0 + std::abs(rows[n - 1].E_tot)))
            return "E_tot";
    }
    return "";
}

void write_manifest(const RunManifest& manifest, const std::string& path) {
    json root;
    try {
        root["config"] = json::parse(manifest.config_echo);
    } catch (const json::parse_error&) {
        root["config"] = manifest.config_echo;
    }
    root["version"] = manifest.version;
    root["started"] = manifest.started;
    root["finished"] = manifest.finished;
    root["ledger"] = manifest.ledger_path;
    root["snapshots"] = manifest.snapshot_paths;
    root["exit_status"] = manifest.exit_status;
    root["failure"] = manifest.failure;
    write_atomic(path, root.dump(2) + "\n");
}

} // namespace surfphase
