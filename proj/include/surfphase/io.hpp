#pragma once

#include "surfphase/mesh.hpp"
#include "surfphase/simulation.hpp"

#include <string>
#include <vector>

namespace surfphase {

/// Published CSV column names, in header order.
const std::vector<std::string>& ledger_columns();

/// Column value of a row by name; throws ConfigError for unknown names.
double ledger_value(const LedgerRow& row, const std::string& column);

/// Parses and validates a JSON scenario document.  Top-level keys: surface,
/// evolution, initial, material, stepping, output — all optional, unknown
/// keys rejected anywhere, defaults filled.  Error messages name the JSON
/// path of the offending entry.
ScenarioConfig parse_config(const std::string& text);

/// Normalized JSON echo of a config; parse(print(parse(x))) == parse(x).
std::string print_config(const ScenarioConfig& config);

/// CSV with the fixed ledger header, 17 significant digits, LF endings.
/// Written atomically (temp file + rename).
void write_ledger_csv(const EnergyLedger& ledger, const std::string& path);

/// Parses a ledger CSV back; the two report-only fields are left at zero.
EnergyLedger read_ledger_csv(const std::string& path);

/// Wavefront OBJ with the nodal phase field as a comment block, plus a
/// sidecar file `path + ".colors"` holding one "r g b" line per vertex
/// (phi = -1 blue through phi = +1 red).
void write_mesh_obj(const SurfaceMesh& mesh, const Eigen::VectorXd& phi,
                    const std::string& path);

/// Self-contained SVG line chart, one polyline per requested column over
/// time.  Throws ConfigError for an unknown column or an empty ledger.
void render_timeseries_svg(const EnergyLedger& ledger,
                           const std::vector<std::string>& columns,
                           const std::string& path);

/// Scans a completed ledger against the shipped invariant bounds and returns
/// the name of the first violated column ("" when all hold): separation
/// margin at least the guard band; relative mass drift <= 1e-8; relative
/// area drift <= 1e-3 when the surface moves with compatibility projection
/// (or is stationary); potential energy above its nodal lower bound;
/// weak-divergence residual <= 1e-8 (1 + sqrt(E_kin)); and, for stationary
/// scenarios started at rest, E_tot non-increasing within 1e-12 (1 + |E_tot|).
std::string first_invariant_violation(const ScenarioConfig& config,
                                      const EnergyLedger& ledger);

/// Artifact bookkeeping for one run; written even when the run fails.
struct RunManifest {
    std::string config_echo;
    std::string version = "surfphase 1.0";
    std::string started;
    std::string finished;
    std::string ledger_path; ///< relative to the output directory
    std::vector<std::string> snapshot_paths;
    int exit_status = 0;
    std::string failure; ///< empty on success
};

void write_manifest(const RunManifest& manifest, const std::string& path);

} // namespace surfphase
