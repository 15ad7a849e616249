#pragma once

#include "ems/assembly.hpp"
#include "ems/config.hpp"
#include "ems/diagnostics.hpp"
#include "ems/grid.hpp"
#include "ems/integrate.hpp"
#include "ems/types.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace ems {

/// Fine-grid problem data shared by the reference solver and every
/// multiscale cell.
struct FineSetup {
  StructuredGrid2D fine;
  FreeNodeMap map;
  std::vector<CoefficientField> kappa;          ///< per species
  SparseMatrix mass_free;
  std::vector<SparseMatrix> diffusion_free;     ///< per species
  std::vector<SparseMatrix> convection_free;    ///< per species
  std::vector<Vector> u0_full;                  ///< per species, all nodes
  std::vector<Vector> u0_free;
};

FineSetup build_fine_setup(const ExperimentConfig& cfg);

/// Per-step diagnostics of a multiscale run (single-species runs).
struct CellDiagnostics {
  std::vector<Real> times;
  std::vector<Real> energy;     ///< Allen-Cahn free energy (empty otherwise)
  std::vector<Real> max_norm;   ///< sup norm of the prolongated field
};

struct CellResult {
  Real H = 0.0;
  int level = 0;
  std::vector<Real> eps0, eps1;  ///< per species; empty on error
  Index space_dim = 0;
  Real wall_seconds = 0.0;
  std::string error;             ///< empty on success
  CellDiagnostics diag;
};

struct ErrorReport {
  std::vector<Real> H_values;
  std::vector<int> levels;
  int species = 1;
  std::vector<CellResult> cells;  ///< H-major, level-minor
  std::string fine_hash;
  bool reference_from_cache = false;
  Real reference_wall_seconds = 0.0;

  const CellResult* cell(Real H, int level) const;
};

/// Load the cached reference final state or run the backward-Euler solver
/// and cache it (atomic write) under <output_dir>/refcache/<hash>.bin.
std::vector<Vector> compute_or_load_reference(const ExperimentConfig& cfg, const FineSetup& fs,
                                              bool* from_cache = nullptr,
                                              Real* wall_seconds = nullptr,
                                              std::ostream* log = nullptr);

/// Full (H, level) sweep: reference, per-cell multiscale runs, error metrics,
/// CSV tables, run manifest, optional VTK snapshots. Module errors abort only
/// their cell; the failure is recorded in the report.
ErrorReport run_suite(const ExperimentConfig& cfg, std::ostream* log = nullptr);

/// Paper-style table for one species: per level eps0/CR0/eps1/CR1 columns,
/// values in %.4E scientific notation, blank cells for failures and
/// undefined rates.
std::string report_to_csv(const ErrorReport& report, int species_index);

/// Split CSV text into trimmed cells (for the round-trip contract).
std::vector<std::vector<std::string>> parse_csv(const std::string& text);

/// Paths used by run_suite.
std::string table_path(const ExperimentConfig& cfg, int species_index);
std::string manifest_path(const ExperimentConfig& cfg);
std::string reference_cache_path(const ExperimentConfig& cfg);

}  // namespace ems
