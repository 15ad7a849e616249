#pragma once

#include "ems/coefficient.hpp"
#include "ems/grid.hpp"
#include "ems/reaction.hpp"
#include "ems/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace ems {

/// How a species' permeability field is produced.
struct KappaSpec {
  enum class Preset { constant, raster, log_uniform, inclusions };
  Preset preset = Preset::constant;
  Real value = 1.0;       ///< constant
  std::string path;       ///< raster
  Real contrast = 1e4;    ///< log_uniform / inclusions
  Real fraction = 0.2;    ///< inclusions
  std::uint64_t seed = 1; ///< log_uniform / inclusions
};

struct InitialSpec {
  enum class Preset { zero, constant, sin2pi, scaled_sinpi, schnakenberg_bumps, mixed_modes };
  Preset preset = Preset::sin2pi;
  Real amplitude = 1.0;  ///< scaled_sinpi / constant
};

/// Declarative experiment description (parsed from the sectioned key-value
/// config format, see parse_config).
struct ExperimentConfig {
  Rect domain;
  Real h = 0.0;                  ///< fine mesh size, side/h integral
  std::vector<Real> H_values;    ///< coarse mesh sizes, H/h dyadic
  std::vector<int> levels;

  Real dt = 0.0;
  Real t_end = 0.0;

  std::vector<KappaSpec> kappa;        ///< one per species
  std::vector<VelocityField> velocity; ///< one per species
  ReactionModel reaction;
  InitialSpec initial;

  std::string output_dir = "out";
  std::string table_name = "table.csv";
  bool write_vtk = false;
  std::vector<Real> snapshot_times;
  bool diagnostics = true;  ///< energy/max traces for single-species runs

  std::uint64_t seed = 1;
  Real g_quantum = 1e-2;
  Index dense_propagator_max_dim = 512;
  bool freeze_modulation = false;
  Real newton_tol = 1e-10;

  int species() const { return reaction.species; }
  Index fine_cells_x() const;
  Index fine_cells_y() const;
};

/// Parse the sectioned plain-text format; throws std::runtime_error with the
/// offending line on malformed input. `base_dir` resolves relative raster
/// paths.
ExperimentConfig parse_config_text(const std::string& text, const std::string& base_dir = "");
ExperimentConfig load_config(const std::string& path);

/// Validates mesh/time invariants: side/h and side/H integral, H/h a power of
/// two >= 2, T/dt integral, snapshot times multiples of dt.
void validate_config(const ExperimentConfig& cfg);

/// Canonical serialization of the fields that determine the reference
/// solution (domain, h, dt, T, kappa incl. raster bytes, velocity, reaction,
/// initial data, Newton tolerance) and its FNV-1a hash.
std::string fine_subconfig_serialization(const ExperimentConfig& cfg);
std::string fine_subconfig_hash(const ExperimentConfig& cfg);

/// Materialize a species' permeability on the fine grid.
CoefficientField realize_kappa(const KappaSpec& spec, const StructuredGrid2D& fine);

/// Nodal interpolation of a species' initial datum.
Vector realize_initial(const InitialSpec& spec, int species_index,
                       const ExperimentConfig& cfg, const StructuredGrid2D& fine);

}  // namespace ems
