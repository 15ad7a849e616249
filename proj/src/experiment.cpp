#include "ems/experiment.hpp"

#include "ems/edge_basis.hpp"
#include "ems/multiscale_space.hpp"
#include "ems/pou.hpp"
#include "ems/vtk.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

namespace ems {

namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

Real seconds_since(Clock::time_point t0) {
  return std::chrono::duration<Real>(Clock::now() - t0).count();
}

std::string format_sci(Real v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4E", v);
  return buf;
}

std::string format_h(Real v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

const CellResult* ErrorReport::cell(Real H, int level) const {
  for (const CellResult& c : cells) {
    if (c.level == level && std::abs(c.H - H) <= 1e-12 * std::max<Real>(1.0, H)) return &c;
  }
  return nullptr;
}

FineSetup build_fine_setup(const ExperimentConfig& cfg) {
  FineSetup out;
  out.fine = build_grid(cfg.domain, cfg.fine_cells_x(), cfg.fine_cells_y());
  out.map = make_free_map(out.fine.num_nodes(), out.fine.boundary_nodes());
  const SparseMatrix mass_all = assemble_mass(out.fine).matrix;
  out.mass_free = reduce_matrix(mass_all, out.map);
  for (int s = 0; s < cfg.species(); ++s) {
    out.kappa.push_back(realize_kappa(cfg.kappa[s], out.fine));
    out.diffusion_free.push_back(
        reduce_matrix(assemble_stiffness(out.fine, out.kappa[s]).matrix, out.map));
    out.convection_free.push_back(
        reduce_matrix(assemble_convection(out.fine, cfg.velocity[s]).matrix, out.map));
    out.u0_full.push_back(realize_initial(cfg.initial, s, cfg, out.fine));
    out.u0_free.push_back(restrict_to_free(out.u0_full.back(), out.map));
  }
  return out;
}

std::string table_path(const ExperimentConfig& cfg, int species_index) {
  fs::path p = fs::path(cfg.output_dir) / cfg.table_name;
  if (cfg.species() > 1) {
    fs::path stem = p.stem();
    p = p.parent_path() / (stem.string() + "_u" + std::to_string(species_index + 1) +
                           p.extension().string());
  }
  return p.string();
}

std::string manifest_path(const ExperimentConfig& cfg) {
  return (fs::path(cfg.output_dir) / "manifest.json").string();
}

std::string reference_cache_path(const ExperimentConfig& cfg) {
  return (fs::path(cfg.output_dir) / "refcache" / (fine_subconfig_hash(cfg) + ".bin")).string();
}

namespace {

constexpr std::uint64_t kCacheMagic = 0x454d535245463101ull;  // "EMSREF1" + version

bool load_reference_file(const std::string& path, int species, Index n,
                         std::vector<Vector>& out) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return false;
  std::uint64_t magic = 0;
  std::int32_t ns = 0;
  std::int64_t nn = 0;
  double t_end = 0;
  in.read(reinterpret_cast<char*>(&magic), sizeof magic);
  in.read(reinterpret_cast<char*>(&ns), sizeof ns);
  in.read(reinterpret_cast<char*>(&nn), sizeof nn);
  in.read(reinterpret_cast<char*>(&t_end), sizeof t_end);
  if (!in || magic != kCacheMagic || ns != species || nn != n) return false;
  out.assign(species, Vector(n));
  for (int s = 0; s < species; ++s) {
    in.read(reinterpret_cast<char*>(out[s].data()), sizeof(Real) * n);
  }
  return static_cast<bool>(in);
}

void store_reference_file(const std::string& path, Real t_end, const std::vector<Vector>& u) {
  fs::create_directories(fs::path(path).parent_path());
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("reference cache: cannot write " + tmp);
    const std::uint64_t magic = kCacheMagic;
    const std::int32_t ns = static_cast<std::int32_t>(u.size());
    const std::int64_t nn = u[0].size();
    const double te = t_end;
    out.write(reinterpret_cast<const char*>(&magic), sizeof magic);
    out.write(reinterpret_cast<const char*>(&ns), sizeof ns);
    out.write(reinterpret_cast<const char*>(&nn), sizeof nn);
    out.write(reinterpret_cast<const char*>(&te), sizeof te);
    for (const Vector& v : u) {
      out.write(reinterpret_cast<const char*>(v.data()), sizeof(Real) * v.size());
    }
  }
  fs::rename(tmp, path);
}

}  // namespace

std::vector<Vector> compute_or_load_reference(const ExperimentConfig& cfg, const FineSetup& fine,
                                              bool* from_cache, Real* wall_seconds,
                                              std::ostream* log) {
  const std::string path = reference_cache_path(cfg);
  std::vector<Vector> u;
  const auto t0 = Clock::now();
  if (load_reference_file(path, cfg.species(), fine.map.num_free(), u)) {
    if (from_cache) *from_cache = true;
    if (wall_seconds) *wall_seconds = seconds_since(t0);
    if (log) *log << "reference: cache hit " << path << "\n";
    return u;
  }
  if (log) {
    *log << "reference: backward Euler, " << fine.map.num_free() << " unknowns, "
         << std::llround(cfg.t_end / cfg.dt) << " steps\n";
  }
  std::vector<ReferenceSystem> systems;
  for (int s = 0; s < cfg.species(); ++s) {
    systems.push_back({&fine.mass_free, &fine.diffusion_free[s], &fine.convection_free[s],
                       cfg.velocity[s]});
  }
  ReferenceOptions opt;
  opt.dt = cfg.dt;
  opt.t_end = cfg.t_end;
  opt.newton_tol = cfg.newton_tol;
  auto traj = backward_euler_reference(systems, cfg.reaction, fine.u0_free, opt);
  u = traj.states.back();
  store_reference_file(path, cfg.t_end, u);
  if (from_cache) *from_cache = false;
  if (wall_seconds) *wall_seconds = seconds_since(t0);
  return u;
}

namespace {

void write_diag_csv(const std::string& path, const CellDiagnostics& d) {
  std::ofstream out(path);
  out << "t,energy,max_norm\n";
  out.precision(12);
  for (std::size_t k = 0; k < d.times.size(); ++k) {
    out << d.times[k] << ",";
    if (k < d.energy.size()) out << d.energy[k];
    out << ",";
    if (k < d.max_norm.size()) out << d.max_norm[k];
    out << "\n";
  }
}

}  // namespace

ErrorReport run_suite(const ExperimentConfig& cfg, std::ostream* log) {
  validate_config(cfg);
  fs::create_directories(cfg.output_dir);

  ErrorReport report;
  report.H_values = cfg.H_values;
  report.levels = cfg.levels;
  report.species = cfg.species();
  report.fine_hash = fine_subconfig_hash(cfg);

  FineSetup fine = build_fine_setup(cfg);
  std::vector<Vector> reference = compute_or_load_reference(
      cfg, fine, &report.reference_from_cache, &report.reference_wall_seconds, log);

  const bool allen_cahn = cfg.reaction.kind == ReactionModel::Kind::allen_cahn;
  const bool want_diag = cfg.diagnostics && cfg.species() == 1;

  for (Real H : cfg.H_values) {
    const Index cells_x = static_cast<Index>(std::llround(cfg.domain.width() / H));
    const Index cells_y = static_cast<Index>(std::llround(cfg.domain.height() / H));
    const Index ratio = static_cast<Index>(std::llround(H / cfg.h));
    CoarseDecomposition decomp;
    std::vector<PartitionOfUnity> pou(cfg.species());
    std::string decomp_error;
    try {
      decomp = build_decomposition(build_grid(cfg.domain, cells_x, cells_y), ratio);
      for (int s = 0; s < cfg.species(); ++s) pou[s] = assemble_pou(decomp, fine.kappa[s]);
    } catch (const std::exception& e) {
      decomp_error = e.what();
    }

    for (int level : cfg.levels) {
      CellResult cell;
      cell.H = H;
      cell.level = level;
      const auto t0 = Clock::now();
      try {
        if (!decomp_error.empty()) throw std::runtime_error(decomp_error);
        if (log) *log << "cell H=" << H << " level=" << level << ": building space\n";

        std::vector<MultiscaleSpace> spaces;
        std::vector<SpeciesSystem> systems;
        spaces.reserve(cfg.species());
        for (int s = 0; s < cfg.species(); ++s) {
          spaces.push_back(build_multiscale_space(decomp, fine.kappa[s], cfg.velocity[s], level,
                                                  pou[s], fine.mass_free, fine.map));
          project_operators(spaces[s], fine.mass_free, fine.diffusion_free[s],
                            fine.convection_free[s]);
        }
        for (int s = 0; s < cfg.species(); ++s) {
          systems.push_back({&spaces[s], &fine.mass_free, cfg.velocity[s]});
          cell.space_dim += spaces[s].dim();
        }

        IntegratorOptions opt;
        opt.dt = cfg.dt;
        opt.t_end = cfg.t_end;
        opt.g_quantum = cfg.g_quantum;
        opt.dense_propagator_max_dim = cfg.dense_propagator_max_dim;
        opt.freeze_modulation = cfg.freeze_modulation;
        opt.snapshot_stride = std::max<Index>(1, std::llround(cfg.t_end / cfg.dt));

        ExponentialEuler stepper(systems, cfg.reaction, opt);
        std::vector<Vector> c0(cfg.species());
        for (int s = 0; s < cfg.species(); ++s) {
          c0[s] = project_initial(spaces[s], fine.mass_free, fine.u0_free[s]);
        }

        // Snapshot steps for VTK output.
        std::vector<Index> snap_steps;
        for (Real t : cfg.snapshot_times) snap_steps.push_back(std::llround(t / cfg.dt));

        auto hook = [&](const StepperState& st) {
          if (want_diag) {
            Vector full =
                extend_to_all(prolongate(spaces[0], st.coeffs[0]), fine.map,
                              fine.fine.num_nodes());
            cell.diag.times.push_back(st.t);
            cell.diag.max_norm.push_back(max_norm(full));
            if (allen_cahn) {
              cell.diag.energy.push_back(
                  energy_functional(fine.fine, full, cfg.reaction.epsilon));
            }
          }
          if (cfg.write_vtk &&
              std::find(snap_steps.begin(), snap_steps.end(), st.step) != snap_steps.end()) {
            std::vector<std::pair<std::string, Vector>> fields;
            for (int s = 0; s < cfg.species(); ++s) {
              fields.emplace_back("u" + std::to_string(s + 1),
                                  extend_to_all(prolongate(spaces[s], st.coeffs[s]), fine.map,
                                                fine.fine.num_nodes()));
            }
            std::ostringstream name;
            name << "ms_H" << format_h(H) << "_l" << level << "_t" << st.t << ".vtk";
            write_vtk((fs::path(cfg.output_dir) / name.str()).string(), fine.fine, fields);
          }
        };

        auto traj = stepper.run(c0, hook);
        for (int s = 0; s < cfg.species(); ++s) {
          Vector ums = prolongate(spaces[s], traj.back().coeffs[s]);
          auto [e0, e1] =
              compute_errors(reference[s], ums, fine.mass_free, fine.diffusion_free[s]);
          cell.eps0.push_back(e0);
          cell.eps1.push_back(e1);
        }
        if (want_diag) {
          std::ostringstream name;
          name << "diag_H" << format_h(H) << "_l" << level << ".csv";
          write_diag_csv((fs::path(cfg.output_dir) / name.str()).string(), cell.diag);
        }
      } catch (const std::exception& e) {
        cell.error = e.what();
        if (log) *log << "cell H=" << H << " level=" << level << ": FAILED: " << e.what() << "\n";
      }
      cell.wall_seconds = seconds_since(t0);
      if (log && cell.error.empty()) {
        *log << "cell H=" << H << " level=" << level << ": dim=" << cell.space_dim
             << " eps0=" << (cell.eps0.empty() ? -1.0 : cell.eps0[0])
             << " wall=" << cell.wall_seconds << "s\n";
      }
      report.cells.push_back(std::move(cell));
    }
  }

  for (int s = 0; s < cfg.species(); ++s) {
    std::ofstream out(table_path(cfg, s));
    out << report_to_csv(report, s);
  }
  if (cfg.write_vtk) {
    std::vector<std::pair<std::string, Vector>> fields;
    for (int s = 0; s < cfg.species(); ++s) {
      fields.emplace_back("u" + std::to_string(s + 1) + "_ref",
                          extend_to_all(reference[s], fine.map, fine.fine.num_nodes()));
    }
    write_vtk((fs::path(cfg.output_dir) / "reference_final.vtk").string(), fine.fine, fields);
  }

  nlohmann::json manifest;
  manifest["fine_hash"] = report.fine_hash;
  manifest["reference_from_cache"] = report.reference_from_cache;
  manifest["reference_wall_seconds"] = report.reference_wall_seconds;
  manifest["seed"] = cfg.seed;
  manifest["eigen_version"] = std::to_string(EIGEN_WORLD_VERSION) + "." +
                              std::to_string(EIGEN_MAJOR_VERSION) + "." +
                              std::to_string(EIGEN_MINOR_VERSION);
  manifest["solver_version"] = "1.0.0";
  manifest["cells"] = nlohmann::json::array();
  for (const CellResult& c : report.cells) {
    nlohmann::json jc;
    jc["H"] = c.H;
    jc["level"] = c.level;
    jc["dim"] = c.space_dim;
    jc["wall_seconds"] = c.wall_seconds;
    if (!c.error.empty()) jc["error"] = c.error;
    if (!c.eps0.empty()) {
      jc["eps0"] = c.eps0;
      jc["eps1"] = c.eps1;
    }
    manifest["cells"].push_back(jc);
  }
  std::ofstream mf(manifest_path(cfg));
  mf << manifest.dump(2) << "\n";

  return report;
}

std::string report_to_csv(const ErrorReport& report, int species_index) {
  std::ostringstream out;
  out << "H";
  for (int level : report.levels) {
    out << ",l" << level << "_eps0,l" << level << "_CR0,l" << level << "_eps1,l" << level
        << "_CR1";
  }
  out << "\n";

  // CR per level column across consecutive H rows.
  const std::size_t nl = report.levels.size();
  for (std::size_t ih = 0; ih < report.H_values.size(); ++ih) {
    out << format_h(report.H_values[ih]);
    for (std::size_t il = 0; il < nl; ++il) {
      const CellResult& c = report.cells[ih * nl + il];
      const bool ok = c.error.empty() && static_cast<int>(c.eps0.size()) > species_index;
      std::optional<Real> cr0, cr1;
      if (ok && ih > 0) {
        const CellResult& p = report.cells[(ih - 1) * nl + il];
        if (p.error.empty() && static_cast<int>(p.eps0.size()) > species_index) {
          if (p.eps0[species_index] > 0 && c.eps0[species_index] > 0) {
            cr0 = std::abs(std::log(p.eps0[species_index]) - std::log(c.eps0[species_index])) /
                  std::log(2.0);
          }
          if (p.eps1[species_index] > 0 && c.eps1[species_index] > 0) {
            cr1 = std::abs(std::log(p.eps1[species_index]) - std::log(c.eps1[species_index])) /
                  std::log(2.0);
          }
        }
      }
      if (ok) {
        out << "," << format_sci(c.eps0[species_index]) << ","
            << (cr0 ? format_sci(*cr0) : "") << "," << format_sci(c.eps1[species_index]) << ","
            << (cr1 ? format_sci(*cr1) : "");
      } else {
        out << ",,,,";
      }
    }
    out << "\n";
  }
  return out.str();
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<std::string> row;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) row.push_back(cell);
    if (!line.empty() && line.back() == ',') row.push_back("");
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace ems
