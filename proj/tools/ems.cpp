// Command-line driver: experiment runs, convergence sweeps, reference cache
// population, basis export and a quick self test.
#include "ems/diagnostics.hpp"
#include "ems/edge_basis.hpp"
#include "ems/experiment.hpp"
#include "ems/multiscale_space.hpp"
#include "ems/phi1.hpp"
#include "ems/pou.hpp"
#include "ems/vtk.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <iostream>

namespace {

using namespace ems;

int cmd_run(const std::string& config_path) {
  ExperimentConfig cfg = load_config(config_path);
  // Single experiment: first coarse size, first level.
  cfg.H_values.resize(1);
  cfg.levels.resize(1);
  ErrorReport report = run_suite(cfg, &std::cout);
  const CellResult& c = report.cells.front();
  if (!c.error.empty()) {
    std::cerr << "run failed: " << c.error << "\n";
    return 1;
  }
  for (int s = 0; s < report.species; ++s) {
    std::cout << "u" << s + 1 << ": eps0 = " << c.eps0[s] << ", eps1 = " << c.eps1[s] << "\n";
  }
  std::cout << "table: " << table_path(cfg, 0) << "\n";
  return 0;
}

int cmd_converge(const std::string& config_path) {
  ExperimentConfig cfg = load_config(config_path);
  ErrorReport report = run_suite(cfg, &std::cout);
  int failures = 0;
  for (const CellResult& c : report.cells) {
    if (!c.error.empty()) {
      ++failures;
      std::cerr << "cell H=" << c.H << " l=" << c.level << " failed: " << c.error << "\n";
    }
  }
  for (int s = 0; s < report.species; ++s) {
    std::cout << "table: " << table_path(cfg, s) << "\n";
  }
  std::cout << "manifest: " << manifest_path(cfg) << "\n";
  return failures == 0 ? 0 : 1;
}

int cmd_reference(const std::string& config_path) {
  ExperimentConfig cfg = load_config(config_path);
  std::filesystem::create_directories(cfg.output_dir);
  FineSetup fine = build_fine_setup(cfg);
  bool from_cache = false;
  Real wall = 0;
  compute_or_load_reference(cfg, fine, &from_cache, &wall, &std::cout);
  std::cout << (from_cache ? "cache hit: " : "computed: ") << reference_cache_path(cfg) << " ("
            << wall << " s)\n";
  return 0;
}

int cmd_basis(const std::string& config_path, Index node) {
  ExperimentConfig cfg = load_config(config_path);
  std::filesystem::create_directories(cfg.output_dir);
  FineSetup fine = build_fine_setup(cfg);
  const Real H = cfg.H_values.front();
  const int level = cfg.levels.front();
  const Index cells = static_cast<Index>(std::llround(cfg.domain.width() / H));
  const Index ratio = static_cast<Index>(std::llround(H / cfg.h));
  auto decomp = build_decomposition(build_grid(cfg.domain, cells, cells), ratio);
  if (node < 0 || node >= decomp.coarse.num_nodes()) {
    std::cerr << "basis: node " << node << " out of range (coarse grid has "
              << decomp.coarse.num_nodes() << " nodes)\n";
    return 1;
  }
  auto pou = assemble_pou(decomp, fine.kappa[0]);
  auto space =
      build_multiscale_space(decomp, fine.kappa[0], cfg.velocity[0], level, pou, fine.mass_free,
                             fine.map);

  std::vector<std::pair<std::string, Vector>> fields;
  Vector chi = Vector::Zero(decomp.fine.num_nodes());
  const PatchField& p = pou.chi[node];
  for (Index fj = p.fj0; fj <= p.fj1; ++fj)
    for (Index fi = p.fi0; fi <= p.fi1; ++fi)
      chi[decomp.fine.node_id(fi, fj)] = p.values[p.local(fi, fj)];
  fields.emplace_back("chi", chi);
  for (Index col = 0; col < space.dim(); ++col) {
    if (space.provenance[col].first != node) continue;
    fields.emplace_back("basis_" + std::to_string(space.provenance[col].second),
                        extend_to_all(Vector(space.basis.col(col)), fine.map,
                                      decomp.fine.num_nodes()));
  }
  const std::string path =
      (std::filesystem::path(cfg.output_dir) / ("basis_node" + std::to_string(node) + ".vtk"))
          .string();
  write_vtk(path, decomp.fine, fields, "edge multiscale basis functions");
  std::cout << "wrote " << fields.size() - 1 << " basis functions to " << path << "\n";
  if (fields.size() == 1) {
    std::cout << "note: boundary coarse nodes carry no basis columns\n";
  }
  return 0;
}

int cmd_selftest() {
  int failed = 0;
  auto check = [&](bool ok, const std::string& name) {
    std::cout << (ok ? "[PASS] " : "[FAIL] ") << name << "\n";
    if (!ok) ++failed;
  };

  {
    Matrix x(1, 1);
    x(0, 0) = -1.0;
    check(std::abs(phi1_dense(x)(0, 0) - 0.6321205588285577) < 1e-12, "phi1 scalar value");
  }
  {
    auto g = build_grid({0, 1, 0, 1}, 4, 4);
    Vector sums = assemble_mass(g).matrix * Vector::Ones(g.num_nodes());
    check(std::abs(sums.sum() - 1.0) < 1e-12, "mass matrix integrates 1 over the unit square");
  }
  {
    auto c = build_grid({0, 1, 0, 1}, 4, 4);
    auto d = build_decomposition(c, 4);
    auto kap = log_uniform_coefficient(d.fine, 1e4, 7);
    auto pu = assemble_pou(d, kap);
    Vector sum = Vector::Zero(d.fine.num_nodes());
    for (Index cn = 0; cn < c.num_nodes(); ++cn) {
      const PatchField& p = pu.chi[cn];
      for (Index fj = p.fj0; fj <= p.fj1; ++fj)
        for (Index fi = p.fi0; fi <= p.fi1; ++fi)
          sum[d.fine.node_id(fi, fj)] += p.values[p.local(fi, fj)];
    }
    check((sum - Vector::Ones(sum.size())).lpNorm<Eigen::Infinity>() <= 1e-10,
          "partition of unity sums to one (contrast 1e4)");
    for (int level : {0, 1, 2}) {
      auto space = build_edge_space(d, c.node_id(2, 2), level);
      check(space.dim() == (Index{1} << (level + 2)),
            "edge space dimension 2^(l+2) at level " + std::to_string(level));
    }
  }
  std::cout << (failed == 0 ? "self test passed\n" : "self test FAILED\n");
  return failed == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Edge multiscale FEM solver for semilinear parabolic problems"};
  app.require_subcommand(1);

  std::string config_path;
  Index node = 0;

  auto* run = app.add_subcommand("run", "Run a single experiment (first H, first level)");
  run->add_option("config", config_path, "config file")->required();

  auto* converge = app.add_subcommand("converge", "Run the full (H, level) table sweep");
  converge->add_option("config", config_path, "config file")->required();

  auto* reference = app.add_subcommand("reference", "Compute the reference and populate the cache");
  reference->add_option("config", config_path, "config file")->required();

  auto* basis = app.add_subcommand("basis", "Export basis functions of one coarse node as VTK");
  basis->add_option("config", config_path, "config file")->required();
  basis->add_option("--node", node, "coarse node id")->required();

  auto* selftest = app.add_subcommand("selftest", "Run built-in property checks");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(config_path);
    if (converge->parsed()) return cmd_converge(config_path);
    if (reference->parsed()) return cmd_reference(config_path);
    if (basis->parsed()) return cmd_basis(config_path, node);
    if (selftest->parsed()) return cmd_selftest();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
