#include "ems/raster.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace ems {

namespace {

[[noreturn]] void fail(const std::string& path, Index line, const std::string& what) {
  throw std::runtime_error("raster " + path + ":" + std::to_string(line) + ": " + what);
}

}  // namespace

CoefficientField load_permeability(const std::string& path, const StructuredGrid2D& fine) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("raster " + path + ": cannot open");

  std::string header;
  if (!std::getline(in, header)) fail(path, 1, "missing header");
  std::istringstream hs(header);
  std::string magic;
  int version = 0;
  Index rnx = 0, rny = 0;
  if (!(hs >> magic >> version >> rnx >> rny) || magic != "EMSK" || version != 1) {
    fail(path, 1, "malformed header, expected 'EMSK 1 <nx> <ny>'");
  }
  if (rnx < 1 || rny < 1) fail(path, 1, "non-positive raster dimensions");
  if (fine.nx % rnx != 0 || fine.ny % rny != 0) {
    fail(path, 1,
         "raster " + std::to_string(rnx) + "x" + std::to_string(rny) +
             " does not divide the fine element grid " + std::to_string(fine.nx) + "x" +
             std::to_string(fine.ny));
  }

  Vector raster(rnx * rny);
  for (Index j = 0; j < rny; ++j) {
    std::string row;
    if (!std::getline(in, row)) fail(path, j + 2, "missing row");
    std::istringstream rs(row);
    for (Index i = 0; i < rnx; ++i) {
      Real v;
      if (!(rs >> v)) fail(path, j + 2, "expected " + std::to_string(rnx) + " values");
      if (!(v > 0.0)) fail(path, j + 2, "non-positive permeability value");
      raster[j * rnx + i] = v;
    }
    Real extra;
    if (rs >> extra) fail(path, j + 2, "trailing values beyond nx");
  }

  const Index fx = fine.nx / rnx, fy = fine.ny / rny;
  Vector values(fine.num_elements());
  for (Index e = 0; e < fine.num_elements(); ++e) {
    auto [ei, ej] = fine.element_ij(e);
    values[e] = raster[(ej / fy) * rnx + (ei / fx)];
  }
  return make_coefficient(std::move(values));
}

void save_raster(const std::string& path, Index nx, Index ny, const Vector& values) {
  if (values.size() != nx * ny) throw std::invalid_argument("save_raster: size mismatch");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_raster: cannot open " + path);
  out << "EMSK 1 " << nx << " " << ny << "\n";
  out.precision(17);
  for (Index j = 0; j < ny; ++j) {
    for (Index i = 0; i < nx; ++i) {
      out << values[j * nx + i] << (i + 1 == nx ? "" : " ");
    }
    out << "\n";
  }
}

}  // namespace ems
