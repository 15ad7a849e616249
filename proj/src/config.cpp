#include "ems/config.hpp"

#include "ems/assembly.hpp"
#include "ems/raster.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace ems {

namespace {

constexpr Real kPi = 3.14159265358979323846;

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

struct IniData {
  // section -> key -> (value, line)
  std::map<std::string, std::map<std::string, std::pair<std::string, Index>>> data;
  std::map<std::string, Index> section_lines;
};

IniData parse_ini(const std::string& text) {
  IniData ini;
  std::istringstream in(text);
  std::string line, section;
  Index lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find_first_of("#;");
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw std::runtime_error("config line " + std::to_string(lineno) + ": unterminated section");
      }
      section = trim(line.substr(1, line.size() - 2));
      ini.section_lines.emplace(section, lineno);
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos || section.empty()) {
      throw std::runtime_error("config line " + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw std::runtime_error("config line " + std::to_string(lineno) + ": empty key");
    }
    ini.data[section][key] = {value, lineno};
  }
  return ini;
}

class SectionReader {
 public:
  SectionReader(const IniData& ini, const std::string& name) : name_(name) {
    auto it = ini.data.find(name);
    if (it != ini.data.end()) entries_ = &it->second;
  }

  bool exists() const { return entries_ != nullptr; }

  bool has(const std::string& key) const { return entries_ && entries_->count(key); }

  std::string get(const std::string& key, const std::string& fallback = "",
                  bool required = false) const {
    if (has(key)) {
      used_.push_back(key);
      return entries_->at(key).first;
    }
    if (required) {
      throw std::runtime_error("config: [" + name_ + "] missing required key '" + key + "'");
    }
    return fallback;
  }

  Real get_real(const std::string& key, Real fallback, bool required = false) const {
    const std::string v = get(key, "", required);
    if (v.empty()) return fallback;
    try {
      std::size_t pos = 0;
      Real r = std::stod(v, &pos);
      if (pos != v.size()) throw std::invalid_argument(v);
      return r;
    } catch (...) {
      throw std::runtime_error("config: [" + name_ + "] " + key + ": not a number: '" + v + "'");
    }
  }

  Index get_index(const std::string& key, Index fallback) const {
    return static_cast<Index>(get_real(key, static_cast<Real>(fallback)));
  }

  bool get_bool(const std::string& key, bool fallback) const {
    const std::string v = get(key);
    if (v.empty()) return fallback;
    if (v == "0" || v == "false" || v == "off") return false;
    if (v == "1" || v == "true" || v == "on") return true;
    throw std::runtime_error("config: [" + name_ + "] " + key + ": not a boolean: '" + v + "'");
  }

  std::vector<Real> get_list(const std::string& key) const {
    const std::string v = get(key);
    std::vector<Real> out;
    std::istringstream s(v);
    std::string tok;
    while (std::getline(s, tok, ',')) {
      tok = trim(tok);
      if (tok.empty()) continue;
      out.push_back(std::stod(tok));
    }
    return out;
  }

  void check_unknown_keys() const {
    if (!entries_) return;
    for (const auto& [key, value] : *entries_) {
      if (std::find(used_.begin(), used_.end(), key) == used_.end()) {
        throw std::runtime_error("config: [" + name_ + "] unknown key '" + key + "' (line " +
                                 std::to_string(value.second) + ")");
      }
    }
  }

 private:
  std::string name_;
  const std::map<std::string, std::pair<std::string, Index>>* entries_ = nullptr;
  mutable std::vector<std::string> used_;
};

KappaSpec parse_kappa(const SectionReader& sec, const std::string& base_dir) {
  KappaSpec k;
  const std::string preset = sec.get("preset", "constant");
  if (preset == "constant") {
    k.preset = KappaSpec::Preset::constant;
    k.value = sec.get_real("value", 1.0);
  } else if (preset == "raster") {
    k.preset = KappaSpec::Preset::raster;
    k.path = sec.get("path", "", true);
    if (!base_dir.empty() && !std::filesystem::path(k.path).is_absolute()) {
      k.path = (std::filesystem::path(base_dir) / k.path).string();
    }
  } else if (preset == "log_uniform") {
    k.preset = KappaSpec::Preset::log_uniform;
    k.contrast = sec.get_real("contrast", 1e4);
    k.seed = static_cast<std::uint64_t>(sec.get_index("seed", 1));
  } else if (preset == "inclusions") {
    k.preset = KappaSpec::Preset::inclusions;
    k.contrast = sec.get_real("contrast", 1e4);
    k.fraction = sec.get_real("fraction", 0.2);
    k.seed = static_cast<std::uint64_t>(sec.get_index("seed", 1));
  } else {
    throw std::runtime_error("config: unknown kappa preset '" + preset + "'");
  }
  sec.check_unknown_keys();
  return k;
}

VelocityField parse_velocity(const SectionReader& sec) {
  VelocityField v;
  const std::string preset = sec.get("preset", "zero");
  if (preset == "zero") {
    v = zero_velocity();
  } else if (preset == "constant") {
    v = constant_velocity(sec.get_real("bx", 0.0), sec.get_real("by", 0.0));
  } else if (preset == "exp_rot") {
    v = exp_rot_velocity(VelocityField::Modulation::none);
  } else if (preset == "cellular") {
    v = cellular_velocity(sec.get_real("alpha", 1.0), sec.get_real("k", 1.0));
  } else if (preset == "rigid_rotation") {
    v = rigid_rotation_velocity(sec.get_real("cx", 0.5), sec.get_real("cy", 0.5));
  } else {
    throw std::runtime_error("config: unknown velocity preset '" + preset + "'");
  }
  const std::string mod = sec.get("modulation", "none");
  if (mod == "none") {
    v.modulation = VelocityField::Modulation::none;
  } else if (mod == "exp_decay") {
    v.modulation = VelocityField::Modulation::exp_decay;
  } else {
    throw std::runtime_error("config: unknown modulation '" + mod + "'");
  }
  sec.check_unknown_keys();
  return v;
}

}  // namespace

Index ExperimentConfig::fine_cells_x() const {
  return static_cast<Index>(std::llround(domain.width() / h));
}
Index ExperimentConfig::fine_cells_y() const {
  return static_cast<Index>(std::llround(domain.height() / h));
}

ExperimentConfig parse_config_text(const std::string& text, const std::string& base_dir) {
  const IniData ini = parse_ini(text);
  ExperimentConfig cfg;

  {
    SectionReader sec(ini, "domain");
    cfg.domain.xmin = sec.get_real("xmin", 0.0);
    cfg.domain.xmax = sec.get_real("xmax", 1.0);
    cfg.domain.ymin = sec.get_real("ymin", 0.0);
    cfg.domain.ymax = sec.get_real("ymax", 1.0);
    sec.check_unknown_keys();
  }
  {
    SectionReader sec(ini, "mesh");
    cfg.h = sec.get_real("h", 0.0, true);
    cfg.H_values = sec.get_list("H");
    if (cfg.H_values.empty()) throw std::runtime_error("config: [mesh] H list required");
    for (Real lv : sec.get_list("levels")) cfg.levels.push_back(static_cast<int>(lv));
    if (cfg.levels.empty()) cfg.levels = {0};
    sec.check_unknown_keys();
  }
  {
    SectionReader sec(ini, "time");
    cfg.dt = sec.get_real("dt", 0.0, true);
    cfg.t_end = sec.get_real("T", 0.0, true);
    sec.check_unknown_keys();
  }
  {
    SectionReader sec(ini, "reaction");
    const std::string model = sec.get("model", "none");
    if (model == "none") {
      cfg.reaction = no_reaction();
    } else if (model == "allen_cahn") {
      cfg.reaction = allen_cahn_reaction(sec.get_real("epsilon", 0.1));
    } else if (model == "schnakenberg") {
      cfg.reaction = schnakenberg_reaction(sec.get_real("gamma", 3.0), sec.get_real("a", 0.1),
                                           sec.get_real("b", 0.9));
    } else if (model == "schnakenberg_hetero") {
      cfg.reaction = schnakenberg_hetero_reaction();
    } else if (model == "custom") {
      cfg.reaction = polynomial_reaction(sec.get_list("coeffs"));
    } else {
      throw std::runtime_error("config: unknown reaction model '" + model + "'");
    }
    sec.check_unknown_keys();
  }

  cfg.kappa.push_back(parse_kappa(SectionReader(ini, "kappa"), base_dir));
  cfg.velocity.push_back(parse_velocity(SectionReader(ini, "velocity")));
  if (cfg.species() == 2) {
    SectionReader k2(ini, "kappa2");
    cfg.kappa.push_back(k2.exists() ? parse_kappa(k2, base_dir) : cfg.kappa[0]);
    SectionReader v2(ini, "velocity2");
    cfg.velocity.push_back(v2.exists() ? parse_velocity(v2) : cfg.velocity[0]);
  }

  {
    SectionReader sec(ini, "initial");
    const std::string preset = sec.get("preset", "sin2pi");
    if (preset == "zero") cfg.initial.preset = InitialSpec::Preset::zero;
    else if (preset == "constant") cfg.initial.preset = InitialSpec::Preset::constant;
    else if (preset == "sin2pi") cfg.initial.preset = InitialSpec::Preset::sin2pi;
    else if (preset == "scaled_sinpi") cfg.initial.preset = InitialSpec::Preset::scaled_sinpi;
    else if (preset == "schnakenberg_bumps")
      cfg.initial.preset = InitialSpec::Preset::schnakenberg_bumps;
    else if (preset == "mixed_modes") cfg.initial.preset = InitialSpec::Preset::mixed_modes;
    else throw std::runtime_error("config: unknown initial preset '" + preset + "'");
    cfg.initial.amplitude = sec.get_real("amplitude", 1.0);
    sec.check_unknown_keys();
  }
  {
    SectionReader sec(ini, "output");
    cfg.output_dir = sec.get("dir", cfg.output_dir);
    cfg.table_name = sec.get("table", cfg.table_name);
    cfg.write_vtk = sec.get_bool("vtk", false);
    cfg.snapshot_times = sec.get_list("snapshots");
    cfg.diagnostics = sec.get_bool("diagnostics", true);
    sec.check_unknown_keys();
  }
  {
    SectionReader sec(ini, "run");
    cfg.seed = static_cast<std::uint64_t>(sec.get_index("seed", 1));
    cfg.g_quantum = sec.get_real("g_quantum", 1e-2);
    cfg.dense_propagator_max_dim = sec.get_index("dense_propagator_max_dim", 512);
    cfg.freeze_modulation = sec.get_bool("freeze_modulation", false);
    cfg.newton_tol = sec.get_real("newton_tol", 1e-10);
    sec.check_unknown_keys();
  }

  validate_config(cfg);
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), std::filesystem::path(path).parent_path().string());
}

namespace {

bool nearly_integral(Real x) {
  return std::abs(x - std::llround(x)) <= 1e-9 * std::max<Real>(1.0, std::abs(x));
}

}  // namespace

void validate_config(const ExperimentConfig& cfg) {
  if (!(cfg.h > 0.0)) throw std::runtime_error("config: fine mesh size h must be positive");
  if (!nearly_integral(cfg.domain.width() / cfg.h) ||
      !nearly_integral(cfg.domain.height() / cfg.h)) {
    throw std::runtime_error("config: domain side not an integer multiple of h");
  }
  for (Real H : cfg.H_values) {
    if (!nearly_integral(cfg.domain.width() / H) || !nearly_integral(cfg.domain.height() / H)) {
      throw std::runtime_error("config: domain side not an integer multiple of H");
    }
    const Real ratio = H / cfg.h;
    if (!nearly_integral(ratio)) throw std::runtime_error("config: H/h not integral");
    const Index r = static_cast<Index>(std::llround(ratio));
    if (r < 2 || (r & (r - 1)) != 0) {
      throw std::runtime_error("config: H/h must be a power of two >= 2");
    }
  }
  if (!(cfg.dt > 0.0)) throw std::runtime_error("config: dt must be positive");
  if (!nearly_integral(cfg.t_end / cfg.dt)) throw std::runtime_error("config: T/dt not integral");
  for (Real t : cfg.snapshot_times) {
    if (!nearly_integral(t / cfg.dt)) {
      throw std::runtime_error("config: snapshot time not a multiple of dt");
    }
  }
  for (int lv : cfg.levels) {
    if (lv < 0) throw std::runtime_error("config: negative level");
  }
}

std::string fine_subconfig_serialization(const ExperimentConfig& cfg) {
  std::ostringstream s;
  s.precision(17);
  s << "domain " << cfg.domain.xmin << " " << cfg.domain.xmax << " " << cfg.domain.ymin << " "
    << cfg.domain.ymax << "\n";
  s << "h " << cfg.h << "\ndt " << cfg.dt << "\nT " << cfg.t_end << "\n";
  s << "newton_tol " << cfg.newton_tol << "\n";
  for (std::size_t i = 0; i < cfg.kappa.size(); ++i) {
    const KappaSpec& k = cfg.kappa[i];
    s << "kappa" << i << " " << static_cast<int>(k.preset) << " " << k.value << " " << k.contrast
      << " " << k.fraction << " " << k.seed;
    if (k.preset == KappaSpec::Preset::raster) {
      std::ifstream in(k.path, std::ios::binary);
      if (!in) throw std::runtime_error("config: cannot hash raster " + k.path);
      std::stringstream content;
      content << in.rdbuf();
      s << " bytes:" << content.str();
    }
    s << "\n";
  }
  for (std::size_t i = 0; i < cfg.velocity.size(); ++i) {
    const VelocityField& v = cfg.velocity[i];
    s << "velocity" << i << " " << static_cast<int>(v.preset) << " "
      << static_cast<int>(v.modulation) << " " << v.p0 << " " << v.p1 << "\n";
  }
  s << "reaction " << static_cast<int>(cfg.reaction.kind) << " " << cfg.reaction.species << " "
    << cfg.reaction.epsilon << " " << cfg.reaction.gamma << " " << cfg.reaction.a << " "
    << cfg.reaction.b;
  for (Real c : cfg.reaction.coeffs) s << " " << c;
  s << "\n";
  s << "initial " << static_cast<int>(cfg.initial.preset) << " " << cfg.initial.amplitude << "\n";
  return s.str();
}

std::string fine_subconfig_hash(const ExperimentConfig& cfg) {
  const std::string data = fine_subconfig_serialization(cfg);
  std::uint64_t hash = 1469598103934665603ull;
  for (unsigned char c : data) {
    hash ^= c;
    hash *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash));
  return buf;
}

CoefficientField realize_kappa(const KappaSpec& spec, const StructuredGrid2D& fine) {
  switch (spec.preset) {
    case KappaSpec::Preset::constant:
      return constant_coefficient(fine, spec.value);
    case KappaSpec::Preset::raster:
      return load_permeability(spec.path, fine);
    case KappaSpec::Preset::log_uniform:
      return log_uniform_coefficient(fine, spec.contrast, spec.seed);
    case KappaSpec::Preset::inclusions:
      return inclusion_coefficient(fine, spec.contrast, spec.fraction, spec.seed);
  }
  throw std::logic_error("realize_kappa: unreachable");
}

Vector realize_initial(const InitialSpec& spec, int species_index, const ExperimentConfig& cfg,
                       const StructuredGrid2D& fine) {
  const Real amp = spec.amplitude;
  switch (spec.preset) {
    case InitialSpec::Preset::zero:
      return Vector::Zero(fine.num_nodes());
    case InitialSpec::Preset::constant:
      return Vector::Constant(fine.num_nodes(), amp);
    case InitialSpec::Preset::sin2pi:
      return interpolate(fine, [&](Real x, Real y) {
        return std::sin(2 * kPi * x) * std::sin(2 * kPi * y);
      });
    case InitialSpec::Preset::scaled_sinpi:
      return interpolate(fine,
                         [&](Real x, Real y) { return amp * std::sin(kPi * x) * std::sin(kPi * y); });
    case InitialSpec::Preset::schnakenberg_bumps: {
      const Real lx = fine.bounds.width();
      const Real a = cfg.reaction.a, b = cfg.reaction.b;
      if (species_index == 0) {
        return interpolate(fine, [&](Real x, Real y) {
          const Real dx = x - lx / 2.15, dy = y - lx / 2.15;
          return 1.0 - std::exp(-2.0 * (dx * dx + dy * dy));
        });
      }
      return interpolate(fine, [&](Real x, Real y) {
        const Real dx = x - lx / 2.0, dy = y - lx / 2.0;
        return b / ((a + b) * (a + b)) - std::exp(-2.0 * (dx * dx + dy * dy));
      });
    }
    case InitialSpec::Preset::mixed_modes:
      if (species_index == 0) {
        return interpolate(fine, [&](Real x, Real y) {
          return std::sin(3 * kPi * x) * std::sin(2 * kPi * y);
        });
      }
      return interpolate(fine, [&](Real x, Real y) {
        return std::sin(2 * kPi * x) * std::cos(3 * kPi * y);
      });
  }
  throw std::logic_error("realize_initial: unreachable");
}

}  // namespace ems
