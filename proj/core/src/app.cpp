#include "isb/app.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "isb/errors.hpp"
#include "isb/spin_model.hpp"

namespace isb::app {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

template <class E>
struct EnumName {
  E value;
  const char* name;
};

constexpr EnumName<Mode> kModes[] = {{Mode::Simulate, "simulate"}, {Mode::Analyze, "analyze"}, {Mode::Fit, "fit"}};
constexpr EnumName<Engine> kEngines[] = {{Engine::Exact, "exact"},
                                         {Engine::Sidebands, "sidebands"},
                                         {Engine::ClosedForm, "closed_form"},
                                         {Engine::BruteForce, "brute_force"},
                                         {Engine::Ensemble, "ensemble"}};
constexpr EnumName<Direction> kDirections[] = {{Direction::GtoE, "g_to_e"}, {Direction::EtoG, "e_to_g"}};
constexpr EnumName<Renormalization> kRenorm[] = {{Renormalization::LimitingForms, "limiting_forms"},
                                                 {Renormalization::BoltzmannSum, "boltzmann_sum"}};
constexpr EnumName<PairFidelity> kFidelity[] = {{PairFidelity::SidebandFormula, "sideband_formula"},
                                                {PairFidelity::ExactPair, "exact_pair"}};
constexpr EnumName<LatticeGeometry> kGeometry[] = {{LatticeGeometry::OneD, "1d"}, {LatticeGeometry::TwoD, "2d"}};
constexpr EnumName<SitePlacement> kPlacement[] = {{SitePlacement::UniformDisk, "uniform_disk"},
                                                  {SitePlacement::LoadingProfile, "loading_profile"}};
constexpr EnumName<SiteSampling> kSampling[] = {{SiteSampling::MonteCarlo, "monte_carlo"},
                                                {SiteSampling::Stratified, "stratified"}};
constexpr EnumName<SiteEngine> kSiteEngine[] = {{SiteEngine::ClosedForm, "closed_form"},
                                                {SiteEngine::BruteForce, "brute_force"}};

template <class E, std::size_t N>
const char* name_of(const EnumName<E> (&table)[N], E v) {
  for (const auto& e : table) {
    if (e.value == v) return e.name;
  }
  return "?";
}

// Strict reader for one JSON object: typed getters, unknown keys rejected by finish().
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail("", "expected an object");
  }

  bool has(const char* key) {
    seen_.insert(key);
    return j_.contains(key) && !j_.at(key).is_null();
  }

  void number(const char* key, double& out) {
    if (!has(key)) return;
    const auto& v = j_.at(key);
    if (!v.is_number()) fail(key, "expected a number");
    out = v.get<double>();
  }

  void optional_number(const char* key, std::optional<double>& out) {
    if (!has(key)) return;
    double v = 0.0;
    number(key, v);
    out = v;
  }

  template <class I>
  void integer(const char* key, I& out) {
    if (!has(key)) return;
    const auto& v = j_.at(key);
    if (!v.is_number_integer()) fail(key, "expected an integer");
    if constexpr (std::is_unsigned_v<I>) {
      if (v.is_number_unsigned()) {
        out = v.get<I>();
      } else {
        const auto s = v.get<long long>();
        if (s < 0) fail(key, "expected a non-negative integer");
        out = static_cast<I>(s);
      }
    } else {
      out = v.get<I>();
    }
  }

  void boolean(const char* key, bool& out) {
    if (!has(key)) return;
    if (!j_.at(key).is_boolean()) fail(key, "expected true or false");
    out = j_.at(key).get<bool>();
  }

  void string(const char* key, std::string& out) {
    if (!has(key)) return;
    if (!j_.at(key).is_string()) fail(key, "expected a string");
    out = j_.at(key).get<std::string>();
  }

  template <class E, std::size_t N>
  void enumeration(const char* key, const EnumName<E> (&table)[N], E& out) {
    std::string s;
    if (!has(key)) return;
    string(key, s);
    for (const auto& e : table) {
      if (s == e.name) {
        out = e.value;
        return;
      }
    }
    std::string allowed;
    for (const auto& e : table) allowed += std::string(allowed.empty() ? "" : ", ") + e.name;
    fail(key, "unknown value '" + s + "' (expected one of " + allowed + ")");
  }

  template <class E, std::size_t N>
  void optional_enumeration(const char* key, const EnumName<E> (&table)[N], std::optional<E>& out) {
    if (!has(key)) return;
    E v{};
    enumeration(key, table, v);
    out = v;
  }

  const json& child(const char* key) {
    seen_.insert(key);
    return j_.at(key);
  }

  std::string path(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.count(k)) throw ConfigError(path_prefix() + k + ": unknown key");
    }
  }

  [[noreturn]] void fail(const std::string& key, const std::string& what) const {
    throw ConfigError((key.empty() ? (path_.empty() ? std::string("config") : path_) : path_prefix() + key) + ": " +
                      what);
  }

 private:
  std::string path_prefix() const { return path_.empty() ? "" : path_ + "."; }
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_section(ObjectReader& parent, const char* key, const std::function<void(ObjectReader&)>& body) {
  if (!parent.has(key)) return;
  ObjectReader r(parent.child(key), parent.path(key));
  body(r);
  r.finish();
}

std::string format_number(double v) {
  if (!std::isfinite(v)) return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

bool is_thermal(Engine e) { return e == Engine::ClosedForm || e == Engine::BruteForce || e == Engine::Ensemble; }

class StageClock {
 public:
  void start(std::string name) {
    name_ = std::move(name);
    t0_ = std::chrono::steady_clock::now();
  }
  void stop() {
    timings_.emplace_back(name_, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count());
  }
  const std::vector<std::pair<std::string, double>>& timings() const { return timings_; }

 private:
  std::string name_;
  std::chrono::steady_clock::time_point t0_;
  std::vector<std::pair<std::string, double>> timings_;
};

}  // namespace

std::string mode_name(Mode m) { return name_of(kModes, m); }
std::string engine_name(Engine e) { return name_of(kEngines, e); }

RunConfig parse_config(std::string_view json_text, std::string base_dir) {
  json root;
  try {
    root = json::parse(json_text.begin(), json_text.end());
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig cfg;
  cfg.base_dir = std::move(base_dir);
  ObjectReader r(root, "");
  r.optional_enumeration("mode", kModes, cfg.mode);
  r.optional_enumeration("engine", kEngines, cfg.engine);
  r.integer("seed", cfg.seed);
  r.integer("threads", cfg.threads);
  r.string("output", cfg.output);
  read_section(r, "grid", [&](ObjectReader& s) {
    s.number("min_hz", cfg.grid.min_hz);
    s.number("max_hz", cfg.grid.max_hz);
    s.number("step_hz", cfg.grid.step_hz);
  });
  read_section(r, "trap", [&](ObjectReader& s) {
    s.number("omega_x_hz", cfg.trap.omega_x_hz);
    s.number("omega_y_hz", cfg.trap.omega_y_hz);
    s.number("omega_z_hz", cfg.trap.omega_z_hz);
    s.number("eta_z", cfg.trap.eta_z);
    s.number("waist_um", cfg.trap.waist_um);
  });
  read_section(r, "temperature", [&](ObjectReader& s) {
    s.number("t_x_uk", cfg.temperature.t_x_uk);
    s.number("t_y_uk", cfg.temperature.t_y_uk);
    s.number("t_z_uk", cfg.temperature.t_z_uk);
  });
  read_section(r, "drive", [&](ObjectReader& s) {
    s.number("rabi_hz", cfg.drive.rabi_hz);
    s.number("pulse_area", cfg.drive.pulse_area);
    s.enumeration("direction", kDirections, cfg.drive.direction);
  });
  read_section(r, "interaction", [&](ObjectReader& s) {
    s.number("a_eg_minus_a0", cfg.interaction.a_eg_minus_a0);
    s.enumeration("renormalization", kRenorm, cfg.interaction.renormalization);
  });
  read_section(r, "truncation", [&](ObjectReader& s) {
    s.number("tail_weight_tol", cfg.truncation.tail_weight_tol);
    s.integer("max_mode", cfg.truncation.max_mode);
  });
  read_section(r, "spin", [&](ObjectReader& s) {
    if (s.has("modes")) {
      const auto& m = s.child("modes");
      if (!m.is_array()) s.fail("modes", "expected an array of integers");
      cfg.spin.modes.clear();
      for (const auto& v : m) {
        if (!v.is_number_integer()) s.fail("modes", "expected an array of integers");
        cfg.spin.modes.push_back(v.get<int>());
      }
    }
    s.optional_number("u_hz", cfg.spin.u_hz);
    s.boolean("linearized", cfg.spin.linearized);
  });
  read_section(r, "brute_force", [&](ObjectReader& s) { s.enumeration("fidelity", kFidelity, cfg.fidelity); });
  read_section(r, "ensemble", [&](ObjectReader& s) {
    auto& e = cfg.ensemble;
    s.enumeration("geometry", kGeometry, e.geometry);
    s.number("sigma_h_um", e.sigma_h_um);
    s.integer("n_rows", e.n_rows);
    s.number("row_spacing_um", e.row_spacing_um);
    if (s.has("occupancy")) {
      const auto& occ = s.child("occupancy");
      if (!occ.is_object()) s.fail("occupancy", "expected an object mapping atom number to fraction");
      e.occupancy.clear();
      for (const auto& [k, v] : occ.items()) {
        int n = 0;
        const auto res = std::from_chars(k.data(), k.data() + k.size(), n);
        if (res.ec != std::errc() || res.ptr != k.data() + k.size()) s.fail("occupancy", "key '" + k + "' is not an integer");
        if (!v.is_number()) s.fail("occupancy", "fraction for '" + k + "' must be a number");
        e.occupancy[n] = v.get<double>();
      }
    }
    s.enumeration("placement", kPlacement, e.placement);
    s.enumeration("sampling", kSampling, e.sampling);
    s.number("uniform_radius_um", e.uniform_radius_um);
    s.integer("n_samples", e.n_samples);
    s.enumeration("site_engine", kSiteEngine, e.site_engine);
  });
  read_section(r, "analysis", [&](ObjectReader& s) {
    if (s.has("scans")) {
      const auto& arr = s.child("scans");
      if (!arr.is_array()) s.fail("scans", "expected an array of file paths");
      for (const auto& v : arr) {
        if (!v.is_string()) s.fail("scans", "expected an array of file paths");
        cfg.analysis.scans.push_back(v.get<std::string>());
      }
    }
    s.number("bin_width_hz", cfg.analysis.bin_width_hz);
    s.boolean("center_scans", cfg.analysis.center_scans);
  });
  read_section(r, "fit", [&](ObjectReader& s) {
    s.number("initial_a_a0", cfg.fit.initial_a_a0);
    s.boolean("fit_eta", cfg.fit.fit_eta);
    s.optional_number("initial_eta", cfg.fit.initial_eta);
    s.number("carrier_cut", cfg.fit.carrier_cut);
    s.number("max_abs_a_a0", cfg.fit.max_abs_a_a0);
    s.boolean("coarse_search", cfg.fit.coarse_search);
    if (s.has("masked_hz")) {
      const auto& arr = s.child("masked_hz");
      auto bad = [&] { s.fail("masked_hz", "expected an array of [lo, hi] pairs"); };
      if (!arr.is_array()) bad();
      for (const auto& p : arr) {
        if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number()) bad();
        cfg.fit.masked_hz.emplace_back(p[0].get<double>(), p[1].get<double>());
      }
    }
  });
  r.finish();
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read config file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), fs::path(path).parent_path().string());
}

std::string config_to_json(const RunConfig& c) {
  json j;
  j["mode"] = c.mode ? json(mode_name(*c.mode)) : json(nullptr);
  j["engine"] = c.engine ? json(engine_name(*c.engine)) : json(nullptr);
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  j["output"] = c.output;
  j["grid"] = {{"min_hz", c.grid.min_hz}, {"max_hz", c.grid.max_hz}, {"step_hz", c.grid.step_hz}};
  j["trap"] = {{"omega_x_hz", c.trap.omega_x_hz}, {"omega_y_hz", c.trap.omega_y_hz},
               {"omega_z_hz", c.trap.omega_z_hz}, {"eta_z", c.trap.eta_z}, {"waist_um", c.trap.waist_um}};
  j["temperature"] = {{"t_x_uk", c.temperature.t_x_uk}, {"t_y_uk", c.temperature.t_y_uk},
                      {"t_z_uk", c.temperature.t_z_uk}};
  j["drive"] = {{"rabi_hz", c.drive.rabi_hz}, {"pulse_area", c.drive.pulse_area},
                {"direction", name_of(kDirections, c.drive.direction)}};
  j["interaction"] = {{"a_eg_minus_a0", c.interaction.a_eg_minus_a0},
                      {"renormalization", name_of(kRenorm, c.interaction.renormalization)}};
  j["truncation"] = {{"tail_weight_tol", c.truncation.tail_weight_tol}, {"max_mode", c.truncation.max_mode}};
  j["spin"] = {{"modes", c.spin.modes},
               {"u_hz", c.spin.u_hz ? json(*c.spin.u_hz) : json(nullptr)},
               {"linearized", c.spin.linearized}};
  j["brute_force"] = {{"fidelity", name_of(kFidelity, c.fidelity)}};
  json occ = json::object();
  for (const auto& [n, f] : c.ensemble.occupancy) occ[std::to_string(n)] = f;
  j["ensemble"] = {{"geometry", name_of(kGeometry, c.ensemble.geometry)},
                   {"sigma_h_um", c.ensemble.sigma_h_um},
                   {"n_rows", c.ensemble.n_rows},
                   {"row_spacing_um", c.ensemble.row_spacing_um},
                   {"occupancy", occ},
                   {"placement", name_of(kPlacement, c.ensemble.placement)},
                   {"sampling", name_of(kSampling, c.ensemble.sampling)},
                   {"uniform_radius_um", c.ensemble.uniform_radius_um},
                   {"n_samples", c.ensemble.n_samples},
                   {"site_engine", name_of(kSiteEngine, c.ensemble.site_engine)}};
  j["analysis"] = {{"scans", c.analysis.scans},
                   {"bin_width_hz", c.analysis.bin_width_hz},
                   {"center_scans", c.analysis.center_scans}};
  json masks = json::array();
  for (const auto& [lo, hi] : c.fit.masked_hz) masks.push_back({lo, hi});
  j["fit"] = {{"initial_a_a0", c.fit.initial_a_a0},
              {"fit_eta", c.fit.fit_eta},
              {"initial_eta", c.fit.initial_eta ? json(*c.fit.initial_eta) : json(nullptr)},
              {"carrier_cut", c.fit.carrier_cut},
              {"masked_hz", masks},
              {"max_abs_a_a0", c.fit.max_abs_a_a0},
              {"coarse_search", c.fit.coarse_search}};
  return j.dump(2);
}

std::string ValidationReport::to_json() const {
  return json{{"ok", ok()}, {"violations", violations}, {"warnings", warnings}}.dump(2);
}

TrapGeometry make_trap(const RunConfig& c) {
  return TrapGeometry(to_angular(c.trap.omega_x_hz), to_angular(c.trap.omega_y_hz), to_angular(c.trap.omega_z_hz),
                      c.trap.eta_z, c.trap.waist_um * 1e-6);
}

ThermalLineshapeConfig make_thermal_config(const RunConfig& c) {
  RenormalizationModel renorm;
  renorm.kind = c.interaction.renormalization;
  renorm.truncation = c.truncation;
  return ThermalLineshapeConfig{
      make_trap(c),
      ThermalState(c.temperature.t_x_uk * 1e-6, c.temperature.t_y_uk * 1e-6, c.temperature.t_z_uk * 1e-6),
      c.interaction.a_eg_minus_a0 * kCodata2018.bohr_radius(),
      DriveParams::from_pulse_area(to_angular(c.drive.rabi_hz), c.drive.pulse_area, 0.0, c.drive.direction),
      c.truncation,
      c.fidelity,
      renorm,
      kCodata2018.mass_sr87()};
}

LatticeDistribution make_distribution(const RunConfig& c) {
  LatticeDistribution d;
  d.geometry = c.ensemble.geometry;
  d.sigma_h = c.ensemble.sigma_h_um * 1e-6;
  d.n_rows = c.ensemble.n_rows;
  d.row_spacing = c.ensemble.row_spacing_um * 1e-6;
  d.waist_perp = c.trap.waist_um * 1e-6;
  d.center_trap = make_trap(c);
  d.occupancy = c.ensemble.occupancy;
  d.placement = c.ensemble.placement;
  d.sampling = c.ensemble.sampling;
  d.uniform_radius = c.ensemble.uniform_radius_um * 1e-6;
  return d;
}

std::vector<double> make_grid(const RunConfig& c) {
  auto g = linear_grid(c.grid.min_hz, c.grid.max_hz, c.grid.step_hz);
  for (double& x : g) x = to_angular(x);
  return g;
}

ValidationReport validate(const RunConfig& c, Mode mode) {
  ValidationReport rep;
  auto violation = [&](const std::string& s) { rep.violations.push_back(s); };
  auto positive = [&](double v, const char* what) {
    if (!(v > 0.0) || !std::isfinite(v)) violation(std::string(what) + " must be a positive finite number");
  };
  auto non_negative = [&](double v, const char* what) {
    if (!(v >= 0.0) || !std::isfinite(v)) violation(std::string(what) + " must be a non-negative finite number");
  };

  if (c.threads < 0) violation("threads must be >= 0");
  positive(c.trap.omega_x_hz, "trap.omega_x_hz");
  positive(c.trap.omega_y_hz, "trap.omega_y_hz");
  positive(c.trap.omega_z_hz, "trap.omega_z_hz");
  non_negative(c.trap.eta_z, "trap.eta_z");
  positive(c.trap.waist_um, "trap.waist_um");
  non_negative(c.temperature.t_x_uk, "temperature.t_x_uk");
  non_negative(c.temperature.t_y_uk, "temperature.t_y_uk");
  non_negative(c.temperature.t_z_uk, "temperature.t_z_uk");
  positive(c.drive.rabi_hz, "drive.rabi_hz");
  positive(c.drive.pulse_area, "drive.pulse_area");
  if (!std::isfinite(c.interaction.a_eg_minus_a0)) violation("interaction.a_eg_minus_a0 must be finite");
  if (!(c.truncation.tail_weight_tol > 0.0 && c.truncation.tail_weight_tol < 1.0)) {
    violation("truncation.tail_weight_tol must lie in (0, 1)");
  }
  if (c.truncation.max_mode < 1) violation("truncation.max_mode must be >= 1");

  const bool needs_grid = mode == Mode::Simulate;
  if (needs_grid) {
    const auto& g = c.grid;
    if (!std::isfinite(g.min_hz) || !std::isfinite(g.max_hz) || !(g.min_hz < g.max_hz)) {
      violation("grid.min_hz must be below grid.max_hz");
    }
    if (!(g.step_hz > 0.0) || !std::isfinite(g.step_hz)) {
      violation("grid.step_hz must be > 0");
    } else if (g.step_hz > g.max_hz - g.min_hz) {
      violation("grid.step_hz exceeds the grid span");
    } else if ((g.max_hz - g.min_hz) / g.step_hz > 1e6) {
      violation("grid has more than 10^6 points");
    }
  }

  bool has_engine = c.engine.has_value();
  Engine engine = c.engine.value_or(Engine::Ensemble);
  if (mode == Mode::Simulate && !has_engine) violation("engine is required for simulate");
  if (mode == Mode::Fit) {
    has_engine = true;
    if (engine != Engine::ClosedForm && engine != Engine::Ensemble) {
      violation("fit supports the closed_form and ensemble engines only (got " + engine_name(engine) + ")");
    }
  }
  if (mode == Mode::Analyze) has_engine = false;

  if (has_engine && (engine == Engine::Exact || engine == Engine::Sidebands)) {
    const auto& m = c.spin.modes;
    if (m.empty()) violation("spin.modes must list at least one mode");
    if (static_cast<int>(m.size()) > kMaxAtoms) {
      violation("spin.modes: at most " + std::to_string(kMaxAtoms) + " atoms are supported");
    }
    std::set<int> distinct(m.begin(), m.end());
    if (distinct.size() != m.size()) violation("spin.modes must be distinct (identical fermions)");
    if (!m.empty() && *distinct.begin() < 0) violation("spin.modes must be non-negative");
    if (c.spin.u_hz && !std::isfinite(*c.spin.u_hz)) violation("spin.u_hz must be finite");
  }
  if (has_engine && is_thermal(engine)) {
    if (!(c.temperature.t_z_uk > 0.0)) violation("thermal engines require temperature.t_z_uk > 0");
  }
  const bool uses_ensemble = has_engine && engine == Engine::Ensemble;
  if (uses_ensemble) {
    const auto& e = c.ensemble;
    positive(e.sigma_h_um, "ensemble.sigma_h_um");
    if (e.n_rows < 1) violation("ensemble.n_rows must be >= 1");
    non_negative(e.row_spacing_um, "ensemble.row_spacing_um");
    non_negative(e.uniform_radius_um, "ensemble.uniform_radius_um");
    if (e.n_samples < 1) violation("ensemble.n_samples must be >= 1");
    if (e.occupancy.empty()) violation("ensemble.occupancy must not be empty");
    double total = 0.0;
    for (const auto& [n, f] : e.occupancy) {
      if (n < 1) violation("ensemble.occupancy keys must be atom numbers >= 1");
      if (n > 2) violation("ensemble.occupancy: thermal lineshapes cover one or two atoms per site only");
      if (!(f >= 0.0)) violation("ensemble.occupancy fractions must be >= 0");
      total += f;
    }
    if (total > 1.0 + 1e-12) violation("ensemble.occupancy fractions sum above 1");
  }
  if (mode == Mode::Analyze || mode == Mode::Fit) {
    if (c.analysis.scans.empty()) violation("analysis.scans must list at least one scan file");
    positive(c.analysis.bin_width_hz, "analysis.bin_width_hz");
    for (const auto& s : c.analysis.scans) {
      const fs::path p = fs::path(c.base_dir) / s;
      if (!fs::exists(p)) rep.warnings.push_back("scan file not found: " + p.string());
    }
  }
  if (mode == Mode::Fit) {
    positive(c.fit.max_abs_a_a0, "fit.max_abs_a_a0");
    if (!(std::abs(c.fit.initial_a_a0) <= c.fit.max_abs_a_a0)) violation("fit.initial_a_a0 lies outside the bound");
    non_negative(c.fit.carrier_cut, "fit.carrier_cut");
    if (c.fit.initial_eta && !(*c.fit.initial_eta > 0.0 && *c.fit.initial_eta <= 1.0)) {
      violation("fit.initial_eta must lie in (0, 1]");
    }
    for (const auto& [lo, hi] : c.fit.masked_hz) {
      if (!(lo <= hi)) violation("fit.masked_hz ranges need lo <= hi");
    }
  }
  if (!rep.ok()) return rep;

  // Regime warnings, computed only for a consistent configuration.
  if (has_engine && is_thermal(engine)) {
    try {
      const auto tc = make_thermal_config(c);
      ClosedFormDiagnostics diag;
      std::vector<double> probe;
      if (mode == Mode::Simulate) probe = make_grid(c);
      isb_closed_form(tc, probe, &diag);
      for (auto& w : diag.warnings) rep.warnings.push_back(std::move(w));
      const double mean_rabi = thermal_mean_rabi(tc.drive.rabi_bare(), tc.trap.eta_z(), tc.alpha_z(), c.truncation);
      const double gamma = gamma_ratio(2, tc.interaction().mean_u_thermal, mean_rabi);
      if (gamma < 1.0) {
        rep.warnings.push_back("gamma = " + format_number(gamma) + " < 1: the sideband is not resolved from the carrier");
      }
    } catch (const std::exception& e) {
      rep.violations.push_back(e.what());
    }
  }
  if (has_engine && (engine == Engine::Exact || engine == Engine::Sidebands) && c.spin.modes.size() > 10) {
    rep.warnings.push_back("exact diagonalization above 10 atoms is slow");
  }
  return rep;
}

SimulationOutput simulate(const RunConfig& c) {
  if (!c.engine) throw ConfigError("engine is required for simulate");
  SimulationOutput out;
  out.grid_hz = linear_grid(c.grid.min_hz, c.grid.max_hz, c.grid.step_hz);
  const auto grid = make_grid(c);
  const auto tc = make_thermal_config(c);
  switch (*c.engine) {
    case Engine::Exact:
    case Engine::Sidebands: {
      std::vector<int> modes = c.spin.modes;
      std::sort(modes.rbegin(), modes.rend());
      const double u = c.spin.u_hz ? to_angular(*c.spin.u_hz)
                                   : u_param(tc.a_eg_minus, tc.trap, tc.mass) * tc.transverse_factor();
      const auto sys = SpinSystem::from_modes(ModeConfiguration(modes), c.trap.eta_z, tc.drive.rabi_bare(), u,
                                              c.spin.linearized);
      if (*c.engine == Engine::Exact) {
        out.spectrum = lineshape_exact(sys, tc.drive, grid, c.threads);
      } else {
        const auto spec = collective_spectrum(sys);
        if (spec.degenerate) out.warnings.push_back("degenerate sideband energies merged into blocks");
        out.spectrum = lineshape_sidebands(spec, sys.n_atoms(), tc.drive, grid);
      }
      break;
    }
    case Engine::ClosedForm: {
      ClosedFormDiagnostics diag;
      out.spectrum = isb_closed_form(tc, grid, &diag);
      out.warnings = diag.warnings;
      break;
    }
    case Engine::BruteForce:
      out.spectrum = thermal_lineshape_bruteforce(tc, grid, c.threads);
      break;
    case Engine::Ensemble: {
      EnsembleOptions opts;
      opts.engine = c.ensemble.site_engine;
      opts.threads = c.threads;
      out.spectrum = ensemble_average(make_distribution(c), tc, grid, c.ensemble.n_samples, c.seed, opts);
      if (out.spectrum.invalid_count() > 0) {
        out.warnings.push_back(std::to_string(out.spectrum.invalid_count()) +
                               " grid points outside the model's validity region");
      }
      break;
    }
  }
  return out;
}

AnalysisOutput analyze(const RunConfig& c) {
  AnalysisOutput out;
  std::vector<ScanRecord> scans;
  for (const auto& s : c.analysis.scans) {
    auto scan = read_scan_csv_file((fs::path(c.base_dir) / s).string());
    if (c.analysis.center_scans) {
      const auto fit = lorentzian_fit(scan);
      if (!fit.converged || fit.has_flag("zero_amplitude")) {
        out.warnings.push_back("scan " + s + ": no Lorentzian line found, left uncentered");
      } else {
        scan = scan.shifted(-fit.parameters.at("center_hz").value);
      }
    }
    scans.push_back(std::move(scan));
  }
  out.binned = concatenate_and_bin(scans, c.analysis.bin_width_hz);
  const auto degenerate = std::count_if(out.binned.bins.begin(), out.binned.bins.end(),
                                        [](const Bin& b) { return b.degenerate; });
  if (degenerate > 0) out.warnings.push_back(std::to_string(degenerate) + " bins hold a single sample (sem = 0)");
  out.reflected = reflect_subtract(out.binned);
  return out;
}

std::string spectrum_csv(const Spectrum& s, const std::vector<double>* grid_hz) {
  if (grid_hz && grid_hz->size() != s.size()) throw DomainError("spectrum_csv: grid size mismatch");
  std::string out = "detuning_hz,excitation_fraction,sigma\n";
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto& p = s[i];
    out += format_number(grid_hz ? (*grid_hz)[i] : from_angular(p.detuning));
    out += ',';
    out += format_number(p.value);
    out += ',';
    if (p.sigma) out += format_number(*p.sigma);
    out += '\n';
  }
  return out;
}

std::string binned_csv(const BinnedSpectrum& b) {
  std::string out = "detuning_hz,excitation_fraction,sigma,count\n";
  for (const auto& bin : b.bins) {
    out += format_number(bin.center_hz) + ',' + format_number(bin.mean) + ',' + format_number(bin.sem) + ',' +
           std::to_string(bin.count) + '\n';
  }
  return out;
}

std::string fit_result_json(const FitResult& f) {
  json params = json::object();
  for (const auto& [k, v] : f.parameters) params[k] = {{"value", number_or_null(v.value)}, {"error", number_or_null(v.error)}};
  json hist = json::array();
  for (double h : f.objective_history) hist.push_back(number_or_null(h));
  return json{{"parameters", params},
              {"residual_norm", number_or_null(f.residual_norm)},
              {"converged", f.converged},
              {"n_evaluations", f.n_evaluations},
              {"iterations", f.iterations},
              {"objective_history", hist},
              {"flags", f.flags},
              {"message", f.message}}
      .dump(2);
}

void write_atomic(const std::string& path, const std::string& content) {
  const fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open " + tmp.string() + " for writing");
    os.write(content.data(), static_cast<std::streamsize>(content.size()));
    os.flush();
    if (!os) {
      std::error_code ec;
      fs::remove(tmp, ec);
      throw IoError("failed writing " + tmp.string());
    }
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw IoError("cannot rename " + tmp.string() + " to " + target.string());
  }
}

RunOutcome run(const RunConfig& c, Mode mode, const std::string& out_dir) {
  RunOutcome outcome;
  const auto wall0 = std::chrono::steady_clock::now();
  const std::string started = utc_now();
  StageClock clock;
  std::vector<std::pair<std::string, std::string>> files;  // name, content
  try {
    clock.start("validate");
    const auto report = validate(c, mode);
    clock.stop();
    if (!report.ok()) {
      std::string msg;
      for (const auto& v : report.violations) msg += (msg.empty() ? "" : "; ") + v;
      throw ConfigError(msg);
    }
    outcome.warnings = report.warnings;
    if (mode == Mode::Simulate) {
      clock.start("simulate");
      auto sim = simulate(c);
      clock.stop();
      for (auto& w : sim.warnings) {
        if (std::find(outcome.warnings.begin(), outcome.warnings.end(), w) == outcome.warnings.end()) {
          outcome.warnings.push_back(std::move(w));
        }
      }
      files.emplace_back("spectrum.csv", spectrum_csv(sim.spectrum, &sim.grid_hz));
    } else {
      clock.start("analyze");
      auto an = analyze(c);
      clock.stop();
      outcome.warnings.insert(outcome.warnings.end(), an.warnings.begin(), an.warnings.end());
      files.emplace_back("binned.csv", binned_csv(an.binned));
      files.emplace_back("reflected.csv", binned_csv(an.reflected));
      if (mode == Mode::Fit) {
        clock.start("fit");
        ScatteringFitConfig fc{make_thermal_config(c)};
        if (!c.engine || *c.engine == Engine::Ensemble) fc.ensemble = make_distribution(c);
        fc.n_samples = c.ensemble.n_samples;
        fc.seed = c.seed;
        fc.fit_eta = c.fit.fit_eta;
        fc.initial_a = c.fit.initial_a_a0 * kCodata2018.bohr_radius();
        fc.initial_eta = c.fit.initial_eta;
        fc.carrier_cut = c.fit.carrier_cut;
        fc.masked_hz = c.fit.masked_hz;
        fc.max_abs_a_bohr = c.fit.max_abs_a_a0;
        fc.coarse_search = c.fit.coarse_search;
        const auto fit = fit_scattering_length(an.reflected, fc);
        clock.stop();
        if (!fit.converged) outcome.warnings.push_back("fit did not converge: " + fit.message);
        for (const auto& f : fit.flags) outcome.warnings.push_back("fit flag: " + f);
        files.emplace_back("fit.json", fit_result_json(fit));
      }
    }

    clock.start("write");
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create output directory " + out_dir + ": " + ec.message());
    for (const auto& [name, content] : files) {
      const auto p = (fs::path(out_dir) / name).string();
      write_atomic(p, content);
      outcome.outputs.push_back(p);
    }
    clock.stop();

    json timings = json::object();
    for (const auto& [k, v] : clock.timings()) timings[k] = v;
    json outputs = json::array();
    for (const auto& [name, content] : files) outputs.push_back(name);
    const json manifest{
        {"artifact", "isbsim"},
        {"version", kVersion},
        {"mode", mode_name(mode)},
        {"seed", c.seed},
        {"config", json::parse(config_to_json(c))},
        {"started_utc", started},
        {"wall_clock_s", std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0).count()},
        {"timings_s", timings},
        {"warnings", outcome.warnings},
        {"outputs", outputs}};
    const auto mp = (fs::path(out_dir) / "manifest.json").string();
    write_atomic(mp, manifest.dump(2));
    outcome.outputs.push_back(mp);
  } catch (const ConfigError& e) {
    outcome = RunOutcome{2, "config", e.what(), {}, outcome.warnings};
  } catch (const DomainError& e) {
    outcome = RunOutcome{2, "config", e.what(), {}, outcome.warnings};
  } catch (const IoError& e) {
    outcome = RunOutcome{4, "io", e.what(), outcome.outputs, outcome.warnings};
  } catch (const std::exception& e) {
    outcome = RunOutcome{3, "numerical", e.what(), {}, outcome.warnings};
  }
  return outcome;
}

}  // namespace isb::app
