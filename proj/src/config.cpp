#include "atomscope/config.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include <json.hpp>

#include "atomscope/errors.hpp"
#include "atomscope/units.hpp"

namespace atomscope {

using nlohmann::json;

namespace {

// Pulls known keys out of a block and rejects the rest, so typos surface
// with the offending key path.
class BlockReader {
 public:
  BlockReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) {
      throw ParseError("config: block '" + path_ + "' must be an object");
    }
  }

  ~BlockReader() = default;

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (auto it = j_.find(key); it != j_.end()) {
      from(*it, key, out);
    }
  }

  template <typename T>
  void get(const char* key, std::optional<T>& out) {
    seen_.insert(key);
    if (auto it = j_.find(key); it != j_.end() && !it->is_null()) {
      T v{};
      from(*it, key, v);
      out = v;
    }
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.contains(it.key())) {
        throw ParseError("config: unknown key '" + path_ + "." + it.key() + "'");
      }
    }
  }

 private:
  template <typename T>
  void from(const json& v, const char* key, T& out) {
    try {
      out = v.get<T>();
    } catch (const json::exception&) {
      throw ParseError("config: key '" + path_ + "." + key +
                       "' has the wrong type");
    }
  }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_constants(const json& j, ConstantsConfig& c) {
  BlockReader r(j, "constants");
  r.get("hbar_J_s", c.hbar_J_s);
  r.get("k_boltzmann_J_K", c.k_boltzmann_J_K);
  r.get("atom_mass_kg", c.atom_mass_kg);
  r.get("wavelength_d2_nm", c.wavelength_d2_nm);
  r.get("gamma_2pi_MHz", c.gamma_2pi_MHz);
  r.get("omega_recoil_2pi_kHz", c.omega_recoil_2pi_kHz);
  r.get("gravity_m_s2", c.gravity_m_s2);
  r.get("omega_0_2pi_THz", c.omega_0_2pi_THz);
  r.get("sigma_0_m2", c.sigma_0_m2);
  r.finish();
}

void read_trap(const json& j, TrapConfig& t) {
  BlockReader r(j, "trap");
  r.get("depth_uK", t.depth_uK);
  r.get("omega_trap_2pi_kHz", t.omega_trap_2pi_kHz);
  r.get("waist_um", t.waist_um);
  r.get("n_trunc", t.n_trunc);
  r.finish();
}

void read_field(const json& j, FieldConfig& f) {
  BlockReader r(j, "field");
  r.get("model", f.model);
  r.get("power_pW", f.power_pW);
  r.get("decay_length_nm", f.decay_length_nm);
  r.get("r_min_nm", f.r_min_nm);
  r.get("mode_file", f.mode_file);
  r.finish();
  if (f.model != "analytic" && f.model != "tabulated") {
    throw ParseError("config: field.model must be 'analytic' or 'tabulated'");
  }
  if (f.model == "tabulated" && f.mode_file.empty()) {
    throw ParseError("config: field.mode_file required for the tabulated model");
  }
  if (f.model == "analytic" && !f.mode_file.empty()) {
    throw ParseError("config: field.mode_file given but field.model is 'analytic'; "
                     "specify exactly one field source");
  }
}

void read_array(const json& j, ArrayConfig& a) {
  BlockReader r(j, "array");
  r.get("rows", a.rows);
  r.get("cols", a.cols);
  r.get("pitch_um", a.pitch_um);
  r.get("origin_um", a.origin_um);
  r.get("waist_um", a.waist_um);
  r.get("aod_calibration_um_per_MHz", a.aod_calibration_um_per_MHz);
  r.finish();
}

void read_scan(const json& j, ScanConfig& s) {
  BlockReader r(j, "scan");
  r.get("start_um", s.start_um);
  r.get("stop_um", s.stop_um);
  r.get("step_um", s.step_um);
  r.get("start_MHz", s.start_MHz);
  r.get("stop_MHz", s.stop_MHz);
  r.get("step_MHz", s.step_MHz);
  r.get("shots", s.shots);
  r.get("seed", s.seed);
  r.finish();
  const bool um = s.start_um || s.stop_um || s.step_um;
  const bool mhz = s.start_MHz || s.stop_MHz || s.step_MHz;
  if (um == mhz) {
    throw ParseError("config: scan needs exactly one unit family (start/stop/step "
                     "in _um or in _MHz)");
  }
  if (um && !(s.start_um && s.stop_um && s.step_um)) {
    throw ParseError("config: scan block is missing one of start_um/stop_um/step_um");
  }
  if (mhz && !(s.start_MHz && s.stop_MHz && s.step_MHz)) {
    throw ParseError("config: scan block is missing one of start_MHz/stop_MHz/step_MHz");
  }
}

void read_heating(const json& j, HeatingConfig& h) {
  BlockReader r(j, "heating");
  r.get("temperature_uK", h.temperature_uK);
  r.get("pulse_ms", h.pulse_ms);
  r.get("n_trunc", h.n_trunc);
  r.get("double_kick", h.double_kick);
  r.get("position_averaging", h.position_averaging);
  r.finish();
}

void read_loading(const json& j, LoadingConfig& l) {
  BlockReader r(j, "loading");
  r.get("fill_probability", l.fill_probability);
  r.get("transport_survival", l.transport_survival);
  r.finish();
}

void read_fit(const json& j, FitConfig& f) {
  BlockReader r(j, "fit");
  r.get("kind", f.kind);
  r.get("free_prefactor", f.free_prefactor);
  r.get("max_iterations", f.max_iterations);
  r.get("inner_samples", f.inner_samples);
  r.get("bootstrap", f.bootstrap);
  r.get("t_min_uK", f.t_min_uK);
  r.get("t_max_uK", f.t_max_uK);
  r.get("axial_frequency_2pi_kHz", f.axial_frequency_2pi_kHz);
  r.get("seed", f.seed);
  r.finish();
  if (f.kind != "decay" && f.kind != "temperature" && f.kind != "tilt") {
    throw ParseError("config: fit.kind must be 'decay', 'temperature' or 'tilt'");
  }
}

}  // namespace

PhysicalConstants ConstantsConfig::build() const {
  PhysicalConstants c;
  c.hbar = hbar_J_s;
  c.k_boltzmann = k_boltzmann_J_K;
  c.atom_mass = atom_mass_kg;
  c.wavelength_d2 = wavelength_d2_nm * units::nm;
  c.gamma = units::two_pi * gamma_2pi_MHz * units::MHz;
  c.omega_recoil = units::two_pi * omega_recoil_2pi_kHz * units::kHz;
  c.gravity = gravity_m_s2;
  c.omega_0 = omega_0_2pi_THz ? units::two_pi * (*omega_0_2pi_THz) * 1e12
                              : c.derived_omega_0();
  c.sigma_0 = sigma_0_m2 ? *sigma_0_m2 : c.derived_sigma_0();
  c.validate();
  return c;
}

TrapSpec TrapConfig::build(const PhysicalConstants& constants) const {
  TrapSpec t;
  t.depth = constants.k_boltzmann * depth_uK * units::uK;  // depth given as k_B T
  t.omega_trap = units::two_pi * omega_trap_2pi_kHz * units::kHz;
  t.waist = waist_um * units::um;
  t.n_trunc = n_trunc;
  return t;
}

double FieldConfig::r_min() const { return r_min_nm * units::nm; }
double FieldConfig::power() const { return power_pW * units::pW; }

FieldModel FieldConfig::build(const std::filesystem::path& base_dir) const {
  if (model == "analytic") {
    AnalyticEvanescentModel m;
    m.power = power();
    m.decay_length = decay_length_nm * units::nm;
    m.r_min = r_min();
    m.validate();
    return m;
  }
  std::filesystem::path p = mode_file;
  if (p.is_relative()) p = base_dir / p;
  return TabulatedField{TabulatedMode::from_csv(p), power()};
}

TweezerArray ArrayConfig::build() const {
  TweezerArray a;
  a.rows = rows;
  a.cols = cols;
  a.pitch = pitch_um * units::um;
  a.origin = {origin_um[0] * units::um, origin_um[1] * units::um,
              origin_um[2] * units::um};
  a.waist = waist_um * units::um;
  a.aod_calibration = aod_calibration_um_per_MHz * units::um / units::MHz;
  a.validate();
  return a;
}

std::vector<double> ScanConfig::coordinates(const TweezerArray& array) const {
  const double start = in_mhz() ? *start_MHz : *start_um;
  const double stop = in_mhz() ? *stop_MHz : *stop_um;
  const double step = in_mhz() ? *step_MHz : *step_um;
  if (!(step > 0.0) || stop < start) {
    throw InvalidParameterError("scan: need step > 0 and stop >= start");
  }
  const double span = (stop - start) / step;
  const auto count = static_cast<std::size_t>(
                         std::floor(span + std::max(1e-9, 1e-12 * span))) +
                     1;
  std::vector<double> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double v = start + static_cast<double>(i) * step;
    out.push_back(in_mhz() ? aod_to_position(v * units::MHz, array)
                           : v * units::um);
  }
  return out;
}

double HeatingConfig::temperature() const { return temperature_uK * units::uK; }
double HeatingConfig::pulse() const { return pulse_ms * units::ms; }

LoadingModel LoadingConfig::build(long shots, std::uint64_t seed) const {
  LoadingModel m;
  m.fill_probability = fill_probability;
  m.transport_survival = transport_survival;
  m.shots = shots;
  m.seed = seed;
  m.validate();
  return m;
}

RunConfig RunConfig::from_file(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ParseError("config: cannot open " + file.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError("config: " + file.string() + ": " + e.what());
  }
  if (!j.is_object()) throw ParseError("config: top level must be an object");

  RunConfig cfg;
  cfg.base_dir = file.parent_path();
  static const std::set<std::string> known = {
      "constants", "trap", "field", "geometry", "array",
      "scan",      "heating", "loading", "fit",  "output_dir"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!known.contains(it.key())) {
      throw ParseError("config: unknown top-level key '" + it.key() + "'");
    }
  }
  if (j.contains("constants")) read_constants(j["constants"], cfg.constants);
  if (j.contains("trap")) read_trap(j["trap"], cfg.trap);
  if (j.contains("field")) {
    FieldConfig f;
    read_field(j["field"], f);
    cfg.field = f;
  }
  if (j.contains("geometry")) {
    BlockReader r(j["geometry"], "geometry");
    std::string file_name;
    r.get("file", file_name);
    r.finish();
    if (file_name.empty()) throw ParseError("config: geometry.file is required");
    cfg.geometry_file = file_name;
  }
  if (j.contains("array")) {
    ArrayConfig a;
    read_array(j["array"], a);
    cfg.array = a;
  }
  if (j.contains("scan")) {
    ScanConfig s;
    read_scan(j["scan"], s);
    cfg.scan = s;
  }
  if (j.contains("heating")) {
    HeatingConfig h;
    read_heating(j["heating"], h);
    cfg.heating = h;
  }
  if (j.contains("loading")) read_loading(j["loading"], cfg.loading);
  if (j.contains("fit")) {
    FitConfig f;
    read_fit(j["fit"], f);
    cfg.fit = f;
  }
  if (j.contains("output_dir")) {
    if (!j["output_dir"].is_string()) {
      throw ParseError("config: output_dir must be a string");
    }
    cfg.output_dir = j["output_dir"].get<std::string>();
  }
  cfg.validate();
  return cfg;
}

void RunConfig::validate() const {
  const PhysicalConstants c = constants.build();
  trap.build(c).validate(c);
  if (heating && !field) {
    throw ParseError("config: heating requires a field block (exactly one "
                     "field source)");
  }
  if (heating && heating->n_trunc) {
    TrapSpec t = trap.build(c);
    t.n_trunc = *heating->n_trunc;
    t.validate(c);
  }
  if (field && field->model == "tabulated") {
    const auto p = resolve_path(field->mode_file);
    if (!std::filesystem::exists(p)) {
      throw ParseError("config: field.mode_file does not exist: " + p.string());
    }
  }
  if (geometry_file) {
    const auto p = resolve_path(*geometry_file);
    if (!std::filesystem::exists(p)) {
      throw ParseError("config: geometry.file does not exist: " + p.string());
    }
  }
}

std::filesystem::path RunConfig::resolve_path(const std::string& relative) const {
  std::filesystem::path p = relative;
  return p.is_relative() ? base_dir / p : p;
}

DeviceGeometry RunConfig::load_geometry() const {
  if (!geometry_file) throw ParseError("config: geometry block is required");
  return DeviceGeometry::from_csv(resolve_path(*geometry_file));
}

std::string RunConfig::resolved_json() const {
  json j;
  j["constants"] = {
      {"hbar_J_s", constants.hbar_J_s},
      {"k_boltzmann_J_K", constants.k_boltzmann_J_K},
      {"atom_mass_kg", constants.atom_mass_kg},
      {"wavelength_d2_nm", constants.wavelength_d2_nm},
      {"gamma_2pi_MHz", constants.gamma_2pi_MHz},
      {"omega_recoil_2pi_kHz", constants.omega_recoil_2pi_kHz},
      {"gravity_m_s2", constants.gravity_m_s2},
  };
  if (constants.omega_0_2pi_THz) {
    j["constants"]["omega_0_2pi_THz"] = *constants.omega_0_2pi_THz;
  }
  if (constants.sigma_0_m2) j["constants"]["sigma_0_m2"] = *constants.sigma_0_m2;
  j["trap"] = {
      {"depth_uK", trap.depth_uK},
      {"omega_trap_2pi_kHz", trap.omega_trap_2pi_kHz},
      {"waist_um", trap.waist_um},
      {"n_trunc", trap.n_trunc},
  };
  if (field) {
    j["field"] = {
        {"model", field->model},
        {"power_pW", field->power_pW},
    };
    if (field->model == "analytic") {
      j["field"]["decay_length_nm"] = field->decay_length_nm;
      j["field"]["r_min_nm"] = field->r_min_nm;
    } else {
      // referenced files echo as absolute paths so the resolved config
      // replays from anywhere
      j["field"]["mode_file"] = resolve_path(field->mode_file).string();
    }
  }
  if (geometry_file) {
    j["geometry"] = {{"file", resolve_path(*geometry_file).string()}};
  }
  if (array) {
    j["array"] = {
        {"rows", array->rows},
        {"cols", array->cols},
        {"pitch_um", array->pitch_um},
        {"origin_um", array->origin_um},
        {"waist_um", array->waist_um},
        {"aod_calibration_um_per_MHz", array->aod_calibration_um_per_MHz},
    };
  }
  if (scan) {
    json s = {{"shots", scan->shots}, {"seed", scan->seed}};
    if (scan->in_mhz()) {
      s["start_MHz"] = *scan->start_MHz;
      s["stop_MHz"] = *scan->stop_MHz;
      s["step_MHz"] = *scan->step_MHz;
    } else {
      s["start_um"] = *scan->start_um;
      s["stop_um"] = *scan->stop_um;
      s["step_um"] = *scan->step_um;
    }
    j["scan"] = s;
  }
  if (heating) {
    j["heating"] = {
        {"temperature_uK", heating->temperature_uK},
        {"pulse_ms", heating->pulse_ms},
        {"double_kick", heating->double_kick},
        {"position_averaging", heating->position_averaging},
    };
    if (heating->n_trunc) j["heating"]["n_trunc"] = *heating->n_trunc;
  }
  j["loading"] = {
      {"fill_probability", loading.fill_probability},
      {"transport_survival", loading.transport_survival},
  };
  if (fit) {
    j["fit"] = {
        {"kind", fit->kind},
        {"free_prefactor", fit->free_prefactor},
        {"max_iterations", fit->max_iterations},
        {"inner_samples", fit->inner_samples},
        {"bootstrap", fit->bootstrap},
        {"t_min_uK", fit->t_min_uK},
        {"t_max_uK", fit->t_max_uK},
        {"seed", fit->seed},
    };
    if (fit->axial_frequency_2pi_kHz) {
      j["fit"]["axial_frequency_2pi_kHz"] = *fit->axial_frequency_2pi_kHz;
    }
  }
  j["output_dir"] = output_dir;
  return j.dump(2) + "\n";
}

}  // namespace atomscope
