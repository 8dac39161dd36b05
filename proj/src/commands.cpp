#include "atomscope/commands.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "atomscope/csv.hpp"
#include "atomscope/errors.hpp"
#include "atomscope/heating.hpp"
#include "atomscope/inference.hpp"
#include "atomscope/units.hpp"

namespace atomscope {

using nlohmann::json;

namespace {

void write_text(const std::filesystem::path& file, const std::string& text) {
  std::ofstream out(file);
  if (!out) throw ParseError("cannot open " + file.string() + " for writing");
  out << text;
}

void prepare_out_dir(const CommandContext& ctx) {
  std::filesystem::create_directories(ctx.out_dir);
  write_text(ctx.out_dir / "resolved_config.json", ctx.config.resolved_json());
}

int heating_n_trunc(const RunConfig& cfg) {
  if (cfg.heating && cfg.heating->n_trunc) return *cfg.heating->n_trunc;
  return cfg.trap.n_trunc;
}

json fit_result_json(const std::string& kind, const FitResult& fit) {
  json params = json::array();
  for (const auto& [name, value] : fit.params) {
    json p = {{"param", name},
              {"value", value},
              {"std_error", fit.std_errors.at(name)},
              {"converged", fit.converged},
              {"iterations", fit.iterations},
              {"residual_norm", fit.residual_norm}};
    params.push_back(p);
  }
  return json{{"fit_kind", kind},
              {"converged", fit.converged},
              {"iterations", fit.iterations},
              {"residual_norm", fit.residual_norm},
              {"params", params}};
}

}  // namespace

void cmd_fc_matrix(const CommandContext& ctx) {
  const RunConfig& cfg = ctx.config;
  prepare_out_dir(ctx);
  const PhysicalConstants constants = cfg.constants.build();
  TrapSpec trap = cfg.trap.build(constants);
  trap.n_trunc = heating_n_trunc(cfg);
  trap.validate(constants);
  const double eta = lamb_dicke(constants, trap);
  const FranckCondonMatrix fc =
      franck_condon_matrix(eta, trap.n_trunc, ctx.workers);

  std::vector<std::string> columns;
  columns.reserve(fc.size);
  for (int m = 0; m < fc.size; ++m) columns.push_back("m" + std::to_string(m));
  csv::Writer w(ctx.out_dir / "fc_matrix.csv", columns,
                {{"eta", csv::format_double(eta)},
                 {"size", std::to_string(fc.size)}});
  std::vector<double> row(fc.size);
  for (int n = 0; n < fc.size; ++n) {
    for (int m = 0; m < fc.size; ++m) row[m] = fc(n, m);
    w.row(row);
  }

  const auto deficits = fc.column_deficits();
  double max_deficit = 0.0, max_deficit_lower_half = 0.0;
  for (int m = 0; m < fc.size; ++m) {
    max_deficit = std::max(max_deficit, deficits[m]);
    if (m < fc.size / 2) {
      max_deficit_lower_half = std::max(max_deficit_lower_half, deficits[m]);
    }
  }
  json report = {{"eta", eta},
                 {"size", fc.size},
                 {"max_column_deficit", max_deficit},
                 {"max_column_deficit_lower_half", max_deficit_lower_half},
                 {"column_deficits", deficits}};
  write_text(ctx.out_dir / "fc_report.json", report.dump(2) + "\n");
}

void cmd_survival_curve(const CommandContext& ctx) {
  const RunConfig& cfg = ctx.config;
  if (!cfg.field || !cfg.heating) {
    throw ParseError("survival: config needs field and heating blocks");
  }
  if (!cfg.scan) throw ParseError("survival: config needs a scan block");
  prepare_out_dir(ctx);

  const PhysicalConstants constants = cfg.constants.build();
  TrapSpec trap = cfg.trap.build(constants);
  trap.n_trunc = heating_n_trunc(cfg);
  trap.validate(constants);
  const SaturationContext sat = SaturationContext::from_constants(constants);
  const FieldModel field = cfg.field->build(cfg.base_dir);
  const TweezerArray array =
      cfg.array ? cfg.array->build() : ArrayConfig{}.build();
  const std::vector<double> displacements = cfg.scan->coordinates(array);

  // points inside the field's validity domain are evaluated; the rest are
  // reported per point in the summary
  std::vector<double> valid;
  json skipped = json::array();
  for (double d : displacements) {
    bool ok = true;
    std::string reason;
    if (std::holds_alternative<AnalyticEvanescentModel>(field)) {
      const auto& m = std::get<AnalyticEvanescentModel>(field);
      if (std::abs(d) < m.r_min) {
        ok = false;
        reason = "inside analytic validity cutoff r_min";
      }
    } else {
      const auto& m = std::get<TabulatedField>(field).mode;
      if (d < m.y_grid().front() || d > m.y_grid().back() ||
          0.0 < m.z_grid().front() || 0.0 > m.z_grid().back()) {
        ok = false;
        reason = "outside tabulated grid";
      }
    }
    if (ok) {
      valid.push_back(d);
    } else {
      skipped.push_back({{"displacement_um", d / units::um}, {"reason", reason}});
    }
  }

  std::vector<SitePosition> sites(valid.size());
  for (std::size_t i = 0; i < valid.size(); ++i) sites[i] = {valid[i], 0.0};
  HeatingModelOptions model_options;
  model_options.double_kick = cfg.heating->double_kick;
  if (cfg.heating->position_averaging) {
    model_options.position_sigma =
        std::sqrt(constants.k_boltzmann * cfg.heating->temperature() /
                  constants.atom_mass) /
        trap.omega_trap;
  }
  const auto curve = survival_vs_position(
      sites, field, sat, trap, constants, cfg.heating->temperature(),
      cfg.heating->pulse(), ctx.workers, model_options);
  const double zero_duration =
      thermal_state(cfg.heating->temperature(), trap, constants).total();

  csv::Writer w(ctx.out_dir / "survival_vs_position.csv",
                {"displacement_um", "intensity_W_m2", "s", "R_sc_per_s",
                 "survival"});
  for (const auto& p : curve) {
    const double normalized =
        zero_duration > 0.0 ? std::min(1.0, p.survival / zero_duration) : 0.0;
    w.row({p.coordinate / units::um, p.intensity, p.saturation, p.rate,
           normalized});
  }

  json summary = {{"points", curve.size()},
                  {"skipped_points", skipped},
                  {"zero_duration_survival", zero_duration},
                  {"eta", lamb_dicke(constants, trap)},
                  {"n_trunc", trap.n_trunc}};
  write_text(ctx.out_dir / "survival_summary.json", summary.dump(2) + "\n");
}

void cmd_scan_map(const CommandContext& ctx) {
  const RunConfig& cfg = ctx.config;
  if (!cfg.geometry_file || !cfg.array || !cfg.scan) {
    throw ParseError("scan: config needs geometry, array and scan blocks");
  }
  prepare_out_dir(ctx);

  const PhysicalConstants constants = cfg.constants.build();
  const DeviceGeometry geometry = cfg.load_geometry();
  const TweezerArray array = cfg.array->build();
  const std::vector<double> coords = cfg.scan->coordinates(array);
  const LoadingModel loading =
      cfg.loading.build(cfg.scan->shots, cfg.scan->seed);

  // heating channel only when both blocks are present
  std::optional<FieldModel> field;
  std::optional<FranckCondonMatrix> fc;
  std::optional<MotionalState> initial;
  HeatingInputs heating;
  const bool with_light = cfg.field.has_value() && cfg.heating.has_value();
  if (with_light) {
    TrapSpec trap = cfg.trap.build(constants);
    trap.n_trunc = heating_n_trunc(cfg);
    trap.validate(constants);
    field = cfg.field->build(cfg.base_dir);
    fc = franck_condon_matrix(lamb_dicke(constants, trap), trap.n_trunc,
                              ctx.workers);
    if (cfg.heating->double_kick) fc = double_kick_matrix(*fc, ctx.workers);
    initial = thermal_state(cfg.heating->temperature(), trap, constants);
    heating.field = &*field;
    heating.sat = SaturationContext::from_constants(constants);
    heating.fc = &*fc;
    heating.initial = &*initial;
    heating.duration = cfg.heating->pulse();
    if (cfg.heating->position_averaging) {
      heating.position_sigma =
          std::sqrt(constants.k_boltzmann * cfg.heating->temperature() /
                    constants.atom_mass) /
          trap.omega_trap;
    }
  }

  const SurvivalMap map =
      simulate_scan(geometry, array, coords, with_light ? &heating : nullptr,
                    loading, ctx.workers);
  map.write_csv(ctx.out_dir / "scan_map.csv");

  json summary = {{"rows", map.rows},
                  {"cols", map.cols},
                  {"coordinates", map.coordinates.size()},
                  {"shots_per_cell", loading.shots},
                  {"seed", loading.seed},
                  {"with_light", with_light},
                  {"coordinate_unit", "m"}};
  if (map.rows >= 2) {
    try {
      const TiltEstimate tilt = tilt_estimate(map, array);
      summary["tilt"] = {{"tilt_rad", tilt.tilt},
                         {"tilt_deg", units::rad_to_deg(tilt.tilt)},
                         {"std_error_rad", tilt.std_error},
                         {"std_error_deg", units::rad_to_deg(tilt.std_error)}};
    } catch (const InsufficientSignalError& e) {
      summary["tilt_warning"] = e.what();
    }
  }
  write_text(ctx.out_dir / "scan_summary.json", summary.dump(2) + "\n");
}

namespace {

void fit_decay_cmd(const CommandContext& ctx, const std::filesystem::path& input) {
  const RunConfig& cfg = ctx.config;
  if (!cfg.field) throw ParseError("fit decay: config needs a field block for the power");
  csv::Table t = csv::read_file(input);
  const auto cr = t.column("r_um");
  const auto ci = t.column("intensity_W_m2");
  std::optional<std::size_t> cw;
  for (std::size_t c = 0; c < t.columns.size(); ++c) {
    if (t.columns[c] == "weight") cw = c;
  }
  std::vector<IntensitySample> samples;
  std::vector<double> weights;
  for (std::size_t i = 0; i < t.row_count(); ++i) {
    samples.push_back({t.number(i, cr) * units::um, t.number(i, ci)});
    if (cw) weights.push_back(t.number(i, *cw));
  }

  DecayFitOptions options;
  options.free_prefactor = cfg.fit->free_prefactor;
  options.max_iterations = cfg.fit->max_iterations;
  const FitResult fit =
      fit_decay_length(samples, cfg.field->power(), weights, options);

  json out = fit_result_json("decay", fit);
  out["rho_nm"] = fit.params.at("rho") / units::nm;
  write_text(ctx.out_dir / "fit_result.json", out.dump(2) + "\n");

  const double rho = fit.params.at("rho");
  const double offset = options.free_prefactor
                            ? fit.params.at("log_prefactor")
                            : 0.0;
  csv::Writer w(ctx.out_dir / "fit_residuals.csv",
                {"r_um", "observed_ln_I", "model_ln_I", "residual"});
  for (const auto& s : samples) {
    const double obs = std::log(s.intensity);
    const double model =
        decay_model_log_intensity(s.r, rho, cfg.field->power(), offset);
    w.row({s.r / units::um, obs, model, obs - model});
  }
}

void fit_temperature_cmd(const CommandContext& ctx,
                         const std::filesystem::path& input) {
  const RunConfig& cfg = ctx.config;
  csv::Table t = csv::read_file(input);
  const auto ct = t.column("release_time_us");
  const auto cs = t.column("survival");
  const auto cn = t.column("samples");
  ReleaseRecaptureCurve observed;
  for (std::size_t i = 0; i < t.row_count(); ++i) {
    observed.release_times.push_back(t.number(i, ct) * units::us);
    observed.survival.push_back(t.number(i, cs));
  }
  if (t.row_count() == 0) throw ParseError(input.string() + ": no data rows");
  observed.n_samples = static_cast<long>(t.number(0, cn));
  observed.seed = cfg.fit->seed;

  const PhysicalConstants constants = cfg.constants.build();
  const TrapSpec trap = cfg.trap.build(constants);
  ThermometryOptions options;
  options.t_min = cfg.fit->t_min_uK * units::uK;
  options.t_max = cfg.fit->t_max_uK * units::uK;
  options.inner_samples = cfg.fit->inner_samples;
  options.bootstrap_resamples = cfg.fit->bootstrap;
  options.workers = ctx.workers;
  if (cfg.fit->axial_frequency_2pi_kHz) {
    options.axial_frequency =
        units::two_pi * (*cfg.fit->axial_frequency_2pi_kHz) * units::kHz;
  }
  const FitResult fit = fit_temperature(observed, trap, constants, options);

  json out = fit_result_json("temperature", fit);
  out["temperature_uK"] = fit.params.at("temperature") / units::uK;
  write_text(ctx.out_dir / "fit_result.json", out.dump(2) + "\n");

  const auto model = release_recapture_simulate(
      fit.params.at("temperature"), trap, constants, observed.release_times,
      options.inner_samples, options.inner_seed, options.axial_frequency,
      ctx.workers);
  csv::Writer w(ctx.out_dir / "fit_residuals.csv",
                {"release_time_us", "observed", "model", "residual"});
  for (std::size_t i = 0; i < observed.release_times.size(); ++i) {
    w.row({observed.release_times[i] / units::us, observed.survival[i],
           model.survival[i], observed.survival[i] - model.survival[i]});
  }
}

void fit_tilt_cmd(const CommandContext& ctx, const std::filesystem::path& input) {
  const RunConfig& cfg = ctx.config;
  if (!cfg.array) throw ParseError("fit tilt: config needs an array block");
  const SurvivalMap map = SurvivalMap::read_csv(input);
  const TweezerArray array = cfg.array->build();
  const TiltEstimate tilt = tilt_estimate(map, array);

  FitResult fit;
  fit.params["tilt"] = tilt.tilt;
  fit.std_errors["tilt"] = tilt.std_error;
  fit.converged = true;
  fit.iterations = 1;
  double sse = 0.0;
  // residuals against the fitted line
  const int n = static_cast<int>(tilt.row_positions.size());
  double mx = 0.0, my = 0.0;
  for (int r = 0; r < n; ++r) {
    mx += tilt.row_positions[r];
    my += tilt.row_centers[r];
  }
  mx /= n;
  my /= n;
  const double slope = std::tan(tilt.tilt);
  std::vector<double> fitted(n);
  for (int r = 0; r < n; ++r) {
    fitted[r] = my + slope * (tilt.row_positions[r] - mx);
    const double d = tilt.row_centers[r] - fitted[r];
    sse += d * d;
  }
  fit.residual_norm = std::sqrt(sse);

  json out = fit_result_json("tilt", fit);
  out["tilt_deg"] = units::rad_to_deg(tilt.tilt);
  out["std_error_deg"] = units::rad_to_deg(tilt.std_error);
  write_text(ctx.out_dir / "fit_result.json", out.dump(2) + "\n");

  csv::Writer w(ctx.out_dir / "fit_residuals.csv",
                {"row_x_um", "loss_center_um", "model_center_um", "residual_um"});
  for (int r = 0; r < n; ++r) {
    w.row({tilt.row_positions[r] / units::um, tilt.row_centers[r] / units::um,
           fitted[r] / units::um,
           (tilt.row_centers[r] - fitted[r]) / units::um});
  }
}

}  // namespace

void cmd_fit(const CommandContext& ctx, const std::filesystem::path& input) {
  const RunConfig& cfg = ctx.config;
  if (!cfg.fit) throw ParseError("fit: config needs a fit block");
  if (!std::filesystem::exists(input)) {
    throw ParseError("fit: input file does not exist: " + input.string());
  }
  prepare_out_dir(ctx);
  if (cfg.fit->kind == "decay") {
    fit_decay_cmd(ctx, input);
  } else if (cfg.fit->kind == "temperature") {
    fit_temperature_cmd(ctx, input);
  } else {
    fit_tilt_cmd(ctx, input);
  }
}

}  // namespace atomscope
