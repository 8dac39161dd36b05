#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "atomscope/commands.hpp"
#include "atomscope/config.hpp"
#include "atomscope/csv.hpp"
#include "atomscope/errors.hpp"
#include "atomscope/inference.hpp"
#include "atomscope/units.hpp"

using namespace atomscope;
using nlohmann::json;

namespace {

namespace fs = std::filesystem;

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "atomscope_cli_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string base_config_json() {
  return R"({
  "trap": {"depth_uK": 340.0, "omega_trap_2pi_kHz": 30.1, "waist_um": 1.2, "n_trunc": 130},
  "field": {"model": "analytic", "power_pW": 400.0, "decay_length_nm": 743.0, "r_min_nm": 90.0},
  "heating": {"temperature_uK": 40.0, "pulse_ms": 6.0},
  "scan": {"start_um": 0.2, "stop_um": 4.0, "step_um": 0.2, "shots": 100, "seed": 7},
  "output_dir": "out"
})";
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(ATOMSCOPE_CLI_PATH) + " " + args +
                          " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

}  // namespace

TEST_CASE("config parsing") {
  const auto dir = fresh_dir("parse");
  const auto cfg_path = dir / "run.json";

  SUBCASE("defaults fill in and validate") {
    write_file(cfg_path, base_config_json());
    const auto cfg = RunConfig::from_file(cfg_path);
    CHECK(cfg.trap.n_trunc == 130);
    CHECK(cfg.constants.wavelength_d2_nm == doctest::Approx(852.347));
    CHECK(cfg.field->power() == doctest::Approx(400e-12));
    CHECK(cfg.loading.fill_probability == 0.5);
  }

  SUBCASE("unknown keys are rejected with the key path") {
    write_file(cfg_path, R"({"trap": {"depth_uk": 340}})");
    CHECK_THROWS_WITH_AS((void)RunConfig::from_file(cfg_path),
                         doctest::Contains("trap.depth_uk"), ParseError);
  }

  SUBCASE("malformed JSON is a parse error") {
    write_file(cfg_path, "{not json");
    CHECK_THROWS_AS((void)RunConfig::from_file(cfg_path), ParseError);
  }

  SUBCASE("heating without field is rejected") {
    write_file(cfg_path, R"({"heating": {"temperature_uK": 40}})");
    CHECK_THROWS_AS((void)RunConfig::from_file(cfg_path), ParseError);
  }

  SUBCASE("scan unit families cannot mix") {
    write_file(cfg_path,
               R"({"scan": {"start_um": 0, "stop_MHz": 4, "step_um": 1}})");
    CHECK_THROWS_AS((void)RunConfig::from_file(cfg_path), ParseError);
  }

  SUBCASE("MHz scans convert through the AOD calibration") {
    write_file(cfg_path, R"({
  "array": {"aod_calibration_um_per_MHz": 0.5},
  "scan": {"start_MHz": -2.0, "stop_MHz": 2.0, "step_MHz": 1.0, "shots": 10, "seed": 1}
})");
    const auto cfg = RunConfig::from_file(cfg_path);
    const auto coords = cfg.scan->coordinates(cfg.array->build());
    REQUIRE(coords.size() == 5);
    CHECK(coords.front() == doctest::Approx(-1.0e-6).epsilon(1e-12));
    CHECK(coords[2] == doctest::Approx(0.0).scale(1e-6));
    CHECK(coords.back() == doctest::Approx(1.0e-6).epsilon(1e-12));
  }

  SUBCASE("missing geometry file fails validation") {
    write_file(cfg_path, R"({"geometry": {"file": "nope.csv"}})");
    CHECK_THROWS_WITH_AS((void)RunConfig::from_file(cfg_path),
                         doctest::Contains("nope.csv"), ParseError);
  }
}

TEST_CASE("fc-matrix command") {
  const auto dir = fresh_dir("fc");
  write_file(dir / "run.json", base_config_json());

  CommandContext ctx;
  ctx.config = RunConfig::from_file(dir / "run.json");
  ctx.out_dir = dir / "out";

  SUBCASE("eta = 0 writes the identity") {
    ctx.config.constants.omega_recoil_2pi_kHz = 0.0;
    ctx.config.trap.n_trunc = 16;
    cmd_fc_matrix(ctx);
    const auto table = csv::read_file(ctx.out_dir / "fc_matrix.csv");
    REQUIRE(table.row_count() == 16);
    for (std::size_t n = 0; n < 16; ++n) {
      for (std::size_t m = 0; m < 16; ++m) {
        CHECK(table.number(n, m) == (n == m ? 1.0 : 0.0));
      }
    }
  }

  SUBCASE("defaults give the 0.9337 carrier and a small deficit") {
    cmd_fc_matrix(ctx);
    const auto table = csv::read_file(ctx.out_dir / "fc_matrix.csv");
    CHECK(table.number(0, 0) == doctest::Approx(0.9337).epsilon(1e-3));
    const json report = json::parse(read_file(ctx.out_dir / "fc_report.json"));
    CHECK(report["size"] == 130);
    CHECK(report["max_column_deficit_lower_half"].get<double>() < 1e-6);
    CHECK(report["column_deficits"].size() == 130);
  }

  SUBCASE("n_trunc 400 deficit below 1e-6 in the populated half") {
    ctx.config.heating->n_trunc = 400;
    // 400 states needs a deeper trap than the default 235-state ladder
    ctx.config.trap.depth_uK = 600.0;
    cmd_fc_matrix(ctx);
    const json report = json::parse(read_file(ctx.out_dir / "fc_report.json"));
    CHECK(report["max_column_deficit_lower_half"].get<double>() < 1e-6);
  }
}

TEST_CASE("survival command") {
  const auto dir = fresh_dir("survival");
  write_file(dir / "run.json", base_config_json());

  CommandContext ctx;
  ctx.config = RunConfig::from_file(dir / "run.json");
  ctx.out_dir = dir / "out";

  SUBCASE("zero power returns survival = 1 everywhere") {
    ctx.config.field->power_pW = 0.0;
    cmd_survival_curve(ctx);
    const auto table = csv::read_file(ctx.out_dir / "survival_vs_position.csv");
    const auto cs = table.column("survival");
    REQUIRE(table.row_count() > 0);
    for (std::size_t i = 0; i < table.row_count(); ++i) {
      CHECK(table.number(i, cs) == doctest::Approx(1.0).epsilon(1e-12));
    }
  }

  SUBCASE("reference operating point crosses 0.5 once, below 3 um") {
    cmd_survival_curve(ctx);
    const auto table = csv::read_file(ctx.out_dir / "survival_vs_position.csv");
    const auto cs = table.column("survival");
    const auto cd = table.column("displacement_um");
    int crossings = 0;
    double crossing_um = 0.0;
    for (std::size_t i = 0; i + 1 < table.row_count(); ++i) {
      const double a = table.number(i, cs) - 0.5;
      const double b = table.number(i + 1, cs) - 0.5;
      if (a < 0.0 && b >= 0.0) {
        ++crossings;
        crossing_um = table.number(i + 1, cd);
      }
      if (a >= 0.0 && b < 0.0) ++crossings;
    }
    CHECK(crossings == 1);
    CHECK(crossing_um < 3.0);
    CHECK(crossing_um > 0.5);
  }

  SUBCASE("points inside r_min are skipped and reported") {
    ctx.config.scan->start_um = 0.0;  // first grid points violate r_min
    cmd_survival_curve(ctx);
    const json summary =
        json::parse(read_file(ctx.out_dir / "survival_summary.json"));
    CHECK(summary["skipped_points"].size() == 1);  // the 0.0 point
  }

  SUBCASE("tabulated field reproduces the analytic curve") {
    // tabulate the analytic law on a fine grid and run the same scan
    AnalyticEvanescentModel m;
    m.power = 1.0;  // normalized intensity is per watt
    m.decay_length = 743e-9;
    m.r_min = 50e-9;
    std::ostringstream mode;
    mode << "y_nm,z_nm,intensity_per_W\n";
    for (int i = 0; i <= 100; ++i) {
      const double y = 0.1e-6 + i * 0.05e-6;
      for (double z_nm : {-100.0, 0.0, 100.0}) {
        mode << csv::format_double(y / units::nm) << "," << z_nm << ","
             << csv::format_double(intensity_analytic(m, y)) << "\n";
      }
    }
    write_file(dir / "mode.csv", mode.str());

    cmd_survival_curve(ctx);
    const auto analytic = csv::read_file(ctx.out_dir / "survival_vs_position.csv");

    ctx.config.field->model = "tabulated";
    ctx.config.field->mode_file = "mode.csv";
    ctx.out_dir = dir / "out_tab";
    cmd_survival_curve(ctx);
    const auto tabulated = csv::read_file(ctx.out_dir / "survival_vs_position.csv");

    REQUIRE(tabulated.row_count() == analytic.row_count());
    const auto cs = analytic.column("survival");
    for (std::size_t i = 0; i < analytic.row_count(); ++i) {
      CHECK(std::abs(tabulated.number(i, cs) - analytic.number(i, cs)) < 0.02);
    }
  }

  SUBCASE("halving the step leaves shared grid values unchanged") {
    cmd_survival_curve(ctx);
    const auto coarse = csv::read_file(ctx.out_dir / "survival_vs_position.csv");
    ctx.config.scan->step_um = 0.1;
    ctx.out_dir = dir / "out_fine";
    cmd_survival_curve(ctx);
    const auto fine = csv::read_file(ctx.out_dir / "survival_vs_position.csv");
    const auto cs = coarse.column("survival");
    for (std::size_t i = 0; i < coarse.row_count(); ++i) {
      CHECK(coarse.number(i, cs) == fine.number(2 * i, cs));
    }
  }
}

TEST_CASE("scan command with tilt summary") {
  const auto dir = fresh_dir("scan");
  write_file(dir / "geometry.csv",
             "# tilt_deg=0.5\n"
             "name,cx_um,cy_um,width_um,length_um,thickness_um\n"
             "waveguide,0,0,0.18,400,0.2\n");
  write_file(dir / "run.json", R"({
  "geometry": {"file": "geometry.csv"},
  "array": {"rows": 8, "cols": 1, "pitch_um": 5.0, "waist_um": 1.2},
  "scan": {"start_um": -3.0, "stop_um": 3.0, "step_um": 0.15, "shots": 500, "seed": 42},
  "loading": {"fill_probability": 1.0, "transport_survival": 1.0},
  "output_dir": "out"
})");

  CommandContext ctx;
  ctx.config = RunConfig::from_file(dir / "run.json");
  ctx.out_dir = dir / "out";
  cmd_scan_map(ctx);

  const json summary = json::parse(read_file(ctx.out_dir / "scan_summary.json"));
  CHECK(summary["with_light"] == false);
  const double tilt_deg = summary["tilt"]["tilt_deg"].get<double>();
  CHECK(tilt_deg == doctest::Approx(0.5).epsilon(0.10));

  SUBCASE("resolved config reproduces the run byte for byte") {
    const std::string map1 = read_file(ctx.out_dir / "scan_map.csv");
    CommandContext ctx2;
    ctx2.config = RunConfig::from_file(ctx.out_dir / "resolved_config.json");
    ctx2.out_dir = dir / "out2";
    cmd_scan_map(ctx2);
    CHECK(read_file(ctx2.out_dir / "scan_map.csv") == map1);
    CHECK(read_file(ctx2.out_dir / "resolved_config.json") ==
          read_file(ctx.out_dir / "resolved_config.json"));
  }

  SUBCASE("no structure: map is fill x transport everywhere") {
    write_file(dir / "empty.csv",
               "name,cx_um,cy_um,width_um,length_um,thickness_um\n");
    ctx.config.geometry_file = "empty.csv";
    ctx.config.loading.fill_probability = 0.5;
    ctx.config.loading.transport_survival = 0.92;
    ctx.config.scan->shots = 30000;
    ctx.config.array->rows = 1;
    ctx.out_dir = dir / "out_empty";
    cmd_scan_map(ctx);
    const auto map = SurvivalMap::read_csv(ctx.out_dir / "scan_map.csv");
    const double expect = 0.5 * 0.92;
    const double sigma = std::sqrt(expect * (1 - expect) / 30000.0);
    for (double s : map.survival) CHECK(std::abs(s - expect) < 4.0 * sigma);
    const json sum2 = json::parse(read_file(ctx.out_dir / "scan_summary.json"));
    CHECK(sum2.contains("tilt_warning") == false);  // 1 row -> no tilt at all
    CHECK(sum2.contains("tilt") == false);
  }
}

TEST_CASE("fit command round trips") {
  const auto dir = fresh_dir("fit");

  SUBCASE("decay kind") {
    // forward-generate the analytic law, fit it back
    AnalyticEvanescentModel m;
    m.power = 1e-9;
    m.decay_length = 743.2e-9;
    m.r_min = 10e-9;
    std::ostringstream data;
    data << "r_um,intensity_W_m2\n";
    for (int i = 0; i < 50; ++i) {
      const double r = 0.2e-6 + (5.0e-6 - 0.2e-6) * i / 49.0;
      data << csv::format_double(r / units::um) << ","
           << csv::format_double(intensity_analytic(m, r)) << "\n";
    }
    write_file(dir / "decay.csv", data.str());
    write_file(dir / "run.json", R"({
  "field": {"model": "analytic", "power_pW": 1000.0, "decay_length_nm": 700.0},
  "fit": {"kind": "decay"},
  "output_dir": "out"
})");
    CommandContext ctx;
    ctx.config = RunConfig::from_file(dir / "run.json");
    ctx.out_dir = dir / "out";
    cmd_fit(ctx, dir / "decay.csv");
    const json result = json::parse(read_file(ctx.out_dir / "fit_result.json"));
    CHECK(result["converged"] == true);
    CHECK(result["rho_nm"].get<double>() == doctest::Approx(743.2).epsilon(1e-3));
  }

  SUBCASE("temperature kind") {
    const auto constants = PhysicalConstants::cesium_d2();
    const TrapSpec trap;
    std::vector<double> times;
    for (double us :
         {0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0, 40.0, 50.0, 70.0, 100.0}) {
      times.push_back(us * 1e-6);
    }
    const auto curve =
        release_recapture_simulate(40e-6, trap, constants, times, 10000, 404);
    std::ostringstream data;
    data << "release_time_us,survival,samples\n";
    for (std::size_t i = 0; i < times.size(); ++i) {
      data << csv::format_double(times[i] / units::us) << ","
           << csv::format_double(curve.survival[i]) << ",10000\n";
    }
    write_file(dir / "rr.csv", data.str());
    write_file(dir / "run.json", R"({
  "fit": {"kind": "temperature", "inner_samples": 10000, "bootstrap": 8, "seed": 11},
  "output_dir": "out"
})");
    CommandContext ctx;
    ctx.config = RunConfig::from_file(dir / "run.json");
    ctx.out_dir = dir / "out_temp";
    cmd_fit(ctx, dir / "rr.csv");
    const json result = json::parse(read_file(ctx.out_dir / "fit_result.json"));
    CHECK(result["temperature_uK"].get<double>() ==
          doctest::Approx(40.0).epsilon(0.15));
  }

  SUBCASE("empty input is a parse error") {
    write_file(dir / "empty.csv", "");
    write_file(dir / "run.json", R"({
  "field": {"model": "analytic"},
  "fit": {"kind": "decay"},
  "output_dir": "out"
})");
    CommandContext ctx;
    ctx.config = RunConfig::from_file(dir / "run.json");
    ctx.out_dir = dir / "out_err";
    CHECK_THROWS_AS(cmd_fit(ctx, dir / "empty.csv"), ParseError);
  }
}

TEST_CASE("CLI binary exit codes") {
  const auto dir = fresh_dir("exit");

  SUBCASE("success is 0") {
    write_file(dir / "run.json", base_config_json());
    CHECK(run_cli("fc-matrix --config " + (dir / "run.json").string() +
                  " --out " + (dir / "out").string()) == 0);
  }

  SUBCASE("config errors are 2") {
    write_file(dir / "bad.json", "{broken");
    CHECK(run_cli("fc-matrix --config " + (dir / "bad.json").string()) == 2);
    write_file(dir / "unknown.json", R"({"trap": {"wat": 1}})");
    CHECK(run_cli("survival --config " + (dir / "unknown.json").string()) == 2);
    CHECK(run_cli("fit --config " + (dir / "unknown.json").string() +
                  " --input nope.csv") == 2);
  }

  SUBCASE("non-convergence is 3") {
    // one Gauss-Newton iteration cannot finish from a cold start
    AnalyticEvanescentModel m;
    m.power = 1e-9;
    m.decay_length = 743.2e-9;
    m.r_min = 10e-9;
    std::ostringstream data;
    data << "r_um,intensity_W_m2\n";
    for (int i = 0; i < 20; ++i) {
      const double r = 0.2e-6 + i * 0.2e-6;
      // mild curvature mismatch so the slope seed is off
      data << csv::format_double(r / units::um) << ","
           << csv::format_double(intensity_analytic(m, r) * (1.0 + 0.3 * (i % 2)))
           << "\n";
    }
    write_file(dir / "decay.csv", data.str());
    write_file(dir / "hard.json", R"({
  "field": {"model": "analytic", "power_pW": 1000.0},
  "fit": {"kind": "decay", "max_iterations": 0},
  "output_dir": "out"
})");
    CHECK(run_cli("fit --config " + (dir / "hard.json").string() + " --input " +
                  (dir / "decay.csv").string()) == 3);
  }

  SUBCASE("ATOMSCOPE_WORKERS env var caps workers without changing results") {
    write_file(dir / "run.json", base_config_json());
    const std::string cmd = "ATOMSCOPE_WORKERS=3 " +
                            std::string(ATOMSCOPE_CLI_PATH) +
                            " fc-matrix --config " + (dir / "run.json").string() +
                            " --out " + (dir / "env_out").string() +
                            " >/dev/null 2>&1";
    REQUIRE(WEXITSTATUS(std::system(cmd.c_str())) == 0);
    REQUIRE(run_cli("fc-matrix --config " + (dir / "run.json").string() +
                    " --out " + (dir / "flag_out").string() + " --workers 1") == 0);
    CHECK(read_file(dir / "env_out" / "fc_matrix.csv") ==
          read_file(dir / "flag_out" / "fc_matrix.csv"));
  }

  SUBCASE("deterministic outputs across repeated runs and workers") {
    write_file(dir / "geometry.csv",
               "# tilt_deg=0.3\n"
               "name,cx_um,cy_um,width_um,length_um,thickness_um\n"
               "waveguide,0,0,0.18,400,0.2\n");
    write_file(dir / "scan.json", R"({
  "geometry": {"file": "geometry.csv"},
  "array": {"rows": 2, "cols": 1, "pitch_um": 5.0},
  "scan": {"start_um": -2.0, "stop_um": 2.0, "step_um": 0.25, "shots": 200, "seed": 5},
  "output_dir": "out"
})");
    REQUIRE(run_cli("scan --config " + (dir / "scan.json").string() +
                    " --workers 1 --out " + (dir / "w1").string()) == 0);
    REQUIRE(run_cli("scan --config " + (dir / "scan.json").string() +
                    " --workers 4 --out " + (dir / "w4").string()) == 0);
    CHECK(read_file(dir / "w1" / "scan_map.csv") ==
          read_file(dir / "w4" / "scan_map.csv"));
    CHECK(read_file(dir / "w1" / "scan_summary.json") ==
          read_file(dir / "w4" / "scan_summary.json"));
  }
}
