#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "atomscope/commands.hpp"
#include "atomscope/errors.hpp"

// Batch front end. Exit status: 0 success, 2 config/parse error,
// 3 numeric non-convergence.

namespace {

struct CliOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  int workers = 0;
  std::optional<std::string> out_dir;
  std::string fit_input;
};

atomscope::CommandContext make_context(const CliOptions& opt) {
  atomscope::CommandContext ctx;
  ctx.config = atomscope::RunConfig::from_file(opt.config_path);
  if (opt.seed) {
    if (ctx.config.scan) ctx.config.scan->seed = *opt.seed;
    if (ctx.config.fit) ctx.config.fit->seed = *opt.seed;
  }
  ctx.workers = opt.workers;
  ctx.out_dir = opt.out_dir ? std::filesystem::path(*opt.out_dir)
                            : ctx.config.resolve_path(ctx.config.output_dir);
  return ctx;
}

int run(int argc, char** argv) {
  CLI::App app{"Scanning-atom-microscope simulation and inference toolkit"};
  app.require_subcommand(1);

  CliOptions opt;
  if (const char* env = std::getenv("ATOMSCOPE_WORKERS")) {
    opt.workers = std::atoi(env);
  }

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", opt.config_path, "run configuration (JSON)")
        ->required();
    sub->add_option("--seed", opt.seed, "override the configured random seed");
    sub->add_option("--workers", opt.workers,
                    "cap worker threads (results are identical for any count)");
    sub->add_option("--out", opt.out_dir, "output directory");
  };

  auto* fc = app.add_subcommand("fc-matrix", "Franck-Condon matrix and deficits");
  add_common(fc);
  auto* survival =
      app.add_subcommand("survival", "survival-vs-position model curve");
  add_common(survival);
  auto* scan = app.add_subcommand("scan", "Monte Carlo scanning-microscope map");
  add_common(scan);
  auto* fit = app.add_subcommand("fit", "parameter fit on an input CSV");
  add_common(fit);
  fit->add_option("--input", opt.fit_input, "input data CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    const auto ctx = make_context(opt);
    if (fc->parsed()) {
      atomscope::cmd_fc_matrix(ctx);
    } else if (survival->parsed()) {
      atomscope::cmd_survival_curve(ctx);
    } else if (scan->parsed()) {
      atomscope::cmd_scan_map(ctx);
    } else if (fit->parsed()) {
      atomscope::cmd_fit(ctx, opt.fit_input);
    }
    return 0;
  } catch (const atomscope::NonConvergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const atomscope::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) { return run(argc, argv); }
