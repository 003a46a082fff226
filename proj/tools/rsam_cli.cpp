// rsam_cli: experiment runner.
//
//   rsam_cli run --config cfg.json --out dir [--seed N]
//   rsam_cli compare-epsilon --config cfg.json --out dir [--seed N]
//   rsam_cli spectrum --config cfg.json --checkpoint dir/checkpoint.bin --out dir
//
// Exit codes: 0 success, 2 configuration error, 3 numeric failure, 1 other.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "rsam/config.hpp"
#include "rsam/errors.hpp"
#include "rsam/experiment.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitOther = 1;
constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;

struct Args {
  std::string config;
  std::string out = ".";
  std::string checkpoint;
  std::optional<std::uint64_t> seed;
};

rsam::ExperimentConfig load(const Args& a) {
  rsam::ExperimentConfig cfg = rsam::load_config(a.config);
  if (a.seed) cfg.seed = *a.seed;
  return cfg;
}

std::string fmt_opt(const std::optional<double>& v) {
  return v ? rsam::format_double(*v) : std::string("n/a");
}

int cmd_run(const Args& a) {
  const auto out = rsam::run_experiment(load(a), a.out, std::cerr);
  const auto& s = out.summary;
  std::cout << "final_loss=" << rsam::format_double(s.final_loss)
            << " final_ortho_residual=" << fmt_opt(s.final_ortho_residual)
            << " total_wall_ms=" << rsam::format_double(s.total_wall_ms) << " steps=" << s.steps
            << "\n";
  return kExitOk;
}

int cmd_compare(const Args& a) {
  const auto rows = rsam::compare_epsilon(load(a), a.out, std::cerr);
  for (const auto& r : rows) {
    std::cout << "St(" << r.n << "," << r.p << ") approx "
              << rsam::format_double(r.approx_ms_mean) << " ms/step";
    if (r.exact_available) {
      std::cout << ", exact " << rsam::format_double(r.exact_ms_mean) << " ms/step, ratio "
                << rsam::format_double(r.exact_ms_mean / r.approx_ms_mean);
    } else {
      std::cout << ", exact unavailable";
    }
    std::cout << "\n";
  }
  return kExitOk;
}

int cmd_spectrum(const Args& a) {
  const auto res = rsam::run_spectrum(load(a), a.checkpoint, a.out, std::cerr);
  std::cout << "max_eig=" << rsam::format_double(res.max_eig)
            << (res.truncated ? " (truncated)" : "") << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Riemannian sharpness-aware minimization experiments"};
  app.require_subcommand(1);
  Args args;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", args.config, "experiment JSON")->required();
    sub->add_option("--out", args.out, "output directory");
    sub->add_option("--seed", args.seed, "overrides the config seed");
  };
  CLI::App* run = app.add_subcommand("run", "train and write metrics.csv / summary.json");
  add_common(run);
  CLI::App* compare =
      app.add_subcommand("compare-epsilon", "exact vs approximate ascent step timing");
  add_common(compare);
  CLI::App* spectrum = app.add_subcommand("spectrum", "Lanczos Hessian spectrum of a checkpoint");
  add_common(spectrum);
  spectrum->add_option("--checkpoint", args.checkpoint, "checkpoint.bin written by run")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*run) return cmd_run(args);
    if (*compare) return cmd_compare(args);
    if (*spectrum) return cmd_spectrum(args);
  } catch (const rsam::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const rsam::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const rsam::RankError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitOther;
  }
  return kExitOther;
}
