#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "rsam/config.hpp"
#include "rsam/data.hpp"
#include "rsam/optim.hpp"
#include "rsam/sharpness.hpp"

namespace rsam {

/// Everything a run needs: initial parameters, the oracle, training rows and
/// a held-out probe batch for diagnostics.
struct Problem {
  std::vector<ParamGroup> groups;
  GradOracle oracle;
  Dataset train;
  Batch probe;
  BatchPlan plan;
  /// Quadratic toy only: fixed number of (data-free) steps per epoch.
  std::size_t fixed_steps_per_epoch = 0;
  /// ‖WᵀW − I‖_F of the constrained parameter, if the model has one.
  std::function<std::optional<double>(const std::vector<ParamGroup>&)> ortho_residual;
  /// Objective over the whole training set (probe batch for SupCon).
  std::function<double(const std::vector<ParamGroup>&)> eval_loss;
};

/// Builds the experiment's model and data. Missing MNIST files fall back to
/// synthetic clusters with a warning on `log`.
Problem build_problem(const ExperimentConfig& cfg, std::ostream& log);

struct MetricsRecord {
  std::size_t step = 0;
  std::size_t epoch = 0;
  double loss = 0.0;
  std::optional<double> sharpness;
  std::optional<double> ortho_residual;
  std::optional<double> max_eig;
  std::optional<double> wall_ms;
};

inline constexpr const char* kMetricsHeader =
    "step,epoch,loss,sharpness,ortho_residual,max_eig,wall_ms";

/// 17 significant digits, "." decimal, independent of the locale.
std::string format_double(double v);
std::string format_record(const MetricsRecord& r);
void write_metrics_csv(const std::filesystem::path& path,
                       const std::vector<MetricsRecord>& records);

struct EpochTiming {
  std::size_t epoch = 0;
  double mean_step_ms = 0.0;
  double std_step_ms = 0.0;
};

struct RunSummary {
  std::string experiment;
  std::string strategy;
  std::string data_source;
  std::size_t steps = 0;
  std::size_t epochs = 0;
  double final_loss = 0.0;              // eval_loss at the final parameters
  std::optional<double> final_ortho_residual;
  std::optional<double> max_ortho_residual;  // over every optimizer step
  std::size_t degenerate_steps = 0;
  double total_wall_ms = 0.0;
  std::vector<EpochTiming> timing;
};

struct RunOutcome {
  std::vector<MetricsRecord> records;
  RunSummary summary;
  std::vector<ParamGroup> groups;  // final parameters
};

/// Trains per `cfg`, writing metrics.csv, summary.json and (if requested)
/// checkpoint.bin / checkpoint.meta.json into `out_dir`. A NumericError or
/// RankError mid-run is rethrown as NumericError carrying the last good
/// step, after the records so far have been written.
RunOutcome run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out_dir,
                          std::ostream& log);

struct CompareRow {
  std::size_t n = 0;
  std::size_t p = 0;
  double approx_ms_mean = 0.0;
  double approx_ms_std = 0.0;
  double approx_final_loss = 0.0;
  bool exact_available = false;
  double exact_ms_mean = 0.0;
  double exact_ms_std = 0.0;
  double exact_final_loss = 0.0;
};

/// RSAM-exact vs RSAM-approx on the autoencoder at each (n, p) of
/// cfg.compare.dims; writes compare_epsilon.csv. Rows beyond the exact
/// solver's capacity are marked unavailable.
std::vector<CompareRow> compare_epsilon(const ExperimentConfig& cfg,
                                        const std::filesystem::path& out_dir, std::ostream& log);

/// Loads a checkpoint into the configured model and runs Lanczos on the probe
/// batch; writes spectrum.csv and summary.json.
SpectrumResult run_spectrum(const ExperimentConfig& cfg, const std::filesystem::path& checkpoint,
                            const std::filesystem::path& out_dir, std::ostream& log);

}  // namespace rsam
