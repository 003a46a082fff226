#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "rsam/models.hpp"
#include "rsam/optim.hpp"
#include "rsam/sharpness.hpp"

namespace rsam {

enum class ExperimentKind { MnistAblation, SupconToy, Quadratic };

std::string_view to_string(ExperimentKind k);

enum class LrSchedule { Constant, Cosine };

struct ModelConfig {
  double beta = 0.1;
  double lambda = 0.0;
  double tau = 0.1;
  std::size_t code_dim = 10;
  ReconstructionMean reconstruction = ReconstructionMean::PerElement;

  bool operator==(const ModelConfig&) const = default;
};

struct SyntheticDataConfig {
  std::size_t classes = 10;
  std::size_t per_class = 500;
  std::size_t feature_dim = 784;
  double separation = 4.0;

  bool operator==(const SyntheticDataConfig&) const = default;
};

struct DataConfig {
  std::string images_path;  // empty: look in $RSAM_DATA_DIR
  std::string labels_path;
  SyntheticDataConfig synthetic;
  std::size_t probe_size = 256;   // held-out rows for sharpness / spectrum
  std::size_t max_samples = 0;    // 0: keep every row

  bool operator==(const DataConfig&) const = default;
};

struct DiagnosticsConfig {
  std::size_t eval_every = 0;  // optimizer steps between records; 0: once per epoch
  bool sharpness = true;
  SharpnessMode sharpness_mode = SharpnessMode::FirstOrder;
  double sharpness_rho = 0.0;  // 0: use the optimizer's rho
  std::size_t sharpness_probes = 16;
  bool track_max_eig = false;
  SpectrumConfig spectrum;
  bool save_checkpoint = false;
  bool record_wall_time = false;  // wall_ms column; off keeps metrics.csv reproducible

  bool operator==(const DiagnosticsConfig& o) const;
};

struct CompareConfig {
  std::vector<std::pair<std::size_t, std::size_t>> dims{{20, 5}, {2, 1}};  // (n, p)
  std::size_t steps = 50;
  std::size_t per_class = 40;

  bool operator==(const CompareConfig&) const = default;
};

struct QuadraticConfig {
  std::size_t dim = 10;  // Hessian diag(1, 2, …, dim)
  std::size_t steps_per_epoch = 10;

  bool operator==(const QuadraticConfig&) const = default;
};

struct ExperimentConfig {
  ExperimentKind experiment = ExperimentKind::MnistAblation;
  std::uint64_t seed = 0;
  std::size_t epochs = 50;
  std::size_t batch_size = 16;
  OptimizerConfig optimizer;
  LrSchedule schedule = LrSchedule::Constant;
  ModelConfig model;
  DataConfig data;
  DiagnosticsConfig diagnostics;
  CompareConfig compare;
  QuadraticConfig quadratic;

  bool operator==(const ExperimentConfig& o) const;
};

/// Parses a JSON document; unknown keys, wrong types and violated invariants
/// raise ConfigError.
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::filesystem::path& path);
std::string serialize_config(const ExperimentConfig& cfg);

/// Cross-field checks (λ = 0 for manifold strategies, batch size, ...).
void validate_config(const ExperimentConfig& cfg);

}  // namespace rsam
