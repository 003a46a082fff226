#include <gtest/gtest.h>

#include "rsam/config.hpp"
#include "rsam/errors.hpp"

namespace rsam {
namespace {

TEST(Config, EmptyDocumentGivesDefaults) {
  const ExperimentConfig cfg = parse_config("{}");
  EXPECT_EQ(cfg, ExperimentConfig{});
  EXPECT_EQ(cfg.batch_size, 16u);
  EXPECT_EQ(cfg.optimizer.lr, 0.1);
  EXPECT_EQ(cfg.optimizer.rho, 0.3);
  EXPECT_EQ(cfg.model.beta, 0.1);
  EXPECT_EQ(cfg.epochs, 50u);
}

TEST(Config, ParsesNestedSections) {
  const ExperimentConfig cfg = parse_config(R"({
    "experiment": "supcon-toy", "seed": 9, "epochs": 3, "batch_size": 8,
    "optimizer": {"strategy": "sam", "lr": 0.05, "rho": 0.1, "metric": "diag-abs",
                  "schedule": "cosine"},
    "model": {"beta": 0.2, "lambda": 0.1, "tau": 0.5, "code_dim": 4,
              "reconstruction": "per-sample"},
    "data": {"probe_size": 32, "synthetic": {"classes": 4, "per_class": 10,
                                             "feature_dim": 12, "separation": 2.5}},
    "diagnostics": {"eval_every": 5, "sharpness": {"mode": "random-probe", "probes": 4},
                    "spectrum": {"track": true, "lanczos_iters": 6, "seed": 3}},
    "compare": {"dims": [[6, 2], [3, 1]], "steps": 7},
    "quadratic": {"dim": 5}
  })");
  EXPECT_EQ(cfg.experiment, ExperimentKind::SupconToy);
  EXPECT_EQ(cfg.seed, 9u);
  EXPECT_EQ(cfg.optimizer.strategy, Strategy::SAM);
  EXPECT_EQ(cfg.optimizer.metric, MetricKind::DiagAbs);
  EXPECT_EQ(cfg.schedule, LrSchedule::Cosine);
  EXPECT_EQ(cfg.model.reconstruction, ReconstructionMean::PerSample);
  EXPECT_EQ(cfg.data.synthetic.feature_dim, 12u);
  EXPECT_EQ(cfg.diagnostics.sharpness_mode, SharpnessMode::RandomProbe);
  EXPECT_TRUE(cfg.diagnostics.track_max_eig);
  EXPECT_EQ(cfg.diagnostics.spectrum.lanczos_iters, 6u);
  ASSERT_EQ(cfg.compare.dims.size(), 2u);
  EXPECT_EQ(cfg.compare.dims[1], (std::pair<std::size_t, std::size_t>{3, 1}));
  EXPECT_EQ(cfg.quadratic.dim, 5u);
}

TEST(Config, RoundTripIsIdentity) {
  ExperimentConfig cfg;
  cfg.experiment = ExperimentKind::Quadratic;
  cfg.seed = 123456789012345ull;
  cfg.optimizer = {Strategy::SGD, 0.0123456789, 0.7, 0.9, MetricKind::DiagAbs};
  cfg.model.lambda = 1.0 / 3.0;
  cfg.data.images_path = "/tmp/a b/images";
  cfg.diagnostics.sharpness_rho = 0.05;
  cfg.diagnostics.spectrum.fd_step = 1e-5;
  cfg.compare.dims = {{40, 3}};
  const ExperimentConfig once = parse_config(serialize_config(cfg));
  EXPECT_EQ(once, cfg);
  EXPECT_EQ(serialize_config(once), serialize_config(cfg));
  EXPECT_EQ(parse_config(serialize_config(ExperimentConfig{})), ExperimentConfig{});
}

TEST(Config, UnknownKeysAreRejected) {
  EXPECT_THROW(parse_config(R"({"epoch": 3})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"optimizer": {"learning_rate": 0.1}})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"data": {"synthetic": {"noise": 1}}})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"diagnostics": {"spectrum": {"iters": 3}}})"), ConfigError);
}

TEST(Config, TypeAndValueErrors) {
  EXPECT_THROW(parse_config("{"), ConfigError);
  EXPECT_THROW(parse_config("[]"), ConfigError);
  EXPECT_THROW(parse_config(R"({"epochs": -1})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"epochs": "3"})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"optimizer": {"strategy": "adam"}})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"optimizer": {"lr": 0}})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"optimizer": {"strategy": "sam", "rho": 0}})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"batch_size": 0})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"compare": {"dims": [[2, 3]]}})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"experiment": "cifar"})"), ConfigError);
}

TEST(Config, PenaltyForbiddenForManifoldStrategies) {
  for (const char* s : {"rsgd", "rsam-approx", "rsam-exact"}) {
    const std::string doc = std::string(R"({"optimizer": {"strategy": ")") + s +
                            R"("}, "model": {"lambda": 0.1}})";
    EXPECT_THROW(parse_config(doc), ConfigError) << s;
  }
  EXPECT_NO_THROW(parse_config(R"({"optimizer": {"strategy": "sam"}, "model": {"lambda": 0.1}})"));
}

TEST(Config, MomentumOnlyForSgd) {
  EXPECT_THROW(parse_config(R"({"optimizer": {"strategy": "sam", "momentum": 0.9}})"),
               ConfigError);
  EXPECT_NO_THROW(parse_config(R"({"optimizer": {"strategy": "sgd", "momentum": 0.9}})"));
}

}  // namespace
}  // namespace rsam
