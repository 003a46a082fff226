#include "rsam/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <ostream>

#include "json.hpp"
#include "rsam/checkpoint.hpp"
#include "rsam/errors.hpp"
#include "rsam/models.hpp"

namespace rsam {
namespace {

using Clock = std::chrono::steady_clock;
using nlohmann::json;

constexpr std::size_t kEvalChunk = 4096;
constexpr std::uint64_t kProbeSplitSalt = 0x70726f6265ull;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

MeanStd mean_std(const std::vector<double>& xs) {
  if (xs.empty()) return {};
  double m = 0.0;
  for (double x : xs) m += x;
  m /= static_cast<double>(xs.size());
  double v = 0.0;
  for (double x : xs) v += (x - m) * (x - m);
  return {m, std::sqrt(v / static_cast<double>(xs.size()))};
}

bool file_exists(const std::filesystem::path& p) {
  std::error_code ec;
  return std::filesystem::is_regular_file(p, ec);
}

Dataset load_data(const ExperimentConfig& cfg, std::ostream& log) {
  std::filesystem::path images = cfg.data.images_path;
  std::filesystem::path labels = cfg.data.labels_path;
  if (images.empty() || labels.empty()) {
    if (const char* dir = std::getenv("RSAM_DATA_DIR"); dir && *dir) {
      if (images.empty()) images = std::filesystem::path(dir) / "train-images-idx3-ubyte";
      if (labels.empty()) labels = std::filesystem::path(dir) / "train-labels-idx1-ubyte";
    }
  }
  Dataset d;
  if (!images.empty() && file_exists(images) && file_exists(labels)) {
    d = load_mnist(images, labels);
  } else {
    const auto& s = cfg.data.synthetic;
    log << "warning: MNIST files not found"
        << (images.empty() ? std::string() : " (" + images.string() + ")")
        << "; using synthetic clusters (" << s.classes << " classes x " << s.per_class
        << ", dim " << s.feature_dim << ")\n";
    d = synthetic_clusters(s.classes, s.per_class, s.feature_dim, s.separation, cfg.seed);
  }
  if (cfg.data.max_samples > 0 && cfg.data.max_samples < d.size()) {
    std::vector<std::size_t> keep(cfg.data.max_samples);
    for (std::size_t i = 0; i < keep.size(); ++i) keep[i] = i;
    const std::string source = d.source;
    d = subset(d, keep);
    d.source = source;
  }
  return d;
}

// Seeded split into (train, held-out probe rows).
std::pair<Dataset, Dataset> split_probe(const Dataset& d, std::size_t probe_size,
                                        std::uint64_t seed) {
  if (probe_size == 0 || probe_size >= d.size()) {
    throw ConfigError("data.probe_size must lie in [1, " + std::to_string(d.size()) + ")");
  }
  const auto perm = epoch_permutation(d.size(), seed ^ kProbeSplitSalt, 0);
  std::vector<std::size_t> probe(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(probe_size));
  std::vector<std::size_t> train(perm.begin() + static_cast<std::ptrdiff_t>(probe_size), perm.end());
  std::sort(probe.begin(), probe.end());
  std::sort(train.begin(), train.end());
  return {subset(d, train), subset(d, probe)};
}

ManifoldKind geometry_for(Strategy s, std::size_t n, std::size_t p) {
  return is_riemannian(s) ? ManifoldKind::stiefel(n, p) : ManifoldKind::euclidean(n, p);
}

void add_penalty(double lambda, const Matrix& w, double& loss, Matrix& grad) {
  if (lambda == 0.0) return;
  const Matrix g = sub(matmul_tn(w, w), Matrix::identity(w.cols()));
  loss += lambda * dot_flat(g, g);
  axpy(4.0 * lambda, matmul(w, g), grad);
}

Problem autoencoder_problem(const ExperimentConfig& cfg, std::ostream& log) {
  Dataset all = load_data(cfg, log);
  if (cfg.model.code_dim != all.num_classes) {
    throw ConfigError("model.code_dim (" + std::to_string(cfg.model.code_dim) +
                      ") must equal the number of classes (" +
                      std::to_string(all.num_classes) + ")");
  }
  auto [train, probe] = split_probe(all, cfg.data.probe_size, cfg.seed);

  Problem pr;
  const std::size_t n = train.x.cols();
  const std::size_t p = cfg.model.code_dim;
  const Point init = random_point(ManifoldKind::stiefel(n, p), cfg.seed);
  pr.groups.push_back(
      {"W", make_point(geometry_for(cfg.optimizer.strategy, n, p), init.value),
       cfg.optimizer, std::nullopt});

  const AutoencoderLossConfig ae{cfg.model.beta, cfg.model.lambda, cfg.model.reconstruction};
  pr.oracle = [ae](const ParamMap& params, const Batch& batch) {
    LossAndGrad lg = ae_loss_and_grad(params.at("W"), batch, ae);
    OracleResult r;
    r.loss = lg.loss;
    r.grads.emplace("W", std::move(lg.grad));
    return r;
  };
  pr.ortho_residual = [](const std::vector<ParamGroup>& gs) -> std::optional<double> {
    return orthonormality_error(gs.front().point.value);
  };
  pr.probe = as_batch(probe);
  pr.plan = {cfg.batch_size, cfg.seed, false, 0.01};
  auto shared_train = std::make_shared<const Dataset>(std::move(train));
  pr.train = *shared_train;
  pr.eval_loss = [ae, shared_train](const std::vector<ParamGroup>& gs) {
    const Matrix& w = gs.front().point.value;
    const Dataset& d = *shared_train;
    double total = 0.0;
    for (std::size_t start = 0; start < d.size(); start += kEvalChunk) {
      const std::size_t len = std::min(kEvalChunk, d.size() - start);
      std::vector<std::size_t> idx(len);
      for (std::size_t i = 0; i < len; ++i) idx[i] = start + i;
      total += static_cast<double>(len) * ae_loss_terms(w, as_batch(subset(d, idx)), ae).total();
    }
    return total / static_cast<double>(d.size());
  };
  return pr;
}

Problem supcon_problem(const ExperimentConfig& cfg, std::ostream& log) {
  Dataset all = load_data(cfg, log);
  auto [train, probe] = split_probe(all, cfg.data.probe_size, cfg.seed);
  const std::size_t n = train.x.cols();
  const std::size_t p = cfg.model.code_dim;
  if (p > n) throw ConfigError("model.code_dim must not exceed the feature dimension");

  Problem pr;
  const Point init = random_point(ManifoldKind::stiefel(n, p), cfg.seed);
  pr.groups.push_back({"U", make_point(geometry_for(cfg.optimizer.strategy, n, p), init.value),
                       cfg.optimizer, std::nullopt});
  pr.groups.push_back({"log_scale", make_point(ManifoldKind::euclidean(p, 1), Matrix(p, 1)),
                       cfg.optimizer, std::nullopt});

  const double tau = cfg.model.tau;
  const double lambda = cfg.model.lambda;
  pr.oracle = [tau, lambda](const ParamMap& params, const Batch& batch) {
    RStiefelHead head{params.at("U"), {}, tau};
    const Matrix& s = params.at("log_scale");
    head.log_scale.assign(s.flat().begin(), s.flat().end());
    SupConLossAndGrad r = supcon_loss_and_grad(head, batch.x, batch.y, batch.pairing);
    OracleResult out;
    out.loss = r.loss;
    add_penalty(lambda, head.u, out.loss, r.grad_u);
    out.grads.emplace("U", std::move(r.grad_u));
    out.grads.emplace("log_scale", Matrix(r.grad_log_scale.size(), 1, r.grad_log_scale));
    if (!std::isfinite(out.loss)) throw NumericError("supcon: non-finite loss");
    return out;
  };
  pr.ortho_residual = [](const std::vector<ParamGroup>& gs) -> std::optional<double> {
    return orthonormality_error(gs.front().point.value);
  };
  pr.plan = {cfg.batch_size, cfg.seed, true, 0.01};
  BatchPlan probe_plan{probe.size(), cfg.seed ^ kProbeSplitSalt, true, 0.01};
  pr.probe = batches(probe, probe_plan, 0).front();
  pr.train = std::move(train);
  auto oracle = pr.oracle;
  auto probe_batch = std::make_shared<const Batch>(pr.probe);
  pr.eval_loss = [oracle, probe_batch](const std::vector<ParamGroup>& gs) {
    return oracle(snapshot(gs), *probe_batch).loss;
  };
  return pr;
}

// L(θ) = ½ Σ_i λ_i (θ_i − 1)², λ_i = i + 1. The Hessian is diag(1, …, dim).
Problem quadratic_problem(const ExperimentConfig& cfg) {
  const std::size_t dim = cfg.quadratic.dim;
  if (cfg.optimizer.strategy == Strategy::RSAMExact && dim > kTangentBasisCapacity) {
    throw ConfigError("quadratic.dim exceeds the exact solver's capacity");
  }
  Problem pr;
  pr.groups.push_back({"theta", random_point(ManifoldKind::euclidean(dim, 1), cfg.seed),
                       cfg.optimizer, std::nullopt});
  pr.oracle = [dim](const ParamMap& params, const Batch&) {
    const Matrix& t = params.at("theta");
    OracleResult r;
    Matrix g(dim, 1);
    for (std::size_t i = 0; i < dim; ++i) {
      const double lam = static_cast<double>(i + 1);
      const double d = t(i, 0) - 1.0;
      r.loss += 0.5 * lam * d * d;
      g(i, 0) = lam * d;
    }
    r.grads.emplace("theta", std::move(g));
    return r;
  };
  pr.ortho_residual = [](const std::vector<ParamGroup>&) -> std::optional<double> {
    return std::nullopt;
  };
  auto oracle = pr.oracle;
  pr.eval_loss = [oracle](const std::vector<ParamGroup>& gs) {
    return oracle(snapshot(gs), Batch{}).loss;
  };
  pr.fixed_steps_per_epoch = cfg.quadratic.steps_per_epoch;
  pr.train.source = "none";
  return pr;
}

std::vector<Batch> epoch_batches(const Problem& pr, std::size_t epoch) {
  if (pr.fixed_steps_per_epoch > 0) return std::vector<Batch>(pr.fixed_steps_per_epoch);
  return batches(pr.train, pr.plan, epoch);
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

void write_summary(const std::filesystem::path& path, const RunSummary& s) {
  json timing = json::array();
  for (const auto& t : s.timing) {
    timing.push_back({{"epoch", t.epoch}, {"mean_step_ms", t.mean_step_ms},
                      {"std_step_ms", t.std_step_ms}});
  }
  json doc = {{"experiment", s.experiment},
              {"strategy", s.strategy},
              {"data_source", s.data_source},
              {"steps", s.steps},
              {"epochs", s.epochs},
              {"final_loss", s.final_loss},
              {"final_ortho_residual", optional_json(s.final_ortho_residual)},
              {"max_ortho_residual", optional_json(s.max_ortho_residual)},
              {"degenerate_steps", s.degenerate_steps},
              {"total_wall_ms", s.total_wall_ms},
              {"epoch_timing", timing}};
  write_text(path, doc.dump(2) + "\n");
}

SharpnessConfig sharpness_config(const ExperimentConfig& cfg) {
  const auto& d = cfg.diagnostics;
  return {d.sharpness_rho > 0.0 ? d.sharpness_rho : cfg.optimizer.rho, d.sharpness_mode,
          d.sharpness_probes, cfg.seed};
}

}  // namespace

Problem build_problem(const ExperimentConfig& cfg, std::ostream& log) {
  Problem pr;
  switch (cfg.experiment) {
    case ExperimentKind::MnistAblation: pr = autoencoder_problem(cfg, log); break;
    case ExperimentKind::SupconToy: pr = supcon_problem(cfg, log); break;
    case ExperimentKind::Quadratic: pr = quadratic_problem(cfg); break;
  }
  for (const auto& g : pr.groups) validate(g);
  return pr;
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

std::string format_record(const MetricsRecord& r) {
  auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
  return std::to_string(r.step) + "," + std::to_string(r.epoch) + "," + format_double(r.loss) +
         "," + opt(r.sharpness) + "," + opt(r.ortho_residual) + "," + opt(r.max_eig) + "," +
         opt(r.wall_ms);
}

void write_metrics_csv(const std::filesystem::path& path,
                       const std::vector<MetricsRecord>& records) {
  std::string text = std::string(kMetricsHeader) + "\n";
  for (const auto& r : records) text += format_record(r) + "\n";
  write_text(path, text);
}

RunOutcome run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out_dir,
                          std::ostream& log) {
  validate_config(cfg);
  Problem pr = build_problem(cfg, log);
  std::filesystem::create_directories(out_dir);

  const auto& diag = cfg.diagnostics;
  const std::size_t steps_per_epoch =
      pr.fixed_steps_per_epoch > 0
          ? pr.fixed_steps_per_epoch
          : (pr.train.size() + cfg.batch_size - 1) / cfg.batch_size;
  const std::size_t total_steps = steps_per_epoch * cfg.epochs;

  RunOutcome out;
  RunSummary& sum = out.summary;
  sum.experiment = std::string(to_string(cfg.experiment));
  sum.strategy = std::string(to_string(cfg.optimizer.strategy));
  sum.data_source = pr.train.source;
  sum.epochs = cfg.epochs;

  auto residual_now = [&]() { return pr.ortho_residual(pr.groups); };
  auto track_residual = [&]() {
    if (auto r = residual_now()) {
      sum.max_ortho_residual = std::max(sum.max_ortho_residual.value_or(0.0), *r);
    }
  };
  track_residual();

  std::size_t step = 0;
  double loss_acc = 0.0;
  std::size_t loss_count = 0;
  double ms_acc = 0.0;

  auto emit = [&](std::size_t epoch) {
    MetricsRecord rec;
    rec.step = step;
    rec.epoch = epoch;
    rec.loss = loss_acc / static_cast<double>(loss_count);
    if (diag.sharpness) {
      rec.sharpness = sharpness_estimate(pr.groups, pr.oracle, pr.probe, sharpness_config(cfg));
    }
    rec.ortho_residual = residual_now();
    if (diag.track_max_eig) {
      SpectrumConfig sc = diag.spectrum;
      sc.lanczos_iters = std::min(sc.lanczos_iters, flatten(pr.groups).size());
      rec.max_eig = lanczos_spectrum(pr.oracle, pr.groups, pr.probe, sc).max_eig;
    }
    if (diag.record_wall_time) rec.wall_ms = ms_acc / static_cast<double>(loss_count);
    for (auto v : {std::optional<double>(rec.loss), rec.sharpness, rec.ortho_residual,
                   rec.max_eig}) {
      if (v && !std::isfinite(*v)) {
        throw NumericError("non-finite metric at step " + std::to_string(step),
                           static_cast<long long>(step));
      }
    }
    out.records.push_back(rec);
    loss_acc = 0.0;
    loss_count = 0;
    ms_acc = 0.0;
  };

  const auto run_start = Clock::now();
  try {
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
      std::vector<double> step_ms;
      for (const Batch& b : epoch_batches(pr, epoch)) {
        StepOptions opts;
        if (cfg.schedule == LrSchedule::Cosine) opts.lr_scale = cosine_lr_scale(step, total_steps);
        const auto t0 = Clock::now();
        const StepReport rep = optimizer_step(pr.groups, pr.oracle, b, opts);
        const double dt = ms_since(t0);
        if (!std::isfinite(rep.loss)) throw NumericError("non-finite loss");
        for (const auto& g : pr.groups) {
          if (!all_finite(g.point.value)) {
            throw NumericError("group '" + g.name + "' has non-finite entries");
          }
        }
        ++step;
        step_ms.push_back(dt);
        ms_acc += dt;
        loss_acc += rep.loss;
        ++loss_count;
        if (!rep.degenerate_groups.empty()) ++sum.degenerate_steps;
        track_residual();
        if (diag.eval_every > 0 && step % diag.eval_every == 0) emit(epoch + 1);
      }
      if (diag.eval_every == 0 && loss_count > 0) emit(epoch + 1);
      const MeanStd ms = mean_std(step_ms);
      sum.timing.push_back({epoch + 1, ms.mean, ms.std});
    }
  } catch (const NumericError& e) {
    write_metrics_csv(out_dir / "metrics.csv", out.records);
    throw NumericError(std::string(e.what()) + " (last good step " + std::to_string(step) + ")",
                       static_cast<long long>(step));
  } catch (const RankError& e) {
    write_metrics_csv(out_dir / "metrics.csv", out.records);
    throw NumericError(std::string(e.what()) + " (last good step " + std::to_string(step) + ")",
                       static_cast<long long>(step));
  }
  sum.total_wall_ms = ms_since(run_start);
  sum.steps = step;
  sum.final_loss = pr.eval_loss(pr.groups);
  sum.final_ortho_residual = residual_now();

  write_metrics_csv(out_dir / "metrics.csv", out.records);
  write_summary(out_dir / "summary.json", sum);
  if (diag.save_checkpoint) {
    save_checkpoint(out_dir / "checkpoint", sum.experiment, step, pr.groups);
  }
  out.groups = std::move(pr.groups);
  return out;
}

std::vector<CompareRow> compare_epsilon(const ExperimentConfig& cfg,
                                        const std::filesystem::path& out_dir, std::ostream& log) {
  validate_config(cfg);
  if (cfg.compare.steps == 0) throw ConfigError("compare.steps must be >= 1");
  std::filesystem::create_directories(out_dir);
  const AutoencoderLossConfig ae{cfg.model.beta, 0.0, cfg.model.reconstruction};
  const GradOracle oracle = [ae](const ParamMap& params, const Batch& batch) {
    LossAndGrad lg = ae_loss_and_grad(params.at("W"), batch, ae);
    OracleResult r;
    r.loss = lg.loss;
    r.grads.emplace("W", std::move(lg.grad));
    return r;
  };

  std::vector<CompareRow> rows;
  for (const auto& [n, p] : cfg.compare.dims) {
    const Dataset d = synthetic_clusters(p, cfg.compare.per_class, n,
                                         cfg.data.synthetic.separation, cfg.seed);
    const Point init = random_point(ManifoldKind::stiefel(n, p), cfg.seed);
    const BatchPlan plan{cfg.batch_size, cfg.seed, false, 0.01};

    auto train = [&](Strategy s, double& mean, double& stdev, double& final_loss) {
      OptimizerConfig oc = cfg.optimizer;
      oc.strategy = s;
      std::vector<ParamGroup> groups{{"W", init, oc, std::nullopt}};
      validate(groups.front());
      std::vector<double> ms;
      for (std::size_t epoch = 0; ms.size() < cfg.compare.steps; ++epoch) {
        for (const Batch& b : batches(d, plan, epoch)) {
          if (ms.size() == cfg.compare.steps) break;
          const auto t0 = Clock::now();
          optimizer_step(groups, oracle, b);
          ms.push_back(ms_since(t0));
        }
      }
      const MeanStd st = mean_std(ms);
      mean = st.mean;
      stdev = st.std;
      final_loss = ae_loss_terms(groups.front().point.value, as_batch(d), ae).total();
    };

    CompareRow row;
    row.n = n;
    row.p = p;
    train(Strategy::RSAMApprox, row.approx_ms_mean, row.approx_ms_std, row.approx_final_loss);
    row.exact_available = n * p <= kTangentBasisCapacity;
    if (row.exact_available) {
      train(Strategy::RSAMExact, row.exact_ms_mean, row.exact_ms_std, row.exact_final_loss);
    } else {
      log << "compare-epsilon: St(" << n << "," << p << ") exceeds the exact solver capacity ("
          << kTangentBasisCapacity << " coordinates); marked unavailable\n";
    }
    rows.push_back(row);
  }

  std::string text =
      "n,p,approx_step_ms_mean,approx_step_ms_std,exact_step_ms_mean,exact_step_ms_std,"
      "slowdown,approx_final_loss,exact_final_loss,status\n";
  for (const auto& r : rows) {
    text += std::to_string(r.n) + "," + std::to_string(r.p) + "," +
            format_double(r.approx_ms_mean) + "," + format_double(r.approx_ms_std) + ",";
    if (r.exact_available) {
      text += format_double(r.exact_ms_mean) + "," + format_double(r.exact_ms_std) + "," +
              format_double(r.exact_ms_mean / r.approx_ms_mean) + "," +
              format_double(r.approx_final_loss) + "," + format_double(r.exact_final_loss) +
              ",ok\n";
    } else {
      text += ",,," + format_double(r.approx_final_loss) + ",,unavailable\n";
    }
  }
  write_text(out_dir / "compare_epsilon.csv", text);
  return rows;
}

SpectrumResult run_spectrum(const ExperimentConfig& cfg, const std::filesystem::path& checkpoint,
                            const std::filesystem::path& out_dir, std::ostream& log) {
  validate_config(cfg);
  Problem pr = build_problem(cfg, log);
  const Checkpoint ck = load_checkpoint(checkpoint);
  if (ck.experiment != to_string(cfg.experiment)) {
    throw ConfigError("checkpoint is from experiment '" + ck.experiment + "', config says '" +
                      std::string(to_string(cfg.experiment)) + "'");
  }
  restore_groups(ck, pr.groups);
  const std::size_t dim = flatten(pr.groups).size();
  if (cfg.diagnostics.spectrum.lanczos_iters > dim) {
    throw ConfigError("diagnostics.spectrum.lanczos_iters exceeds the parameter count (" +
                      std::to_string(dim) + ")");
  }
  std::filesystem::create_directories(out_dir);
  const SpectrumResult res = lanczos_spectrum(pr.oracle, pr.groups, pr.probe,
                                              cfg.diagnostics.spectrum);

  std::string text = "probe,ritz_value,weight\n";
  for (const auto& rp : res.pairs) {
    text += std::to_string(rp.probe) + "," + format_double(rp.value) + "," +
            format_double(rp.weight) + "\n";
  }
  write_text(out_dir / "spectrum.csv", text);
  json doc = {{"experiment", ck.experiment},
              {"checkpoint_step", ck.step},
              {"lanczos_iters", cfg.diagnostics.spectrum.lanczos_iters},
              {"probes", cfg.diagnostics.spectrum.probes},
              {"max_eig", res.max_eig},
              {"truncated", res.truncated}};
  write_text(out_dir / "summary.json", doc.dump(2) + "\n");
  return res;
}

}  // namespace rsam
