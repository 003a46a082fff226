#include "rsam/config.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <type_traits>

#include "json.hpp"
#include "rsam/errors.hpp"

namespace rsam {
namespace {

using nlohmann::json;

static_assert(std::is_same_v<std::uint64_t, std::size_t>, "seeds are read as size_t");

std::string_view to_string(LrSchedule s) {
  return s == LrSchedule::Cosine ? "cosine" : "constant";
}

std::string_view to_string(SharpnessMode m) {
  return m == SharpnessMode::RandomProbe ? "random-probe" : "first-order";
}

std::string_view to_string(ReconstructionMean m) {
  return m == ReconstructionMean::PerSample ? "per-sample" : "per-element";
}

ExperimentKind parse_experiment(const std::string& s) {
  if (s == "mnist-ablation") return ExperimentKind::MnistAblation;
  if (s == "supcon-toy") return ExperimentKind::SupconToy;
  if (s == "quadratic") return ExperimentKind::Quadratic;
  throw ConfigError("unknown experiment '" + s + "'");
}

LrSchedule parse_schedule(const std::string& s) {
  if (s == "constant") return LrSchedule::Constant;
  if (s == "cosine") return LrSchedule::Cosine;
  throw ConfigError("unknown schedule '" + s + "'");
}

SharpnessMode parse_sharpness_mode(const std::string& s) {
  if (s == "first-order") return SharpnessMode::FirstOrder;
  if (s == "random-probe") return SharpnessMode::RandomProbe;
  throw ConfigError("unknown sharpness mode '" + s + "'");
}

ReconstructionMean parse_reconstruction(const std::string& s) {
  if (s == "per-sample") return ReconstructionMean::PerSample;
  if (s == "per-element") return ReconstructionMean::PerElement;
  throw ConfigError("unknown reconstruction mean '" + s + "'");
}

// Reads the keys of one JSON object and rejects anything it was not asked for.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + " must be an object");
  }

  void read(const char* key, double& out) {
    if (const json* v = take(key)) {
      if (!v->is_number()) throw ConfigError(where(key) + " must be a number");
      out = v->get<double>();
    }
  }

  void read(const char* key, std::size_t& out) {
    if (const json* v = take(key)) {
      if (!v->is_number_unsigned()) {
        throw ConfigError(where(key) + " must be a non-negative integer");
      }
      out = v->get<std::size_t>();
    }
  }

  void read(const char* key, bool& out) {
    if (const json* v = take(key)) {
      if (!v->is_boolean()) throw ConfigError(where(key) + " must be a boolean");
      out = v->get<bool>();
    }
  }

  void read(const char* key, std::string& out) {
    if (const json* v = take(key)) {
      if (!v->is_string()) throw ConfigError(where(key) + " must be a string");
      out = v->get<std::string>();
    }
  }

  template <class Enum, class Parse>
  void read_enum(const char* key, Enum& out, Parse parse) {
    std::string s;
    if (j_.contains(key)) {
      read(key, s);
      out = parse(s);
    }
  }

  const json* take(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  std::string child(const char* key) const { return where(key); }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError("unknown key " + where(it.key()));
    }
  }

 private:
  std::string where(const std::string& key = {}) const {
    if (key.empty()) return path_.empty() ? "<root>" : path_;
    return path_.empty() ? key : path_ + "." + key;
  }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_optimizer(Section& root, ExperimentConfig& cfg) {
  const json* j = root.take("optimizer");
  if (!j) return;
  Section s(*j, root.child("optimizer"));
  auto& o = cfg.optimizer;
  s.read_enum("strategy", o.strategy, [](const std::string& v) {
    try {
      return parse_strategy(v);
    } catch (const std::exception& e) {
      throw ConfigError(e.what());
    }
  });
  s.read("lr", o.lr);
  s.read("rho", o.rho);
  s.read("momentum", o.momentum);
  s.read_enum("metric", o.metric, [](const std::string& v) {
    try {
      return parse_metric(v);
    } catch (const std::exception& e) {
      throw ConfigError(e.what());
    }
  });
  s.read_enum("schedule", cfg.schedule, parse_schedule);
  s.finish();
}

void read_model(Section& root, ModelConfig& m) {
  const json* j = root.take("model");
  if (!j) return;
  Section s(*j, root.child("model"));
  s.read("beta", m.beta);
  s.read("lambda", m.lambda);
  s.read("tau", m.tau);
  s.read("code_dim", m.code_dim);
  s.read_enum("reconstruction", m.reconstruction, parse_reconstruction);
  s.finish();
}

void read_data(Section& root, DataConfig& d) {
  const json* j = root.take("data");
  if (!j) return;
  Section s(*j, root.child("data"));
  s.read("images_path", d.images_path);
  s.read("labels_path", d.labels_path);
  s.read("probe_size", d.probe_size);
  s.read("max_samples", d.max_samples);
  if (const json* syn = s.take("synthetic")) {
    Section t(*syn, s.child("synthetic"));
    t.read("classes", d.synthetic.classes);
    t.read("per_class", d.synthetic.per_class);
    t.read("feature_dim", d.synthetic.feature_dim);
    t.read("separation", d.synthetic.separation);
    t.finish();
  }
  s.finish();
}

void read_diagnostics(Section& root, DiagnosticsConfig& d) {
  const json* j = root.take("diagnostics");
  if (!j) return;
  Section s(*j, root.child("diagnostics"));
  s.read("eval_every", d.eval_every);
  s.read("save_checkpoint", d.save_checkpoint);
  s.read("record_wall_time", d.record_wall_time);
  if (const json* sh = s.take("sharpness")) {
    Section t(*sh, s.child("sharpness"));
    t.read("enabled", d.sharpness);
    t.read_enum("mode", d.sharpness_mode, parse_sharpness_mode);
    t.read("rho", d.sharpness_rho);
    t.read("probes", d.sharpness_probes);
    t.finish();
  }
  if (const json* sp = s.take("spectrum")) {
    Section t(*sp, s.child("spectrum"));
    t.read("track", d.track_max_eig);
    t.read("lanczos_iters", d.spectrum.lanczos_iters);
    t.read("probes", d.spectrum.probes);
    t.read("fd_step", d.spectrum.fd_step);
    t.read("seed", d.spectrum.seed);
    t.finish();
  }
  s.finish();
}

void read_compare(Section& root, CompareConfig& c) {
  const json* j = root.take("compare");
  if (!j) return;
  Section s(*j, root.child("compare"));
  if (const json* dims = s.take("dims")) {
    if (!dims->is_array()) throw ConfigError("compare.dims must be an array of [n, p] pairs");
    c.dims.clear();
    for (const auto& pair : *dims) {
      if (!pair.is_array() || pair.size() != 2 || !pair[0].is_number_unsigned() ||
          !pair[1].is_number_unsigned()) {
        throw ConfigError("compare.dims entries must be [n, p] with non-negative integers");
      }
      c.dims.emplace_back(pair[0].get<std::size_t>(), pair[1].get<std::size_t>());
    }
  }
  s.read("steps", c.steps);
  s.read("per_class", c.per_class);
  s.finish();
}

void read_quadratic(Section& root, QuadraticConfig& q) {
  const json* j = root.take("quadratic");
  if (!j) return;
  Section s(*j, root.child("quadratic"));
  s.read("dim", q.dim);
  s.read("steps_per_epoch", q.steps_per_epoch);
  s.finish();
}

}  // namespace

std::string_view to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::MnistAblation: return "mnist-ablation";
    case ExperimentKind::SupconToy: return "supcon-toy";
    case ExperimentKind::Quadratic: return "quadratic";
  }
  return "?";
}

bool DiagnosticsConfig::operator==(const DiagnosticsConfig& o) const {
  return eval_every == o.eval_every && sharpness == o.sharpness &&
         sharpness_mode == o.sharpness_mode && sharpness_rho == o.sharpness_rho &&
         sharpness_probes == o.sharpness_probes && track_max_eig == o.track_max_eig &&
         spectrum.lanczos_iters == o.spectrum.lanczos_iters &&
         spectrum.probes == o.spectrum.probes && spectrum.fd_step == o.spectrum.fd_step &&
         spectrum.seed == o.spectrum.seed && save_checkpoint == o.save_checkpoint &&
         record_wall_time == o.record_wall_time;
}

bool ExperimentConfig::operator==(const ExperimentConfig& o) const {
  const auto& a = optimizer;
  const auto& b = o.optimizer;
  return experiment == o.experiment && seed == o.seed && epochs == o.epochs &&
         batch_size == o.batch_size && a.strategy == b.strategy && a.lr == b.lr &&
         a.rho == b.rho && a.momentum == b.momentum && a.metric == b.metric &&
         schedule == o.schedule && model == o.model && data == o.data &&
         diagnostics == o.diagnostics && compare == o.compare && quadratic == o.quadratic;
}

ExperimentConfig parse_config(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("invalid JSON: ") + e.what());
  }
  ExperimentConfig cfg;
  Section root(doc, "");
  root.read_enum("experiment", cfg.experiment, parse_experiment);
  root.read("seed", cfg.seed);
  root.read("epochs", cfg.epochs);
  root.read("batch_size", cfg.batch_size);
  read_optimizer(root, cfg);
  read_model(root, cfg.model);
  read_data(root, cfg.data);
  read_diagnostics(root, cfg.diagnostics);
  read_compare(root, cfg.compare);
  read_quadratic(root, cfg.quadratic);
  root.finish();
  validate_config(cfg);
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string serialize_config(const ExperimentConfig& cfg) {
  json dims = json::array();
  for (const auto& [n, p] : cfg.compare.dims) dims.push_back({n, p});
  const auto& d = cfg.diagnostics;
  json doc = {
      {"experiment", to_string(cfg.experiment)},
      {"seed", cfg.seed},
      {"epochs", cfg.epochs},
      {"batch_size", cfg.batch_size},
      {"optimizer",
       {{"strategy", to_string(cfg.optimizer.strategy)},
        {"lr", cfg.optimizer.lr},
        {"rho", cfg.optimizer.rho},
        {"momentum", cfg.optimizer.momentum},
        {"metric", to_string(cfg.optimizer.metric)},
        {"schedule", to_string(cfg.schedule)}}},
      {"model",
       {{"beta", cfg.model.beta},
        {"lambda", cfg.model.lambda},
        {"tau", cfg.model.tau},
        {"code_dim", cfg.model.code_dim},
        {"reconstruction", to_string(cfg.model.reconstruction)}}},
      {"data",
       {{"images_path", cfg.data.images_path},
        {"labels_path", cfg.data.labels_path},
        {"probe_size", cfg.data.probe_size},
        {"max_samples", cfg.data.max_samples},
        {"synthetic",
         {{"classes", cfg.data.synthetic.classes},
          {"per_class", cfg.data.synthetic.per_class},
          {"feature_dim", cfg.data.synthetic.feature_dim},
          {"separation", cfg.data.synthetic.separation}}}}},
      {"diagnostics",
       {{"eval_every", d.eval_every},
        {"save_checkpoint", d.save_checkpoint},
        {"record_wall_time", d.record_wall_time},
        {"sharpness",
         {{"enabled", d.sharpness},
          {"mode", to_string(d.sharpness_mode)},
          {"rho", d.sharpness_rho},
          {"probes", d.sharpness_probes}}},
        {"spectrum",
         {{"track", d.track_max_eig},
          {"lanczos_iters", d.spectrum.lanczos_iters},
          {"probes", d.spectrum.probes},
          {"fd_step", d.spectrum.fd_step},
          {"seed", d.spectrum.seed}}}}},
      {"compare",
       {{"dims", dims}, {"steps", cfg.compare.steps}, {"per_class", cfg.compare.per_class}}},
      {"quadratic",
       {{"dim", cfg.quadratic.dim}, {"steps_per_epoch", cfg.quadratic.steps_per_epoch}}},
  };
  return doc.dump(2) + "\n";
}

void validate_config(const ExperimentConfig& cfg) {
  const auto& o = cfg.optimizer;
  if (cfg.batch_size == 0) throw ConfigError("batch_size must be >= 1");
  if (!(o.lr > 0.0)) throw ConfigError("optimizer.lr must be positive");
  if (!(o.momentum >= 0.0 && o.momentum < 1.0)) {
    throw ConfigError("optimizer.momentum must lie in [0, 1)");
  }
  if (is_sharpness_aware(o.strategy) && !(o.rho > 0.0)) {
    throw ConfigError("optimizer.rho must be positive for " +
                      std::string(to_string(o.strategy)));
  }
  if (o.momentum != 0.0 && o.strategy != Strategy::SGD) {
    throw ConfigError("optimizer.momentum is only supported with sgd");
  }
  if (!(cfg.model.lambda >= 0.0)) throw ConfigError("model.lambda must be >= 0");
  if (cfg.model.lambda > 0.0 && is_riemannian(o.strategy)) {
    throw ConfigError("model.lambda must be 0 for " + std::string(to_string(o.strategy)) +
                      ": the constraint is enforced by retraction");
  }
  if (!(cfg.model.beta >= 0.0)) throw ConfigError("model.beta must be >= 0");
  if (!(cfg.model.tau > 0.0)) throw ConfigError("model.tau must be positive");
  if (cfg.model.code_dim == 0) throw ConfigError("model.code_dim must be >= 1");
  if (!(cfg.diagnostics.sharpness_rho >= 0.0)) {
    throw ConfigError("diagnostics.sharpness.rho must be >= 0");
  }
  if (cfg.diagnostics.sharpness_probes == 0) {
    throw ConfigError("diagnostics.sharpness.probes must be >= 1");
  }
  if (cfg.diagnostics.spectrum.lanczos_iters == 0 || cfg.diagnostics.spectrum.probes == 0) {
    throw ConfigError("diagnostics.spectrum: lanczos_iters and probes must be >= 1");
  }
  if (!(cfg.diagnostics.spectrum.fd_step >= 0.0)) {
    throw ConfigError("diagnostics.spectrum.fd_step must be >= 0");
  }
  const auto& syn = cfg.data.synthetic;
  if (syn.classes < 2 || syn.per_class == 0 || syn.feature_dim < syn.classes) {
    throw ConfigError("data.synthetic needs classes >= 2, per_class >= 1, feature_dim >= classes");
  }
  for (const auto& [n, p] : cfg.compare.dims) {
    if (p < 1 || p > n) throw ConfigError("compare.dims entries need 1 <= p <= n");
  }
  if (cfg.quadratic.dim == 0 || cfg.quadratic.steps_per_epoch == 0) {
    throw ConfigError("quadratic: dim and steps_per_epoch must be >= 1");
  }
}

}  // namespace rsam
