#include "supcon/experiment.hpp"

#include <charconv>
#include <chrono>
#include <utility>

#include <nlohmann/json.hpp>

#include "supcon/errors.hpp"

namespace supcon {

namespace {

using ordered_json = nlohmann::ordered_json;

// Shortest decimal that parses back to the same double.
std::string fmt_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

LossVariant mode_variant(TrainingMode m) {
  switch (m) {
    case TrainingMode::kSelfSup: return LossVariant::kSelfSup;
    case TrainingMode::kSupOut: return LossVariant::kSupOut;
    case TrainingMode::kSupIn: return LossVariant::kSupIn;
    case TrainingMode::kNPairs: return LossVariant::kNPairs;
    default:
      throw ConfigError("mode has no batch loss variant");
  }
}

bool contrastive_mode(TrainingMode m) {
  return m != TrainingMode::kXent && m != TrainingMode::kXentTwoStage;
}

double parse_double_strict(const std::string& s, const std::string& key) {
  double v = 0.0;
  const char* end = s.data() + s.size();
  const auto res = std::from_chars(s.data(), end, v);
  if (res.ec != std::errc{} || res.ptr != end)
    throw ConfigError("dataset spec: bad numeric value for " + key);
  return v;
}

std::uint64_t parse_u64_strict(const std::string& s, const std::string& key) {
  std::uint64_t v = 0;
  const char* end = s.data() + s.size();
  const auto res = std::from_chars(s.data(), end, v);
  if (res.ec != std::errc{} || res.ptr != end)
    throw ConfigError("dataset spec: bad integer value for " + key);
  return v;
}

LossVariant parse_loss_variant(const std::string& name) {
  for (LossVariant v :
       {LossVariant::kSelfSup, LossVariant::kSupOut, LossVariant::kSupIn,
        LossVariant::kNPairs, LossVariant::kTriplet,
        LossVariant::kXentContrastive})
    if (name == loss_variant_name(v)) return v;
  throw ConfigError("unknown loss variant: " + name);
}

ordered_json dataset_json(const DatasetSpec& d) {
  ordered_json j;
  if (d.kind == DatasetSpec::Kind::kBlobs) {
    j["kind"] = "blobs";
    j["classes"] = d.classes;
    j["per_class"] = d.per_class;
    j["dim"] = d.dim;
    j["separation"] = d.separation;
    j["spread"] = d.spread;
    j["seed"] = d.seed;
  } else {
    j["kind"] = "csv";
    j["path"] = d.csv_path;
  }
  return j;
}

DatasetSpec dataset_from_json(const ordered_json& j) {
  DatasetSpec d;
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "blobs") {
    d.kind = DatasetSpec::Kind::kBlobs;
    d.classes = j.at("classes").get<std::size_t>();
    d.per_class = j.at("per_class").get<std::size_t>();
    d.dim = j.at("dim").get<std::size_t>();
    d.separation = j.at("separation").get<double>();
    d.spread = j.at("spread").get<double>();
    d.seed = j.at("seed").get<std::uint64_t>();
  } else if (kind == "csv") {
    d.kind = DatasetSpec::Kind::kCsv;
    d.csv_path = j.at("path").get<std::string>();
  } else {
    throw ConfigError("result file: unknown dataset kind " + kind);
  }
  return d;
}

}  // namespace

const char* training_mode_name(TrainingMode m) {
  switch (m) {
    case TrainingMode::kSelfSup: return "selfsup";
    case TrainingMode::kSupOut: return "supout";
    case TrainingMode::kSupIn: return "supin";
    case TrainingMode::kNPairs: return "npairs";
    case TrainingMode::kXent: return "xent";
    case TrainingMode::kXentTwoStage: return "xent-twostage";
  }
  return "unknown";
}

TrainingMode parse_training_mode(const std::string& text) {
  for (TrainingMode m :
       {TrainingMode::kSelfSup, TrainingMode::kSupOut, TrainingMode::kSupIn,
        TrainingMode::kNPairs, TrainingMode::kXent,
        TrainingMode::kXentTwoStage})
    if (text == training_mode_name(m)) return m;
  throw ConfigError(
      "unknown mode '" + text +
      "' (expected selfsup|supout|supin|npairs|xent|xent-twostage)");
}

DatasetSpec parse_dataset_spec(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos)
    throw ConfigError("dataset spec must start with blobs: or csv:");
  const std::string head = text.substr(0, colon);
  const std::string rest = text.substr(colon + 1);
  DatasetSpec d;
  if (head == "csv") {
    d.kind = DatasetSpec::Kind::kCsv;
    if (rest.empty()) throw ConfigError("dataset spec: empty csv path");
    d.csv_path = rest;
    return d;
  }
  if (head != "blobs")
    throw ConfigError("dataset spec must start with blobs: or csv:");
  d.kind = DatasetSpec::Kind::kBlobs;
  std::size_t pos = 0;
  while (pos < rest.size()) {
    auto comma = rest.find(',', pos);
    if (comma == std::string::npos) comma = rest.size();
    const std::string item = rest.substr(pos, comma - pos);
    pos = comma + 1;
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string::npos)
      throw ConfigError("dataset spec: expected key=value, got " + item);
    const std::string key = item.substr(0, eq);
    const std::string val = item.substr(eq + 1);
    if (key == "c")
      d.classes = parse_u64_strict(val, key);
    else if (key == "n")
      d.per_class = parse_u64_strict(val, key);
    else if (key == "d")
      d.dim = parse_u64_strict(val, key);
    else if (key == "s")
      d.separation = parse_double_strict(val, key);
    else if (key == "sigma")
      d.spread = parse_double_strict(val, key);
    else if (key == "seed")
      d.seed = parse_u64_strict(val, key);
    else
      throw ConfigError("dataset spec: unknown key " + key);
  }
  return d;
}

std::string dataset_spec_string(const DatasetSpec& spec) {
  if (spec.kind == DatasetSpec::Kind::kCsv) return "csv:" + spec.csv_path;
  std::string out = "blobs:c=" + std::to_string(spec.classes) +
                    ",n=" + std::to_string(spec.per_class) +
                    ",d=" + std::to_string(spec.dim) +
                    ",s=" + fmt_double(spec.separation) +
                    ",sigma=" + fmt_double(spec.spread) +
                    ",seed=" + std::to_string(spec.seed);
  return out;
}

Dataset build_dataset(const DatasetSpec& spec) {
  if (spec.kind == DatasetSpec::Kind::kCsv) return load_csv(spec.csv_path);
  return make_blobs(spec.classes, spec.per_class, spec.dim, spec.separation,
                    spec.spread, spec.seed);
}

ExperimentRun run_experiment(const ExperimentConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  const Dataset ds = build_dataset(cfg.dataset);
  ExperimentRun out;
  out.result.config = cfg;
  TrainConfig tc = cfg.train;
  switch (cfg.mode) {
    case TrainingMode::kSelfSup:
    case TrainingMode::kSupOut:
    case TrainingMode::kSupIn:
    case TrainingMode::kNPairs: {
      tc.loss_spec.variant = mode_variant(cfg.mode);
      out.result.config.train.loss_spec.variant = tc.loss_spec.variant;
      ContrastiveRun cr = train_contrastive(tc, ds);
      ProbeRun pr = train_linear_probe(cr.model, ds, tc);
      out.result.loss_trajectory = std::move(cr.loss_trajectory);
      out.result.top1 = pr.top1;
      out.result.ece = pr.ece;
      out.model = std::move(cr.model);
      out.probe = std::move(pr.probe);
      break;
    }
    case TrainingMode::kXent: {
      XentRun xr = train_xent_baseline(tc, ds);
      out.result.loss_trajectory = std::move(xr.loss_trajectory);
      out.result.top1 = xr.top1;
      out.result.ece = xr.ece;
      out.model = std::move(xr.model);
      out.probe = std::move(xr.head);
      break;
    }
    case TrainingMode::kXentTwoStage: {
      XentRun xr = train_xent_baseline(tc, ds);
      ProbeRun pr = reinit_head_retrain(xr.model, ds, tc);
      out.result.loss_trajectory = std::move(xr.loss_trajectory);
      out.result.top1 = pr.top1;
      out.result.ece = pr.ece;
      out.model = std::move(xr.model);
      out.probe = std::move(pr.probe);
      break;
    }
  }
  out.result.wall_time_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return out;
}

std::string serialize_result(const ExperimentResult& r) {
  const TrainConfig& t = r.config.train;
  ordered_json j;
  j["schema"] = "supcon-result-v1";
  j["mode"] = training_mode_name(r.config.mode);
  j["seed"] = t.seed;
  j["dataset"] = dataset_json(r.config.dataset);
  ordered_json loss;
  loss["variant"] = std::string(loss_variant_name(t.loss_spec.variant));
  loss["tau"] = t.loss_spec.tau;
  if (t.loss_spec.max_positives)
    loss["max_positives"] = *t.loss_spec.max_positives;
  else
    loss["max_positives"] = nullptr;
  loss["rescale_by_tau"] = t.loss_spec.rescale_by_tau;
  j["loss"] = std::move(loss);
  ordered_json train;
  train["epochs"] = t.epochs;
  train["batch_n"] = t.batch_n;
  train["learning_rate"] = t.learning_rate;
  train["momentum"] = t.momentum;
  train["probe_epochs"] = t.probe_epochs;
  train["probe_learning_rate"] = t.probe_learning_rate;
  ordered_json aug;
  aug["scale_jitter"] = t.augment.scale_jitter;
  aug["noise_sigma"] = t.augment.noise_sigma;
  aug["mask_prob"] = t.augment.mask_prob;
  train["augment"] = std::move(aug);
  ordered_json model;
  model["input_dim"] = t.model.input_dim;
  model["encoder_hidden"] = t.model.encoder_hidden;
  model["repr_dim"] = t.model.repr_dim;
  model["projection_hidden"] = t.model.projection_hidden;
  model["proj_dim"] = t.model.proj_dim;
  train["model"] = std::move(model);
  j["train"] = std::move(train);
  j["loss_trajectory"] = r.loss_trajectory;
  j["top1"] = r.top1;
  j["ece"] = r.ece;
  j["severity_top1"] = r.severity_top1;
  return j.dump(2) + "\n";
}

ExperimentResult parse_result(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("result file: ") + e.what());
  }
  try {
    if (j.at("schema").get<std::string>() != "supcon-result-v1")
      throw ConfigError("result file: unknown schema");
    ExperimentResult r;
    r.config.mode = parse_training_mode(j.at("mode").get<std::string>());
    r.config.dataset = dataset_from_json(j.at("dataset"));
    TrainConfig& t = r.config.train;
    t.seed = j.at("seed").get<std::uint64_t>();
    const auto& loss = j.at("loss");
    t.loss_spec.variant =
        parse_loss_variant(loss.at("variant").get<std::string>());
    t.loss_spec.tau = loss.at("tau").get<double>();
    if (!loss.at("max_positives").is_null())
      t.loss_spec.max_positives = loss.at("max_positives").get<std::size_t>();
    t.loss_spec.rescale_by_tau = loss.at("rescale_by_tau").get<bool>();
    const auto& train = j.at("train");
    t.epochs = train.at("epochs").get<std::size_t>();
    t.batch_n = train.at("batch_n").get<std::size_t>();
    t.learning_rate = train.at("learning_rate").get<double>();
    t.momentum = train.at("momentum").get<double>();
    t.probe_epochs = train.at("probe_epochs").get<std::size_t>();
    t.probe_learning_rate = train.at("probe_learning_rate").get<double>();
    const auto& aug = train.at("augment");
    t.augment.scale_jitter = aug.at("scale_jitter").get<double>();
    t.augment.noise_sigma = aug.at("noise_sigma").get<double>();
    t.augment.mask_prob = aug.at("mask_prob").get<double>();
    const auto& model = train.at("model");
    t.model.input_dim = model.at("input_dim").get<std::size_t>();
    t.model.encoder_hidden =
        model.at("encoder_hidden").get<std::vector<std::size_t>>();
    t.model.repr_dim = model.at("repr_dim").get<std::size_t>();
    t.model.projection_hidden =
        model.at("projection_hidden").get<std::vector<std::size_t>>();
    t.model.proj_dim = model.at("proj_dim").get<std::size_t>();
    r.loss_trajectory = j.at("loss_trajectory").get<std::vector<double>>();
    r.top1 = j.at("top1").get<double>();
    r.ece = j.at("ece").get<double>();
    r.severity_top1 = j.at("severity_top1").get<std::vector<double>>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("result file: ") + e.what());
  }
}

std::string sweep_positives_csv(const ExperimentConfig& base,
                                const std::vector<std::size_t>& k_list) {
  if (!contrastive_mode(base.mode))
    throw ConfigError("sweep_positives: needs a contrastive mode");
  if (k_list.empty()) throw ConfigError("sweep_positives: empty k list");
  std::string out = "k,top1\n";
  for (std::size_t k : k_list) {
    ExperimentConfig cfg = base;
    if (k == 0)
      cfg.train.loss_spec.max_positives.reset();
    else
      cfg.train.loss_spec.max_positives = k;
    const ExperimentRun run = run_experiment(cfg);
    out += std::to_string(k) + "," + fmt_double(run.result.top1) + "\n";
  }
  return out;
}

std::string sweep_temperature_csv(const ExperimentConfig& base,
                                  const std::vector<double>& tau_list) {
  if (tau_list.empty()) throw ConfigError("sweep_temperature: empty tau list");
  for (double tau : tau_list)
    if (!(tau > 0)) throw ConfigError("sweep_temperature: tau must be > 0");
  std::string out = "tau,top1\n";
  for (double tau : tau_list) {
    ExperimentConfig cfg = base;
    cfg.train.loss_spec.tau = tau;
    const ExperimentRun run = run_experiment(cfg);
    out += fmt_double(tau) + "," + fmt_double(run.result.top1) + "\n";
  }
  return out;
}

std::string robustness_csv(const ExperimentConfig& base,
                           const std::vector<int>& severities,
                           double base_sigma) {
  if (!contrastive_mode(base.mode))
    throw ConfigError("robustness: base mode must be contrastive");
  if (severities.empty()) throw ConfigError("robustness: empty severity list");
  for (int s : severities)
    if (s < 0 || s > 5)
      throw ConfigError("robustness: severity must be in 0..5");
  if (!(base_sigma >= 0))
    throw ConfigError("robustness: base_sigma must be >= 0");

  const ExperimentRun contrastive = run_experiment(base);
  ExperimentConfig xc = base;
  xc.mode = TrainingMode::kXent;
  const ExperimentRun baseline = run_experiment(xc);
  const Dataset ds = build_dataset(base.dataset);

  std::string out = "severity,top1_supcon,top1_xent,ece_supcon,ece_xent\n";
  for (int s : severities) {
    const EvalMetrics a =
        evaluate_corrupted(contrastive.model, contrastive.probe, ds,
                           ds.heldout_idx, s, base_sigma, base.train.seed);
    const EvalMetrics b =
        evaluate_corrupted(baseline.model, baseline.probe, ds, ds.heldout_idx,
                           s, base_sigma, base.train.seed);
    out += std::to_string(s) + "," + fmt_double(a.top1) + "," +
           fmt_double(b.top1) + "," + fmt_double(a.ece) + "," +
           fmt_double(b.ece) + "\n";
  }
  return out;
}

}  // namespace supcon
