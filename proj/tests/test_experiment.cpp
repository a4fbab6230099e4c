#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "supcon/data.hpp"
#include "supcon/errors.hpp"
#include "supcon/experiment.hpp"

using namespace supcon;

namespace {

ExperimentConfig tiny_config(TrainingMode mode) {
  ExperimentConfig cfg;
  cfg.mode = mode;
  cfg.dataset.classes = 3;
  cfg.dataset.per_class = 12;
  cfg.dataset.dim = 5;
  cfg.dataset.separation = 3.0;
  cfg.dataset.spread = 0.3;
  cfg.dataset.seed = 7;
  cfg.train.epochs = 3;
  cfg.train.batch_n = 8;
  cfg.train.learning_rate = 0.05;
  cfg.train.seed = 42;
  cfg.train.probe_epochs = 40;
  cfg.train.augment.noise_sigma = 0.1;
  cfg.train.model.encoder_hidden = {8};
  cfg.train.model.repr_dim = 6;
  cfg.train.model.projection_hidden = {};
  cfg.train.model.proj_dim = 4;
  return cfg;
}

}  // namespace

TEST_SUITE("experiment") {

TEST_CASE("training mode names round-trip") {
  const TrainingMode modes[] = {TrainingMode::kSelfSup, TrainingMode::kSupOut,
                                TrainingMode::kSupIn,   TrainingMode::kNPairs,
                                TrainingMode::kXent,
                                TrainingMode::kXentTwoStage};
  for (TrainingMode m : modes)
    CHECK(parse_training_mode(training_mode_name(m)) == m);
  CHECK(training_mode_name(TrainingMode::kXentTwoStage) ==
        std::string("xent-twostage"));
  CHECK_THROWS_AS(parse_training_mode("bogus"), ConfigError);
}

TEST_CASE("dataset spec parsing fills defaults and rejects junk") {
  const DatasetSpec d = parse_dataset_spec("blobs:c=5,sigma=0.7");
  CHECK(d.kind == DatasetSpec::Kind::kBlobs);
  CHECK(d.classes == 5);
  CHECK(d.spread == 0.7);
  CHECK(d.per_class == 200);
  CHECK(d.dim == 10);
  CHECK(d.separation == 3.0);
  CHECK(d.seed == 7);

  const DatasetSpec full =
      parse_dataset_spec("blobs:c=4,n=50,d=8,s=2.5,sigma=0.4,seed=11");
  CHECK(full.per_class == 50);
  CHECK(full.dim == 8);
  CHECK(full.separation == 2.5);
  CHECK(full.seed == 11);

  const DatasetSpec csv = parse_dataset_spec("csv:/tmp/foo.csv");
  CHECK(csv.kind == DatasetSpec::Kind::kCsv);
  CHECK(csv.csv_path == "/tmp/foo.csv");

  CHECK_THROWS_AS(parse_dataset_spec("blobs:q=3"), ConfigError);
  CHECK_THROWS_AS(parse_dataset_spec("blobs:c="), ConfigError);
  CHECK_THROWS_AS(parse_dataset_spec("blobs:c=abc"), ConfigError);
  CHECK_THROWS_AS(parse_dataset_spec("parquet:foo"), ConfigError);
  CHECK_THROWS_AS(parse_dataset_spec("csv:"), ConfigError);
  CHECK_THROWS_AS(parse_dataset_spec(""), ConfigError);
}

TEST_CASE("dataset spec string round-trips through the parser") {
  DatasetSpec d;
  d.classes = 6;
  d.per_class = 30;
  d.dim = 7;
  d.separation = 2.0;
  d.spread = 0.9;
  d.seed = 123;
  const DatasetSpec back = parse_dataset_spec(dataset_spec_string(d));
  CHECK(back.classes == d.classes);
  CHECK(back.per_class == d.per_class);
  CHECK(back.dim == d.dim);
  CHECK(back.separation == d.separation);
  CHECK(back.spread == d.spread);
  CHECK(back.seed == d.seed);
}

TEST_CASE("build_dataset honors both kinds") {
  DatasetSpec d;
  d.classes = 2;
  d.per_class = 5;
  d.dim = 3;
  const Dataset blobs = build_dataset(d);
  CHECK(blobs.size() == 10);

  const std::string path = "/tmp/supcon_test_build.csv";
  save_csv(blobs, path);
  DatasetSpec c;
  c.kind = DatasetSpec::Kind::kCsv;
  c.csv_path = path;
  const Dataset loaded = build_dataset(c);
  CHECK(loaded.size() == 10);
  CHECK(loaded.y == blobs.y);
  std::remove(path.c_str());
}

TEST_CASE("contrastive experiment produces metrics and a trajectory") {
  const ExperimentRun run = run_experiment(tiny_config(TrainingMode::kSupOut));
  CHECK(run.result.loss_trajectory.size() == 3);
  CHECK(run.result.top1 >= 0.0);
  CHECK(run.result.top1 <= 1.0);
  CHECK(run.result.wall_time_seconds > 0.0);
  CHECK(run.result.severity_top1.empty());
  CHECK(run.model.encoder.size() == 2);
  CHECK(run.probe.w.rows == 3);
}

TEST_CASE("every training mode runs end to end") {
  for (TrainingMode m : {TrainingMode::kSelfSup, TrainingMode::kSupIn,
                         TrainingMode::kXent, TrainingMode::kXentTwoStage}) {
    const ExperimentRun run = run_experiment(tiny_config(m));
    CHECK(run.result.top1 >= 0.0);
    CHECK(run.result.config.mode == m);
  }
  // the n-pairs loss needs every batch label to appear on two sources;
  // a whole-training-set batch guarantees that on grouped blobs
  ExperimentConfig np = tiny_config(TrainingMode::kNPairs);
  np.train.batch_n = 27;
  const ExperimentRun run = run_experiment(np);
  CHECK(run.result.config.mode == TrainingMode::kNPairs);
  CHECK(run.result.top1 >= 0.0);
}

TEST_CASE("result serialization round-trips every field") {
  ExperimentConfig cfg = tiny_config(TrainingMode::kSupIn);
  cfg.train.loss_spec.max_positives = 3;
  cfg.train.loss_spec.rescale_by_tau = true;
  const ExperimentRun run = run_experiment(cfg);
  const std::string text = serialize_result(run.result);
  const ExperimentResult back = parse_result(text);
  CHECK(back.config.mode == run.result.config.mode);
  CHECK(back.config.dataset.classes == cfg.dataset.classes);
  CHECK(back.config.dataset.spread == cfg.dataset.spread);
  CHECK(back.config.train.epochs == cfg.train.epochs);
  CHECK(back.config.train.loss_spec.tau == cfg.train.loss_spec.tau);
  REQUIRE(back.config.train.loss_spec.max_positives.has_value());
  CHECK(*back.config.train.loss_spec.max_positives == 3);
  CHECK(back.config.train.loss_spec.rescale_by_tau == true);
  CHECK(back.config.train.model.repr_dim == cfg.train.model.repr_dim);
  CHECK(back.loss_trajectory == run.result.loss_trajectory);
  CHECK(back.top1 == run.result.top1);
  CHECK(back.ece == run.result.ece);
  CHECK(back.wall_time_seconds == 0.0);
  // serializing the parsed value reproduces the bytes
  CHECK(serialize_result(back) == text);
}

TEST_CASE("serialized results never carry wall time") {
  const ExperimentRun run = run_experiment(tiny_config(TrainingMode::kSupOut));
  const std::string text = serialize_result(run.result);
  CHECK(text.find("wall") == std::string::npos);
  CHECK(text.find("schema") != std::string::npos);
  CHECK(text.find("supcon-result-v1") != std::string::npos);
  CHECK(text.back() == '\n');
}

TEST_CASE("repeated runs serialize to identical bytes") {
  const ExperimentConfig cfg = tiny_config(TrainingMode::kSupOut);
  const std::string a = serialize_result(run_experiment(cfg).result);
  const std::string b = serialize_result(run_experiment(cfg).result);
  CHECK(a == b);
}

TEST_CASE("parse_result rejects malformed documents") {
  CHECK_THROWS_AS(parse_result("not json"), ConfigError);
  CHECK_THROWS_AS(parse_result("{}"), ConfigError);
  CHECK_THROWS_AS(parse_result("{\"schema\":\"other-v9\"}"), ConfigError);
}

TEST_CASE("positives sweep emits one row per k with header") {
  ExperimentConfig cfg = tiny_config(TrainingMode::kSupOut);
  const std::string csv = sweep_positives_csv(cfg, {0, 1, 2});
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  CHECK(line == "k,top1");
  int rows = 0;
  while (std::getline(in, line)) {
    CHECK(line.find(',') != std::string::npos);
    ++rows;
  }
  CHECK(rows == 3);
  CHECK_THROWS_AS(sweep_positives_csv(cfg, {}), ConfigError);
  ExperimentConfig xent = tiny_config(TrainingMode::kXent);
  CHECK_THROWS_AS(sweep_positives_csv(xent, {0}), ConfigError);
}

TEST_CASE("temperature sweep emits one row per tau") {
  ExperimentConfig cfg = tiny_config(TrainingMode::kSupOut);
  const std::string csv = sweep_temperature_csv(cfg, {0.1, 0.5});
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  CHECK(line == "tau,top1");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 2);
  CHECK_THROWS_AS(sweep_temperature_csv(cfg, {0.0}), ConfigError);
}

TEST_CASE("robustness table covers both arms at every severity") {
  ExperimentConfig cfg = tiny_config(TrainingMode::kSupOut);
  const std::string csv = robustness_csv(cfg, {0, 2, 4}, 0.25);
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  CHECK(line == "severity,top1_supcon,top1_xent,ece_supcon,ece_xent");
  std::vector<std::string> rows;
  while (std::getline(in, line)) rows.push_back(line);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].substr(0, 2) == "0,");
  CHECK(rows[1].substr(0, 2) == "2,");
  CHECK(rows[2].substr(0, 2) == "4,");
  CHECK_THROWS_AS(robustness_csv(cfg, {7}, 0.25), ConfigError);
  CHECK_THROWS_AS(robustness_csv(cfg, {0}, -1.0), ConfigError);
  ExperimentConfig xent = tiny_config(TrainingMode::kXent);
  CHECK_THROWS_AS(robustness_csv(xent, {0}, 0.25), ConfigError);
}

TEST_CASE("robustness is deterministic") {
  ExperimentConfig cfg = tiny_config(TrainingMode::kSupOut);
  CHECK(robustness_csv(cfg, {0, 1}, 0.2) == robustness_csv(cfg, {0, 1}, 0.2));
}

}  // TEST_SUITE
