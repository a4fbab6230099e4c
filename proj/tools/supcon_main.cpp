#include <cinttypes>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "supcon/errors.hpp"
#include "supcon/experiment.hpp"
#include "supcon/gradients.hpp"
#include "supcon/verify.hpp"

namespace {

std::uint64_t default_seed() {
  if (const char* env = std::getenv("SUPCON_SEED")) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (end && *end == '\0' && end != env) return v;
    std::fprintf(stderr, "warning: ignoring non-numeric SUPCON_SEED\n");
  }
  return 42;
}

struct TrainCli {
  std::string loss = "supout";
  std::string dataset = "blobs:c=4,n=200,d=10,s=3,sigma=0.3,seed=7";
  double tau = 0.1;
  std::size_t epochs = 100;
  std::size_t batch_n = 64;
  std::size_t max_positives = 0;  // 0 = uncapped
  std::uint64_t seed = 42;
  double lr = 0.1;
  double momentum = 0.9;
  std::size_t probe_epochs = 200;
  double probe_lr = 0.5;
  bool rescale = false;
  double jitter = 0.1;
  double noise = 0.2;
  double mask = 0.1;
};

void add_train_flags(CLI::App* cmd, TrainCli& o, bool with_loss) {
  if (with_loss)
    cmd->add_option("--loss", o.loss, "training objective")
        ->check(CLI::IsMember({"selfsup", "supout", "supin", "npairs", "xent",
                               "xent-twostage"}));
  cmd->add_option("--dataset", o.dataset,
                  "blobs:c=..,n=..,d=..,s=..,sigma=..,seed=.. or csv:<path>");
  cmd->add_option("--tau", o.tau, "softmax temperature");
  cmd->add_option("--epochs", o.epochs, "stage-1 epochs");
  cmd->add_option("--batch-n", o.batch_n, "source samples per batch");
  cmd->add_option("--max-positives", o.max_positives,
                  "cap positives per anchor (0 = uncapped)");
  cmd->add_option("--seed", o.seed, "run seed");
  cmd->add_option("--lr", o.lr, "stage-1 learning rate");
  cmd->add_option("--momentum", o.momentum, "SGD momentum");
  cmd->add_option("--probe-epochs", o.probe_epochs, "stage-2 epochs");
  cmd->add_option("--probe-lr", o.probe_lr, "stage-2 learning rate");
  cmd->add_flag("--rescale-by-tau", o.rescale,
                "multiply the loss and gradient by tau");
  cmd->add_option("--jitter", o.jitter, "augment: scale jitter range");
  cmd->add_option("--noise-sigma", o.noise, "augment: Gaussian noise sigma");
  cmd->add_option("--mask-prob", o.mask,
                  "augment: per-coordinate zeroing probability");
}

supcon::ExperimentConfig to_config(const TrainCli& o) {
  supcon::ExperimentConfig cfg;
  cfg.mode = supcon::parse_training_mode(o.loss);
  cfg.dataset = supcon::parse_dataset_spec(o.dataset);
  cfg.train.loss_spec.tau = o.tau;
  if (o.max_positives > 0)
    cfg.train.loss_spec.max_positives = o.max_positives;
  cfg.train.loss_spec.rescale_by_tau = o.rescale;
  cfg.train.epochs = o.epochs;
  cfg.train.batch_n = o.batch_n;
  cfg.train.learning_rate = o.lr;
  cfg.train.momentum = o.momentum;
  cfg.train.seed = o.seed;
  cfg.train.probe_epochs = o.probe_epochs;
  cfg.train.probe_learning_rate = o.probe_lr;
  cfg.train.augment.scale_jitter = o.jitter;
  cfg.train.augment.noise_sigma = o.noise;
  cfg.train.augment.mask_prob = o.mask;
  return cfg;
}

void write_text_artifact(const std::string& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw supcon::Error("cannot open output file " + path);
  out << body;
  if (!out) throw supcon::Error("failed writing " + path);
}

void emit_table(const std::string& out_path, const std::string& csv) {
  if (out_path.empty())
    std::fputs(csv.c_str(), stdout);
  else
    write_text_artifact(out_path, csv);
}

int cmd_verify(std::uint64_t seed) {
  const std::vector<supcon::PropertyResult> results =
      supcon::run_verification_suite(seed);
  std::size_t passed = 0;
  for (const auto& r : results) {
    std::printf("[%s] %-20s worst=%11.4e tol=%.1e  %s\n",
                r.pass ? "PASS" : "FAIL", r.name.c_str(), r.worst,
                r.tolerance, r.detail.c_str());
    if (r.pass) ++passed;
  }
  std::printf("verify: %zu/%zu properties passed (seed %" PRIu64 ")\n", passed,
              results.size(), seed);
  return passed == results.size() ? 0 : 1;
}

struct GradCli {
  std::size_t batch_n = 8;
  std::size_t dim = 8;
  double tau = 0.1;
  std::string variant = "all";
  std::uint64_t seed = 42;
  double fd_step = 1e-6;
};

int cmd_gradcheck(const GradCli& o) {
  std::vector<supcon::LossVariant> variants;
  if (o.variant == "all")
    variants = {supcon::LossVariant::kSelfSup, supcon::LossVariant::kSupOut,
                supcon::LossVariant::kSupIn};
  else if (o.variant == "selfsup")
    variants = {supcon::LossVariant::kSelfSup};
  else if (o.variant == "supout")
    variants = {supcon::LossVariant::kSupOut};
  else if (o.variant == "supin")
    variants = {supcon::LossVariant::kSupIn};
  else if (o.variant == "npairs")
    variants = {supcon::LossVariant::kNPairs};
  else
    throw supcon::ConfigError("gradcheck: unknown variant " + o.variant);
  if (o.batch_n < 2)
    throw supcon::ConfigError("gradcheck: batch-n must be at least 2");
  if (o.variant == "npairs" && o.batch_n < 4)
    throw supcon::ConfigError("gradcheck: npairs needs batch-n >= 4");

  double worst = 0.0;
  for (std::size_t v = 0; v < variants.size(); ++v) {
    const supcon::LossVariant variant = variants[v];
    supcon::Rng rng = supcon::Rng(o.seed).child(v);
    std::vector<int> labels(o.batch_n);
    for (std::size_t i = 0; i < o.batch_n; ++i)
      labels[i] = variant == supcon::LossVariant::kNPairs
                      ? static_cast<int>(i % 2)
                      : static_cast<int>(rng.uniform_index(3));
    const supcon::BatchStructure s = supcon::make_batch_structure(
        labels, variant != supcon::LossVariant::kSelfSup);
    supcon::Matrix w(2 * o.batch_n, o.dim);
    for (double& x : w.data) x = rng.normal();
    const supcon::Matrix z = supcon::normalize_rows(w).matrix();
    const supcon::GradientReport gz =
        supcon::check_gradient_z(z, s, o.tau, variant, o.fd_step);
    const supcon::GradientReport gw =
        supcon::check_gradient_w(w, s, o.tau, variant, o.fd_step);
    std::printf("%-8s max_rel_err z=%.4e w=%.4e\n",
                std::string(supcon::loss_variant_name(variant)).c_str(),
                gz.max_rel_err, gw.max_rel_err);
    worst = std::max({worst, gz.max_rel_err, gw.max_rel_err});
  }
  std::printf("gradcheck: worst=%.4e gate=1e-06\n", worst);
  return worst <= 1e-6 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"supcon: supervised contrastive loss laboratory"};
  app.require_subcommand(1);
  const std::uint64_t seed0 = default_seed();

  std::uint64_t verify_seed = seed0;
  CLI::App* verify = app.add_subcommand("verify", "run the property suite");
  verify->add_option("--seed", verify_seed, "suite seed");

  GradCli gc;
  gc.seed = seed0;
  CLI::App* gradcheck = app.add_subcommand(
      "gradcheck", "compare analytical gradients with finite differences");
  gradcheck->add_option("--batch-n", gc.batch_n, "source samples");
  gradcheck->add_option("--dim", gc.dim, "embedding dimension");
  gradcheck->add_option("--tau", gc.tau, "temperature");
  gradcheck->add_option("--variant", gc.variant,
                        "selfsup|supout|supin|npairs|all");
  gradcheck->add_option("--seed", gc.seed, "batch seed");
  gradcheck->add_option("--fd-step", gc.fd_step, "central-difference step");

  TrainCli tc;
  tc.seed = seed0;
  std::string train_out = "result.json";
  CLI::App* train =
      app.add_subcommand("train", "two-stage training run, writes a result file");
  add_train_flags(train, tc, true);
  train->add_option("--out", train_out, "result file path");

  TrainCli kc;
  kc.seed = seed0;
  std::vector<std::size_t> k_list = {0, 1, 2, 4};
  std::string sweep_k_out;
  CLI::App* sweep_k = app.add_subcommand(
      "sweep-positives", "train per positive cap, emit CSV (k,top1)");
  add_train_flags(sweep_k, kc, true);
  sweep_k->add_option("--k-list", k_list, "caps to sweep (0 = uncapped)")
      ->delimiter(',');
  sweep_k->add_option("--out", sweep_k_out, "CSV path (default stdout)");

  TrainCli tauc;
  tauc.seed = seed0;
  std::vector<double> tau_list = {0.05, 0.1, 0.5, 1.0};
  std::string sweep_tau_out;
  CLI::App* sweep_tau = app.add_subcommand(
      "sweep-temperature", "train per temperature, emit CSV (tau,top1)");
  add_train_flags(sweep_tau, tauc, true);
  sweep_tau->add_option("--tau-list", tau_list, "temperatures to sweep")
      ->delimiter(',');
  sweep_tau->add_option("--out", sweep_tau_out, "CSV path (default stdout)");

  TrainCli rc;
  rc.seed = seed0;
  std::vector<int> severities = {0, 1, 2, 3, 4, 5};
  double base_sigma = 0.25;
  std::string robustness_out;
  CLI::App* robustness = app.add_subcommand(
      "robustness",
      "evaluate contrastive and cross-entropy models on corrupted data");
  add_train_flags(robustness, rc, true);
  robustness->add_option("--severities", severities, "severity levels 0..5")
      ->delimiter(',');
  robustness->add_option("--base-sigma", base_sigma,
                         "corruption noise scale per severity step");
  robustness->add_option("--out", robustness_out, "CSV path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*verify) return cmd_verify(verify_seed);
    if (*gradcheck) return cmd_gradcheck(gc);
    if (*train) {
      const supcon::ExperimentRun run = run_experiment(to_config(tc));
      write_text_artifact(train_out, supcon::serialize_result(run.result));
      std::fprintf(stderr,
                   "train: mode=%s top1=%.4f ece=%.4f wall_time_s=%.2f -> %s\n",
                   supcon::training_mode_name(run.result.config.mode),
                   run.result.top1, run.result.ece,
                   run.result.wall_time_seconds, train_out.c_str());
      return 0;
    }
    if (*sweep_k) {
      emit_table(sweep_k_out, supcon::sweep_positives_csv(to_config(kc), k_list));
      return 0;
    }
    if (*sweep_tau) {
      emit_table(sweep_tau_out,
                 supcon::sweep_temperature_csv(to_config(tauc), tau_list));
      return 0;
    }
    if (*robustness) {
      emit_table(robustness_out,
                 supcon::robustness_csv(to_config(rc), severities, base_sigma));
      return 0;
    }
  } catch (const supcon::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const supcon::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 2;
}
