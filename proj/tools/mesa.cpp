// mesa: command-line front end.
//
//   mesa generate-toy --out data/ --seed 0-4
//   mesa meta-train   --config cfg.json --out run/ task.csv
//   mesa train        --mode mesa --sampler run/sampler.json --seed 0-9 --out eval/ task.csv
//   mesa ablation     --seed 0-9 --out abl/ task.csv
//   mesa noise-sweep  --seed 0-9 --out noise/ task.csv
//   mesa transfer     --seed 0-9 --out tr/ run/sampler.json other.csv
//
// Exit codes: 0 ok, 1 config/usage error, 2 data error, 3 numerical failure.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mesa/experiments.hpp"

namespace {

struct Common {
  std::string config_path;
  std::string seeds = "0-9";
  std::string out;
  std::string learner;
  std::size_t k = 0;
};

void add_common(CLI::App* cmd, Common& c, bool with_seeds = true) {
  cmd->add_option("--config", c.config_path, "JSON config file");
  if (with_seeds) cmd->add_option("--seed", c.seeds, "seed list, e.g. 0-9 or 1,4,7")->capture_default_str();
  cmd->add_option("--out", c.out, "output directory")->required();
  cmd->add_option("--learner", c.learner, "base learner: tree or gnb");
  cmd->add_option("-k,--ensemble-size", c.k, "ensemble size");
}

mesa::ExperimentConfig resolve(const Common& c) {
  mesa::ExperimentConfig cfg = c.config_path.empty() ? mesa::ExperimentConfig{}
                                                     : mesa::ExperimentConfig::load(c.config_path);
  if (!c.learner.empty()) cfg.learner = mesa::parse_learner(c.learner);
  if (c.k != 0) cfg.sac.ensemble_size = c.k;
  cfg.validate();
  return cfg;
}

int fail(int code, const char* kind, const std::string& what) {
  std::cerr << "mesa: " << kind << ": " << what << '\n';
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MESA meta-sampler experiments"};
  app.require_subcommand(1);

  Common toy_c, meta_c, train_c, abl_c, noise_c, tr_c;

  auto* toy = app.add_subcommand("generate-toy", "write toy datasets (toy_<seed>.csv per seed)");
  add_common(toy, toy_c);
  toy_c.seeds.clear();
  std::optional<double> overlap;
  std::optional<std::size_t> n_major, n_minor;
  toy->add_option("--overlap", overlap, "class overlap in [0,1]");
  toy->add_option("--n-majority", n_major);
  toy->add_option("--n-minority", n_minor);

  auto* meta = app.add_subcommand("meta-train", "meta-train a sampler; writes sampler.json and training_log.csv");
  add_common(meta, meta_c, false);
  std::optional<mesa::Seed> meta_seed;
  std::vector<std::string> meta_tasks;
  meta->add_option("--seed", meta_seed, "meta-training seed (overrides meta_seed)");
  meta->add_option("tasks", meta_tasks, "task CSVs, visited round-robin")->required();

  auto* train = app.add_subcommand("train", "train ensembles per seed; writes results.csv and pr_curves.csv");
  add_common(train, train_c);
  std::string mode = "mesa", sampler_path, train_task;
  train->add_option("--mode", mode, "mesa, random-policy or random-sampling")->capture_default_str();
  train->add_option("--sampler", sampler_path, "sampler JSON (mode mesa)");
  train->add_option("task", train_task, "task CSV")->required();

  auto* abl = app.add_subcommand("ablation", "MESA policy vs random policy vs random sampling");
  add_common(abl, abl_c);
  std::vector<std::size_t> k_list;
  std::string abl_task;
  abl->add_option("--k-list", k_list, "ensemble sizes")->delimiter(',');
  abl->add_option("task", abl_task, "task CSV")->required();

  auto* noise = app.add_subcommand("noise-sweep", "label flip noise in the training split");
  add_common(noise, noise_c);
  std::vector<double> ratios;
  std::string noise_task;
  noise->add_option("--ratios", ratios, "noise ratios")->delimiter(',');
  noise->add_option("task", noise_task, "task CSV")->required();

  auto* tr = app.add_subcommand("transfer", "apply a trained sampler to another task");
  add_common(tr, tr_c);
  std::string tr_sampler, tr_task, tr_reference;
  tr->add_option("sampler", tr_sampler, "sampler JSON")->required();
  tr->add_option("task", tr_task, "meta-test task CSV")->required();
  tr->add_option("--reference", tr_reference, "sampler meta-trained on the task itself");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (toy->parsed()) {
      mesa::ExperimentConfig cfg = resolve(toy_c);
      mesa::ToySpec spec = cfg.toy;
      if (overlap) spec.overlap = *overlap;
      if (n_major) spec.n_majority = *n_major;
      if (n_minor) spec.n_minority = *n_minor;
      spec.validate();
      const std::vector<mesa::Seed> seeds =
          toy_c.seeds.empty() ? std::vector<mesa::Seed>{spec.seed} : mesa::parse_seed_list(toy_c.seeds);
      const auto dir = mesa::prepare_out_dir(toy_c.out);
      for (mesa::Seed s : seeds) {
        spec.seed = s;
        mesa::cmd_generate_toy(spec, (dir / ("toy_" + std::to_string(s) + ".csv")).string());
      }
    } else if (meta->parsed()) {
      mesa::ExperimentConfig cfg = resolve(meta_c);
      if (meta_seed) cfg.meta_seed = *meta_seed;
      const auto res = mesa::cmd_meta_train(cfg, meta_tasks, meta_c.out);
      std::cout << "episodes " << res.episodes.size() << ", environment steps " << res.environment_steps
                << ", updates " << res.updates << '\n';
    } else if (train->parsed()) {
      const auto cfg = resolve(train_c);
      const auto m = mesa::parse_train_mode(mode, sampler_path);
      const auto scores = mesa::cmd_train(cfg, m, train_task, mesa::parse_seed_list(train_c.seeds), train_c.out);
      const auto s = mesa::summarize(scores);
      std::cout << "test AUCPRC " << s.mean << " +- " << s.std << '\n';
    } else if (abl->parsed()) {
      auto cfg = resolve(abl_c);
      if (!k_list.empty()) cfg.k_list = k_list;
      cfg.validate();
      mesa::cmd_ablation(cfg, abl_task, mesa::parse_seed_list(abl_c.seeds), abl_c.out);
    } else if (noise->parsed()) {
      auto cfg = resolve(noise_c);
      if (!ratios.empty()) cfg.noise_ratios = ratios;
      cfg.validate();
      mesa::cmd_noise_sweep(cfg, noise_task, mesa::parse_seed_list(noise_c.seeds), noise_c.out);
    } else if (tr->parsed()) {
      const auto cfg = resolve(tr_c);
      mesa::cmd_transfer(cfg, tr_sampler, tr_task, mesa::parse_seed_list(tr_c.seeds), tr_c.out, tr_reference);
    }
  } catch (const mesa::ConfigError& e) {
    return fail(1, "config error", e.what());
  } catch (const mesa::DataError& e) {
    return fail(2, "data error", e.what());
  } catch (const mesa::NumericalError& e) {
    return fail(3, "numerical error", e.what());
  } catch (const std::exception& e) {
    return fail(1, "error", e.what());
  }
  return 0;
}
