#pragma once

// Reproducible experiment drivers behind the command-line tool. Every driver
// is a pure function of (input files, config, seeds) and writes CSV tables
// whose first line is a `# config: {...}` comment.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mesa/dataset.hpp"
#include "mesa/ensemble.hpp"
#include "mesa/error.hpp"
#include "mesa/learners.hpp"
#include "mesa/metrics.hpp"
#include "mesa/random.hpp"
#include "mesa/sac.hpp"

namespace mesa {

struct ExperimentConfig {
  std::string label_column = "label";
  LearnerKind learner = LearnerKind::tree;
  double train_fraction = 0.6;
  double valid_fraction = 0.2;
  double test_fraction = 0.2;
  Seed meta_seed = 0;
  double subsample_fraction = 1.0;  // meta-train on this stratified share of each task
  SacConfig sac;                    // also carries ensemble size k, bins and sigma
  std::vector<std::size_t> k_list = {5, 10, 20};
  std::vector<double> noise_ratios = {0.0, 0.1, 0.25, 0.4};
  ToySpec toy;

  ExperimentConfig() { sac.ensemble_size = 10; }

  SplitSpec split(Seed seed) const { return {train_fraction, valid_fraction, test_fraction, seed}; }

  void validate() const {
    split(0).validate();
    sac.validate();
    toy.validate();
    if (!(subsample_fraction > 0 && subsample_fraction <= 1)) {
      throw ConfigError("subsample_fraction must lie in (0,1]");
    }
    for (std::size_t k : k_list) {
      if (k < 2) throw ConfigError("every k in k_list must be at least 2");
    }
    for (double r : noise_ratios) {
      if (!(r >= 0 && r < 1)) throw ConfigError("noise ratios must lie in [0,1)");
    }
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["label_column"] = label_column;
    j["learner"] = to_string(learner);
    j["split"] = {{"train", train_fraction}, {"valid", valid_fraction}, {"test", test_fraction}};
    j["meta_seed"] = meta_seed;
    j["subsample_fraction"] = subsample_fraction;
    j["ensemble_size"] = sac.ensemble_size;
    j["bins"] = sac.bins;
    j["sigma"] = sac.sigma;
    j["k_list"] = k_list;
    j["noise_ratios"] = noise_ratios;
    j["sac"] = {{"gamma", sac.gamma},
                {"tau", sac.tau},
                {"alpha", sac.alpha},
                {"learning_rate", sac.learning_rate},
                {"lr_decay_steps", sac.lr_decay_steps},
                {"lr_decay_ratio", sac.lr_decay_ratio},
                {"batch_size", sac.batch_size},
                {"replay_capacity", sac.replay_capacity},
                {"gradient_steps", sac.gradient_steps},
                {"random_steps", sac.random_steps},
                {"max_episodes", sac.max_episodes},
                {"hidden", sac.hidden}};
    j["toy"] = {{"n_majority", toy.n_majority},
                {"n_minority", toy.n_minority},
                {"overlap", toy.overlap},
                {"seed", toy.seed}};
    return j;
  }

  // Missing keys keep their defaults; unknown keys are rejected.
  static ExperimentConfig from_json(const nlohmann::json& j) {
    static const std::vector<std::string> known = {
        "label_column", "learner", "split",  "meta_seed", "subsample_fraction", "ensemble_size",
        "bins",         "sigma",   "k_list", "noise_ratios", "sac",             "toy"};
    ExperimentConfig c;
    try {
      if (!j.is_object()) throw ConfigError("config must be a JSON object");
      for (const auto& [key, _] : j.items()) {
        if (std::find(known.begin(), known.end(), key) == known.end()) {
          throw ConfigError("unknown config key '" + key + "'");
        }
      }
      auto get = [&](const nlohmann::json& obj, const char* key, auto& field) {
        if (obj.contains(key)) field = obj.at(key).get<std::decay_t<decltype(field)>>();
      };
      get(j, "label_column", c.label_column);
      if (j.contains("learner")) c.learner = parse_learner(j.at("learner").get<std::string>());
      if (j.contains("split")) {
        const auto& s = j.at("split");
        get(s, "train", c.train_fraction);
        get(s, "valid", c.valid_fraction);
        get(s, "test", c.test_fraction);
      }
      get(j, "meta_seed", c.meta_seed);
      get(j, "subsample_fraction", c.subsample_fraction);
      get(j, "ensemble_size", c.sac.ensemble_size);
      get(j, "bins", c.sac.bins);
      get(j, "sigma", c.sac.sigma);
      get(j, "k_list", c.k_list);
      get(j, "noise_ratios", c.noise_ratios);
      if (j.contains("sac")) {
        const auto& s = j.at("sac");
        get(s, "gamma", c.sac.gamma);
        get(s, "tau", c.sac.tau);
        get(s, "alpha", c.sac.alpha);
        get(s, "learning_rate", c.sac.learning_rate);
        get(s, "lr_decay_steps", c.sac.lr_decay_steps);
        get(s, "lr_decay_ratio", c.sac.lr_decay_ratio);
        get(s, "batch_size", c.sac.batch_size);
        get(s, "replay_capacity", c.sac.replay_capacity);
        get(s, "gradient_steps", c.sac.gradient_steps);
        get(s, "random_steps", c.sac.random_steps);
        get(s, "max_episodes", c.sac.max_episodes);
        get(s, "hidden", c.sac.hidden);
      }
      if (j.contains("toy")) {
        const auto& t = j.at("toy");
        get(t, "n_majority", c.toy.n_majority);
        get(t, "n_minority", c.toy.n_minority);
        get(t, "overlap", c.toy.overlap);
        get(t, "seed", c.toy.seed);
      }
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("bad config value: ") + e.what());
    }
    c.validate();
    return c;
  }

  static ExperimentConfig load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("config " + path + " is not valid JSON: " + e.what());
    }
    return from_json(j);
  }
};

// "0,3,5-9" -> {0,3,5,6,7,8,9}
inline std::vector<Seed> parse_seed_list(const std::string& text) {
  std::vector<Seed> seeds;
  std::stringstream ss(text);
  std::string item;
  auto to_seed = [&](const std::string& s) -> Seed {
    std::size_t used = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(s, &used);
    } catch (const std::exception&) {
      throw ConfigError("bad seed '" + s + "'");
    }
    if (used != s.size()) throw ConfigError("bad seed '" + s + "'");
    return v;
  };
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const auto dash = item.find('-');
    if (dash == std::string::npos) {
      seeds.push_back(to_seed(item));
    } else {
      const Seed lo = to_seed(item.substr(0, dash));
      const Seed hi = to_seed(item.substr(dash + 1));
      if (hi < lo || hi - lo > 100000) throw ConfigError("bad seed range '" + item + "'");
      for (Seed s = lo; s <= hi; ++s) seeds.push_back(s);
    }
  }
  if (seeds.empty()) throw ConfigError("seed list is empty");
  return seeds;
}

// ---------------------------------------------------------------------------
// Evaluation primitives
// ---------------------------------------------------------------------------

enum class Method { mesa, random_policy, random_sampling };

inline const char* to_string(Method m) {
  switch (m) {
    case Method::mesa: return "mesa_policy";
    case Method::random_policy: return "random_policy";
    case Method::random_sampling: return "random_sampling";
  }
  return "?";
}

struct EvalResult {
  double test_aucprc = 0.0;
  double valid_aucprc = 0.0;
  EnsembleModel model;
};

// Randomly initialised (untrained) meta-sampler used by the random-policy
// ablation; one independent initialisation per evaluation seed.
inline MetaSampler random_policy_for(Seed seed, const SacConfig& sac) {
  return MetaSampler::random_init(sac.bins, sac.sigma, derive_seed(seed, 0x7a7du), sac.hidden);
}

// Trains a k-member ensemble with the given method on `split` and scores it.
// `sampler` is required for Method::mesa and ignored otherwise.
inline EvalResult evaluate_method(Method method, const Split& split, const MetaSampler* sampler,
                                  std::size_t k, const SacConfig& sac, const LearnerFactory& learner,
                                  Seed seed) {
  const Seed ens_seed = derive_seed(seed, 0xe5e5u);
  EvalResult out;
  if (method == Method::random_sampling) {
    out.model = train_random_ensemble(split.train, k, learner, ens_seed);
  } else {
    const TrainingTask task{split.train, split.valid};
    const EnsembleConfig ec{k, sac.bins, sac.sigma};
    if (method == Method::mesa) {
      if (sampler == nullptr) throw ConfigError("mesa evaluation needs a meta-sampler");
      PolicyActionSource src(*sampler);
      out.model = train_ensemble(task, src, ec, learner, ens_seed).model;
    } else {
      const MetaSampler rnd = random_policy_for(seed, sac);
      PolicyActionSource src(rnd);
      out.model = train_ensemble(task, src, ec, learner, ens_seed).model;
    }
  }
  out.test_aucprc = aucprc(out.model, split.test);
  out.valid_aucprc = aucprc(out.model, split.valid);
  return out;
}

// Meta-training set for one dataset: optional stratified subsample, then the
// train/validation parts of a split drawn from the meta seed.
inline TrainingTask meta_task_for(const LabeledDataset& ds, const ExperimentConfig& cfg,
                                  std::size_t index = 0) {
  const LabeledDataset base =
      cfg.subsample_fraction < 1.0
          ? stratified_subsample(ds, cfg.subsample_fraction, derive_seed(cfg.meta_seed, 0x5b5bu, index))
          : ds;
  Split sp = stratified_split(base, cfg.split(derive_seed(cfg.meta_seed, 0x3e7au, index)));
  return {std::move(sp.train), std::move(sp.valid)};
}

inline MetaTrainResult meta_train_on(const std::vector<TrainingTask>& tasks, const ExperimentConfig& cfg,
                                     std::size_t k) {
  SacConfig sac = cfg.sac;
  sac.ensemble_size = k;
  return meta_train(tasks, sac, make_learner_factory(cfg.learner), derive_seed(cfg.meta_seed, 0x3e7bu));
}

struct Summary {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation (n - 1)
};

inline Summary summarize(const std::vector<double>& xs) {
  Summary s;
  if (xs.empty()) return s;
  for (double x : xs) s.mean += x;
  s.mean /= static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double acc = 0.0;
    for (double x : xs) acc += (x - s.mean) * (x - s.mean);
    s.std = std::sqrt(acc / static_cast<double>(xs.size() - 1));
  }
  return s;
}

// ---------------------------------------------------------------------------
// Output
// ---------------------------------------------------------------------------

class CsvTable {
 public:
  CsvTable(const nlohmann::json& config, std::vector<std::string> columns)
      : config_(config.dump()), columns_(std::move(columns)) {}

  CsvTable& row(const std::vector<std::string>& cells) {
    if (cells.size() != columns_.size()) throw ConfigError("CSV row width mismatch");
    rows_.push_back(cells);
    return *this;
  }

  void write(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError(DataErrc::missing_file, "cannot write " + path.string());
    out << "# config: " << config_ << '\n';
    for (std::size_t i = 0; i < columns_.size(); ++i) out << (i ? "," : "") << columns_[i];
    out << '\n';
    for (const auto& r : rows_) {
      for (std::size_t i = 0; i < r.size(); ++i) out << (i ? "," : "") << r[i];
      out << '\n';
    }
  }

 private:
  std::string config_;
  std::vector<std::string> columns_;
  std::vector<std::vector<std::string>> rows_;
};

inline std::string fmt(double v) { return format_double(v); }
inline std::string fmt(std::size_t v) { return std::to_string(v); }

inline std::filesystem::path prepare_out_dir(const std::string& dir) {
  std::filesystem::path p(dir);
  std::error_code ec;
  std::filesystem::create_directories(p, ec);
  if (ec || !std::filesystem::is_directory(p)) throw ConfigError("cannot create output directory " + dir);
  return p;
}

inline void write_json(const nlohmann::json& j, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(DataErrc::missing_file, "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

inline nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError(DataErrc::missing_file, "cannot open " + path);
  try {
    nlohmann::json j;
    in >> j;
    return j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + " is not valid JSON: " + e.what());
  }
}

inline std::string seeds_text(const std::vector<Seed>& seeds) {
  std::string s;
  for (std::size_t i = 0; i < seeds.size(); ++i) s += (i ? " " : "") + std::to_string(seeds[i]);
  return s;
}

inline nlohmann::json run_record(const ExperimentConfig& cfg, const std::string& command,
                                 const std::vector<std::string>& inputs, const std::vector<Seed>& seeds) {
  nlohmann::json j = cfg.to_json();
  j["command"] = command;
  j["inputs"] = inputs;
  j["seeds"] = seeds;
  return j;
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

inline void cmd_generate_toy(const ToySpec& spec, const std::string& out_path) {
  write_csv(make_toy(spec), out_path);
}

// Writes sampler.json and training_log.csv.
inline MetaTrainResult cmd_meta_train(const ExperimentConfig& cfg, const std::vector<std::string>& task_csvs,
                                      const std::string& out_dir) {
  if (task_csvs.empty()) throw ConfigError("meta-train needs at least one task CSV");
  const auto dir = prepare_out_dir(out_dir);
  std::vector<TrainingTask> tasks;
  for (std::size_t i = 0; i < task_csvs.size(); ++i) {
    tasks.push_back(meta_task_for(load_csv(task_csvs[i], cfg.label_column), cfg, i));
  }
  MetaTrainResult res = meta_train_on(tasks, cfg, cfg.sac.ensemble_size);
  write_json(serialize_sampler(res.sampler), dir / "sampler.json");
  CsvTable log(run_record(cfg, "meta-train", task_csvs, {cfg.meta_seed}),
               {"episode", "task", "step", "action", "reward", "valid_aucprc"});
  for (const auto& r : res.log) {
    log.row({fmt(r.episode), fmt(r.task), fmt(r.step), fmt(r.action), fmt(r.reward), fmt(r.valid_aucprc)});
  }
  log.write(dir / "training_log.csv");
  return res;
}

struct TrainMode {
  Method method = Method::mesa;
  std::string sampler_path;  // for Method::mesa
};

inline TrainMode parse_train_mode(const std::string& mode, const std::string& sampler_path) {
  if (mode == "mesa") {
    if (sampler_path.empty()) throw ConfigError("mode 'mesa' needs --sampler");
    return {Method::mesa, sampler_path};
  }
  if (mode == "random-policy") return {Method::random_policy, {}};
  if (mode == "random-sampling") return {Method::random_sampling, {}};
  throw ConfigError("unknown mode '" + mode + "' (mesa, random-policy, random-sampling)");
}

// Per-seed test AUCPRC table plus the test-set precision-recall curve of each seed.
inline std::vector<double> cmd_train(const ExperimentConfig& cfg, const TrainMode& mode,
                                     const std::string& task_csv, const std::vector<Seed>& seeds,
                                     const std::string& out_dir) {
  if (seeds.empty()) throw ConfigError("seed list is empty");
  const auto dir = prepare_out_dir(out_dir);
  const LabeledDataset ds = load_csv(task_csv, cfg.label_column);
  std::optional<MetaSampler> sampler;
  if (mode.method == Method::mesa) sampler = load_sampler(read_json(mode.sampler_path), cfg.sac.bins);
  const LearnerFactory learner = make_learner_factory(cfg.learner);

  nlohmann::json record = run_record(cfg, "train", {task_csv}, seeds);
  record["mode"] = to_string(mode.method);
  CsvTable table(record, {"seed", "method", "k", "valid_aucprc", "test_aucprc"});
  CsvTable curves(record, {"seed", "threshold", "recall", "precision"});
  std::vector<double> scores;
  for (Seed s : seeds) {
    const Split sp = stratified_split(ds, cfg.split(s));
    const EvalResult r = evaluate_method(mode.method, sp, sampler ? &*sampler : nullptr,
                                         cfg.sac.ensemble_size, cfg.sac, learner, s);
    scores.push_back(r.test_aucprc);
    table.row({std::to_string(s), to_string(mode.method), fmt(cfg.sac.ensemble_size), fmt(r.valid_aucprc),
               fmt(r.test_aucprc)});
    for (const PrPoint& p : pr_curve(predict_all(r.model, sp.test), sp.test.labels())) {
      curves.row({std::to_string(s), fmt(p.threshold), fmt(p.recall), fmt(p.precision)});
    }
  }
  table.write(dir / "results.csv");
  curves.write(dir / "pr_curves.csv");
  return scores;
}

struct MethodScores {
  std::map<Method, std::vector<double>> by_method;
};

inline void add_summary_rows(CsvTable& t, const std::string& prefix_cells_key, std::size_t k,
                             const MethodScores& ms) {
  const Summary base = summarize(ms.by_method.at(Method::mesa));
  for (Method m : {Method::mesa, Method::random_policy, Method::random_sampling}) {
    const Summary s = summarize(ms.by_method.at(m));
    const std::string delta = m == Method::mesa ? "baseline" : fmt(100.0 * (s.mean - base.mean) / base.mean);
    t.row({prefix_cells_key, fmt(k), to_string(m), fmt(s.mean), fmt(s.std), delta});
  }
}

struct AblationResult {
  std::map<std::size_t, MethodScores> by_k;
};

// MESA policy vs. random policy vs. random sampling, per ensemble size. The
// meta-sampler is trained once per k on the meta split of the task.
inline AblationResult cmd_ablation(const ExperimentConfig& cfg, const std::string& task_csv,
                                   const std::vector<Seed>& seeds, const std::string& out_dir) {
  if (seeds.empty()) throw ConfigError("seed list is empty");
  const auto dir = prepare_out_dir(out_dir);
  const LabeledDataset ds = load_csv(task_csv, cfg.label_column);
  const LearnerFactory learner = make_learner_factory(cfg.learner);
  const nlohmann::json record = run_record(cfg, "ablation", {task_csv}, seeds);
  CsvTable raw(record, {"k", "seed", "method", "test_aucprc"});
  CsvTable summary(record, {"task", "k", "method", "mean", "std", "delta_pct"});
  AblationResult result;
  const TrainingTask meta = meta_task_for(ds, cfg);
  for (std::size_t k : cfg.k_list) {
    const MetaTrainResult trained = meta_train_on({meta}, cfg, k);
    MethodScores& ms = result.by_k[k];
    for (Seed s : seeds) {
      const Split sp = stratified_split(ds, cfg.split(s));
      for (Method m : {Method::mesa, Method::random_policy, Method::random_sampling}) {
        const double v = evaluate_method(m, sp, &trained.sampler, k, cfg.sac, learner, s).test_aucprc;
        ms.by_method[m].push_back(v);
        raw.row({fmt(k), std::to_string(s), to_string(m), fmt(v)});
      }
    }
    add_summary_rows(summary, std::filesystem::path(task_csv).filename().string(), k, ms);
  }
  raw.write(dir / "ablation_raw.csv");
  summary.write(dir / "ablation.csv");
  return result;
}

struct NoiseSweepResult {
  std::map<double, MethodScores> by_ratio;
};

// Flip noise is injected into the training split only (for meta-training and
// for evaluation); validation and test splits stay clean. One meta-sampler is
// trained per noise level.
inline NoiseSweepResult cmd_noise_sweep(const ExperimentConfig& cfg, const std::string& task_csv,
                                        const std::vector<Seed>& seeds, const std::string& out_dir) {
  if (seeds.empty()) throw ConfigError("seed list is empty");
  const auto dir = prepare_out_dir(out_dir);
  const LabeledDataset ds = load_csv(task_csv, cfg.label_column);
  const LearnerFactory learner = make_learner_factory(cfg.learner);
  const std::size_t k = cfg.sac.ensemble_size;
  const nlohmann::json record = run_record(cfg, "noise-sweep", {task_csv}, seeds);
  CsvTable raw(record, {"noise_ratio", "seed", "method", "test_aucprc"});
  CsvTable summary(record, {"noise_ratio", "k", "method", "mean", "std", "delta_pct"});
  NoiseSweepResult result;
  const TrainingTask clean_meta = meta_task_for(ds, cfg);
  for (std::size_t ri = 0; ri < cfg.noise_ratios.size(); ++ri) {
    const double ratio = cfg.noise_ratios[ri];
    const TrainingTask meta{inject_flip_noise(clean_meta.train, ratio, derive_seed(cfg.meta_seed, 0x401eu, ri)),
                            clean_meta.valid};
    const MetaTrainResult trained = meta_train_on({meta}, cfg, k);
    MethodScores& ms = result.by_ratio[ratio];
    for (Seed s : seeds) {
      Split sp = stratified_split(ds, cfg.split(s));
      sp.train = inject_flip_noise(sp.train, ratio, derive_seed(s, 0x401fu, ri));
      for (Method m : {Method::mesa, Method::random_policy, Method::random_sampling}) {
        const double v = evaluate_method(m, sp, &trained.sampler, k, cfg.sac, learner, s).test_aucprc;
        ms.by_method[m].push_back(v);
        raw.row({fmt(ratio), std::to_string(s), to_string(m), fmt(v)});
      }
    }
    add_summary_rows(summary, fmt(ratio), k, ms);
  }
  raw.write(dir / "noise_raw.csv");
  summary.write(dir / "noise.csv");
  return result;
}

struct TransferResult {
  std::vector<double> transferred, random_policy, random_sampling, reference;
};

// Applies a pre-trained sampler to a new task without retraining. With a
// reference sampler (meta-trained natively on the task), also reports the
// relative loss against it.
inline TransferResult cmd_transfer(const ExperimentConfig& cfg, const std::string& sampler_path,
                                   const std::string& task_csv, const std::vector<Seed>& seeds,
                                   const std::string& out_dir, const std::string& reference_path = {}) {
  if (seeds.empty()) throw ConfigError("seed list is empty");
  const auto dir = prepare_out_dir(out_dir);
  const LabeledDataset ds = load_csv(task_csv, cfg.label_column);
  const MetaSampler sampler = load_sampler(read_json(sampler_path), cfg.sac.bins);
  std::optional<MetaSampler> reference;
  if (!reference_path.empty()) reference = load_sampler(read_json(reference_path), cfg.sac.bins);
  const LearnerFactory learner = make_learner_factory(cfg.learner);
  const std::size_t k = cfg.sac.ensemble_size;

  std::vector<std::string> inputs = {sampler_path, task_csv};
  if (!reference_path.empty()) inputs.push_back(reference_path);
  const nlohmann::json record = run_record(cfg, "transfer", inputs, seeds);
  CsvTable raw(record, {"seed", "method", "test_aucprc"});
  TransferResult res;
  for (Seed s : seeds) {
    const Split sp = stratified_split(ds, cfg.split(s));
    auto run = [&](Method m, const MetaSampler* smp, const char* name, std::vector<double>& dst) {
      const double v = evaluate_method(m, sp, smp, k, cfg.sac, learner, s).test_aucprc;
      dst.push_back(v);
      raw.row({std::to_string(s), name, fmt(v)});
    };
    run(Method::mesa, &sampler, "transferred", res.transferred);
    if (reference) run(Method::mesa, &*reference, "reference", res.reference);
    run(Method::random_policy, nullptr, "random_policy", res.random_policy);
    run(Method::random_sampling, nullptr, "random_sampling", res.random_sampling);
  }
  CsvTable summary(record, {"method", "mean", "std", "delta_vs_reference_pct"});
  const std::optional<Summary> ref =
      reference ? std::optional<Summary>(summarize(res.reference)) : std::nullopt;
  auto add = [&](const char* name, const std::vector<double>& xs) {
    const Summary s = summarize(xs);
    summary.row({name, fmt(s.mean), fmt(s.std), ref ? fmt(100.0 * (s.mean - ref->mean) / ref->mean) : "NA"});
  };
  add("transferred", res.transferred);
  if (reference) add("reference", res.reference);
  add("random_policy", res.random_policy);
  add("random_sampling", res.random_sampling);
  raw.write(dir / "transfer_raw.csv");
  summary.write(dir / "transfer.csv");
  return res;
}

}  // namespace mesa
