#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "mesa/dataset.hpp"
#include "mesa/ensemble.hpp"
#include "mesa/error.hpp"
#include "mesa/learners.hpp"
#include "mesa/metasampling.hpp"
#include "mesa/neural.hpp"
#include "mesa/random.hpp"

namespace mesa {

struct SacConfig {
  double gamma = 0.99;
  double tau = 0.01;
  double alpha = 0.1;
  double learning_rate = 1e-3;
  std::uint64_t lr_decay_steps = 10;
  double lr_decay_ratio = 0.99;
  std::size_t batch_size = 64;
  std::size_t replay_capacity = 1000;
  std::size_t gradient_steps = 1000;
  std::size_t random_steps = 500;
  std::size_t max_episodes = 0;  // 0: run until the gradient-step budget is spent
  std::size_t ensemble_size = 10;
  std::size_t bins = default_bins;
  double sigma = default_sigma;
  std::size_t hidden = 50;

  void validate() const {
    if (!(gamma >= 0.0 && gamma <= 1.0) || !(tau > 0.0 && tau <= 1.0) || !(alpha > 0.0 && alpha <= 1.0)) {
      throw ConfigError("need gamma in [0,1], tau in (0,1] and alpha in (0,1]");
    }
    if (!(learning_rate > 0) || !(lr_decay_ratio > 0) || lr_decay_steps == 0 || batch_size == 0 ||
        replay_capacity < batch_size || gradient_steps == 0 || ensemble_size < 2 || hidden == 0 ||
        !(sigma > 0)) {
      throw ConfigError("invalid SAC configuration");
    }
    check_bins(bins);
  }
};

// ---------------------------------------------------------------------------
// Replay memory
// ---------------------------------------------------------------------------

struct Transition {
  MetaState state;
  double action = 0.0;
  double reward = 0.0;
  MetaState next_state;
  bool terminal = false;
};

// Fixed-capacity FIFO ring buffer.
class ReplayMemory {
 public:
  explicit ReplayMemory(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw ConfigError("replay capacity must be positive");
    buffer_.reserve(capacity);
  }

  void push(Transition t) {
    if (!(t.action >= 0.0 && t.action <= 1.0)) throw NumericalError("transition action outside [0,1]");
    if (buffer_.size() < capacity_) {
      buffer_.push_back(std::move(t));
    } else {
      buffer_[head_] = std::move(t);
    }
    head_ = (head_ + 1) % capacity_;
  }

  std::size_t size() const noexcept { return buffer_.size(); }
  std::size_t capacity() const noexcept { return capacity_; }

  // Oldest-first access.
  const Transition& operator[](std::size_t i) const {
    return buffer_.size() < capacity_ ? buffer_[i] : buffer_[(head_ + i) % capacity_];
  }

  // Uniform minibatch without replacement.
  std::vector<const Transition*> sample(std::size_t n, Rng& rng) const {
    if (n > buffer_.size()) throw ConfigError("replay holds fewer transitions than the batch size");
    std::vector<std::size_t> idx(buffer_.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::vector<const Transition*> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      std::swap(idx[i], idx[i + uniform_index(rng, idx.size() - i)]);
      out.push_back(&buffer_[idx[i]]);
    }
    return out;
  }

 private:
  std::size_t capacity_;
  std::vector<Transition> buffer_;
  std::size_t head_ = 0;
};

// ---------------------------------------------------------------------------
// Meta-sampler: squashed Gaussian policy over mu in [0,1]
// ---------------------------------------------------------------------------

inline constexpr double log_std_min = -20.0;
inline constexpr double log_std_max = 2.0;

namespace detail {
inline double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }
}  // namespace detail

// log density of a = (tanh(u)+1)/2 where u ~ N(mean, exp(log_std)), written in
// terms of the standardised noise eps = (u - mean) / std.
inline double squashed_log_prob(double u, double eps, double log_std) {
  constexpr double half_log_2pi = 0.91893853320467274178;
  constexpr double ln2 = 0.69314718055994530942;
  // log(1 - tanh(u)^2) = 2 (log 2 - u - softplus(-2u))
  const double log_dtanh = 2.0 * (ln2 - u - detail::softplus(-2.0 * u));
  return -0.5 * eps * eps - log_std - half_log_2pi - (log_dtanh - ln2);
}

inline double squash(double u) { return 0.5 * (std::tanh(u) + 1.0); }

struct PolicyHead {
  double mean = 0.0;
  double log_std = 0.0;
  bool clamped = false;  // log-std hit a bound, so it carries no gradient
};

struct ActionSample {
  double action = 0.5;
  double log_prob = 0.0;
  double pre_squash = 0.0;
  double eps = 0.0;
};

class MetaSampler {
 public:
  MetaSampler() = default;
  MetaSampler(nn::Mlp policy, std::size_t bins, double sigma)
      : net_(std::move(policy)), bins_(bins), sigma_(sigma) {
    check_bins(bins_);
    if (net_.input_size() != 2 * bins_ || net_.output_size() != 2) {
      throw ConfigError("policy network must map 2b inputs to (mean, log_std)");
    }
    if (!(sigma_ > 0)) throw ConfigError("sigma must be positive");
  }

  // Hidden ReLU layer(s) feeding a linear layer with two outputs: the mean
  // head and the log-std head.
  static MetaSampler random_init(std::size_t bins, double sigma, Seed seed, std::size_t hidden = 50) {
    Rng rng(derive_seed(seed, 0x9011u));
    auto net = nn::Mlp::uniform_init({2 * bins, hidden, 2}, {nn::Activation::relu, nn::Activation::linear},
                                     rng);
    return MetaSampler(std::move(net), bins, sigma);
  }

  std::size_t bins() const noexcept { return bins_; }
  double sigma() const noexcept { return sigma_; }
  const nn::Mlp& network() const noexcept { return net_; }
  nn::Mlp& network() noexcept { return net_; }

  PolicyHead head(const MetaState& s, nn::Mlp::Cache& cache) const {
    check_state(s);
    const auto out = net_.forward(s.values(), cache);
    PolicyHead h{out[0], out[1], false};
    if (h.log_std < log_std_min || h.log_std > log_std_max) {
      h.log_std = std::clamp(h.log_std, log_std_min, log_std_max);
      h.clamped = true;
    }
    return h;
  }

  PolicyHead head(const MetaState& s) const {
    nn::Mlp::Cache cache;
    return head(s, cache);
  }

  // Reparameterised sample from a given head and standard-normal draw.
  static ActionSample sample_from(const PolicyHead& h, double eps) {
    ActionSample out;
    out.eps = eps;
    out.pre_squash = h.mean + std::exp(h.log_std) * eps;
    out.action = squash(out.pre_squash);
    out.log_prob = squashed_log_prob(out.pre_squash, eps, h.log_std);
    return out;
  }

  ActionSample sample_action(const MetaState& s, Rng& rng) const {
    return sample_from(head(s), standard_normal(rng));
  }

  ActionSample sample_action(const MetaState& s, Seed seed) const {
    Rng rng(seed);
    return sample_action(s, rng);
  }

  double deterministic_action(const MetaState& s) const { return squash(head(s).mean); }

 private:
  void check_state(const MetaState& s) const {
    if (s.size() != 2 * bins_) {
      throw DataError(DataErrc::dimension_mismatch,
                      "meta-state of length " + std::to_string(s.size()) + " for a sampler with b=" +
                          std::to_string(bins_));
    }
  }

  nn::Mlp net_;
  std::size_t bins_ = default_bins;
  double sigma_ = default_sigma;
};

// Evaluation-time adaptor: deterministic mean action, or stochastic sampling
// when a seed is supplied.
class PolicyActionSource final : public ActionSource {
 public:
  explicit PolicyActionSource(const MetaSampler& sampler) : sampler_(&sampler) {}
  PolicyActionSource(const MetaSampler& sampler, Seed seed) : sampler_(&sampler), rng_(Rng(seed)) {}

  double action(const MetaState& s) override {
    if (rng_) return sampler_->sample_action(s, *rng_).action;
    return sampler_->deterministic_action(s);
  }

 private:
  const MetaSampler* sampler_;
  std::optional<Rng> rng_;
};

// ---------------------------------------------------------------------------
// SAC networks and losses
// ---------------------------------------------------------------------------

struct SacNetworks {
  MetaSampler policy;
  nn::Mlp q;         // (s, a) -> Q
  nn::Mlp v;         // s -> V
  nn::Mlp v_target;  // slow copy of v

  static SacNetworks create(const SacConfig& cfg, Seed seed) {
    SacNetworks n;
    n.policy = MetaSampler::random_init(cfg.bins, cfg.sigma, derive_seed(seed, 1), cfg.hidden);
    const std::size_t sd = 2 * cfg.bins;
    Rng rq(derive_seed(seed, 2)), rv(derive_seed(seed, 3));
    using nn::Activation;
    n.q = nn::Mlp::uniform_init({sd + 1, cfg.hidden, cfg.hidden, 1},
                                {Activation::relu, Activation::relu, Activation::linear}, rq);
    n.v = nn::Mlp::uniform_init({sd, cfg.hidden, cfg.hidden, 1},
                                {Activation::relu, Activation::relu, Activation::linear}, rv);
    n.v_target = n.v;
    return n;
  }
};

using Minibatch = std::vector<const Transition*>;

struct LossGrad {
  double loss = 0.0;
  std::vector<double> grad;
};

namespace detail {
inline std::vector<double> state_action(const MetaState& s, double a) {
  std::vector<double> x(s.values().begin(), s.values().end());
  x.push_back(a);
  return x;
}
}  // namespace detail

// 1/2 mean (Q(s,a) - (r + gamma (1 - done) V_target(s')))^2, gradient w.r.t. Q.
inline LossGrad q_loss(const nn::Mlp& q, const nn::Mlp& v_target, const Minibatch& batch, double gamma) {
  LossGrad out{0.0, std::vector<double>(q.parameter_count(), 0.0)};
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  nn::Mlp::Cache cq, cv;
  for (const Transition* t : batch) {
    const double bootstrap = t->terminal ? 0.0 : v_target.forward(t->next_state.values(), cv)[0];
    const double target = t->reward + gamma * bootstrap;
    const auto x = detail::state_action(t->state, t->action);
    const double diff = q.forward(x, cq)[0] - target;
    out.loss += 0.5 * diff * diff * inv_n;
    const double g = diff * inv_n;
    q.backward(cq, std::span<const double>(&g, 1), out.grad);
  }
  return out;
}

// Fresh policy actions at the batch states, from fixed standard-normal draws.
inline std::vector<ActionSample> policy_samples(const MetaSampler& policy, const Minibatch& batch,
                                                std::span<const double> eps) {
  std::vector<ActionSample> out;
  out.reserve(batch.size());
  nn::Mlp::Cache c;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    out.push_back(MetaSampler::sample_from(policy.head(batch[i]->state, c), eps[i]));
  }
  return out;
}

// 1/2 mean (V(s) - (Q(s, a~) - alpha log p~))^2, gradient w.r.t. V.
inline LossGrad v_loss(const nn::Mlp& v, const nn::Mlp& q, const MetaSampler& policy,
                       const Minibatch& batch, std::span<const double> eps, double alpha) {
  LossGrad out{0.0, std::vector<double>(v.parameter_count(), 0.0)};
  const auto samples = policy_samples(policy, batch, eps);
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  nn::Mlp::Cache cq, cv;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto x = detail::state_action(batch[i]->state, samples[i].action);
    const double target = q.forward(x, cq)[0] - alpha * samples[i].log_prob;
    const double diff = v.forward(batch[i]->state.values(), cv)[0] - target;
    out.loss += 0.5 * diff * diff * inv_n;
    const double g = diff * inv_n;
    v.backward(cv, std::span<const double>(&g, 1), out.grad);
  }
  return out;
}

// mean (alpha log p~ - Q(s, a~)) with a~ reparameterised through the policy;
// gradient w.r.t. the policy parameters.
inline LossGrad policy_loss(const MetaSampler& policy, const nn::Mlp& q, const Minibatch& batch,
                            std::span<const double> eps, double alpha) {
  const nn::Mlp& net = policy.network();
  LossGrad out{0.0, std::vector<double>(net.parameter_count(), 0.0)};
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  nn::Mlp::Cache cp, cq;
  std::vector<double> q_input_grad(q.input_size());
  std::vector<double> q_param_scratch(q.parameter_count());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const PolicyHead h = policy.head(batch[i]->state, cp);
    const ActionSample smp = MetaSampler::sample_from(h, eps[i]);
    const auto x = detail::state_action(batch[i]->state, smp.action);
    const double qv = q.forward(x, cq)[0];
    out.loss += (alpha * smp.log_prob - qv) * inv_n;

    const double one = 1.0;
    q.backward(cq, std::span<const double>(&one, 1), q_param_scratch, q_input_grad);
    const double dq_da = q_input_grad.back();
    const double t = std::tanh(smp.pre_squash);
    const double da_du = 0.5 * (1.0 - t * t);
    // d log p / du = 2 tanh(u); d log p / d log_std (direct) = -1.
    const double dl_du = (alpha * 2.0 * t - dq_da * da_du) * inv_n;
    const double dl_dmean = dl_du;
    const double dl_dlogstd = h.clamped ? 0.0 : dl_du * std::exp(h.log_std) * eps[i] - alpha * inv_n;
    const double head_grad[2] = {dl_dmean, dl_dlogstd};
    net.backward(cp, head_grad, out.grad);
  }
  return out;
}

struct SacAgent {
  SacNetworks nets;
  nn::AdamState q_opt, v_opt, policy_opt;

  static SacAgent create(const SacConfig& cfg, Seed seed) {
    SacAgent a;
    a.nets = SacNetworks::create(cfg, seed);
    a.q_opt = nn::AdamState(a.nets.q.parameter_count(), cfg.learning_rate, cfg.lr_decay_steps,
                            cfg.lr_decay_ratio);
    a.v_opt = nn::AdamState(a.nets.v.parameter_count(), cfg.learning_rate, cfg.lr_decay_steps,
                            cfg.lr_decay_ratio);
    a.policy_opt = nn::AdamState(a.nets.policy.network().parameter_count(), cfg.learning_rate,
                                 cfg.lr_decay_steps, cfg.lr_decay_ratio);
    return a;
  }
};

struct SacLosses {
  double q = 0.0;
  double v = 0.0;
  double policy = 0.0;
};

namespace detail {
inline void check_finite_loss(double x, const char* what) {
  if (!std::isfinite(x)) throw NumericalError(std::string("non-finite ") + what + " loss");
}
}  // namespace detail

// One SAC update on a uniform minibatch, in order: Q, V, policy, target V,
// then one learning-rate schedule tick per optimiser.
inline SacLosses sac_update(SacAgent& agent, const ReplayMemory& replay, const SacConfig& cfg, Rng& rng) {
  if (replay.size() < cfg.batch_size) throw ConfigError("replay holds fewer transitions than the batch size");
  const Minibatch batch = replay.sample(cfg.batch_size, rng);
  SacNetworks& n = agent.nets;
  SacLosses losses;

  const LossGrad lq = q_loss(n.q, n.v_target, batch, cfg.gamma);
  detail::check_finite_loss(lq.loss, "Q");
  nn::adam_step(n.q.params(), lq.grad, agent.q_opt);
  losses.q = lq.loss;

  std::vector<double> eps(batch.size());
  for (double& e : eps) e = standard_normal(rng);

  const LossGrad lv = v_loss(n.v, n.q, n.policy, batch, eps, cfg.alpha);
  detail::check_finite_loss(lv.loss, "V");
  nn::adam_step(n.v.params(), lv.grad, agent.v_opt);
  losses.v = lv.loss;

  const LossGrad lp = policy_loss(n.policy, n.q, batch, eps, cfg.alpha);
  detail::check_finite_loss(lp.loss, "policy");
  nn::adam_step(n.policy.network().params(), lp.grad, agent.policy_opt);
  losses.policy = lp.loss;

  nn::soft_update(n.v_target, n.v, cfg.tau);

  nn::decay_learning_rate(agent.q_opt);
  nn::decay_learning_rate(agent.v_opt);
  nn::decay_learning_rate(agent.policy_opt);
  return losses;
}

// ---------------------------------------------------------------------------
// Episodes and meta-training
// ---------------------------------------------------------------------------

using ActionFn = std::function<double(const MetaState&)>;
using StepHook = std::function<void(const EnsembleStep&)>;

struct EpisodeTrace {
  std::vector<EnsembleStep> steps;
  double first_valid_aucprc = 0.0;  // AUCPRC of F_1
  double final_valid_aucprc = 0.0;  // AUCPRC of F_k

  double total_reward() const {
    double s = 0.0;
    for (const auto& st : steps) s += st.reward();
    return s;
  }
};

// Runs one full ensemble-training episode of k members, pushing k-1
// transitions into the replay. `after_step` fires after each push.
inline EpisodeTrace run_episode(const TrainingTask& task, const ActionFn& choose, const SacConfig& cfg,
                                const LearnerFactory& learner, ReplayMemory& replay, Seed seed,
                                const StepHook& after_step = {}) {
  EnsembleEnvironment env(task, learner, cfg.bins, cfg.sigma, cfg.ensemble_size);
  env.reset(seed);
  EpisodeTrace trace;
  trace.first_valid_aucprc = env.valid_aucprc();
  while (!env.done()) {
    const MetaState s = env.state();
    EnsembleStep st = env.step(choose(s));
    replay.push({st.state, st.action, st.reward(), st.next_state, env.done()});
    trace.steps.push_back(std::move(st));
    if (after_step) after_step(trace.steps.back());
  }
  trace.final_valid_aucprc = env.valid_aucprc();
  return trace;
}

struct TrainingLogRow {
  std::size_t episode = 0;
  std::size_t task = 0;
  std::size_t step = 0;
  double action = 0.0;
  double reward = 0.0;
  double valid_aucprc = 0.0;
};

struct MetaTrainResult {
  MetaSampler sampler;
  SacAgent agent;
  std::vector<TrainingLogRow> log;
  std::vector<EpisodeTrace> episodes;
  std::size_t environment_steps = 0;
  std::size_t updates = 0;
};

// Episodes run round-robin over the tasks. The first `random_steps`
// environment steps take uniform random actions without updates; after that
// every environment step is followed by one SAC update, until
// `gradient_steps` updates have been made.
inline MetaTrainResult meta_train(const std::vector<TrainingTask>& tasks, const SacConfig& cfg,
                                  const LearnerFactory& learner, Seed seed) {
  cfg.validate();
  if (tasks.empty()) throw ConfigError("meta-training needs at least one task");
  SacAgent agent = SacAgent::create(cfg, derive_seed(seed, 0xa6e7u));
  ReplayMemory replay(cfg.replay_capacity);
  Rng action_rng(derive_seed(seed, 0xac71u));
  Rng update_rng(derive_seed(seed, 0x0bdau));

  MetaTrainResult result;
  std::size_t env_steps = 0;
  std::size_t updates = 0;
  auto budget_spent = [&] { return updates >= cfg.gradient_steps; };

  ActionFn choose = [&](const MetaState& s) {
    if (env_steps < cfg.random_steps) return uniform01(action_rng);
    return agent.nets.policy.sample_action(s, action_rng).action;
  };

  for (std::size_t episode = 0; !budget_spent(); ++episode) {
    if (cfg.max_episodes > 0 && episode >= cfg.max_episodes) break;
    const std::size_t task_id = episode % tasks.size();
    std::size_t step_in_episode = 0;
    StepHook hook = [&](const EnsembleStep& st) {
      ++env_steps;
      result.log.push_back({episode, task_id, ++step_in_episode, st.action, st.reward(),
                            st.valid_aucprc_after});
      if (env_steps > cfg.random_steps && replay.size() >= cfg.batch_size && !budget_spent()) {
        sac_update(agent, replay, cfg, update_rng);
        ++updates;
      }
    };
    EpisodeTrace tr = run_episode(tasks[task_id], choose, cfg, learner, replay,
                                  derive_seed(seed, 0xe915u, episode), hook);
    result.episodes.push_back(std::move(tr));
  }
  result.sampler = agent.nets.policy;
  result.agent = std::move(agent);
  result.environment_steps = env_steps;
  result.updates = updates;
  return result;
}

// ---------------------------------------------------------------------------
// Sampler documents
// ---------------------------------------------------------------------------

inline constexpr int sampler_format_version = 1;

inline nlohmann::json serialize_sampler(const MetaSampler& s) {
  nlohmann::json j;
  j["format_version"] = sampler_format_version;
  j["bins"] = s.bins();
  j["sigma"] = s.sigma();
  j["policy"] = nn::to_json(s.network());
  return j;
}

inline MetaSampler load_sampler(const nlohmann::json& j) {
  try {
    if (j.at("format_version").get<int>() != sampler_format_version) {
      throw ConfigError("unsupported sampler format_version");
    }
    return MetaSampler(nn::mlp_from_json(j.at("policy")), j.at("bins").get<std::size_t>(),
                       j.at("sigma").get<double>());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed sampler document: ") + e.what());
  }
}

inline MetaSampler load_sampler(const nlohmann::json& j, std::size_t expected_bins) {
  MetaSampler s = load_sampler(j);
  if (s.bins() != expected_bins) {
    throw ConfigError("sampler was trained with b=" + std::to_string(s.bins()) + ", expected " +
                      std::to_string(expected_bins));
  }
  return s;
}

}  // namespace mesa
