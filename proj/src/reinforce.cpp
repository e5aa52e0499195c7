#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "replayrec/agents.hpp"

namespace replayrec {

Action ReinforceAgent::act(const EnvState& state, Rng&) {
  return RankedList{sort_slots(policy_.scores(state.flat),
                               state.candidate_count())};
}

std::vector<std::size_t> sample_ranking(const Eigen::VectorXd& scores,
                                        std::size_t n_valid, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::VectorXd noisy(static_cast<Eigen::Index>(n_valid));
  for (std::size_t k = 0; k < n_valid; ++k) {
    double x = u(rng);
    while (x <= 0.0) x = u(rng);
    noisy(static_cast<Eigen::Index>(k)) =
        scores(static_cast<Eigen::Index>(k)) - std::log(-std::log(x));
  }
  return sort_slots(noisy, n_valid);
}

namespace {

// Softmax over scores[order[j..]]; fills `probs` aligned with order[j..].
double tail_log_sum_exp(const Eigen::VectorXd& scores,
                        const std::vector<std::size_t>& order, std::size_t j,
                        std::vector<double>* probs) {
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t m = j; m < order.size(); ++m) {
    mx = std::max(mx, scores(static_cast<Eigen::Index>(order[m])));
  }
  double sum = 0.0;
  for (std::size_t m = j; m < order.size(); ++m) {
    sum += std::exp(scores(static_cast<Eigen::Index>(order[m])) - mx);
  }
  const double lse = mx + std::log(sum);
  if (probs) {
    probs->clear();
    for (std::size_t m = j; m < order.size(); ++m) {
      probs->push_back(
          std::exp(scores(static_cast<Eigen::Index>(order[m])) - lse));
    }
  }
  return lse;
}

}  // namespace

double plackett_luce_log_prob(const Eigen::VectorXd& scores,
                              const std::vector<std::size_t>& order,
                              std::size_t prefix_length) {
  double lp = 0.0;
  for (std::size_t j = 0; j < std::min(prefix_length, order.size()); ++j) {
    lp += scores(static_cast<Eigen::Index>(order[j])) -
          tail_log_sum_exp(scores, order, j, nullptr);
  }
  return lp;
}

Eigen::VectorXd plackett_luce_log_prob_grad(
    const Eigen::VectorXd& scores, const std::vector<std::size_t>& order,
    std::size_t prefix_length) {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(scores.size());
  std::vector<double> probs;
  for (std::size_t j = 0; j < std::min(prefix_length, order.size()); ++j) {
    tail_log_sum_exp(scores, order, j, &probs);
    g(static_cast<Eigen::Index>(order[j])) += 1.0;
    for (std::size_t m = j; m < order.size(); ++m) {
      g(static_cast<Eigen::Index>(order[m])) -= probs[m - j];
    }
  }
  return g;
}

ReinforceTraining reinforce_train(ReplayEnvironment& env,
                                  const AgentConfig& cfg, Rng& rng) {
  cfg.validate();
  ReinforceTraining out;
  out.policy = SlotScorer(cfg.network, env.feature_dim(),
                          env.data().vocab.size(), cfg.hidden, rng);

  struct Sample {
    std::vector<double> state;
    std::vector<std::size_t> order;
    std::size_t rank;
    double advantage;
  };
  std::vector<Sample> batch;
  batch.reserve(cfg.batch_size);
  double baseline = 0.0;
  bool have_baseline = false;

  EnvState state = env.reset();
  for (std::size_t t = 0; t < cfg.total_steps; ++t) {
    Eigen::VectorXd s = out.policy.scores(state.flat);
    auto order = sample_ranking(s, state.candidate_count(), rng);
    auto step = env.step(RankedList{order});
    out.rewards.append(t + 1, step.reward);

    if (!have_baseline) {
      baseline = step.reward;
      have_baseline = true;
    }
    // Positions after the true item do not affect the reward; their score
    // terms have zero mean and are dropped.
    batch.push_back({std::move(state.flat), std::move(order), *step.rank,
                     step.reward - baseline});
    baseline += cfg.baseline_rate * (step.reward - baseline);
    state = step.done ? env.reset() : std::move(*step.next_state);

    if (batch.size() < cfg.batch_size) continue;

    std::vector<const std::vector<double>*> states;
    for (const auto& b : batch) states.push_back(&b.state);
    MlpCache cache;
    Eigen::MatrixXd scores = out.policy.scores(states, &cache);
    Eigen::MatrixXd upstream = Eigen::MatrixXd::Zero(scores.rows(), scores.cols());
    const double inv = 1.0 / static_cast<double>(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const auto col = static_cast<Eigen::Index>(i);
      Eigen::VectorXd g = plackett_luce_log_prob_grad(
          scores.col(col), batch[i].order, batch[i].rank);
      // Minimize -(advantage * log pi).
      upstream.col(col) = -batch[i].advantage * inv * g;
    }
    auto grads = out.policy.backward(cache, upstream);
    clip_gradients(grads, cfg.grad_clip);
    out.policy.net().sgd_step(grads, cfg.learning_rate);
    ++out.updates;
    if (!out.policy.net().finite()) {
      throw DivergenceError("policy parameters became non-finite at update " +
                            std::to_string(out.updates));
    }
    batch.clear();
  }
  return out;
}

}  // namespace replayrec
