#include <cmath>
#include <sstream>

#include "replayrec/agents.hpp"

namespace replayrec {

Action DqnAgent::act(const EnvState& state, Rng& rng) {
  const std::size_t n = state.candidate_count();
  if (epsilon_ > 0.0) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    if (u(rng) < epsilon_) {
      std::uniform_int_distribution<std::size_t> d(0, n - 1);
      return SingleItem{d(rng)};
    }
  }
  return SingleItem{argmax_slot(q_.scores(state.flat), n)};
}

namespace {

void check_finite(const SlotScorer& net, double loss, std::size_t update) {
  if (!std::isfinite(loss) || !net.net().finite()) {
    std::ostringstream msg;
    msg << "training diverged at update " << update << " (loss " << loss
        << ")";
    throw DivergenceError(msg.str());
  }
}

}  // namespace

DqnTraining dqn_train(ReplayEnvironment& env, const AgentConfig& cfg,
                      Rng& rng) {
  cfg.validate();
  DqnTraining out;
  out.online = SlotScorer(cfg.network, env.feature_dim(), env.data().vocab.size(),
                          cfg.hidden, rng);
  out.target = out.online;
  out.slot_histogram.assign(kMaxImpressions, 0);

  ReplayBuffer buffer(cfg.buffer_capacity);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto batch = static_cast<Eigen::Index>(cfg.batch_size);

  EnvState state = env.reset();
  for (std::size_t t = 0; t < cfg.total_steps; ++t) {
    const std::size_t n = state.candidate_count();
    std::size_t action;
    if (unit(rng) < epsilon_at(cfg, t)) {
      std::uniform_int_distribution<std::size_t> d(0, n - 1);
      action = d(rng);
    } else {
      action = argmax_slot(out.online.scores(state.flat), n);
    }
    ++out.slot_histogram[action];

    auto step = env.step(SingleItem{action});
    out.rewards.append(t + 1, step.reward);

    Transition tr;
    tr.state = state.flat;
    tr.action = action;
    tr.reward = step.reward;
    tr.done = step.done;
    if (!step.done) {
      tr.next_state = step.next_state->flat;
      tr.next_candidates = step.next_state->candidate_count();
    }
    buffer.push(std::move(tr));
    state = step.done ? env.reset() : std::move(*step.next_state);

    if (t + 1 < cfg.warmup_steps || (t + 1) % cfg.train_every != 0 ||
        buffer.size() < cfg.batch_size) {
      continue;
    }

    auto idx = buffer.sample(cfg.batch_size, rng);
    std::vector<const std::vector<double>*> states, next_states;
    std::vector<Eigen::Index> next_col(cfg.batch_size, -1);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      const auto& b = buffer.at(idx[i]);
      states.push_back(&b.state);
      if (!b.done) {
        next_col[i] = static_cast<Eigen::Index>(next_states.size());
        next_states.push_back(&b.next_state);
      }
    }
    Eigen::MatrixXd next_q;
    if (!next_states.empty() && cfg.gamma > 0.0) {
      next_q = out.target.scores(next_states, nullptr);
    }

    MlpCache cache;
    Eigen::MatrixXd q = out.online.scores(states, &cache);
    Eigen::MatrixXd upstream = Eigen::MatrixXd::Zero(q.rows(), q.cols());
    double loss = 0.0;
    for (Eigen::Index i = 0; i < batch; ++i) {
      const auto& b = buffer.at(idx[static_cast<std::size_t>(i)]);
      double y = b.reward;
      if (next_col[i] >= 0 && cfg.gamma > 0.0) {
        Eigen::VectorXd nq = next_q.col(next_col[i]);
        y += cfg.gamma * nq(static_cast<Eigen::Index>(
                             argmax_slot(nq, b.next_candidates)));
      }
      const auto a = static_cast<Eigen::Index>(b.action);
      const double diff = q(a, i) - y;
      loss += 0.5 * diff * diff;
      upstream(a, i) = diff / static_cast<double>(batch);
    }
    loss /= static_cast<double>(batch);
    check_finite(out.online, loss, out.updates);

    auto grads = out.online.backward(cache, upstream);
    clip_gradients(grads, cfg.grad_clip);
    out.online.net().sgd_step(grads, cfg.learning_rate);
    ++out.updates;
    out.losses.append(out.updates, loss);
    check_finite(out.online, loss, out.updates);

    if (out.updates % cfg.target_sync_interval == 0) {
      out.target = out.online;
      out.target_sync_steps.push_back(out.updates);
    }
  }
  return out;
}

}  // namespace replayrec
