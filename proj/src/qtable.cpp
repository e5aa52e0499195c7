#include <algorithm>

#include "replayrec/agents.hpp"

namespace replayrec {

double QTable::get(std::size_t state, std::size_t action) const {
  if (action >= num_actions_) throw std::out_of_range("q-table action");
  auto it = table_.find(state);
  return it == table_.end() ? 0.0 : it->second[action];
}

void QTable::set(std::size_t state, std::size_t action, double value) {
  if (action >= num_actions_) throw std::out_of_range("q-table action");
  auto [it, _] = table_.try_emplace(state, num_actions_, 0.0);
  it->second[action] = value;
}

std::span<const double> QTable::row(std::size_t state) const {
  auto it = table_.find(state);
  if (it == table_.end()) return {};
  return it->second;
}

nlohmann::json QTable::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& [s, v] : table_) rows.push_back({{"state", s}, {"values", v}});
  return {{"num_actions", num_actions_}, {"rows", rows}};
}

QTable QTable::from_json(const nlohmann::json& j) {
  QTable t(j.at("num_actions").get<std::size_t>());
  for (const auto& r : j.at("rows")) {
    auto v = r.at("values").get<std::vector<double>>();
    if (v.size() != t.num_actions_) throw DataError("q-table row width");
    t.table_[r.at("state").get<std::size_t>()] = std::move(v);
  }
  return t;
}

std::size_t tabular_state_id(const EnvState& state) {
  int slot = state.memory.hot_slot(0);
  return slot < 0 ? kMaxImpressions : static_cast<std::size_t>(slot);
}

namespace {

std::size_t greedy(const QTable& q, std::size_t s, std::size_t n_valid) {
  std::size_t best = 0;
  for (std::size_t a = 1; a < n_valid; ++a) {
    if (q.get(s, a) > q.get(s, best)) best = a;
  }
  return best;
}

}  // namespace

Action QTableAgent::act(const EnvState& state, Rng&) {
  return SingleItem{greedy(table_, tabular_state_id(state),
                           state.candidate_count())};
}

QTableTraining qtable_train(ReplayEnvironment& env, const AgentConfig& cfg,
                            Rng& rng) {
  cfg.validate();
  QTableTraining out;
  out.table = QTable(kMaxImpressions);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  EnvState state = env.reset();
  for (std::size_t t = 0; t < cfg.total_steps; ++t) {
    const std::size_t s = tabular_state_id(state);
    const std::size_t n = state.candidate_count();
    std::size_t a;
    if (unit(rng) < epsilon_at(cfg, t)) {
      std::uniform_int_distribution<std::size_t> d(0, n - 1);
      a = d(rng);
    } else {
      a = greedy(out.table, s, n);
    }
    auto step = env.step(SingleItem{a});
    out.rewards.append(t + 1, step.reward);
    double target = step.reward;
    if (!step.done) {
      const auto& next = *step.next_state;
      const std::size_t s2 = tabular_state_id(next);
      target += cfg.gamma *
                out.table.get(s2, greedy(out.table, s2, next.candidate_count()));
    }
    const double q = out.table.get(s, a);
    out.table.set(s, a, q + cfg.learning_rate * (target - q));
    state = step.done ? env.reset() : std::move(*step.next_state);
  }
  return out;
}

// ---------------------------------------------------------------------------

nlohmann::json model_to_json(const std::string& agent, const SlotScorer& net) {
  return {{"format", "replayrec-model"},
          {"version", 1},
          {"agent", agent},
          {"scorer", net.to_json()}};
}

nlohmann::json model_to_json(const QTable& table) {
  return {{"format", "replayrec-model"},
          {"version", 1},
          {"agent", "qtable"},
          {"qtable", table.to_json()}};
}

std::unique_ptr<Recommender> model_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "replayrec-model") {
    throw DataError("not a replayrec model file");
  }
  if (j.value("version", 0) != 1) throw DataError("unsupported model version");
  const auto agent = j.at("agent").get<std::string>();
  if (agent == "dqn") {
    return std::make_unique<DqnAgent>(SlotScorer::from_json(j.at("scorer")));
  }
  if (agent == "reinforce") {
    return std::make_unique<ReinforceAgent>(
        SlotScorer::from_json(j.at("scorer")));
  }
  if (agent == "qtable") {
    return std::make_unique<QTableAgent>(QTable::from_json(j.at("qtable")));
  }
  throw DataError("unknown model agent '" + agent + "'");
}

}  // namespace replayrec
