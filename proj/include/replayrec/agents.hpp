#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "replayrec/mlp.hpp"
#include "replayrec/replay_env.hpp"
#include "replayrec/trace.hpp"

namespace replayrec {

// ---------------------------------------------------------------------------
// Configuration

enum class NetworkInput {
  kFlat,     // whole flat state in, one output per slot
  kPerSlot,  // one shared scorer applied to each slot's own features
};

NetworkInput parse_network_input(std::string_view s);
std::string_view to_string(NetworkInput n);

struct AgentConfig {
  double learning_rate = 1e-3;
  double gamma = 0.9;
  double epsilon_start = 1.0;
  double epsilon_end = 0.05;
  std::size_t epsilon_decay_steps = 0;  // 0: half the training budget
  std::size_t batch_size = 32;
  std::size_t target_sync_interval = 500;  // in gradient updates
  std::vector<std::size_t> hidden{256, 128};
  std::size_t buffer_capacity = 50000;
  std::size_t warmup_steps = 1000;
  std::size_t train_every = 1;
  std::size_t total_steps = 20000;
  double grad_clip = 10.0;
  double baseline_rate = 0.01;  // REINFORCE moving-average baseline
  NetworkInput network = NetworkInput::kFlat;

  // Per-agent defaults: tabular Q-learning uses alpha 0.1.
  static AgentConfig defaults_for(std::string_view agent);

  void validate() const;
  nlohmann::json to_json() const;
  // Keys override `base`; unknown keys are rejected.
  static AgentConfig from_json(const nlohmann::json& j,
                               const AgentConfig& base);
  static AgentConfig from_json(const nlohmann::json& j);
};

// Linear schedule from start to end over decay_steps, then flat.
double epsilon_at(const AgentConfig& cfg, std::size_t step);

// ---------------------------------------------------------------------------
// Replay buffer

struct Transition {
  std::vector<double> state;
  std::size_t action = 0;
  double reward = 0.0;
  std::vector<double> next_state;  // empty when done
  std::size_t next_candidates = 0;
  bool done = true;
};

class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void push(Transition t);
  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  const Transition& at(std::size_t i) const { return items_[i]; }
  // Distinct indices, uniformly chosen.
  std::vector<std::size_t> sample(std::size_t batch, Rng& rng) const;

 private:
  std::size_t capacity_;
  std::size_t next_ = 0;
  std::vector<Transition> items_;
};

// ---------------------------------------------------------------------------
// Slot scorer: maps flat states to 25 scores per state.

class SlotScorer {
 public:
  SlotScorer() = default;
  SlotScorer(NetworkInput input, std::size_t feature_dim,
             std::size_t context_dim, const std::vector<std::size_t>& hidden,
             Rng& rng);

  // Columns are states; returns kMaxImpressions x batch.
  Eigen::MatrixXd scores(const std::vector<const std::vector<double>*>& states,
                         MlpCache* cache) const;
  Eigen::VectorXd scores(const std::vector<double>& state) const;
  // upstream: dLoss/dscores, kMaxImpressions x batch.
  MlpGradients backward(const MlpCache& cache,
                        const Eigen::MatrixXd& upstream) const;

  Mlp& net() { return net_; }
  const Mlp& net() const { return net_; }
  NetworkInput input() const { return input_; }
  std::size_t feature_dim() const { return feature_dim_; }
  std::size_t context_dim() const { return context_dim_; }
  std::size_t state_size() const;

  nlohmann::json to_json() const;
  static SlotScorer from_json(const nlohmann::json& j);

 private:
  Eigen::MatrixXd inputs(
      const std::vector<const std::vector<double>*>& states) const;

  NetworkInput input_ = NetworkInput::kFlat;
  std::size_t feature_dim_ = 0;
  std::size_t context_dim_ = 0;
  Mlp net_;
};

// Highest-scoring slot among the first n_valid; ties to the lowest slot.
std::size_t argmax_slot(const Eigen::VectorXd& scores, std::size_t n_valid);
// Slots 0..n_valid-1 by descending score, ties by slot.
std::vector<std::size_t> sort_slots(const Eigen::VectorXd& scores,
                                    std::size_t n_valid);

// ---------------------------------------------------------------------------
// Agents

class RandomAgent : public Recommender {
 public:
  explicit RandomAgent(ActionForm form) : form_(form) {}
  std::string name() const override { return "random"; }
  ActionForm form() const override { return form_; }
  Action act(const EnvState& state, Rng& rng) override;

 private:
  ActionForm form_;
};

class PopularityAgent : public Recommender {
 public:
  PopularityAgent(std::shared_ptr<const ItemCatalog> catalog, ActionForm form);
  std::string name() const override { return "popularity"; }
  ActionForm form() const override { return form_; }
  Action act(const EnvState& state, Rng& rng) override;
  std::vector<std::size_t> rank(std::span<const std::string> candidates) const;

 private:
  std::shared_ptr<const ItemCatalog> catalog_;
  ActionForm form_;
};

// User-based collaborative filtering with cosine similarity over a binary
// user x item interaction matrix.
class UserCosineModel {
 public:
  void add_interaction(const std::string& user, const std::string& item);
  static UserCosineModel from_sessions(std::span<const Session> sessions);

  // Similarity-weighted neighbor votes per candidate. Neighbors are all
  // users except `exclude_user`. nullopt when no neighbor overlaps.
  std::optional<std::vector<double>> scores(
      const std::vector<std::string>& profile,
      std::span<const std::string> candidates,
      const std::string& exclude_user) const;
  std::size_t users() const { return users_.size(); }

 private:
  std::vector<std::string> user_names_;
  std::unordered_map<std::string, std::size_t> user_index_;
  std::vector<std::vector<std::size_t>> users_;  // sorted item ids per user
  std::unordered_map<std::string, std::size_t> item_index_;
  std::vector<std::vector<std::size_t>> item_users_;
};

class CfAgent : public Recommender {
 public:
  CfAgent(UserCosineModel model, std::shared_ptr<const ItemCatalog> catalog);
  std::string name() const override { return "cf"; }
  ActionForm form() const override { return ActionForm::kRankedList; }
  Action act(const EnvState& state, Rng& rng) override;
  std::size_t fallbacks() const { return fallbacks_; }

 private:
  UserCosineModel model_;
  PopularityAgent popularity_;
  std::size_t fallbacks_ = 0;
};

class DqnAgent : public Recommender {
 public:
  explicit DqnAgent(SlotScorer q, double epsilon = 0.0)
      : q_(std::move(q)), epsilon_(epsilon) {}
  std::string name() const override { return "dqn"; }
  ActionForm form() const override { return ActionForm::kSingleItem; }
  Action act(const EnvState& state, Rng& rng) override;

  void set_epsilon(double e) { epsilon_ = e; }
  const SlotScorer& q() const { return q_; }

 private:
  SlotScorer q_;
  double epsilon_;
};

struct DqnTraining {
  SlotScorer online;
  SlotScorer target;
  MetricTrace rewards;     // per environment step
  MetricTrace losses;      // per gradient update
  std::vector<std::size_t> target_sync_steps;
  std::vector<std::size_t> slot_histogram;  // chosen slots while training
  std::size_t updates = 0;
};

// Squared TD loss on uniform minibatches, epsilon-greedy acting, hard target
// sync every target_sync_interval updates. Throws DivergenceError when the
// loss or parameters stop being finite.
DqnTraining dqn_train(ReplayEnvironment& env, const AgentConfig& cfg, Rng& rng);

class ReinforceAgent : public Recommender {
 public:
  explicit ReinforceAgent(SlotScorer policy) : policy_(std::move(policy)) {}
  std::string name() const override { return "reinforce"; }
  ActionForm form() const override { return ActionForm::kRankedList; }
  // Deterministic sort of the policy scores.
  Action act(const EnvState& state, Rng& rng) override;
  const SlotScorer& policy() const { return policy_; }

 private:
  SlotScorer policy_;
};

// Plackett-Luce ranking from Gumbel-perturbed scores.
std::vector<std::size_t> sample_ranking(const Eigen::VectorXd& scores,
                                        std::size_t n_valid, Rng& rng);

// Gradient w.r.t. the scores of the log-probability of the first
// `prefix_length` positions of `order` under the Plackett-Luce model.
Eigen::VectorXd plackett_luce_log_prob_grad(const Eigen::VectorXd& scores,
                                            const std::vector<std::size_t>& order,
                                            std::size_t prefix_length);
double plackett_luce_log_prob(const Eigen::VectorXd& scores,
                              const std::vector<std::size_t>& order,
                              std::size_t prefix_length);

struct ReinforceTraining {
  SlotScorer policy;
  MetricTrace rewards;
  std::size_t updates = 0;
};

// Gradient ascent on (reward - baseline) * grad log pi, with an exponential
// moving-average reward baseline.
ReinforceTraining reinforce_train(ReplayEnvironment& env, const AgentConfig& cfg,
                                  Rng& rng);

// Missing entries read as 0.
class QTable {
 public:
  explicit QTable(std::size_t num_actions = kMaxImpressions)
      : num_actions_(num_actions) {}

  std::size_t num_actions() const { return num_actions_; }
  double get(std::size_t state, std::size_t action) const;
  void set(std::size_t state, std::size_t action, double value);
  std::span<const double> row(std::size_t state) const;
  std::size_t states() const { return table_.size(); }

  nlohmann::json to_json() const;
  static QTable from_json(const nlohmann::json& j);
  bool operator==(const QTable&) const = default;

 private:
  std::size_t num_actions_;
  std::map<std::size_t, std::vector<double>> table_;
};

// Discrete replay-env state: slot of the most recent operation cluster, or
// kMaxImpressions when it is not among the current impressions.
std::size_t tabular_state_id(const EnvState& state);

class QTableAgent : public Recommender {
 public:
  explicit QTableAgent(QTable table) : table_(std::move(table)) {}
  std::string name() const override { return "qtable"; }
  ActionForm form() const override { return ActionForm::kSingleItem; }
  Action act(const EnvState& state, Rng& rng) override;
  const QTable& table() const { return table_; }

 private:
  QTable table_;
};

struct QTableTraining {
  QTable table;
  MetricTrace rewards;
};

QTableTraining qtable_train(ReplayEnvironment& env, const AgentConfig& cfg,
                            Rng& rng);

// Versioned model files.
nlohmann::json model_to_json(const std::string& agent, const SlotScorer& net);
nlohmann::json model_to_json(const QTable& table);
std::unique_ptr<Recommender> model_from_json(const nlohmann::json& j);

}  // namespace replayrec
