#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "replayrec/common.hpp"
#include "replayrec/ingest.hpp"
#include "replayrec/state_encoder.hpp"

namespace replayrec {

// Sessions plus the catalog and context vocabulary they are encoded against.
struct SessionDataset {
  std::vector<Session> sessions;
  ItemCatalog catalog;
  ContextVocabulary vocab;

  // Writes sessions.csv and catalog.json into `dir`.
  void save(const std::filesystem::path& dir) const;
  static SessionDataset load(const std::filesystem::path& dir);
};

struct SingleItem {
  std::size_t slot = 0;
};
struct RankedList {
  std::vector<std::size_t> order;  // slots, best first
};
struct Preference {
  std::vector<double> weights;  // scored against each candidate's features
};
using Action = std::variant<SingleItem, RankedList, Preference>;

enum class ActionForm { kSingleItem, kRankedList, kPreference };
enum class Metric { kCtr, kMrr };

ActionForm form_of(const Action& a);
Metric parse_metric(std::string_view s);
std::string_view to_string(Metric m);

struct RewardResult {
  double reward = 0.0;
  std::optional<std::size_t> rank;  // 1-based; undefined for SingleItem
};

// Candidate order induced by a preference vector: descending u'.i, ties keep
// impression order.
std::vector<std::size_t> rank_by_preference(std::span<const double> weights,
                                            const EnvState& state);

RewardResult reward_for(const Action& action, std::size_t true_slot,
                        const EnvState& state);

struct StepOutcome {
  std::optional<EnvState> next_state;  // empty when done
  double reward = 0.0;
  bool done = false;
  std::optional<std::size_t> rank;
  std::size_t true_slot = 0;
};

// Offline replay environment: an episode is one logged session, a step is
// one of its clickouts. Transitions follow the log regardless of action.
class ReplayEnvironment {
 public:
  ReplayEnvironment(std::shared_ptr<const SessionDataset> data, double alpha,
                    std::uint64_t seed);

  EnvState reset();
  StepOutcome step(const Action& action);

  const EnvState& state() const { return state_; }
  std::size_t true_slot() const { return current_true_slot(); }
  bool in_episode() const { return active_; }

  std::size_t eligible_sessions() const { return eligible_.size(); }
  std::size_t answerable_clickouts() const { return answerable_count_; }
  // Clickouts whose logged reference is not among their impressions.
  std::size_t unanswerable_clickouts() const { return unanswerable_count_; }
  std::size_t feature_dim() const { return data_->catalog.feature_dim(); }
  std::size_t state_size() const;
  const SessionDataset& data() const { return *data_; }
  std::size_t current_session() const { return eligible_[episode_]; }
  double alpha() const { return alpha_; }

 private:
  struct Target {
    std::size_t event_index;
    std::size_t true_slot;
  };
  EnvState encode(std::size_t session, std::size_t event_index) const;
  std::size_t current_true_slot() const;

  std::shared_ptr<const SessionDataset> data_;
  double alpha_;
  Rng rng_;
  std::vector<std::size_t> eligible_;          // session indices
  std::vector<std::vector<Target>> targets_;   // per eligible session
  std::size_t answerable_count_ = 0;
  std::size_t unanswerable_count_ = 0;

  bool active_ = false;
  std::size_t episode_ = 0;  // index into eligible_
  std::size_t cursor_ = 0;   // index into targets_[episode_]
  EnvState state_;
};

class Recommender {
 public:
  virtual ~Recommender() = default;
  virtual std::string name() const = 0;
  virtual ActionForm form() const = 0;
  virtual Action act(const EnvState& state, Rng& rng) = 0;
};

struct EvaluationResult {
  Metric metric = Metric::kCtr;
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t steps = 0;
  std::vector<double> rewards;              // per step, in order
  std::vector<std::size_t> slot_histogram;  // chosen / top-ranked slot
};

// CTR needs a SingleItem agent; MRR a RankedList or Preference agent.
EvaluationResult evaluate(ReplayEnvironment& env, Recommender& agent,
                          std::size_t n_episodes, Metric metric, Rng& rng);

}  // namespace replayrec
