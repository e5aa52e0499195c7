#include "replayrec/replay_env.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace replayrec {

void SessionDataset::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  write_session_log(dir / "sessions.csv", sessions);
  catalog.save_json(dir / "catalog.json");
}

SessionDataset SessionDataset::load(const std::filesystem::path& dir) {
  SessionDataset d;
  d.sessions = parse_session_log(dir / "sessions.csv");
  d.catalog = ItemCatalog::load_json(dir / "catalog.json");
  d.vocab = ContextVocabulary::build(d.sessions);
  return d;
}

ActionForm form_of(const Action& a) {
  switch (a.index()) {
    case 0:
      return ActionForm::kSingleItem;
    case 1:
      return ActionForm::kRankedList;
    default:
      return ActionForm::kPreference;
  }
}

Metric parse_metric(std::string_view s) {
  if (s == "ctr" || s == "CTR") return Metric::kCtr;
  if (s == "mrr" || s == "MRR") return Metric::kMrr;
  throw ConfigError("unknown metric '" + std::string(s) + "'");
}

std::string_view to_string(Metric m) {
  return m == Metric::kCtr ? "ctr" : "mrr";
}

std::vector<std::size_t> rank_by_preference(std::span<const double> weights,
                                            const EnvState& state) {
  if (weights.size() != state.feature_dim) {
    throw std::invalid_argument(
        "preference action has length " + std::to_string(weights.size()) +
        ", feature dimension is " + std::to_string(state.feature_dim));
  }
  const std::size_t n = state.candidate_count();
  std::vector<double> score(n);
  for (std::size_t k = 0; k < n; ++k) {
    auto f = state.candidate(k);
    score[k] = std::inner_product(f.begin(), f.end(), weights.begin(), 0.0);
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) {
                     return score[a] > score[b];
                   });
  return order;
}

namespace {

std::size_t rank_in_list(const std::vector<std::size_t>& order,
                         std::size_t true_slot, std::size_t n_candidates) {
  std::size_t rank = 0;
  for (auto slot : order) {
    if (slot >= n_candidates) continue;  // absent slot in a short list
    ++rank;
    if (slot == true_slot) return rank;
  }
  throw std::invalid_argument("ranked list does not contain the true slot");
}

void check_permutation(const std::vector<std::size_t>& order,
                       std::size_t n_candidates) {
  const std::size_t n = order.size();
  if (n != kMaxImpressions && n != n_candidates) {
    throw std::invalid_argument("ranked list has " + std::to_string(n) +
                                " entries, expected " +
                                std::to_string(n_candidates) + " or " +
                                std::to_string(kMaxImpressions));
  }
  std::vector<std::uint8_t> seen(n, 0);
  for (auto s : order) {
    if (s >= n || seen[s]) {
      throw std::invalid_argument("ranked list is not a permutation");
    }
    seen[s] = 1;
  }
}

}  // namespace

RewardResult reward_for(const Action& action, std::size_t true_slot,
                        const EnvState& state) {
  const std::size_t n = state.candidate_count();
  if (true_slot >= n) {
    throw std::invalid_argument("true slot outside the impression list");
  }
  RewardResult out;
  std::visit(
      [&](const auto& a) {
        using T = std::decay_t<decltype(a)>;
        if constexpr (std::is_same_v<T, SingleItem>) {
          if (a.slot >= kMaxImpressions) {
            throw std::invalid_argument("single-item slot out of range");
          }
          out.reward = a.slot == true_slot ? 1.0 : 0.0;
        } else if constexpr (std::is_same_v<T, RankedList>) {
          check_permutation(a.order, n);
          auto r = rank_in_list(a.order, true_slot, n);
          out.rank = r;
          out.reward = 1.0 / static_cast<double>(r);
        } else {
          auto order = rank_by_preference(a.weights, state);
          auto r = rank_in_list(order, true_slot, n);
          out.rank = r;
          out.reward = 1.0 / static_cast<double>(r);
        }
      },
      action);
  return out;
}

// ---------------------------------------------------------------------------

ReplayEnvironment::ReplayEnvironment(std::shared_ptr<const SessionDataset> data,
                                     double alpha, std::uint64_t seed)
    : data_(std::move(data)), alpha_(alpha), rng_(seed) {
  if (!data_) throw std::invalid_argument("null dataset");
  for (std::size_t s = 0; s < data_->sessions.size(); ++s) {
    const auto& sess = data_->sessions[s];
    std::vector<Target> targets;
    for (auto idx : sess.clickout_indices) {
      const auto& ev = sess.events[idx];
      auto it = std::find(ev.impressions.begin(), ev.impressions.end(),
                          ev.reference);
      if (it == ev.impressions.end() ||
          static_cast<std::size_t>(it - ev.impressions.begin()) >=
              kMaxImpressions) {
        ++unanswerable_count_;
        continue;
      }
      targets.push_back(
          {idx, static_cast<std::size_t>(it - ev.impressions.begin())});
    }
    if (!targets.empty()) {
      answerable_count_ += targets.size();
      eligible_.push_back(s);
      targets_.push_back(std::move(targets));
    }
  }
}

std::size_t ReplayEnvironment::state_size() const {
  return flat_state_size(data_->catalog.feature_dim(), data_->vocab.size());
}

EnvState ReplayEnvironment::encode(std::size_t session,
                                   std::size_t event_index) const {
  const auto& events = data_->sessions[session].events;
  return build_state(std::span(events).first(event_index), events[event_index],
                     data_->catalog, data_->vocab, alpha_);
}

std::size_t ReplayEnvironment::current_true_slot() const {
  return targets_[episode_][cursor_].true_slot;
}

EnvState ReplayEnvironment::reset() {
  if (eligible_.empty()) {
    throw DataError("replay environment has no session with an answerable "
                    "clickout");
  }
  std::uniform_int_distribution<std::size_t> pick(0, eligible_.size() - 1);
  episode_ = pick(rng_);
  cursor_ = 0;
  active_ = true;
  state_ = encode(eligible_[episode_], targets_[episode_][0].event_index);
  return state_;
}

StepOutcome ReplayEnvironment::step(const Action& action) {
  if (!active_) throw std::logic_error("step() called without reset()");
  StepOutcome out;
  out.true_slot = current_true_slot();
  auto r = reward_for(action, out.true_slot, state_);
  out.reward = r.reward;
  out.rank = r.rank;

  ++cursor_;
  if (cursor_ >= targets_[episode_].size()) {
    out.done = true;
    active_ = false;
  } else {
    state_ = encode(eligible_[episode_],
                    targets_[episode_][cursor_].event_index);
    out.next_state = state_;
  }
  return out;
}

EvaluationResult evaluate(ReplayEnvironment& env, Recommender& agent,
                          std::size_t n_episodes, Metric metric, Rng& rng) {
  const ActionForm form = agent.form();
  if (metric == Metric::kCtr && form != ActionForm::kSingleItem) {
    throw ConfigError("CTR is defined only for single-item agents");
  }
  if (metric == Metric::kMrr && form == ActionForm::kSingleItem) {
    throw ConfigError("MRR needs a ranking-capable agent");
  }
  EvaluationResult res;
  res.metric = metric;
  res.slot_histogram.assign(kMaxImpressions, 0);
  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t ep = 0; ep < n_episodes; ++ep) {
    EnvState st = env.reset();
    while (true) {
      Action a = agent.act(st, rng);
      if (form_of(a) != form) {
        throw std::logic_error(agent.name() + " returned the wrong action form");
      }
      if (const auto* s = std::get_if<SingleItem>(&a)) {
        if (s->slot < kMaxImpressions) ++res.slot_histogram[s->slot];
      } else if (const auto* l = std::get_if<RankedList>(&a)) {
        if (!l->order.empty() && l->order.front() < kMaxImpressions) {
          ++res.slot_histogram[l->order.front()];
        }
      }
      auto out = env.step(a);
      res.rewards.push_back(out.reward);
      sum += out.reward;
      sum_sq += out.reward * out.reward;
      if (out.done) break;
      st = std::move(*out.next_state);
    }
  }
  res.steps = res.rewards.size();
  if (res.steps > 0) {
    const double n = static_cast<double>(res.steps);
    res.mean = sum / n;
    const double var = std::max(0.0, sum_sq / n - res.mean * res.mean);
    res.std_error = std::sqrt(var / n);
  }
  return res;
}

}  // namespace replayrec
