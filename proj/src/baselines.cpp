#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "replayrec/agents.hpp"

namespace replayrec {

Action RandomAgent::act(const EnvState& state, Rng& rng) {
  const std::size_t n = state.candidate_count();
  if (n == 0) throw std::invalid_argument("state has no candidates");
  if (form_ == ActionForm::kSingleItem) {
    std::uniform_int_distribution<std::size_t> d(0, n - 1);
    return SingleItem{d(rng)};
  }
  if (form_ == ActionForm::kRankedList) {
    RankedList l;
    l.order.resize(n);
    std::iota(l.order.begin(), l.order.end(), 0);
    std::shuffle(l.order.begin(), l.order.end(), rng);
    return l;
  }
  Preference p;
  p.weights.resize(state.feature_dim);
  std::normal_distribution<double> g(0.0, 1.0);
  for (auto& w : p.weights) w = g(rng);
  return p;
}

PopularityAgent::PopularityAgent(std::shared_ptr<const ItemCatalog> catalog,
                                 ActionForm form)
    : catalog_(std::move(catalog)), form_(form) {
  if (form_ == ActionForm::kPreference) {
    throw ConfigError("popularity agent cannot emit preference vectors");
  }
}

std::vector<std::size_t> PopularityAgent::rank(
    std::span<const std::string> candidates) const {
  std::vector<std::int64_t> clicks(candidates.size(), -1);
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    if (auto idx = catalog_->index_of(candidates[k])) {
      clicks[k] = catalog_->item(*idx).clicks;
    }
  }
  std::vector<std::size_t> order(candidates.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) {
                     return clicks[a] > clicks[b];
                   });
  return order;
}

Action PopularityAgent::act(const EnvState& state, Rng&) {
  auto order = rank(state.impressions);
  if (form_ == ActionForm::kSingleItem) return SingleItem{order.front()};
  return RankedList{std::move(order)};
}

// ---------------------------------------------------------------------------

void UserCosineModel::add_interaction(const std::string& user,
                                      const std::string& item) {
  auto [uit, unew] = user_index_.try_emplace(user, users_.size());
  if (unew) {
    users_.emplace_back();
    user_names_.push_back(user);
  }
  auto [iit, inew] = item_index_.try_emplace(item, item_users_.size());
  if (inew) item_users_.emplace_back();
  auto& items = users_[uit->second];
  auto pos = std::lower_bound(items.begin(), items.end(), iit->second);
  if (pos != items.end() && *pos == iit->second) return;
  items.insert(pos, iit->second);
  item_users_[iit->second].push_back(uit->second);
}

UserCosineModel UserCosineModel::from_sessions(
    std::span<const Session> sessions) {
  UserCosineModel m;
  for (const auto& s : sessions) {
    for (const auto& e : s.events) {
      if (is_item_directed(e.action_type) && !e.reference.empty()) {
        m.add_interaction(e.user_id, e.reference);
      }
    }
  }
  return m;
}

std::optional<std::vector<double>> UserCosineModel::scores(
    const std::vector<std::string>& profile,
    std::span<const std::string> candidates,
    const std::string& exclude_user) const {
  std::set<std::size_t> p;
  for (const auto& item : profile) {
    auto it = item_index_.find(item);
    if (it != item_index_.end()) p.insert(it->second);
  }
  std::set<std::string> distinct(profile.begin(), profile.end());
  if (distinct.empty()) return std::nullopt;

  std::size_t excluded = users_.size();
  if (auto it = user_index_.find(exclude_user); it != user_index_.end()) {
    excluded = it->second;
  }
  std::vector<std::size_t> overlap(users_.size(), 0);
  bool any = false;
  for (auto item : p) {
    for (auto u : item_users_[item]) {
      if (u == excluded) continue;
      ++overlap[u];
      any = true;
    }
  }
  if (!any) return std::nullopt;

  const double psize = static_cast<double>(distinct.size());
  std::vector<double> out(candidates.size(), 0.0);
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    auto it = item_index_.find(candidates[k]);
    if (it == item_index_.end()) continue;
    for (auto u : item_users_[it->second]) {
      if (u == excluded || overlap[u] == 0) continue;
      out[k] += static_cast<double>(overlap[u]) /
                std::sqrt(psize * static_cast<double>(users_[u].size()));
    }
  }
  return out;
}

CfAgent::CfAgent(UserCosineModel model,
                 std::shared_ptr<const ItemCatalog> catalog)
    : model_(std::move(model)),
      popularity_(std::move(catalog), ActionForm::kRankedList) {}

Action CfAgent::act(const EnvState& state, Rng&) {
  // The user's profile is what the session has touched so far among the
  // current impressions, read back from the memory block.
  std::vector<std::string> profile;
  for (std::size_t r = 0; r < MemoryBlock::kRows; ++r) {
    int slot = state.memory.hot_slot(r);
    if (slot >= 0 && static_cast<std::size_t>(slot) < state.candidate_count()) {
      profile.push_back(state.impressions[static_cast<std::size_t>(slot)]);
    }
  }
  auto sc = model_.scores(profile, state.impressions, state.user_id);
  if (!sc) {
    ++fallbacks_;
    return RankedList{popularity_.rank(state.impressions)};
  }
  auto pop = popularity_.rank(state.impressions);
  std::vector<std::size_t> pop_pos(pop.size());
  for (std::size_t i = 0; i < pop.size(); ++i) pop_pos[pop[i]] = i;
  std::vector<std::size_t> order(state.candidate_count());
  std::iota(order.begin(), order.end(), 0);
  // Ties in CF score fall back to popularity order.
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if ((*sc)[a] != (*sc)[b]) return (*sc)[a] > (*sc)[b];
    return pop_pos[a] < pop_pos[b];
  });
  return RankedList{std::move(order)};
}

}  // namespace replayrec
