#include "replayrec/state_encoder.hpp"

#include <algorithm>
#include <numeric>
#include <set>

#include "json.hpp"

namespace replayrec {

std::vector<OperationCluster> compress_consecutive(
    std::span<const SessionEvent> events) {
  std::vector<OperationCluster> out;
  for (std::size_t i = 0; i < events.size(); ++i) {
    const auto& e = events[i];
    if (!is_item_directed(e.action_type) || e.reference.empty()) continue;
    if (!out.empty() && out.back().reference == e.reference) {
      out.back().last_event = i;
    } else {
      out.push_back({e.reference, i, i});
    }
  }
  return out;
}

std::size_t MemoryBlock::ones() const {
  return static_cast<std::size_t>(
      std::count(cells_.begin(), cells_.end(), std::uint8_t{1}));
}

int MemoryBlock::hot_slot(std::size_t row) const {
  for (std::size_t c = 0; c < kCols; ++c) {
    if (at(row, c)) return static_cast<int>(c);
  }
  return -1;
}

MemoryBlock encode_memory(std::span<const OperationCluster> clusters,
                          std::span<const std::string> impressions) {
  MemoryBlock mem;
  const std::size_t rows = std::min(clusters.size(), MemoryBlock::kRows);
  const std::size_t slots = std::min(impressions.size(), MemoryBlock::kCols);
  for (std::size_t j = 0; j < rows; ++j) {
    const auto& ref = clusters[clusters.size() - 1 - j].reference;
    for (std::size_t k = 0; k < slots; ++k) {
      if (impressions[k] == ref) {
        mem.set(j, k);
        break;
      }
    }
  }
  return mem;
}

std::vector<double> update_preference(std::span<const double> prev,
                                      std::span<const double> item,
                                      double alpha) {
  if (prev.size() != item.size()) {
    throw std::invalid_argument("update_preference: length mismatch (" +
                                std::to_string(prev.size()) + " vs " +
                                std::to_string(item.size()) + ")");
  }
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw std::invalid_argument("update_preference: alpha outside [0,1]");
  }
  std::vector<double> out(prev.size());
  for (std::size_t k = 0; k < prev.size(); ++k) {
    out[k] = (1.0 - alpha) * prev[k] + alpha * item[k];
  }
  return out;
}

ContextVocabulary ContextVocabulary::build(std::span<const Session> sessions) {
  std::set<std::string> platforms, devices, filters;
  for (const auto& s : sessions) {
    for (const auto& e : s.events) {
      if (!e.platform.empty()) platforms.insert(e.platform);
      if (!e.device.empty()) devices.insert(e.device);
      for (const auto& f : e.current_filters) {
        if (!f.empty()) filters.insert(f);
      }
    }
  }
  ContextVocabulary v;
  v.platforms_.assign(platforms.begin(), platforms.end());
  v.devices_.assign(devices.begin(), devices.end());
  v.filters_.assign(filters.begin(), filters.end());
  return v;
}

std::vector<double> ContextVocabulary::encode(const SessionEvent& ev) const {
  std::vector<double> out(size(), 0.0);
  auto mark = [&](const std::vector<std::string>& vocab, std::size_t offset,
                  const std::string& key) {
    auto it = std::lower_bound(vocab.begin(), vocab.end(), key);
    if (it != vocab.end() && *it == key) {
      out[offset + static_cast<std::size_t>(it - vocab.begin())] = 1.0;
    }
  };
  mark(platforms_, 0, ev.platform);
  mark(devices_, platforms_.size(), ev.device);
  for (const auto& f : ev.current_filters) {
    mark(filters_, platforms_.size() + devices_.size(), f);
  }
  return out;
}

std::size_t flat_state_size(std::size_t feature_dim, std::size_t context_dim) {
  return MemoryBlock::kRows * MemoryBlock::kCols +
         kMaxImpressions * feature_dim + context_dim + feature_dim;
}

EnvState build_state(std::span<const SessionEvent> prefix,
                     const SessionEvent& clickout, const ItemCatalog& catalog,
                     const ContextVocabulary& vocab, double alpha) {
  const std::size_t d = catalog.feature_dim();
  EnvState st;
  st.feature_dim = d;
  st.user_id = clickout.user_id;
  st.session_id = clickout.session_id;
  st.impressions = clickout.impressions;
  if (st.impressions.size() > kMaxImpressions) {
    st.impressions.resize(kMaxImpressions);
  }

  auto clusters = compress_consecutive(prefix);
  st.memory = encode_memory(clusters, st.impressions);

  st.preference.assign(d, 0.0);
  for (const auto& c : clusters) {
    auto f = catalog.features(c.reference);
    if (f.empty()) continue;
    st.preference = update_preference(st.preference, f, alpha);
  }

  st.candidates.assign(kMaxImpressions * d, 0.0);
  for (std::size_t k = 0; k < st.impressions.size(); ++k) {
    auto f = catalog.features(st.impressions[k]);
    if (f.empty()) {
      ++st.missing_items;
      continue;
    }
    std::copy(f.begin(), f.end(), st.candidates.begin() + k * d);
  }

  st.user_context = vocab.encode(clickout);

  st.flat.reserve(flat_state_size(d, st.user_context.size()));
  for (auto c : st.memory.cells()) st.flat.push_back(c);
  st.flat.insert(st.flat.end(), st.candidates.begin(), st.candidates.end());
  st.flat.insert(st.flat.end(), st.user_context.begin(),
                 st.user_context.end());
  st.flat.insert(st.flat.end(), st.preference.begin(), st.preference.end());
  return st;
}

std::string state_to_json(const EnvState& state, int indent) {
  nlohmann::json j;
  j["session_id"] = state.session_id;
  j["user_id"] = state.user_id;
  j["impressions"] = state.impressions;
  j["feature_dim"] = state.feature_dim;
  j["missing_items"] = state.missing_items;
  auto& mem = j["memory"] = nlohmann::json::array();
  for (std::size_t r = 0; r < MemoryBlock::kRows; ++r) {
    mem.push_back(state.memory.hot_slot(r));
  }
  j["user_context"] = state.user_context;
  j["preference"] = state.preference;
  auto& cand = j["candidates"] = nlohmann::json::array();
  for (std::size_t k = 0; k < state.candidate_count(); ++k) {
    auto row = state.candidate(k);
    cand.push_back(std::vector<double>(row.begin(), row.end()));
  }
  j["flat_size"] = state.flat.size();
  return j.dump(indent);
}

}  // namespace replayrec
