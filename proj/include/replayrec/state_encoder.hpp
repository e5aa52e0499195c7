#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "replayrec/ingest.hpp"

namespace replayrec {

inline constexpr std::size_t kMemoryLength = 20;

// A maximal run of consecutive item-directed events on one reference.
struct OperationCluster {
  std::string reference;
  std::size_t first_event = 0;  // index into the input event span
  std::size_t last_event = 0;
};

std::vector<OperationCluster> compress_consecutive(
    std::span<const SessionEvent> events);

// 20 x 25 one-hot block; row r is the (r+1)-th most recent cluster.
class MemoryBlock {
 public:
  static constexpr std::size_t kRows = kMemoryLength;
  static constexpr std::size_t kCols = kMaxImpressions;

  std::uint8_t at(std::size_t row, std::size_t col) const {
    return cells_[row * kCols + col];
  }
  void set(std::size_t row, std::size_t col) { cells_[row * kCols + col] = 1; }
  std::size_t ones() const;
  // Slot index of the single 1 in `row`, or -1.
  int hot_slot(std::size_t row) const;
  const std::array<std::uint8_t, kRows * kCols>& cells() const {
    return cells_;
  }

  bool operator==(const MemoryBlock&) const = default;

 private:
  std::array<std::uint8_t, kRows * kCols> cells_{};
};

MemoryBlock encode_memory(std::span<const OperationCluster> clusters,
                          std::span<const std::string> impressions);

// (1 - alpha) * prev + alpha * item, elementwise.
std::vector<double> update_preference(std::span<const double> prev,
                                      std::span<const double> item,
                                      double alpha);

// Fixed vocabularies for the boolean user-context vector: one-hot platform,
// one-hot device, multi-hot active filters.
class ContextVocabulary {
 public:
  ContextVocabulary() = default;
  static ContextVocabulary build(std::span<const Session> sessions);

  std::size_t size() const {
    return platforms_.size() + devices_.size() + filters_.size();
  }
  std::vector<double> encode(const SessionEvent& ev) const;

  const std::vector<std::string>& platforms() const { return platforms_; }
  const std::vector<std::string>& devices() const { return devices_; }
  const std::vector<std::string>& filters() const { return filters_; }

 private:
  std::vector<std::string> platforms_;
  std::vector<std::string> devices_;
  std::vector<std::string> filters_;
};

struct EnvState {
  std::vector<double> user_context;
  std::vector<double> preference;
  std::vector<double> candidates;  // kMaxImpressions x feature_dim, row-major
  MemoryBlock memory;
  std::vector<double> flat;        // [memory, candidates, u, preference]

  std::size_t feature_dim = 0;
  std::vector<std::string> impressions;
  std::string user_id;
  std::string session_id;
  std::size_t missing_items = 0;   // impressions absent from the catalog

  std::size_t candidate_count() const { return impressions.size(); }
  std::span<const double> candidate(std::size_t slot) const {
    return {candidates.data() + slot * feature_dim, feature_dim};
  }
  bool operator==(const EnvState&) const = default;
};

std::size_t flat_state_size(std::size_t feature_dim, std::size_t context_dim);

// `prefix` holds the events strictly before `clickout`.
EnvState build_state(std::span<const SessionEvent> prefix,
                     const SessionEvent& clickout, const ItemCatalog& catalog,
                     const ContextVocabulary& vocab, double alpha);

std::string state_to_json(const EnvState& state, int indent = 1);

}  // namespace replayrec
