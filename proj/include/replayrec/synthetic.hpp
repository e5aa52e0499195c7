#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "json.hpp"
#include "replayrec/ingest.hpp"
#include "replayrec/replay_env.hpp"

namespace replayrec::synthetic {

enum class ClickModel {
  kUniform,        // the clicked item is uniform over the impressions
  kPlantedLinear,  // the clicked item maximizes a fixed linear score
};

struct SessionSpec {
  std::size_t sessions = 2000;
  std::size_t items = 500;
  std::size_t properties = kDefaultPropertyCount;
  double property_density = 0.2;
  std::size_t impressions = kMaxImpressions;
  std::size_t min_clickouts = 1;
  std::size_t max_clickouts = 3;
  std::size_t max_interactions = 6;  // item interactions before each clickout
  std::size_t users = 500;
  ClickModel click_model = ClickModel::kUniform;
  std::uint64_t seed = 1;

  nlohmann::json to_json() const;
  static SessionSpec from_json(const nlohmann::json& j);
};

struct GeneratedSessions {
  SessionDataset dataset;
  // Weights over the boolean properties used by the planted click model.
  std::vector<double> planted_weights;
};

GeneratedSessions generate_sessions(const SessionSpec& spec);

// Score under the planted weights; only the boolean properties count.
double planted_score(const std::vector<double>& weights,
                     const ItemCatalog::Item& item);

// item_id,properties CSV matching parse_item_metadata.
void write_item_metadata(std::ostream& out, const ItemCatalog& catalog);

struct RatingSpec {
  std::size_t users = 400;
  std::size_t items = 600;
  std::size_t groups = 20;
  std::size_t items_per_group = 12;
  double core_like_prob = 0.9;    // a member rates a core item
  double noise_rate_prob = 0.02;  // anyone rates any other item
  std::uint64_t seed = 1;

  nlohmann::json to_json() const;
  static RatingSpec from_json(const nlohmann::json& j);
};

// MovieLens-style records: group members rate their group's core items 4-5,
// background ratings are uniform on 1..5.
std::vector<RatingRecord> generate_ratings(const RatingSpec& spec);

}  // namespace replayrec::synthetic
