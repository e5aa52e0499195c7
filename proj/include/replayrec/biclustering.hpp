#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "replayrec/common.hpp"
#include "replayrec/ingest.hpp"

namespace replayrec {

// All-ones submatrix; both index lists sorted ascending and non-empty.
struct Bicluster {
  std::vector<std::size_t> users;
  std::vector<std::size_t> items;

  auto operator<=>(const Bicluster&) const = default;
  bool operator==(const Bicluster&) const = default;
};

struct BimaxOptions {
  std::size_t min_users = 2;
  std::size_t min_items = 2;
  // Enumeration aborts with DataError once this many candidates are found;
  // 0 disables the guard.
  std::size_t max_biclusters = 0;
};

// Inclusion-maximal all-ones biclusters meeting the size minimums, in
// lexicographic (users, items) order.
std::vector<Bicluster> bimax(const RatingMatrix& m, const BimaxOptions& opt = {});

bool is_all_ones(const RatingMatrix& m, const Bicluster& b);
bool is_maximal(const RatingMatrix& m, const Bicluster& b);

// Uniform sample of n*n biclusters without replacement, returned in input
// order. Throws DataError when fewer than n*n are available.
std::vector<Bicluster> sample_biclusters(const std::vector<Bicluster>& all,
                                         std::size_t n, Rng& rng);

struct BiclusterSet {
  std::vector<std::string> user_ids;
  std::vector<std::string> item_ids;
  std::vector<Bicluster> biclusters;

  nlohmann::json to_json() const;
  static BiclusterSet from_json(const nlohmann::json& j);
  void save(const std::filesystem::path& p) const;
  static BiclusterSet load(const std::filesystem::path& p);
};

}  // namespace replayrec
