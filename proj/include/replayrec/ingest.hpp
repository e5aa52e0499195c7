#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "replayrec/common.hpp"

namespace replayrec {

inline constexpr std::size_t kMaxImpressions = 25;
inline constexpr std::size_t kDefaultPropertyCount = 156;

enum class ActionType {
  kClickoutItem,
  kInteractionItemImage,
  kInteractionItemInfo,
  kInteractionItemDeals,
  kInteractionItemRating,
  kSearchForItem,
  kSearchForDestination,
  kSearchForPoi,
  kChangeOfSortOrder,
  kFilterSelection,
  kOther,
};

// Accepts both the log spelling ("clickout item") and the snake-case form.
ActionType parse_action_type(std::string_view s);
std::string_view to_string(ActionType a);

// True for action types whose reference column holds an item id.
bool is_item_directed(ActionType a);

struct SessionEvent {
  std::string user_id;
  std::string session_id;
  std::int64_t timestamp = 0;
  int step = 0;
  ActionType action_type = ActionType::kOther;
  std::string reference;
  std::string platform;
  std::string city;
  std::string device;
  std::vector<std::string> current_filters;
  std::vector<std::string> impressions;
  std::vector<int> prices;

  bool operator==(const SessionEvent&) const = default;
};

struct Session {
  std::string session_id;
  std::string user_id;
  std::vector<SessionEvent> events;     // sorted by step
  std::vector<std::size_t> clickout_indices;

  bool has_clickout() const { return !clickout_indices.empty(); }
  bool operator==(const Session&) const = default;
};

struct RowError {
  std::size_t line = 0;
  std::string message;
};

struct SessionParseReport {
  std::size_t rows_read = 0;
  std::size_t rows_accepted = 0;
  std::size_t malformed_rows = 0;
  std::size_t price_mismatch_rows = 0;
  std::size_t impression_mismatch_rows = 0;  // impressions present iff clickout
  std::size_t duplicate_step_rows = 0;
  std::size_t truncated_impression_lists = 0;
  std::size_t sessions_without_clickout = 0;
  std::vector<RowError> errors;
};

// Session CSV column order, also used when writing.
const std::vector<std::string>& session_columns();

std::vector<Session> parse_session_log(std::istream& in,
                                       SessionParseReport* report = nullptr);
std::vector<Session> parse_session_log(const std::filesystem::path& path,
                                       SessionParseReport* report = nullptr);

void write_session_log(std::ostream& out, std::span<const Session> sessions);
void write_session_log(const std::filesystem::path& path,
                       std::span<const Session> sessions);

// Item id -> boolean property vector plus price and click count. Feature
// vectors have length F+2: the F booleans, then price and clicks, both
// min-max normalized over the catalog.
class ItemCatalog {
 public:
  struct Item {
    std::string id;
    std::vector<std::uint8_t> properties;
    double price = 0.0;
    std::int64_t clicks = 0;
  };

  ItemCatalog() = default;
  ItemCatalog(std::vector<std::string> vocabulary, std::vector<Item> items);

  std::size_t property_count() const { return vocabulary_.size(); }
  std::size_t feature_dim() const { return vocabulary_.size() + 2; }
  std::size_t size() const { return items_.size(); }
  const std::vector<std::string>& vocabulary() const { return vocabulary_; }
  const std::vector<Item>& items() const { return items_; }

  std::optional<std::size_t> index_of(std::string_view id) const;
  const Item& item(std::size_t idx) const { return items_[idx]; }
  std::span<const double> features(std::size_t idx) const;
  // Empty span when the id is unknown.
  std::span<const double> features(std::string_view id) const;

  // Fills price (mean listed price) and clicks (number of clickouts
  // referencing the item) from the log, then recomputes feature vectors.
  void fill_from_sessions(std::span<const Session> sessions);

  std::size_t duplicate_ids() const { return duplicate_ids_; }

  void save_json(const std::filesystem::path& path) const;
  static ItemCatalog load_json(const std::filesystem::path& path);

 private:
  friend ItemCatalog parse_item_metadata(std::istream& in);
  void rebuild_index();
  void rebuild_features();

  std::vector<std::string> vocabulary_;
  std::vector<Item> items_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<double> features_;  // row-major, size() x feature_dim()
  std::size_t duplicate_ids_ = 0;
};

ItemCatalog parse_item_metadata(std::istream& in);
ItemCatalog parse_item_metadata(const std::filesystem::path& path);

struct RatingRecord {
  std::string user_id;
  std::string item_id;
  int rating = 0;
  std::int64_t timestamp = 0;

  bool operator==(const RatingRecord&) const = default;
};

// MovieLens u.data layout: user_id \t item_id \t rating \t timestamp.
std::vector<RatingRecord> parse_ratings(std::istream& in,
                                        std::size_t* malformed = nullptr);
std::vector<RatingRecord> parse_ratings(const std::filesystem::path& path,
                                        std::size_t* malformed = nullptr);
void write_ratings(std::ostream& out, std::span<const RatingRecord> records);

// One record per (user, item), keeping the latest timestamp.
std::vector<RatingRecord> deduplicate_ratings(
    std::span<const RatingRecord> records);

// Dense binary user x item matrix. Users and items are indexed in sorted id
// order; every user and item seen in the records gets a row/column.
class RatingMatrix {
 public:
  RatingMatrix() = default;
  RatingMatrix(std::size_t users, std::size_t items);

  std::size_t users() const { return n_users_; }
  std::size_t items() const { return n_items_; }
  bool at(std::size_t u, std::size_t i) const {
    return cells_[u * n_items_ + i] != 0;
  }
  void set(std::size_t u, std::size_t i, bool v) {
    cells_[u * n_items_ + i] = v ? 1 : 0;
  }
  std::size_t ones() const;
  double density() const;

  std::vector<std::string> user_ids;
  std::vector<std::string> item_ids;
  std::size_t rejected_records = 0;

  std::optional<std::size_t> user_index(std::string_view id) const;
  std::optional<std::size_t> item_index(std::string_view id) const;

  static RatingMatrix from_rows(const std::vector<std::vector<int>>& rows);

 private:
  std::size_t n_users_ = 0;
  std::size_t n_items_ = 0;
  std::vector<std::uint8_t> cells_;
};

inline constexpr int kDefaultRatingThreshold = 3;

// entry = 1 iff rating >= threshold. Ratings outside 1..5 are rejected.
RatingMatrix binarize_ratings(std::span<const RatingRecord> records,
                              int threshold = kDefaultRatingThreshold);

struct RatingSplit {
  std::vector<RatingRecord> train;
  std::vector<RatingRecord> test;
};

// floor(train_fraction * n) records go to train, but the test side is never
// empty for non-empty input. Both sides keep input order.
RatingSplit split_train_test(std::span<const RatingRecord> records,
                             double train_fraction, Rng& rng);

struct HistoryMask {
  std::vector<RatingRecord> observable;
  std::vector<RatingRecord> hidden;
};

// Per user, ceil(observable_fraction * count) records stay observable.
HistoryMask mask_history(std::span<const RatingRecord> test_user_records,
                         double observable_fraction, Rng& rng);

}  // namespace replayrec
