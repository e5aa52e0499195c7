#include "replayrec/ingest.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>

#include "json.hpp"
#include "replayrec/csv.hpp"

namespace replayrec {

namespace {

struct ActionName {
  ActionType type;
  std::string_view log_name;
};

constexpr std::array<ActionName, 11> kActionNames{{
    {ActionType::kClickoutItem, "clickout item"},
    {ActionType::kInteractionItemImage, "interaction item image"},
    {ActionType::kInteractionItemInfo, "interaction item info"},
    {ActionType::kInteractionItemDeals, "interaction item deals"},
    {ActionType::kInteractionItemRating, "interaction item rating"},
    {ActionType::kSearchForItem, "search for item"},
    {ActionType::kSearchForDestination, "search for destination"},
    {ActionType::kSearchForPoi, "search for poi"},
    {ActionType::kChangeOfSortOrder, "change of sort order"},
    {ActionType::kFilterSelection, "filter selection"},
    {ActionType::kOther, "other"},
}};

template <typename T>
bool parse_number(std::string_view s, T& out) {
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
  if (s.empty()) return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

std::ifstream open_or_throw(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return in;
}

}  // namespace

ActionType parse_action_type(std::string_view s) {
  std::string norm(s);
  std::replace(norm.begin(), norm.end(), '_', ' ');
  for (const auto& a : kActionNames) {
    if (a.log_name == norm) return a.type;
  }
  return ActionType::kOther;
}

std::string_view to_string(ActionType a) {
  for (const auto& n : kActionNames) {
    if (n.type == a) return n.log_name;
  }
  return "other";
}

bool is_item_directed(ActionType a) {
  switch (a) {
    case ActionType::kClickoutItem:
    case ActionType::kInteractionItemImage:
    case ActionType::kInteractionItemInfo:
    case ActionType::kInteractionItemDeals:
    case ActionType::kInteractionItemRating:
    case ActionType::kSearchForItem:
      return true;
    default:
      return false;
  }
}

const std::vector<std::string>& session_columns() {
  static const std::vector<std::string> cols{
      "user_id", "session_id", "timestamp",       "step",
      "action_type", "reference", "platform",     "city",
      "device",  "current_filters", "impressions", "prices"};
  return cols;
}

std::vector<Session> parse_session_log(std::istream& in,
                                       SessionParseReport* report) {
  SessionParseReport local;
  SessionParseReport& rep = report ? *report : local;
  rep = SessionParseReport{};

  std::size_t line_no = 0;
  auto header = csv::read_record(in, ',', line_no);
  if (!header) return {};

  const auto& cols = session_columns();
  std::vector<std::size_t> pos(cols.size());
  for (std::size_t c = 0; c < cols.size(); ++c) {
    auto it = std::find(header->begin(), header->end(), cols[c]);
    if (it == header->end()) {
      throw DataError("session log is missing column '" + cols[c] + "'");
    }
    pos[c] = static_cast<std::size_t>(it - header->begin());
  }

  std::vector<Session> sessions;
  std::unordered_map<std::string, std::size_t> by_id;

  while (true) {
    std::size_t row_line = line_no + 1;
    auto rec = csv::read_record(in, ',', line_no);
    if (!rec) break;
    if (rec->size() == 1 && (*rec)[0].empty()) continue;  // blank line
    ++rep.rows_read;
    const auto& f = *rec;
    if (f.size() != header->size()) {
      ++rep.malformed_rows;
      rep.errors.push_back({row_line, "expected " +
                                          std::to_string(header->size()) +
                                          " columns, found " +
                                          std::to_string(f.size())});
      continue;
    }
    SessionEvent ev;
    ev.user_id = f[pos[0]];
    ev.session_id = f[pos[1]];
    if (!parse_number(f[pos[2]], ev.timestamp) ||
        !parse_number(f[pos[3]], ev.step) || ev.step < 1) {
      ++rep.malformed_rows;
      rep.errors.push_back({row_line, "bad timestamp or step"});
      continue;
    }
    ev.action_type = parse_action_type(f[pos[4]]);
    ev.reference = f[pos[5]];
    ev.platform = f[pos[6]];
    ev.city = f[pos[7]];
    ev.device = f[pos[8]];
    ev.current_filters = csv::split(f[pos[9]], '|');
    ev.impressions = csv::split(f[pos[10]], '|');
    bool prices_ok = true;
    for (const auto& p : csv::split(f[pos[11]], '|')) {
      int v = 0;
      if (!parse_number(p, v)) {
        prices_ok = false;
        break;
      }
      ev.prices.push_back(v);
    }
    if (!prices_ok) {
      ++rep.malformed_rows;
      rep.errors.push_back({row_line, "non-integer price"});
      continue;
    }
    if (ev.prices.size() != ev.impressions.size()) {
      ++rep.price_mismatch_rows;
      rep.errors.push_back({row_line, "prices/impressions length mismatch"});
      continue;
    }
    bool clickout = ev.action_type == ActionType::kClickoutItem;
    if (clickout == ev.impressions.empty()) {
      ++rep.impression_mismatch_rows;
      rep.errors.push_back(
          {row_line, "impressions must be present exactly on clickouts"});
      continue;
    }
    if (ev.impressions.size() > kMaxImpressions) {
      ev.impressions.resize(kMaxImpressions);
      ev.prices.resize(kMaxImpressions);
      ++rep.truncated_impression_lists;
    }

    auto [it, inserted] = by_id.try_emplace(ev.session_id, sessions.size());
    if (inserted) {
      Session s;
      s.session_id = ev.session_id;
      s.user_id = ev.user_id;
      sessions.push_back(std::move(s));
    }
    sessions[it->second].events.push_back(std::move(ev));
    ++rep.rows_accepted;
  }

  for (auto& s : sessions) {
    std::stable_sort(s.events.begin(), s.events.end(),
                     [](const SessionEvent& a, const SessionEvent& b) {
                       return a.step < b.step;
                     });
    auto last = std::unique(s.events.begin(), s.events.end(),
                            [](const SessionEvent& a, const SessionEvent& b) {
                              return a.step == b.step;
                            });
    auto dups = static_cast<std::size_t>(s.events.end() - last);
    rep.duplicate_step_rows += dups;
    rep.rows_accepted -= dups;
    s.events.erase(last, s.events.end());
    for (std::size_t i = 0; i < s.events.size(); ++i) {
      if (s.events[i].action_type == ActionType::kClickoutItem) {
        s.clickout_indices.push_back(i);
      }
    }
    if (!s.has_clickout()) ++rep.sessions_without_clickout;
  }
  return sessions;
}

std::vector<Session> parse_session_log(const std::filesystem::path& path,
                                       SessionParseReport* report) {
  auto in = open_or_throw(path);
  return parse_session_log(in, report);
}

void write_session_log(std::ostream& out, std::span<const Session> sessions) {
  csv::write_record(out, session_columns());
  for (const auto& s : sessions) {
    for (const auto& e : s.events) {
      std::vector<std::string> prices;
      prices.reserve(e.prices.size());
      for (int p : e.prices) prices.push_back(std::to_string(p));
      csv::write_record(out, {e.user_id, e.session_id,
                              std::to_string(e.timestamp),
                              std::to_string(e.step),
                              std::string(to_string(e.action_type)),
                              e.reference, e.platform, e.city, e.device,
                              csv::join(e.current_filters, '|'),
                              csv::join(e.impressions, '|'),
                              csv::join(prices, '|')});
    }
  }
}

void write_session_log(const std::filesystem::path& path,
                       std::span<const Session> sessions) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  write_session_log(out, sessions);
}

// ---------------------------------------------------------------------------
// ItemCatalog

ItemCatalog::ItemCatalog(std::vector<std::string> vocabulary,
                         std::vector<Item> items)
    : vocabulary_(std::move(vocabulary)), items_(std::move(items)) {
  for (const auto& it : items_) {
    if (it.properties.size() != vocabulary_.size()) {
      throw DataError("item '" + it.id + "' has " +
                      std::to_string(it.properties.size()) +
                      " properties, vocabulary has " +
                      std::to_string(vocabulary_.size()));
    }
  }
  rebuild_index();
  rebuild_features();
}

std::optional<std::size_t> ItemCatalog::index_of(std::string_view id) const {
  auto it = index_.find(std::string(id));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::span<const double> ItemCatalog::features(std::size_t idx) const {
  return {features_.data() + idx * feature_dim(), feature_dim()};
}

std::span<const double> ItemCatalog::features(std::string_view id) const {
  auto idx = index_of(id);
  if (!idx) return {};
  return features(*idx);
}

void ItemCatalog::rebuild_index() {
  index_.clear();
  for (std::size_t i = 0; i < items_.size(); ++i) index_[items_[i].id] = i;
}

void ItemCatalog::rebuild_features() {
  const std::size_t f = property_count();
  const std::size_t d = feature_dim();
  features_.assign(items_.size() * d, 0.0);
  if (items_.empty()) return;

  auto [pmin, pmax] = std::minmax_element(
      items_.begin(), items_.end(),
      [](const Item& a, const Item& b) { return a.price < b.price; });
  auto [cmin, cmax] = std::minmax_element(
      items_.begin(), items_.end(),
      [](const Item& a, const Item& b) { return a.clicks < b.clicks; });
  const double plo = pmin->price, prange = pmax->price - pmin->price;
  const double clo = static_cast<double>(cmin->clicks);
  const double crange = static_cast<double>(cmax->clicks) - clo;

  for (std::size_t i = 0; i < items_.size(); ++i) {
    double* row = features_.data() + i * d;
    for (std::size_t k = 0; k < f; ++k) row[k] = items_[i].properties[k];
    row[f] = prange > 0 ? (items_[i].price - plo) / prange : 0.0;
    row[f + 1] =
        crange > 0 ? (static_cast<double>(items_[i].clicks) - clo) / crange
                   : 0.0;
  }
}

void ItemCatalog::fill_from_sessions(std::span<const Session> sessions) {
  std::vector<double> price_sum(items_.size(), 0.0);
  std::vector<std::size_t> price_n(items_.size(), 0);
  for (auto& it : items_) it.clicks = 0;
  for (const auto& s : sessions) {
    for (const auto& e : s.events) {
      for (std::size_t k = 0; k < e.impressions.size(); ++k) {
        if (auto idx = index_of(e.impressions[k])) {
          price_sum[*idx] += e.prices[k];
          ++price_n[*idx];
        }
      }
      if (e.action_type == ActionType::kClickoutItem) {
        if (auto idx = index_of(e.reference)) ++items_[*idx].clicks;
      }
    }
  }
  for (std::size_t i = 0; i < items_.size(); ++i) {
    items_[i].price =
        price_n[i] ? price_sum[i] / static_cast<double>(price_n[i]) : 0.0;
  }
  rebuild_features();
}

ItemCatalog parse_item_metadata(std::istream& in) {
  std::size_t line_no = 0;
  auto header = csv::read_record(in, ',', line_no);
  ItemCatalog cat;
  if (!header) return cat;
  auto id_col = std::find(header->begin(), header->end(), "item_id");
  auto prop_col = std::find(header->begin(), header->end(), "properties");
  if (id_col == header->end() || prop_col == header->end()) {
    throw DataError("item metadata needs item_id and properties columns");
  }
  const auto id_pos = static_cast<std::size_t>(id_col - header->begin());
  const auto prop_pos = static_cast<std::size_t>(prop_col - header->begin());

  std::unordered_map<std::string, std::size_t> vocab_index;
  std::vector<std::pair<std::string, std::vector<std::size_t>>> rows;
  std::unordered_map<std::string, std::size_t> row_of;

  while (true) {
    std::size_t row_line = line_no + 1;
    auto rec = csv::read_record(in, ',', line_no);
    if (!rec) break;
    if (rec->size() == 1 && (*rec)[0].empty()) continue;
    if (rec->size() != header->size()) {
      throw DataError("item metadata line " + std::to_string(row_line) +
                      ": wrong column count");
    }
    std::vector<std::size_t> props;
    for (const auto& name : csv::split((*rec)[prop_pos], '|')) {
      if (name.empty()) continue;
      auto [it, inserted] =
          vocab_index.try_emplace(name, cat.vocabulary_.size());
      if (inserted) cat.vocabulary_.push_back(name);
      props.push_back(it->second);
    }
    const std::string& id = (*rec)[id_pos];
    auto [it, inserted] = row_of.try_emplace(id, rows.size());
    if (inserted) {
      rows.emplace_back(id, std::move(props));
    } else {
      rows[it->second].second = std::move(props);
      ++cat.duplicate_ids_;
    }
  }

  for (auto& [id, props] : rows) {
    ItemCatalog::Item item;
    item.id = id;
    item.properties.assign(cat.vocabulary_.size(), 0);
    for (auto p : props) item.properties[p] = 1;
    cat.items_.push_back(std::move(item));
  }
  cat.rebuild_index();
  cat.rebuild_features();
  return cat;
}

ItemCatalog parse_item_metadata(const std::filesystem::path& path) {
  auto in = open_or_throw(path);
  return parse_item_metadata(in);
}

void ItemCatalog::save_json(const std::filesystem::path& path) const {
  nlohmann::json j;
  j["format"] = "replayrec-catalog";
  j["version"] = 1;
  j["vocabulary"] = vocabulary_;
  auto& arr = j["items"] = nlohmann::json::array();
  for (const auto& it : items_) {
    std::vector<std::size_t> on;
    for (std::size_t k = 0; k < it.properties.size(); ++k) {
      if (it.properties[k]) on.push_back(k);
    }
    arr.push_back({{"id", it.id},
                   {"properties", on},
                   {"price", it.price},
                   {"clicks", it.clicks}});
  }
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << j.dump(1) << '\n';
}

ItemCatalog ItemCatalog::load_json(const std::filesystem::path& path) {
  auto in = open_or_throw(path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  if (j.value("format", "") != "replayrec-catalog") {
    throw DataError(path.string() + " is not a catalog file");
  }
  auto vocab = j.at("vocabulary").get<std::vector<std::string>>();
  std::vector<Item> items;
  for (const auto& ji : j.at("items")) {
    Item it;
    it.id = ji.at("id").get<std::string>();
    it.properties.assign(vocab.size(), 0);
    for (auto k : ji.at("properties").get<std::vector<std::size_t>>()) {
      if (k >= vocab.size()) throw DataError("property index out of range");
      it.properties[k] = 1;
    }
    it.price = ji.at("price").get<double>();
    it.clicks = ji.at("clicks").get<std::int64_t>();
    items.push_back(std::move(it));
  }
  return ItemCatalog(std::move(vocab), std::move(items));
}

// ---------------------------------------------------------------------------
// Ratings

std::vector<RatingRecord> parse_ratings(std::istream& in,
                                        std::size_t* malformed) {
  std::vector<RatingRecord> out;
  std::size_t bad = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto f = csv::split(line, '\t');
    RatingRecord r;
    if (f.size() != 4 || !parse_number(f[2], r.rating) ||
        !parse_number(f[3], r.timestamp)) {
      ++bad;
      continue;
    }
    r.user_id = f[0];
    r.item_id = f[1];
    out.push_back(std::move(r));
  }
  if (malformed) *malformed = bad;
  return out;
}

std::vector<RatingRecord> parse_ratings(const std::filesystem::path& path,
                                        std::size_t* malformed) {
  auto in = open_or_throw(path);
  return parse_ratings(in, malformed);
}

void write_ratings(std::ostream& out, std::span<const RatingRecord> records) {
  for (const auto& r : records) {
    out << r.user_id << '\t' << r.item_id << '\t' << r.rating << '\t'
        << r.timestamp << '\n';
  }
}

std::vector<RatingRecord> deduplicate_ratings(
    std::span<const RatingRecord> records) {
  std::map<std::pair<std::string, std::string>, std::size_t> latest;
  for (std::size_t i = 0; i < records.size(); ++i) {
    auto key = std::make_pair(records[i].user_id, records[i].item_id);
    auto [it, inserted] = latest.try_emplace(key, i);
    if (!inserted && records[i].timestamp >= records[it->second].timestamp) {
      it->second = i;
    }
  }
  std::vector<std::size_t> keep;
  keep.reserve(latest.size());
  for (const auto& [key, idx] : latest) keep.push_back(idx);
  std::sort(keep.begin(), keep.end());
  std::vector<RatingRecord> out;
  out.reserve(keep.size());
  for (auto i : keep) out.push_back(records[i]);
  return out;
}

RatingMatrix::RatingMatrix(std::size_t users, std::size_t items)
    : n_users_(users), n_items_(items), cells_(users * items, 0) {}

std::size_t RatingMatrix::ones() const {
  return static_cast<std::size_t>(
      std::count(cells_.begin(), cells_.end(), std::uint8_t{1}));
}

double RatingMatrix::density() const {
  if (cells_.empty()) return 0.0;
  return static_cast<double>(ones()) / static_cast<double>(cells_.size());
}

std::optional<std::size_t> RatingMatrix::user_index(std::string_view id) const {
  auto it = std::lower_bound(user_ids.begin(), user_ids.end(), id);
  if (it == user_ids.end() || *it != id) return std::nullopt;
  return static_cast<std::size_t>(it - user_ids.begin());
}

std::optional<std::size_t> RatingMatrix::item_index(std::string_view id) const {
  auto it = std::lower_bound(item_ids.begin(), item_ids.end(), id);
  if (it == item_ids.end() || *it != id) return std::nullopt;
  return static_cast<std::size_t>(it - item_ids.begin());
}

RatingMatrix RatingMatrix::from_rows(const std::vector<std::vector<int>>& rows) {
  std::size_t cols = rows.empty() ? 0 : rows.front().size();
  RatingMatrix m(rows.size(), cols);
  for (std::size_t u = 0; u < rows.size(); ++u) {
    if (rows[u].size() != cols) throw DataError("ragged matrix rows");
    for (std::size_t i = 0; i < cols; ++i) m.set(u, i, rows[u][i] != 0);
  }
  return m;
}

RatingMatrix binarize_ratings(std::span<const RatingRecord> records,
                              int threshold) {
  if (threshold < 1 || threshold > 5) {
    throw ConfigError("rating threshold must be in [1,5]");
  }
  std::vector<RatingRecord> valid;
  std::size_t rejected = 0;
  for (const auto& r : records) {
    if (r.rating < 1 || r.rating > 5) {
      ++rejected;
      continue;
    }
    valid.push_back(r);
  }
  valid = deduplicate_ratings(valid);

  std::vector<std::string> users, items;
  for (const auto& r : valid) {
    users.push_back(r.user_id);
    items.push_back(r.item_id);
  }
  auto sort_unique = [](std::vector<std::string>& v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  };
  sort_unique(users);
  sort_unique(items);

  RatingMatrix m(users.size(), items.size());
  m.user_ids = std::move(users);
  m.item_ids = std::move(items);
  m.rejected_records = rejected;
  for (const auto& r : valid) {
    if (r.rating >= threshold) {
      m.set(*m.user_index(r.user_id), *m.item_index(r.item_id), true);
    }
  }
  return m;
}

RatingSplit split_train_test(std::span<const RatingRecord> records,
                             double train_fraction, Rng& rng) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ConfigError("train_fraction must be in (0,1)");
  }
  const std::size_t n = records.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  auto n_train = static_cast<std::size_t>(
      std::floor(train_fraction * static_cast<double>(n) + 1e-9));
  if (n > 0 && n_train >= n) n_train = n - 1;

  std::vector<std::uint8_t> in_train(n, 0);
  for (std::size_t k = 0; k < n_train; ++k) in_train[order[k]] = 1;
  RatingSplit split;
  for (std::size_t i = 0; i < n; ++i) {
    (in_train[i] ? split.train : split.test).push_back(records[i]);
  }
  return split;
}

HistoryMask mask_history(std::span<const RatingRecord> test_user_records,
                         double observable_fraction, Rng& rng) {
  if (!(observable_fraction > 0.0 && observable_fraction <= 1.0)) {
    throw ConfigError("observable_fraction must be in (0,1]");
  }
  std::map<std::string, std::vector<std::size_t>> by_user;
  for (std::size_t i = 0; i < test_user_records.size(); ++i) {
    by_user[test_user_records[i].user_id].push_back(i);
  }
  HistoryMask mask;
  for (auto& [user, idx] : by_user) {
    std::shuffle(idx.begin(), idx.end(), rng);
    // The epsilon keeps 0.1 * 30 from rounding up to 4.
    auto n_obs = static_cast<std::size_t>(std::ceil(
        observable_fraction * static_cast<double>(idx.size()) - 1e-9));
    n_obs = std::min(n_obs, idx.size());
    std::sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_obs));
    std::sort(idx.begin() + static_cast<std::ptrdiff_t>(n_obs), idx.end());
    for (std::size_t k = 0; k < idx.size(); ++k) {
      (k < n_obs ? mask.observable : mask.hidden)
          .push_back(test_user_records[idx[k]]);
    }
  }
  return mask;
}

}  // namespace replayrec
