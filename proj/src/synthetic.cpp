#include "replayrec/synthetic.hpp"

#include <algorithm>
#include <numeric>
#include <ostream>
#include <set>

#include "replayrec/csv.hpp"

namespace replayrec::synthetic {

namespace {

const std::vector<std::string> kPlatforms{"AU", "BR", "DE", "UK", "US"};
const std::vector<std::string> kDevices{"desktop", "mobile", "tablet"};
const std::vector<std::string> kFilters{"Sort by Price", "Best Value",
                                        "Focus on Rating", "Free WiFi",
                                        "Breakfast Included"};
const std::vector<ActionType> kInteractions{
    ActionType::kInteractionItemImage, ActionType::kInteractionItemInfo,
    ActionType::kInteractionItemDeals, ActionType::kInteractionItemRating};

template <typename T>
const T& pick(const std::vector<T>& v, Rng& rng) {
  std::uniform_int_distribution<std::size_t> d(0, v.size() - 1);
  return v[d(rng)];
}

}  // namespace

nlohmann::json SessionSpec::to_json() const {
  return {{"sessions", sessions},
          {"items", items},
          {"properties", properties},
          {"property_density", property_density},
          {"impressions", impressions},
          {"min_clickouts", min_clickouts},
          {"max_clickouts", max_clickouts},
          {"max_interactions", max_interactions},
          {"users", users},
          {"click_model",
           click_model == ClickModel::kUniform ? "uniform" : "planted_linear"},
          {"seed", seed}};
}

SessionSpec SessionSpec::from_json(const nlohmann::json& j) {
  static const std::set<std::string> known{
      "sessions",      "items",         "properties",       "property_density",
      "impressions",   "min_clickouts", "max_clickouts",    "max_interactions",
      "users",         "click_model",   "seed"};
  for (const auto& [k, _] : j.items()) {
    if (!known.count(k)) throw ConfigError("unknown synthetic key '" + k + "'");
  }
  SessionSpec s;
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) j.at(key).get_to(field);
  };
  get("sessions", s.sessions);
  get("items", s.items);
  get("properties", s.properties);
  get("property_density", s.property_density);
  get("impressions", s.impressions);
  get("min_clickouts", s.min_clickouts);
  get("max_clickouts", s.max_clickouts);
  get("max_interactions", s.max_interactions);
  get("users", s.users);
  get("seed", s.seed);
  if (j.contains("click_model")) {
    auto m = j.at("click_model").get<std::string>();
    if (m == "uniform") {
      s.click_model = ClickModel::kUniform;
    } else if (m == "planted_linear") {
      s.click_model = ClickModel::kPlantedLinear;
    } else {
      throw ConfigError("unknown click_model '" + m + "'");
    }
  }
  return s;
}

double planted_score(const std::vector<double>& weights,
                     const ItemCatalog::Item& item) {
  double s = 0.0;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    s += weights[k] * item.properties[k];
  }
  return s;
}

GeneratedSessions generate_sessions(const SessionSpec& spec) {
  if (spec.impressions == 0 || spec.impressions > kMaxImpressions ||
      spec.impressions > spec.items) {
    throw ConfigError("synthetic impressions must be in [1, min(25, items)]");
  }
  if (spec.min_clickouts == 0 || spec.min_clickouts > spec.max_clickouts) {
    throw ConfigError("synthetic clickout range is invalid");
  }
  if (spec.users == 0) throw ConfigError("synthetic users must be positive");

  Rng rng(spec.seed);
  GeneratedSessions out;

  std::vector<std::string> vocab;
  for (std::size_t k = 0; k < spec.properties; ++k) {
    vocab.push_back("p" + std::to_string(k));
  }
  std::bernoulli_distribution has_prop(spec.property_density);
  std::uniform_real_distribution<double> base_price(40.0, 250.0);
  std::vector<ItemCatalog::Item> items(spec.items);
  std::vector<double> prices(spec.items);
  for (std::size_t i = 0; i < spec.items; ++i) {
    items[i].id = std::to_string(100000 + i);
    items[i].properties.resize(spec.properties);
    for (auto& p : items[i].properties) p = has_prop(rng) ? 1 : 0;
    prices[i] = base_price(rng);
  }
  std::normal_distribution<double> gauss(0.0, 1.0);
  out.planted_weights.resize(spec.properties);
  for (auto& w : out.planted_weights) w = gauss(rng);

  std::uniform_int_distribution<std::size_t> n_clickouts(spec.min_clickouts,
                                                         spec.max_clickouts);
  std::uniform_int_distribution<std::size_t> n_inter(0, spec.max_interactions);
  std::uniform_int_distribution<std::size_t> user_dist(0, spec.users - 1);
  std::uniform_int_distribution<int> jitter(-10, 10);
  std::bernoulli_distribution repeat(0.3), detour(0.2), filtered(0.3);
  std::vector<std::size_t> pool(spec.items);
  std::iota(pool.begin(), pool.end(), 0);

  std::int64_t clock = 1541030400;
  for (std::size_t s = 0; s < spec.sessions; ++s) {
    Session sess;
    sess.session_id = "s" + std::to_string(s);
    sess.user_id = "u" + std::to_string(user_dist(rng));
    const std::string platform = pick(kPlatforms, rng);
    const std::string device = pick(kDevices, rng);
    std::vector<std::string> filters;
    if (filtered(rng)) filters.push_back(pick(kFilters, rng));
    int step = 0;

    auto make_event = [&](ActionType type, std::string ref) {
      SessionEvent e;
      e.user_id = sess.user_id;
      e.session_id = sess.session_id;
      e.step = ++step;
      e.timestamp = clock;
      clock += 7;
      e.action_type = type;
      e.reference = std::move(ref);
      e.platform = platform;
      e.city = "Springfield, USA";
      e.device = device;
      e.current_filters = filters;
      return e;
    };

    const std::size_t clickouts = n_clickouts(rng);
    for (std::size_t c = 0; c < clickouts; ++c) {
      // Partial Fisher-Yates for the impression list.
      for (std::size_t k = 0; k < spec.impressions; ++k) {
        std::uniform_int_distribution<std::size_t> d(k, pool.size() - 1);
        std::swap(pool[k], pool[d(rng)]);
      }
      std::vector<std::size_t> shown(pool.begin(),
                                     pool.begin() + spec.impressions);

      const std::size_t inter = n_inter(rng);
      std::string last;
      for (std::size_t k = 0; k < inter; ++k) {
        std::string ref = (!last.empty() && repeat(rng))
                              ? last
                              : items[pick(shown, rng)].id;
        sess.events.push_back(make_event(pick(kInteractions, rng), ref));
        last = ref;
        if (detour(rng)) {
          sess.events.push_back(
              make_event(ActionType::kChangeOfSortOrder, "price only"));
        }
      }

      std::size_t chosen = 0;
      if (spec.click_model == ClickModel::kUniform) {
        std::uniform_int_distribution<std::size_t> d(0, shown.size() - 1);
        chosen = d(rng);
      } else {
        double best = planted_score(out.planted_weights, items[shown[0]]);
        for (std::size_t k = 1; k < shown.size(); ++k) {
          double v = planted_score(out.planted_weights, items[shown[k]]);
          if (v > best) {
            best = v;
            chosen = k;
          }
        }
      }
      auto click = make_event(ActionType::kClickoutItem, items[shown[chosen]].id);
      for (auto i : shown) {
        click.impressions.push_back(items[i].id);
        click.prices.push_back(
            std::max(1, static_cast<int>(prices[i]) + jitter(rng)));
      }
      sess.clickout_indices.push_back(sess.events.size());
      sess.events.push_back(std::move(click));
    }
    out.dataset.sessions.push_back(std::move(sess));
  }

  out.dataset.catalog = ItemCatalog(std::move(vocab), std::move(items));
  out.dataset.catalog.fill_from_sessions(out.dataset.sessions);
  out.dataset.vocab = ContextVocabulary::build(out.dataset.sessions);
  return out;
}

void write_item_metadata(std::ostream& out, const ItemCatalog& catalog) {
  csv::write_record(out, {"item_id", "properties"});
  for (const auto& it : catalog.items()) {
    std::vector<std::string> names;
    for (std::size_t k = 0; k < it.properties.size(); ++k) {
      if (it.properties[k]) names.push_back(catalog.vocabulary()[k]);
    }
    csv::write_record(out, {it.id, csv::join(names, '|')});
  }
}

nlohmann::json RatingSpec::to_json() const {
  return {{"users", users},
          {"items", items},
          {"groups", groups},
          {"items_per_group", items_per_group},
          {"core_like_prob", core_like_prob},
          {"noise_rate_prob", noise_rate_prob},
          {"seed", seed}};
}

RatingSpec RatingSpec::from_json(const nlohmann::json& j) {
  static const std::set<std::string> known{
      "users",          "items",           "groups", "items_per_group",
      "core_like_prob", "noise_rate_prob", "seed"};
  for (const auto& [k, _] : j.items()) {
    if (!known.count(k)) throw ConfigError("unknown ratings key '" + k + "'");
  }
  RatingSpec s;
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) j.at(key).get_to(field);
  };
  get("users", s.users);
  get("items", s.items);
  get("groups", s.groups);
  get("items_per_group", s.items_per_group);
  get("core_like_prob", s.core_like_prob);
  get("noise_rate_prob", s.noise_rate_prob);
  get("seed", s.seed);
  return s;
}

std::vector<RatingRecord> generate_ratings(const RatingSpec& spec) {
  if (spec.groups == 0 || spec.groups * spec.items_per_group > spec.items) {
    throw ConfigError("rating groups do not fit in the item count");
  }
  Rng rng(spec.seed);
  std::bernoulli_distribution core(spec.core_like_prob);
  std::bernoulli_distribution noise(spec.noise_rate_prob);
  std::uniform_int_distribution<int> high(4, 5), any(1, 5);
  std::uniform_int_distribution<int> tick(1, 600);
  std::int64_t clock = 874724710;

  std::vector<RatingRecord> out;
  for (std::size_t u = 0; u < spec.users; ++u) {
    const std::size_t g = u % spec.groups;
    const std::size_t lo = g * spec.items_per_group;
    const std::size_t hi = lo + spec.items_per_group;
    for (std::size_t i = 0; i < spec.items; ++i) {
      int rating = 0;
      if (i >= lo && i < hi) {
        if (core(rng)) rating = high(rng);
      } else if (noise(rng)) {
        rating = any(rng);
      }
      if (rating == 0) continue;
      clock += tick(rng);
      out.push_back({std::to_string(u + 1), std::to_string(i + 1), rating,
                     clock});
    }
  }
  return out;
}

}  // namespace replayrec::synthetic
