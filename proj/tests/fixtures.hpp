#pragma once

#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "replayrec/ingest.hpp"
#include "replayrec/replay_env.hpp"

namespace fixture {

inline const char* kSessionHeader =
    "user_id,session_id,timestamp,step,action_type,reference,platform,city,device,"
    "current_filters,impressions,prices\n";

inline std::string row(const std::string& session, int step, const std::string& action,
                       const std::string& ref, const std::string& impressions = "",
                       const std::string& prices = "", const std::string& filters = "") {
  return "u1," + session + "," + std::to_string(1000 + step) + "," + std::to_string(step) +
         "," + action + "," + ref + ",US,\"Austin, USA\",mobile," + filters + "," +
         impressions + "," + prices + "\n";
}

inline std::string ids(int first, int count) {
  std::string s;
  for (int i = 0; i < count; ++i) s += (i ? "|" : "") + std::to_string(first + i);
  return s;
}

inline std::string prices(int count, int base = 100) {
  std::string s;
  for (int i = 0; i < count; ++i) s += (i ? "|" : "") + std::to_string(base + i);
  return s;
}

inline replayrec::SessionEvent interaction(const std::string& ref) {
  replayrec::SessionEvent e;
  e.action_type = replayrec::ActionType::kInteractionItemImage;
  e.reference = ref;
  return e;
}

inline replayrec::SessionEvent clickout(const std::string& ref,
                                        std::vector<std::string> impressions) {
  replayrec::SessionEvent e;
  e.action_type = replayrec::ActionType::kClickoutItem;
  e.reference = ref;
  e.prices.assign(impressions.size(), 100);
  e.impressions = std::move(impressions);
  e.platform = "US";
  e.device = "mobile";
  return e;
}

inline std::vector<std::string> slots(int first, int count) {
  std::vector<std::string> out;
  for (int i = 0; i < count; ++i) out.push_back(std::to_string(first + i));
  return out;
}

// Catalog over ids with explicit property vectors and zero price/clicks.
inline replayrec::ItemCatalog catalog(std::vector<std::string> vocab,
                                      const std::vector<std::pair<std::string,
                                                                  std::vector<std::uint8_t>>>& items) {
  std::vector<replayrec::ItemCatalog::Item> v;
  for (const auto& [id, props] : items) v.push_back({id, props, 0.0, 0});
  return replayrec::ItemCatalog(std::move(vocab), std::move(v));
}

// Items "0".."39" with two properties; sessions given as (true slot, list
// length) per clickout. With `hint`, each clickout is preceded by a look at
// the item that ends up clicked.
inline std::shared_ptr<replayrec::SessionDataset> replay_dataset(
    const std::vector<std::vector<std::pair<int, int>>>& sessions, bool hint = true) {
  auto ds = std::make_shared<replayrec::SessionDataset>();
  std::vector<std::pair<std::string, std::vector<std::uint8_t>>> items;
  for (int i = 0; i < 40; ++i)
    items.push_back({std::to_string(i), {std::uint8_t(i % 2), std::uint8_t(i % 5 == 0)}});
  ds->catalog = catalog({"p", "q"}, items);
  int sid = 0;
  for (const auto& clicks : sessions) {
    replayrec::Session s;
    s.session_id = "s" + std::to_string(sid++);
    s.user_id = "u";
    for (auto [slot, len] : clicks) {
      auto imp = slots(0, len);
      if (hint) s.events.push_back(interaction(imp[static_cast<std::size_t>(slot)]));
      auto ev = clickout(imp[static_cast<std::size_t>(slot)], imp);
      ev.session_id = s.session_id;
      s.clickout_indices.push_back(s.events.size());
      s.events.push_back(ev);
    }
    ds->sessions.push_back(s);
  }
  ds->vocab = replayrec::ContextVocabulary::build(ds->sessions);
  return ds;
}

}  // namespace fixture
