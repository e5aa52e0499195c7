#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "fixtures.hpp"
#include "replayrec/state_encoder.hpp"

using namespace replayrec;

namespace {

std::vector<SessionEvent> refs(const std::vector<std::string>& r) {
  std::vector<SessionEvent> out;
  for (const auto& x : r) out.push_back(fixture::interaction(x));
  return out;
}

std::vector<std::string> cluster_refs(const std::vector<OperationCluster>& c) {
  std::vector<std::string> out;
  for (const auto& x : c) out.push_back(x.reference);
  return out;
}

// Prefix of the worked example: three non-item steps, then two looks at one
// hotel that sits 10th in the clickout's impressions.
std::vector<SessionEvent> worked_prefix() {
  std::vector<SessionEvent> p(3);
  p[0].action_type = ActionType::kSearchForDestination;
  p[0].reference = "Lausanne, Switzerland";
  p[1].action_type = ActionType::kFilterSelection;
  p[1].reference = "Focus on Distance";
  p[2].action_type = ActionType::kSearchForPoi;
  p[2].reference = "Bahnhof";
  p.push_back(fixture::interaction("1032816"));
  p.push_back(fixture::interaction("1032816"));
  p[4].action_type = ActionType::kInteractionItemInfo;
  return p;
}

std::vector<std::string> worked_impressions() {
  auto imp = fixture::slots(500, 25);
  imp[9] = "1032816";
  return imp;
}

}  // namespace

TEST_CASE("run-length compression of item operations") {
  auto ev = refs({"A", "A", "A", "B", "B", "A"});
  auto c = compress_consecutive(ev);
  CHECK(cluster_refs(c) == std::vector<std::string>{"A", "B", "A"});
  CHECK(c[0].first_event == 0);
  CHECK(c[0].last_event == 2);
  CHECK(c[2].first_event == 5);
  CHECK(cluster_refs(compress_consecutive(refs({"A"}))) == std::vector<std::string>{"A"});
}

TEST_CASE("non-item events neither form clusters nor split them") {
  auto p = worked_prefix();
  auto c = compress_consecutive(p);
  REQUIRE(c.size() == 1);
  CHECK(c[0].first_event == 3);
  CHECK(c[0].last_event == 4);
}

TEST_CASE("memory row 0 marks the most recent operation") {
  auto c = compress_consecutive(worked_prefix());
  auto imp = worked_impressions();
  auto mem = encode_memory(c, imp);
  CHECK(mem.hot_slot(0) == 9);
  CHECK(mem.hot_slot(1) == -1);
  CHECK(mem.ones() == 1);
}

TEST_CASE("empty history gives an empty memory") {
  auto imp = fixture::slots(1, 25);
  CHECK(encode_memory({}, imp).ones() == 0);
}

TEST_CASE("only the twenty most recent clusters are encoded") {
  std::vector<OperationCluster> c;
  for (int i = 0; i < 30; ++i) c.push_back({std::to_string(100 + i), 0, 0});
  // Impression k holds the reference of cluster 5 + k.
  std::vector<std::string> imp;
  for (int k = 0; k < 25; ++k) imp.push_back(std::to_string(105 + k));
  auto mem = encode_memory(c, imp);
  for (int r = 0; r < 20; ++r) {
    // Row r is cluster 29 - r, whose reference is at slot 24 - r.
    CHECK(mem.hot_slot(static_cast<std::size_t>(r)) == 24 - r);
  }
  CHECK(mem.ones() == 20);
}

TEST_CASE("absent references keep their row empty") {
  std::vector<OperationCluster> c{{"x", 0, 0}, {"1", 1, 1}, {"y", 2, 2}};
  auto imp = fixture::slots(1, 3);
  auto mem = encode_memory(c, imp);
  CHECK(mem.hot_slot(0) == -1);
  CHECK(mem.hot_slot(1) == 0);
  CHECK(mem.hot_slot(2) == -1);
}

TEST_CASE("memory rows are one-hot at most") {
  Rng rng(4);
  std::uniform_int_distribution<int> id(0, 40);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<OperationCluster> c;
    const int len = id(rng);
    for (int i = 0; i < len; ++i) c.push_back({std::to_string(id(rng)), 0, 0});
    auto imp = fixture::slots(0, 25);
    auto mem = encode_memory(c, imp);
    for (std::size_t r = 0; r < MemoryBlock::kRows; ++r) {
      int sum = 0;
      for (std::size_t k = 0; k < MemoryBlock::kCols; ++k) sum += mem.at(r, k);
      CHECK(sum <= 1);
    }
    CHECK(mem.ones() <= 20);
  }
}

TEST_CASE("preference update arithmetic") {
  std::vector<double> prev{0.2, 0.7}, item{1.0, 0.0};
  CHECK(update_preference(prev, item, 0.0) == prev);
  CHECK(update_preference(prev, item, 1.0) == item);
  auto p = update_preference(std::vector<double>{0, 0}, std::vector<double>{1, 1}, 0.3);
  CHECK(p[0] == doctest::Approx(0.3));
  CHECK(p[1] == doctest::Approx(0.3));
  CHECK_THROWS_AS(update_preference(prev, std::vector<double>{1}, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(update_preference(prev, item, 1.5), std::invalid_argument);
}

TEST_CASE("preference update stays in the unit cube") {
  Rng rng(8);
  std::uniform_real_distribution<double> u(0, 1);
  for (int t = 0; t < 500; ++t) {
    std::vector<double> a(6), b(6);
    for (auto& x : a) x = u(rng);
    for (auto& x : b) x = u(rng);
    for (double v : update_preference(a, b, u(rng))) CHECK((v >= 0 && v <= 1));
  }
}

namespace {

ItemCatalog small_catalog() {
  std::vector<std::pair<std::string, std::vector<std::uint8_t>>> items;
  for (int i = 0; i < 30; ++i)
    items.push_back({std::to_string(i), {std::uint8_t(i % 2), std::uint8_t(i % 3 == 0)}});
  return fixture::catalog({"p", "q"}, items);
}

}  // namespace

TEST_CASE("state before any interaction") {
  auto cat = small_catalog();
  ContextVocabulary vocab;
  auto click = fixture::clickout("3", fixture::slots(0, 25));
  auto st = build_state({}, click, cat, vocab, 0.5);
  CHECK(st.memory.ones() == 0);
  CHECK(std::all_of(st.preference.begin(), st.preference.end(), [](double v) { return v == 0; }));
  CHECK(st.flat.size() == flat_state_size(cat.feature_dim(), 0));
}

TEST_CASE("one interaction moves the preference halfway") {
  auto cat = small_catalog();
  ContextVocabulary vocab;
  std::vector<SessionEvent> prefix{fixture::interaction("3")};
  auto click = fixture::clickout("3", fixture::slots(0, 25));
  auto st = build_state(prefix, click, cat, vocab, 0.5);
  auto v = cat.features("3");
  for (std::size_t k = 0; k < v.size(); ++k) CHECK(st.preference[k] == doctest::Approx(0.5 * v[k]));
  CHECK(st.memory.hot_slot(0) == 3);
}

TEST_CASE("worked session state") {
  std::vector<std::pair<std::string, std::vector<std::uint8_t>>> items{{"1032816", {1}}};
  for (int i = 0; i < 25; ++i) items.push_back({std::to_string(500 + i), {0}});
  auto cat = fixture::catalog({"wifi"}, items);
  std::vector<Session> sessions(1);
  auto click = fixture::clickout("1032816", worked_impressions());
  click.current_filters = {"Focus on Distance"};
  sessions[0].events = worked_prefix();
  sessions[0].events.push_back(click);
  auto vocab = ContextVocabulary::build(sessions);
  std::span<const SessionEvent> prefix(sessions[0].events.data(), 5);
  auto st = build_state(prefix, click, cat, vocab, 0.5);
  CHECK(st.memory.hot_slot(0) == 9);
  CHECK(st.memory.ones() == 1);
  // Flat layout: memory, candidates, context, preference.
  const std::size_t d = cat.feature_dim();
  CHECK(st.flat.size() == 20 * 25 + 25 * d + vocab.size() + d);
  CHECK(st.flat[9] == 1.0);
  CHECK(st.flat[500 + 9 * d] == 1.0);  // the hotel's wifi flag
  CHECK(st.user_context == vocab.encode(click));
  CHECK(std::count(st.user_context.begin(), st.user_context.end(), 1.0) == 3);
  CHECK(build_state(prefix, click, cat, vocab, 0.5) == st);
  CHECK(state_to_json(st) == state_to_json(build_state(prefix, click, cat, vocab, 0.5)));
}

TEST_CASE("unknown impressions are zero rows and counted") {
  auto cat = small_catalog();
  ContextVocabulary vocab;
  auto imp = fixture::slots(0, 25);
  imp[4] = "nope";
  auto st = build_state({}, fixture::clickout("1", imp), cat, vocab, 0.5);
  CHECK(st.missing_items == 1);
  for (double v : st.candidate(4)) CHECK(v == 0.0);
  for (double v : st.flat) CHECK(std::isfinite(v));
}
