#include <algorithm>
#include <numeric>
#include <set>

#include "doctest.h"
#include "oracles.hpp"
#include "replayrec/gridworld.hpp"

using namespace replayrec;
using namespace replayrec::grid;

namespace {

DistanceMatrix random_distances(std::size_t size, Rng& rng) {
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<double> v(size * size, 0.0);
  for (std::size_t a = 0; a < size; ++a)
    for (std::size_t b = a + 1; b < size; ++b) v[a * size + b] = v[b * size + a] = u(rng);
  return DistanceMatrix(size, v);
}

// Biclusters over random user and item subsets of a small universe.
std::vector<Bicluster> random_biclusters(std::size_t count, Rng& rng) {
  std::vector<Bicluster> out;
  std::bernoulli_distribution coin(0.35);
  for (std::size_t k = 0; k < count; ++k) {
    Bicluster b;
    while (b.users.empty()) {
      b.users.clear();
      for (std::size_t u = 0; u < 12; ++u)
        if (coin(rng)) b.users.push_back(u);
    }
    while (b.items.empty()) {
      b.items.clear();
      for (std::size_t i = 0; i < 30; ++i)
        if (coin(rng)) b.items.push_back(i);
    }
    out.push_back(b);
  }
  return out;
}

Board transpose(const Board& b) {
  std::vector<std::size_t> cells(b.cells().size());
  for (std::size_t x = 0; x < b.n(); ++x)
    for (std::size_t y = 0; y < b.n(); ++y) cells[y * b.n() + x] = b.at(x, y);
  return Board(b.n(), cells);
}

std::size_t act(std::size_t board, Direction d) { return GridAction{board, d}.index(); }

// 2x2 fixture: cells hold ids 0..3 row-major, items disjoint per bicluster.
std::vector<Bicluster> fixture_biclusters() {
  return {{{0, 1}, {0, 1}}, {{1, 2}, {2}}, {{2, 3}, {3, 4}}, {{3}, {5}}};
}

}  // namespace

TEST_CASE("jaccard similarity and distance") {
  std::vector<std::size_t> a{1, 2}, b{2, 3}, c{4, 5}, empty;
  CHECK(jaccard(a, a) == 1.0);
  CHECK(jaccard(a, c) == 0.0);
  CHECK(jaccard(a, b) == doctest::Approx(1.0 / 3));
  CHECK(jaccard(empty, empty) == 1.0);
  CHECK(bicluster_distance({a, {0}}, {a, {1}}) == 0.0);
  CHECK(bicluster_distance({a, {0}}, {c, {0}}) == 1.0);
  CHECK(bicluster_distance({a, {0}}, {b, {0}}) == doctest::Approx(2.0 / 3));
  CHECK_THROWS_AS(bicluster_distance({{}, {0}}, {a, {0}}), std::invalid_argument);
}

TEST_CASE("boards must be permutations") {
  CHECK_NOTHROW(Board(2, {3, 1, 0, 2}));
  CHECK_THROWS(Board(2, {0, 1, 1, 2}));
  CHECK_THROWS(Board(2, {0, 1, 2}));
  Board b(2, {3, 1, 0, 2});
  CHECK(b.position(0) == Cell{1, 0});
  CHECK(Board::from_json(b.to_json()) == b);
}

TEST_CASE("adjacency cost examples") {
  CHECK(h(Board(1, {0}), DistanceMatrix(1, {0.0})) == 0.0);
  CHECK(h(Board(2, {0, 1, 2, 3}), DistanceMatrix(4, {0, 1, 1, 1, 1, 0, 1, 1, 1, 1, 0, 1,
                                                     1, 1, 1, 0})) == 8.0);
}

TEST_CASE("adjacency cost counts a pair both ways") {
  // A 2x1 strip is the 2x2 board restricted to one column: only (0,0)-(1,0)
  // are adjacent when the other distances are zero.
  const double d = 0.37;
  std::vector<double> v(16, 0.0);
  v[0 * 4 + 2] = v[2 * 4 + 0] = d;
  CHECK(h(Board(2, {0, 1, 2, 3}), DistanceMatrix(4, v)) == doctest::Approx(2 * d));
}

TEST_CASE("adjacency cost properties") {
  Rng rng(1);
  for (int t = 0; t < 30; ++t) {
    const std::size_t n = 2 + rng() % 4;
    auto d = random_distances(n * n, rng);
    auto b = greedy_arrange(d, n, rng);
    CHECK(h(b, d) >= 0);
    CHECK(h(transpose(b), d) == doctest::Approx(h(b, d)));
  }
}

TEST_CASE("swap delta matches recomputation") {
  Rng rng(2);
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 2 + rng() % 4;
    auto d = random_distances(n * n, rng);
    auto b = greedy_arrange(d, n, rng);
    const std::size_t p = rng() % (n * n), q = rng() % (n * n);
    const double before = h(b, d);
    const double delta = swap_delta(b, d, p, q);
    b.swap_cells(p, q);
    CHECK(h(b, d) - before == doctest::Approx(delta));
  }
}

TEST_CASE("greedy arrangement") {
  Rng rng(3);
  CHECK(greedy_arrange(DistanceMatrix(1, {0.0}), 1, rng) == Board(1, {0}));
  for (int t = 0; t < 20; ++t) {
    auto d = random_distances(25, rng);
    auto b = greedy_arrange(d, 5, rng);
    std::set<std::size_t> ids(b.cells().begin(), b.cells().end());
    CHECK(ids.size() == 25);
  }
}

TEST_CASE("greedy places a tight pair next to each other") {
  // Biclusters 0 and 1 are at distance 0; everything else is at distance 1.
  std::vector<double> v(16, 1.0);
  for (std::size_t i = 0; i < 4; ++i) v[i * 4 + i] = 0;
  v[0 * 4 + 1] = v[1 * 4 + 0] = 0;
  DistanceMatrix d(4, v);
  auto adjacent = [](const Board& b) {
    auto [x0, y0] = b.position(0);
    auto [x1, y1] = b.position(1);
    return (x0 == x1) != (y0 == y1);
  };
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    Rng rng(seed);
    auto b = greedy_arrange(d, 2, rng);
    const std::size_t first = b.at(0, 0);
    if (first <= 1) {
      // The partner is the unique zero-cost choice for the next cell.
      CHECK(adjacent(b));
      CHECK(b.at(0, 1) == 1 - first);
    } else {
      // Every remaining choice costs 1 at each step, so ids fill in order.
      std::vector<std::size_t> rest;
      for (std::size_t id = 0; id < 4; ++id)
        if (id != first) rest.push_back(id);
      CHECK(b.cells() == std::vector<std::size_t>{first, rest[0], rest[1], rest[2]});
    }
  }
}

TEST_CASE("annealing with no iterations returns the greedy board") {
  Rng a(4), b(4);
  auto d = random_distances(16, a);
  random_distances(16, b);
  SaSchedule s;
  s.iterations_per_temperature = 0;
  auto r = sa_arrange(d, 4, s, a);
  CHECK(r.board == greedy_arrange(d, 4, b));
  CHECK(r.h_best == r.h_start);
  CHECK(r.proposals == 0);
}

TEST_CASE("annealing finds the 2x2 optimum") {
  Rng gen(5);
  int hits = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto d = random_distances(4, gen);
    Rng rng(seed);
    auto r = sa_arrange(d, 2, {}, rng);
    hits += std::abs(h(r.board, d) - oracle::best_layout_h(d, 2)) < 1e-12;
    CHECK(r.h_best == doctest::Approx(h(r.board, d)));
  }
  CHECK(hits >= 19);
}

TEST_CASE("annealing never ends worse than greedy") {
  Rng gen(6);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto d = random_distances(36, gen);
    Rng rng(seed);
    auto r = sa_arrange(d, 6, {}, rng);
    CHECK(r.h_best <= r.h_start + 1e-12);
    CHECK(h(r.board, d) == doctest::Approx(r.h_best));
    CHECK(r.t0 > 0);
  }
}

TEST_CASE("schedule validation and json") {
  SaSchedule s;
  s.cooling = 1.0;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  CHECK_THROWS_AS(SaSchedule::from_json({{"colling", 0.9}}), ConfigError);
  auto j = SaSchedule::from_json({{"cooling", 0.9}, {"t0", 2.0}});
  CHECK(j.cooling == 0.9);
  CHECK(SaSchedule::from_json(j.to_json()).to_json() == j.to_json());
}

TEST_CASE("boards from different seeds share the id set") {
  Rng gen(7);
  auto d = random_distances(25, gen);
  Rng r1(1), r2(2);
  SaSchedule fast;
  fast.iterations_per_temperature = 20;
  auto a = build_boards(d, 5, 3, fast, r1);
  auto b = build_boards(d, 5, 3, fast, r2);
  REQUIRE(a.size() == 3);
  CHECK_FALSE(a[0] == b[0]);
  for (const auto& board : a) {
    auto ids = board.cells();
    std::sort(ids.begin(), ids.end());
    auto other = b[1].cells();
    std::sort(other.begin(), other.end());
    CHECK(ids == other);
  }
  Rng r3(1);
  CHECK(build_boards(d, 5, 3, fast, r3) == a);
}

TEST_CASE("one-board transitions") {
  MultiBoardWorld w({Board(2, {0, 1, 2, 3})}, fixture_biclusters());
  CHECK(w.num_states() == 4);
  CHECK(w.num_actions() == 4);
  CHECK(w.transition(0, act(0, Direction::kDown)) == 2);
  CHECK(w.state(2).coords[0] == Cell{1, 0});
  CHECK_FALSE(w.valid(0, act(0, Direction::kUp)));
  CHECK_THROWS_AS(w.transition(0, act(0, Direction::kUp)), std::invalid_argument);
  CHECK(w.valid_actions(0) == std::vector<std::size_t>{1, 3});
}

TEST_CASE("inverse moves on an interior cell") {
  std::vector<std::size_t> cells(9);
  std::iota(cells.begin(), cells.end(), 0);
  std::vector<Bicluster> bcs(9, Bicluster{{0}, {0}});
  MultiBoardWorld w({Board(3, cells)}, bcs);
  const std::size_t centre = 4;
  CHECK(w.transition(w.transition(centre, act(0, Direction::kUp)), act(0, Direction::kDown)) == centre);
  CHECK(w.transition(w.transition(centre, act(0, Direction::kLeft)), act(0, Direction::kRight)) ==
        centre);
}

TEST_CASE("two-board transitions keep coordinates consistent") {
  MultiBoardWorld w({Board(2, {0, 1, 2, 3}), Board(2, {3, 2, 1, 0})}, fixture_biclusters());
  CHECK(w.num_actions() == 8);
  CHECK(w.num_states() == 4);
  auto s = w.state(0);
  CHECK(s.coords[0] == Cell{0, 0});
  CHECK(s.coords[1] == Cell{1, 1});
  // Moving up on board 2 from (1,1) lands on (0,1), which holds id 2.
  const std::size_t next = w.transition(0, act(1, Direction::kUp));
  CHECK(next == 2);
  CHECK(w.state(next).coords[0] == Cell{1, 0});
  CHECK(w.state(next).coords[1] == Cell{0, 1});
  for (std::size_t id = 0; id < 4; ++id)
    for (std::size_t k = 0; k < 2; ++k) CHECK(w.board(k).at(w.state(id).coords[k]) == id);
}

TEST_CASE("reward is a symmetric similarity") {
  Rng rng(8);
  auto bcs = random_biclusters(16, rng);
  std::vector<std::size_t> cells(16);
  std::iota(cells.begin(), cells.end(), 0);
  MultiBoardWorld w({Board(4, cells)}, bcs);
  for (std::size_t a = 0; a < 16; ++a) {
    CHECK(w.reward(a, a) == 1.0);
    for (std::size_t b = 0; b < 16; ++b) {
      CHECK(w.reward(a, b) == w.reward(b, a));
      CHECK((w.reward(a, b) >= 0 && w.reward(a, b) <= 1));
    }
  }
}

TEST_CASE("q-learning with gamma zero learns immediate rewards") {
  Rng rng(9);
  auto bcs = random_biclusters(4, rng);
  MultiBoardWorld w({Board(2, {0, 1, 2, 3})}, bcs);
  GridQConfig cfg;
  cfg.gamma = 0;
  cfg.episodes = 400;
  auto q = q_learn(w, cfg, rng);
  for (std::size_t s = 0; s < 4; ++s)
    for (auto a : w.valid_actions(s)) CHECK(q.get(s, a) == doctest::Approx(w.reward(s, w.transition(s, a))).epsilon(1e-6));
}

TEST_CASE("equal rewards give equal q values") {
  std::vector<Bicluster> same(4, Bicluster{{0, 1}, {0}});
  MultiBoardWorld w({Board(2, {0, 1, 2, 3})}, same);
  GridQConfig cfg;
  cfg.episodes = 2000;
  Rng rng(10);
  auto q = q_learn(w, cfg, rng);
  const double v = q.get(0, w.valid_actions(0)[0]);
  for (std::size_t s = 0; s < 4; ++s)
    for (auto a : w.valid_actions(s)) CHECK(q.get(s, a) == doctest::Approx(v).epsilon(0.02));
  CHECK(v == doctest::Approx(1 / (1 - cfg.gamma)).epsilon(0.02));
}

TEST_CASE("grid epsilon schedule") {
  GridQConfig c;
  CHECK(c.epsilon(0, 100) == 1.0);
  CHECK(c.epsilon(25, 100) == doctest::Approx(0.525));
  CHECK(c.epsilon(60, 100) == 0.05);
  CHECK_THROWS_AS(GridQConfig::from_json({{"alfa", 0.1}}), ConfigError);
  CHECK_THROWS_AS(GridQConfig::from_json({{"alpha", 0.0}}), ConfigError);
}

TEST_CASE("hand-simulated walk") {
  MultiBoardWorld w({Board(2, {0, 1, 2, 3})}, fixture_biclusters());
  QTable q(4);
  q.set(0, act(0, Direction::kRight), 1);  // 0 -> 1
  q.set(1, act(0, Direction::kDown), 1);   // 1 -> 3
  q.set(3, act(0, Direction::kLeft), 1);   // 3 -> 2
  q.set(2, act(0, Direction::kUp), 1);     // 2 -> 0, which adds nothing
  Rng rng(1);
  std::vector<std::size_t> observed{0, 1};
  auto tr = recommend(w, q, observed, 10, 1, rng);
  CHECK(tr.starts == std::vector<std::size_t>{0});
  CHECK(tr.visited == std::vector<std::size_t>{0, 1, 3, 2, 0});
  CHECK(tr.items == std::vector<std::size_t>{0, 1, 2, 5, 3, 4});
  CHECK(tr.end == TraceEnd::kStartsExhausted);
  CHECK_FALSE(tr.random_starts);

  auto capped = recommend(w, q, observed, 4, 1, rng);
  CHECK(capped.items == std::vector<std::size_t>{0, 1, 2, 5});
  CHECK(capped.end == TraceEnd::kListFull);
  auto tiny = recommend(w, q, observed, 1, 1, rng);
  CHECK(tiny.items == std::vector<std::size_t>{0});
}

TEST_CASE("a walk that adds nothing stops at its start's items") {
  // Bicluster 1 repeats bicluster 0's items, and the policy heads there.
  std::vector<Bicluster> bcs{{{0}, {0, 1}}, {{1}, {1}}, {{2}, {7}}, {{3}, {8}}};
  MultiBoardWorld w({Board(2, {0, 1, 2, 3})}, bcs);
  QTable q(4);
  q.set(0, act(0, Direction::kRight), 1);
  Rng rng(1);
  std::vector<std::size_t> observed{0};
  auto tr = recommend(w, q, observed, 10, 1, rng);
  CHECK(tr.items == std::vector<std::size_t>{0, 1});
  CHECK(tr.visited == std::vector<std::size_t>{0, 1});
}

TEST_CASE("start choice and empty histories") {
  MultiBoardWorld w({Board(2, {0, 1, 2, 3})}, fixture_biclusters());
  std::vector<std::size_t> observed{3, 4, 5};
  CHECK(choose_starts(w, observed, 2) == std::vector<std::size_t>{2, 3});
  QTable q(4);
  Rng rng(2);
  auto tr = recommend(w, q, {}, 3, 2, rng);
  CHECK(tr.random_starts);
  CHECK(tr.starts.size() == 2);
  CHECK(tr.starts[0] != tr.starts[1]);
  CHECK_THROWS_AS(recommend(w, q, observed, 0, 1, rng), ConfigError);
  CHECK_THROWS_AS(recommend(w, q, observed, 3, 0, rng), ConfigError);
}

TEST_CASE("traces are duplicate free and bounded") {
  Rng rng(11);
  auto bcs = random_biclusters(25, rng);
  std::vector<std::size_t> cells(25);
  std::iota(cells.begin(), cells.end(), 0);
  std::shuffle(cells.begin(), cells.end(), rng);
  MultiBoardWorld w({Board(5, cells)}, bcs);
  GridQConfig cfg;
  cfg.episodes = 50;
  auto q = q_learn(w, cfg, rng);
  for (int t = 0; t < 50; ++t) {
    std::vector<std::size_t> obs{rng() % 30, rng() % 30};
    const std::size_t n = 1 + rng() % 25;
    auto tr = recommend(w, q, obs, n, 3, rng);
    CHECK(tr.items.size() <= n);
    std::set<std::size_t> u(tr.items.begin(), tr.items.end());
    CHECK(u.size() == tr.items.size());
  }
}

TEST_CASE("one board reduces to the single-board system") {
  Rng gen(12);
  auto bcs = random_biclusters(16, gen);
  std::vector<std::size_t> cells(16);
  std::iota(cells.begin(), cells.end(), 0);
  std::shuffle(cells.begin(), cells.end(), gen);
  Board board(4, cells);
  MultiBoardWorld multi({board}, bcs);
  SingleBoardWorld single(board, bcs);
  GridQConfig cfg;
  cfg.episodes = 100;
  Rng a(5), b(5);
  auto qm = q_learn(multi, cfg, a);
  auto qs = q_learn(single, cfg, b);
  CHECK(qm == qs);
  for (int t = 0; t < 20; ++t) {
    std::vector<std::size_t> obs;
    if (t % 4) obs = {gen() % 30, gen() % 30};
    std::sort(obs.begin(), obs.end());
    obs.erase(std::unique(obs.begin(), obs.end()), obs.end());
    Rng ra(t), rb(t);
    auto tm = recommend(multi, qm, obs, 12, 3, ra);
    auto ts = recommend(single, qs, obs, 12, 3, rb);
    CHECK(tm.items == ts.items);
    CHECK(tm.visited == ts.visited);
    CHECK(tm.starts == ts.starts);
  }
}

TEST_CASE("recall definitions") {
  std::vector<std::vector<std::size_t>> lists{{0, 1, 2, 3, 4, 5, 6, 7, 8, 9}};
  std::vector<std::vector<std::size_t>> hidden{{0, 2, 4, 6, 20, 21, 22, 23}};
  auto s = recall_at_n(lists, hidden, 10, RecallMode::kStandard);
  CHECK(s.mean == 0.5);
  CHECK(s.per_user[0].hits == 4);
  CHECK(recall_at_n(lists, hidden, 10, RecallMode::kPaperLiteral).mean == 0.4);
  CHECK(recall_at_n({{1, 2, 3}}, {{2, 3}}, 10, RecallMode::kStandard).mean == 1.0);
  CHECK(recall_at_n({{1, 2, 3}}, {{7}}, 10, RecallMode::kStandard).mean == 0.0);
  auto ex = recall_at_n({{1}, {2}}, {{}, {2}}, 5, RecallMode::kStandard);
  CHECK(ex.excluded_empty == 1);
  CHECK(ex.per_user.size() == 1);
  CHECK(ex.per_user[0].user == 1);
  CHECK(parse_recall_mode("paper_literal") == RecallMode::kPaperLiteral);
  CHECK_THROWS_AS(parse_recall_mode("precision"), ConfigError);
}

TEST_CASE("standard recall grows with N on a fixed list") {
  Rng rng(13);
  std::vector<std::vector<std::size_t>> lists, hidden;
  for (int u = 0; u < 30; ++u) {
    lists.push_back(random_items(200, 100, rng));
    hidden.push_back(random_items(200, 1 + rng() % 20, rng));
  }
  double prev = 0;
  for (std::size_t n = 10; n <= 100; n += 10) {
    const double r = recall_at_n(lists, hidden, n, RecallMode::kStandard).mean;
    CHECK(r >= prev);
    prev = r;
  }
}

TEST_CASE("random items are distinct and uniform") {
  Rng rng(14);
  std::vector<int> count(10, 0);
  for (int t = 0; t < 10000; ++t) {
    auto v = random_items(10, 3, rng);
    CHECK(std::set<std::size_t>(v.begin(), v.end()).size() == 3);
    for (auto i : v) ++count[i];
  }
  for (int c : count) CHECK(std::abs(c - 3000) < 3 * std::sqrt(10000 * 0.3 * 0.7));
  CHECK(random_items(4, 9, rng).size() == 4);
}

TEST_CASE("board set files") {
  BoardSet s;
  s.biclusters = {{"a", "b", "c", "d"}, {"x", "y", "z", "w", "v", "u"}, fixture_biclusters()};
  s.boards = {Board(2, {0, 1, 2, 3}), Board(2, {2, 3, 0, 1})};
  auto back = BoardSet::from_json(s.to_json());
  CHECK(back.boards == s.boards);
  CHECK(back.biclusters.biclusters == s.biclusters.biclusters);
  auto j = s.to_json();
  j["boards"][0] = Board(1, {0}).to_json();
  CHECK_THROWS_AS(BoardSet::from_json(j), DataError);
}
