#include "replayrec/gridworld.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <numeric>
#include <set>
#include <stdexcept>

namespace replayrec::grid {

double jaccard(std::span<const std::size_t> a, std::span<const std::size_t> b) {
  if (a.empty() && b.empty()) return 1.0;
  std::size_t common = 0;
  auto i = a.begin();
  auto j = b.begin();
  while (i != a.end() && j != b.end()) {
    if (*i < *j) {
      ++i;
    } else if (*j < *i) {
      ++j;
    } else {
      ++common;
      ++i;
      ++j;
    }
  }
  return static_cast<double>(common) /
         static_cast<double>(a.size() + b.size() - common);
}

double bicluster_distance(const Bicluster& a, const Bicluster& b) {
  if (a.users.empty() || b.users.empty()) {
    throw std::invalid_argument("bicluster with an empty user set");
  }
  return 1.0 - jaccard(a.users, b.users);
}

DistanceMatrix::DistanceMatrix(const std::vector<Bicluster>& bs)
    : size_(bs.size()), d_(bs.size() * bs.size(), 0.0) {
  for (std::size_t a = 0; a < size_; ++a) {
    for (std::size_t b = a + 1; b < size_; ++b) {
      d_[a * size_ + b] = d_[b * size_ + a] = bicluster_distance(bs[a], bs[b]);
    }
  }
}

DistanceMatrix::DistanceMatrix(std::size_t size, std::vector<double> values)
    : size_(size), d_(std::move(values)) {
  if (d_.size() != size * size) {
    throw std::invalid_argument("distance matrix has the wrong size");
  }
}

// ---------------------------------------------------------------------------

Board::Board(std::size_t n, std::vector<std::size_t> cells)
    : n_(n), cells_(std::move(cells)), pos_(n * n) {
  if (n == 0 || cells_.size() != n * n) {
    throw std::invalid_argument("board needs n*n cells");
  }
  std::vector<bool> seen(n * n, false);
  for (std::size_t p = 0; p < cells_.size(); ++p) {
    const auto id = cells_[p];
    if (id >= n * n || seen[id]) {
      throw std::invalid_argument("board cells are not a permutation");
    }
    seen[id] = true;
    pos_[id] = {p / n, p % n};
  }
}

void Board::swap_cells(std::size_t p, std::size_t q) {
  std::swap(cells_[p], cells_[q]);
  pos_[cells_[p]] = {p / n_, p % n_};
  pos_[cells_[q]] = {q / n_, q % n_};
}

nlohmann::json Board::to_json() const { return {{"n", n_}, {"cells", cells_}}; }

Board Board::from_json(const nlohmann::json& j) {
  try {
    return Board(j.at("n").get<std::size_t>(),
                 j.at("cells").get<std::vector<std::size_t>>());
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("board: ") + e.what());
  }
}

namespace {

template <typename F>
void for_neighbors(std::size_t p, std::size_t n, F&& f) {
  const std::size_t x = p / n, y = p % n;
  if (x > 0) f(p - n);
  if (x + 1 < n) f(p + n);
  if (y > 0) f(p - 1);
  if (y + 1 < n) f(p + 1);
}

}  // namespace

double h(const Board& b, const DistanceMatrix& d) {
  const std::size_t n = b.n();
  const auto& c = b.cells();
  double total = 0.0;
  for (std::size_t p = 0; p < c.size(); ++p) {
    for_neighbors(p, n, [&](std::size_t q) { total += d(c[p], c[q]); });
  }
  return total;
}

double swap_delta(const Board& b, const DistanceMatrix& d, std::size_t p,
                  std::size_t q) {
  if (p == q) return 0.0;
  const auto& c = b.cells();
  const std::size_t a = c[p], z = c[q];
  double delta = 0.0;
  for_neighbors(p, b.n(), [&](std::size_t v) {
    if (v != q) delta += d(z, c[v]) - d(a, c[v]);
  });
  for_neighbors(q, b.n(), [&](std::size_t v) {
    if (v != p) delta += d(a, c[v]) - d(z, c[v]);
  });
  return 2.0 * delta;
}

Board greedy_arrange(const DistanceMatrix& d, std::size_t n, Rng& rng) {
  const std::size_t cells = n * n;
  if (n == 0 || d.size() != cells) {
    throw std::invalid_argument("greedy_arrange needs exactly n*n biclusters");
  }
  std::vector<std::size_t> layout(cells);
  std::vector<bool> placed(cells, false);
  std::uniform_int_distribution<std::size_t> first(0, cells - 1);
  layout[0] = first(rng);
  placed[layout[0]] = true;
  for (std::size_t p = 1; p < cells; ++p) {
    const std::size_t x = p / n, y = p % n;
    std::size_t best = cells;
    double best_cost = std::numeric_limits<double>::infinity();
    for (std::size_t id = 0; id < cells; ++id) {
      if (placed[id]) continue;
      double cost = 0.0;
      if (x > 0) cost += d(id, layout[p - n]);
      if (y > 0) cost += d(id, layout[p - 1]);
      if (cost < best_cost) {
        best_cost = cost;
        best = id;
      }
    }
    layout[p] = best;
    placed[best] = true;
  }
  return Board(n, std::move(layout));
}

void SaSchedule::validate() const {
  if (!std::isfinite(t0) || t0 < 0.0) throw ConfigError("SA t0 must be >= 0");
  if (!(cooling > 0.0 && cooling < 1.0)) {
    throw ConfigError("SA cooling factor must be in (0,1)");
  }
  if (!std::isfinite(t_min) || t_min < 0.0) {
    throw ConfigError("SA t_min must be >= 0");
  }
  if (t0 > 0.0 && t_min > 0.0 && t_min >= t0) {
    throw ConfigError("SA t_min must be below t0");
  }
}

nlohmann::json SaSchedule::to_json() const {
  return {{"t0", t0},
          {"cooling", cooling},
          {"iterations_per_temperature", iterations_per_temperature},
          {"t_min", t_min},
          {"calibration_swaps", calibration_swaps}};
}

SaSchedule SaSchedule::from_json(const nlohmann::json& j) {
  static const std::set<std::string> known{
      "t0", "cooling", "iterations_per_temperature", "t_min", "calibration_swaps"};
  for (const auto& [k, _] : j.items()) {
    if (!known.count(k)) throw ConfigError("unknown SA schedule key '" + k + "'");
  }
  SaSchedule s;
  try {
    if (j.contains("t0")) j.at("t0").get_to(s.t0);
    if (j.contains("cooling")) j.at("cooling").get_to(s.cooling);
    if (j.contains("iterations_per_temperature")) {
      j.at("iterations_per_temperature").get_to(s.iterations_per_temperature);
    }
    if (j.contains("t_min")) j.at("t_min").get_to(s.t_min);
    if (j.contains("calibration_swaps")) {
      j.at("calibration_swaps").get_to(s.calibration_swaps);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("SA schedule: ") + e.what());
  }
  s.validate();
  return s;
}

SaResult sa_arrange(const DistanceMatrix& d, std::size_t n,
                    const SaSchedule& schedule, Rng& rng) {
  schedule.validate();
  SaResult out;
  out.board = greedy_arrange(d, n, rng);
  out.h_start = out.h_best = h(out.board, d);
  const std::size_t cells = n * n;
  if (cells < 2 || schedule.iterations_per_temperature == 0) return out;

  std::uniform_int_distribution<std::size_t> pick(0, cells - 1);
  std::uniform_int_distribution<std::size_t> other(0, cells - 2);
  auto propose = [&] {
    const std::size_t p = pick(rng);
    std::size_t q = other(rng);
    if (q >= p) ++q;
    return std::pair{p, q};
  };

  Board cur = out.board;
  double t0 = schedule.t0;
  if (t0 == 0.0 && schedule.calibration_swaps > 0) {
    double sum = 0.0;
    for (std::size_t k = 0; k < schedule.calibration_swaps; ++k) {
      auto [p, q] = propose();
      sum += std::abs(swap_delta(cur, d, p, q));
    }
    t0 = sum / static_cast<double>(schedule.calibration_swaps);
  }
  out.t0 = t0;
  if (!(t0 > 0.0)) return out;
  const double t_min = schedule.t_min > 0.0 ? schedule.t_min : 1e-3 * t0;

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double cur_h = out.h_start;
  Board best = cur;
  double best_h = cur_h;
  for (double t = t0; t > t_min; t *= schedule.cooling) {
    for (std::size_t it = 0; it < schedule.iterations_per_temperature; ++it) {
      auto [p, q] = propose();
      const double delta = swap_delta(cur, d, p, q);
      ++out.proposals;
      if (delta <= 0.0 || unit(rng) < std::exp(-delta / t)) {
        cur.swap_cells(p, q);
        cur_h += delta;
        ++out.accepted;
        if (cur_h < best_h - 1e-12) {
          best_h = cur_h;
          best = cur;
        }
      }
    }
  }
  // The running sum can drift; judge the final answer on a fresh evaluation.
  const double exact = h(best, d);
  if (exact <= out.h_start) {
    out.board = std::move(best);
    out.h_best = exact;
  }
  return out;
}

std::vector<Board> build_boards(const DistanceMatrix& d, std::size_t n,
                                std::size_t k, const SaSchedule& schedule,
                                Rng& rng) {
  if (k == 0) throw ConfigError("number of boards K must be >= 1");
  schedule.validate();
  std::vector<std::uint64_t> seeds(k);
  for (auto& s : seeds) s = rng();
  std::vector<std::future<Board>> jobs;
  for (std::size_t b = 0; b < k; ++b) {
    jobs.push_back(std::async(std::launch::async, [&, seed = seeds[b]] {
      Rng local(seed);
      return sa_arrange(d, n, schedule, local).board;
    }));
  }
  std::vector<Board> boards;
  for (auto& j : jobs) boards.push_back(j.get());
  return boards;
}

// ---------------------------------------------------------------------------

std::optional<Cell> step_cell(Cell c, Direction dir, std::size_t n) {
  auto [x, y] = c;
  switch (dir) {
    case Direction::kUp:
      if (x == 0) return std::nullopt;
      return Cell{x - 1, y};
    case Direction::kDown:
      if (x + 1 >= n) return std::nullopt;
      return Cell{x + 1, y};
    case Direction::kLeft:
      if (y == 0) return std::nullopt;
      return Cell{x, y - 1};
    case Direction::kRight:
      if (y + 1 >= n) return std::nullopt;
      return Cell{x, y + 1};
  }
  return std::nullopt;
}

MultiBoardWorld::MultiBoardWorld(std::vector<Board> boards,
                                 const std::vector<Bicluster>& biclusters)
    : boards_(std::move(boards)), biclusters_(biclusters) {
  if (boards_.empty()) throw std::invalid_argument("world needs a board");
  const std::size_t n = boards_.front().n();
  for (const auto& b : boards_) {
    if (b.n() != n) throw std::invalid_argument("boards differ in size");
  }
  const std::size_t s = n * n;
  if (biclusters_.size() != s) {
    throw std::invalid_argument("world needs exactly n*n biclusters");
  }
  sim_.resize(s * s);
  for (std::size_t a = 0; a < s; ++a) {
    for (std::size_t b = 0; b < s; ++b) {
      sim_[a * s + b] = jaccard(biclusters_[a].users, biclusters_[b].users);
    }
  }
}

MultiBoardState MultiBoardWorld::state(std::size_t id) const {
  MultiBoardState st{id, {}};
  for (const auto& b : boards_) st.coords.push_back(b.position(id));
  return st;
}

bool MultiBoardWorld::valid(std::size_t id, std::size_t action) const {
  if (action >= num_actions()) return false;
  const auto a = GridAction::from_index(action);
  return step_cell(boards_[a.board].position(id), a.direction, n()).has_value();
}

std::vector<std::size_t> MultiBoardWorld::valid_actions(std::size_t id) const {
  std::vector<std::size_t> out;
  for (std::size_t a = 0; a < num_actions(); ++a) {
    if (valid(id, a)) out.push_back(a);
  }
  return out;
}

std::size_t MultiBoardWorld::transition(std::size_t id, std::size_t action) const {
  if (action >= num_actions()) throw std::invalid_argument("unknown action");
  const auto a = GridAction::from_index(action);
  const Board& b = boards_[a.board];
  auto next = step_cell(b.position(id), a.direction, n());
  if (!next) throw std::invalid_argument("move leaves the board");
  return b.at(*next);
}

void GridQConfig::validate() const {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigError("grid alpha must be in (0,1]");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("grid gamma must be in [0,1]");
  if (!(epsilon_start >= 0.0 && epsilon_start <= 1.0) ||
      !(epsilon_end >= 0.0 && epsilon_end <= 1.0)) {
    throw ConfigError("grid epsilon must be in [0,1]");
  }
}

double GridQConfig::epsilon(std::size_t step, std::size_t total_steps) const {
  const std::size_t decay = total_steps / 2;
  if (decay == 0 || step >= decay) return epsilon_end;
  const double frac = static_cast<double>(step) / static_cast<double>(decay);
  return epsilon_start + frac * (epsilon_end - epsilon_start);
}

nlohmann::json GridQConfig::to_json() const {
  return {{"alpha", alpha},
          {"gamma", gamma},
          {"epsilon_start", epsilon_start},
          {"epsilon_end", epsilon_end},
          {"episodes", episodes},
          {"max_steps", max_steps}};
}

GridQConfig GridQConfig::from_json(const nlohmann::json& j) {
  static const std::set<std::string> known{"alpha",       "gamma",    "epsilon_start",
                                           "epsilon_end", "episodes", "max_steps"};
  for (const auto& [k, _] : j.items()) {
    if (!known.count(k)) throw ConfigError("unknown grid q-learning key '" + k + "'");
  }
  GridQConfig c;
  try {
    if (j.contains("alpha")) j.at("alpha").get_to(c.alpha);
    if (j.contains("gamma")) j.at("gamma").get_to(c.gamma);
    if (j.contains("epsilon_start")) j.at("epsilon_start").get_to(c.epsilon_start);
    if (j.contains("epsilon_end")) j.at("epsilon_end").get_to(c.epsilon_end);
    if (j.contains("episodes")) j.at("episodes").get_to(c.episodes);
    if (j.contains("max_steps")) j.at("max_steps").get_to(c.max_steps);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("grid q-learning: ") + e.what());
  }
  c.validate();
  return c;
}

namespace {

// Best of `actions` under q; ties to the first listed.
std::size_t argmax_over(const QTable& q, std::size_t s,
                        const std::vector<std::size_t>& actions) {
  auto row = q.row(s);
  if (row.empty()) return actions.front();
  std::size_t best = actions.front();
  for (auto a : actions) {
    if (row[a] > row[best]) best = a;
  }
  return best;
}

double max_over(const QTable& q, std::size_t s,
                const std::vector<std::size_t>& actions) {
  auto row = q.row(s);
  if (row.empty() || actions.empty()) return 0.0;
  double m = row[actions.front()];
  for (auto a : actions) m = std::max(m, row[a]);
  return m;
}

std::size_t episode_cap(const GridQConfig& cfg, std::size_t n) {
  return cfg.max_steps ? cfg.max_steps : 4 * n * n;
}

}  // namespace

std::size_t greedy_action(const QTable& q, const MultiBoardWorld& w,
                          std::size_t id) {
  auto valid = w.valid_actions(id);
  if (valid.empty()) return w.num_actions();
  return argmax_over(q, id, valid);
}

QTable q_learn(const MultiBoardWorld& w, const GridQConfig& cfg, Rng& rng) {
  cfg.validate();
  QTable q(w.num_actions());
  const std::size_t states = w.num_states();
  if (states < 2) return q;
  std::vector<std::vector<std::size_t>> valid(states);
  for (std::size_t s = 0; s < states; ++s) valid[s] = w.valid_actions(s);

  std::uniform_int_distribution<std::size_t> start(0, states - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const std::size_t cap = episode_cap(cfg, w.n());
  const std::size_t budget = cap * cfg.episodes;
  std::size_t step = 0;
  for (std::size_t ep = 0; ep < cfg.episodes; ++ep) {
    std::size_t s = w.board(0).cells()[start(rng)];
    for (std::size_t t = 0; t < cap; ++t, ++step) {
      const auto& acts = valid[s];
      std::size_t a;
      if (unit(rng) < cfg.epsilon(step, budget)) {
        std::uniform_int_distribution<std::size_t> d(0, acts.size() - 1);
        a = acts[d(rng)];
      } else {
        a = argmax_over(q, s, acts);
      }
      const std::size_t s2 = w.transition(s, a);
      const double target = w.reward(s, s2) + cfg.gamma * max_over(q, s2, valid[s2]);
      const double old = q.get(s, a);
      q.set(s, a, old + cfg.alpha * (target - old));
      s = s2;
    }
  }
  return q;
}

std::string_view to_string(TraceEnd e) {
  return e == TraceEnd::kListFull ? "list_full" : "starts_exhausted";
}

namespace {

// Appends items not yet listed, up to the cap; returns how many were added.
std::size_t absorb(const Bicluster& b, std::size_t cap,
                   std::vector<std::size_t>& list, std::set<std::size_t>& seen) {
  std::size_t added = 0;
  for (auto i : b.items) {
    if (list.size() >= cap) break;
    if (seen.insert(i).second) {
      list.push_back(i);
      ++added;
    }
  }
  return added;
}

std::vector<std::size_t> random_cells(std::size_t cells, std::size_t m, Rng& rng) {
  std::vector<std::size_t> idx(cells);
  std::iota(idx.begin(), idx.end(), 0);
  m = std::min(m, cells);
  for (std::size_t k = 0; k < m; ++k) {
    std::uniform_int_distribution<std::size_t> d(k, cells - 1);
    std::swap(idx[k], idx[d(rng)]);
  }
  idx.resize(m);
  return idx;
}

void check_recommend_args(std::size_t n_items, std::size_t m) {
  if (n_items == 0) throw ConfigError("recommendation length N must be >= 1");
  if (m == 0) throw ConfigError("number of start positions m must be >= 1");
}

}  // namespace

std::vector<std::size_t> choose_starts(const MultiBoardWorld& w,
                                       std::span<const std::size_t> observed,
                                       std::size_t m) {
  std::vector<std::pair<double, std::size_t>> ranked;
  for (std::size_t id = 0; id < w.num_states(); ++id) {
    ranked.emplace_back(-jaccard(w.bicluster(id).items, observed), id);
  }
  std::sort(ranked.begin(), ranked.end());
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < std::min(m, ranked.size()); ++k) {
    out.push_back(ranked[k].second);
  }
  return out;
}

RecommendationTrace recommend(const MultiBoardWorld& w, const QTable& q,
                              std::span<const std::size_t> observed,
                              std::size_t n_items, std::size_t m, Rng& rng) {
  check_recommend_args(n_items, m);
  RecommendationTrace tr;
  if (observed.empty()) {
    tr.random_starts = true;
    for (auto c : random_cells(w.num_states(), m, rng)) {
      tr.starts.push_back(w.board(0).cells()[c]);
    }
  } else {
    tr.starts = choose_starts(w, observed, m);
  }
  std::set<std::size_t> seen;
  for (auto s : tr.starts) {
    while (true) {
      tr.visited.push_back(s);
      const std::size_t added = absorb(w.bicluster(s), n_items, tr.items, seen);
      if (tr.items.size() >= n_items) {
        tr.end = TraceEnd::kListFull;
        return tr;
      }
      if (added == 0) break;
      const std::size_t a = greedy_action(q, w, s);
      if (a >= w.num_actions()) break;
      s = w.transition(s, a);
    }
  }
  tr.end = TraceEnd::kStartsExhausted;
  return tr;
}

// ---------------------------------------------------------------------------

SingleBoardWorld::SingleBoardWorld(Board board, const std::vector<Bicluster>& bs)
    : board_(std::move(board)), biclusters_(bs) {
  if (biclusters_.size() != board_.n() * board_.n()) {
    throw std::invalid_argument("world needs exactly n*n biclusters");
  }
}

Cell SingleBoardWorld::transition(Cell c, Direction d) const {
  auto next = step_cell(c, d, n());
  if (!next) throw std::invalid_argument("move leaves the board");
  return *next;
}

double SingleBoardWorld::reward(Cell from, Cell to) const {
  return jaccard(bicluster(from).users, bicluster(to).users);
}

namespace {

constexpr Direction kDirections[] = {Direction::kUp, Direction::kDown,
                                     Direction::kLeft, Direction::kRight};

std::vector<std::size_t> valid_dirs(const SingleBoardWorld& w, Cell c) {
  std::vector<std::size_t> out;
  for (auto d : kDirections) {
    if (w.valid(c, d)) out.push_back(static_cast<std::size_t>(d));
  }
  return out;
}

}  // namespace

QTable q_learn(const SingleBoardWorld& w, const GridQConfig& cfg, Rng& rng) {
  cfg.validate();
  QTable q(4);
  const std::size_t n = w.n();
  if (n * n < 2) return q;
  std::uniform_int_distribution<std::size_t> start(0, n * n - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const std::size_t cap = episode_cap(cfg, n);
  const std::size_t budget = cap * cfg.episodes;
  std::size_t step = 0;
  for (std::size_t ep = 0; ep < cfg.episodes; ++ep) {
    const std::size_t p = start(rng);
    Cell c{p / n, p % n};
    for (std::size_t t = 0; t < cap; ++t, ++step) {
      const auto acts = valid_dirs(w, c);
      const std::size_t s = w.board().at(c);
      std::size_t a;
      if (unit(rng) < cfg.epsilon(step, budget)) {
        std::uniform_int_distribution<std::size_t> d(0, acts.size() - 1);
        a = acts[d(rng)];
      } else {
        a = argmax_over(q, s, acts);
      }
      const Cell c2 = w.transition(c, static_cast<Direction>(a));
      const double target = w.reward(c, c2) +
                            cfg.gamma * max_over(q, w.board().at(c2), valid_dirs(w, c2));
      const double old = q.get(s, a);
      q.set(s, a, old + cfg.alpha * (target - old));
      c = c2;
    }
  }
  return q;
}

RecommendationTrace recommend(const SingleBoardWorld& w, const QTable& q,
                              std::span<const std::size_t> observed,
                              std::size_t n_items, std::size_t m, Rng& rng) {
  check_recommend_args(n_items, m);
  const std::size_t n = w.n();
  RecommendationTrace tr;
  std::vector<Cell> starts;
  if (observed.empty()) {
    tr.random_starts = true;
    for (auto p : random_cells(n * n, m, rng)) starts.push_back({p / n, p % n});
  } else {
    std::vector<std::pair<double, std::size_t>> ranked;
    for (std::size_t x = 0; x < n; ++x) {
      for (std::size_t y = 0; y < n; ++y) {
        ranked.emplace_back(-jaccard(w.bicluster({x, y}).items, observed),
                            w.board().at(x, y));
      }
    }
    std::sort(ranked.begin(), ranked.end());
    for (std::size_t k = 0; k < std::min(m, ranked.size()); ++k) {
      starts.push_back(w.board().position(ranked[k].second));
    }
  }
  for (auto c : starts) tr.starts.push_back(w.board().at(c));
  std::set<std::size_t> seen;
  for (auto c : starts) {
    while (true) {
      tr.visited.push_back(w.board().at(c));
      const std::size_t added = absorb(w.bicluster(c), n_items, tr.items, seen);
      if (tr.items.size() >= n_items) {
        tr.end = TraceEnd::kListFull;
        return tr;
      }
      if (added == 0) break;
      const auto acts = valid_dirs(w, c);
      if (acts.empty()) break;
      c = w.transition(c, static_cast<Direction>(argmax_over(q, w.board().at(c), acts)));
    }
  }
  tr.end = TraceEnd::kStartsExhausted;
  return tr;
}

// ---------------------------------------------------------------------------

RecallMode parse_recall_mode(std::string_view s) {
  if (s == "standard") return RecallMode::kStandard;
  if (s == "paper_literal") return RecallMode::kPaperLiteral;
  throw ConfigError("unknown recall mode '" + std::string(s) + "'");
}

RecallResult recall_at_n(const std::vector<std::vector<std::size_t>>& lists,
                         const std::vector<std::vector<std::size_t>>& hidden,
                         std::size_t n, RecallMode mode) {
  if (lists.size() != hidden.size()) {
    throw std::invalid_argument("recall: one list per hidden set required");
  }
  if (n == 0) throw ConfigError("recall N must be >= 1");
  RecallResult out;
  double sum = 0.0;
  for (std::size_t u = 0; u < lists.size(); ++u) {
    std::set<std::size_t> truth(hidden[u].begin(), hidden[u].end());
    if (truth.empty()) {
      ++out.excluded_empty;
      continue;
    }
    std::set<std::size_t> shown;
    for (std::size_t k = 0; k < std::min(n, lists[u].size()); ++k) {
      shown.insert(lists[u][k]);
    }
    std::size_t hits = 0;
    for (auto i : shown) hits += truth.count(i);
    const double denom = mode == RecallMode::kStandard
                             ? static_cast<double>(truth.size())
                             : static_cast<double>(n);
    const double r = static_cast<double>(hits) / denom;
    out.per_user.push_back({u, hits, r});
    sum += r;
  }
  if (!out.per_user.empty()) sum /= static_cast<double>(out.per_user.size());
  out.mean = sum;
  return out;
}

std::vector<std::size_t> random_items(std::size_t universe, std::size_t n, Rng& rng) {
  return random_cells(universe, n, rng);
}

nlohmann::json BoardSet::to_json() const {
  nlohmann::json bs = nlohmann::json::array();
  for (const auto& b : boards) bs.push_back(b.to_json());
  return {{"format", "replayrec-boards"},
          {"biclusters", biclusters.to_json()},
          {"boards", bs}};
}

BoardSet BoardSet::from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "replayrec-boards") throw DataError("not a boards file");
  BoardSet s;
  try {
    s.biclusters = BiclusterSet::from_json(j.at("biclusters"));
    for (const auto& b : j.at("boards")) s.boards.push_back(Board::from_json(b));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("boards file: ") + e.what());
  }
  if (s.boards.empty()) throw DataError("boards file holds no boards");
  for (const auto& b : s.boards) {
    if (b.n() * b.n() != s.biclusters.biclusters.size()) {
      throw DataError("board size does not match the bicluster count");
    }
  }
  return s;
}

}  // namespace replayrec::grid
