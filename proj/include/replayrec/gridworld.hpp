#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"
#include "replayrec/agents.hpp"
#include "replayrec/biclustering.hpp"
#include "replayrec/common.hpp"

namespace replayrec::grid {

// |A∩B| / |A∪B| over sorted index sets; two empty sets give 1.
double jaccard(std::span<const std::size_t> a, std::span<const std::size_t> b);

// Jaccard distance over user sets. Throws std::invalid_argument on an empty
// user set.
double bicluster_distance(const Bicluster& a, const Bicluster& b);

// Pairwise bicluster distances, indexed by bicluster id.
class DistanceMatrix {
 public:
  DistanceMatrix() = default;
  explicit DistanceMatrix(const std::vector<Bicluster>& biclusters);
  // Arbitrary symmetric matrix with zero diagonal (row-major, size x size).
  DistanceMatrix(std::size_t size, std::vector<double> values);

  std::size_t size() const { return size_; }
  double operator()(std::size_t a, std::size_t b) const {
    return d_[a * size_ + b];
  }

 private:
  std::size_t size_ = 0;
  std::vector<double> d_;
};

using Cell = std::pair<std::size_t, std::size_t>;  // (x, y); x is the row

class Board {
 public:
  Board() = default;
  // cells[x * n + y] holds a bicluster id; must be a permutation of 0..n²-1.
  Board(std::size_t n, std::vector<std::size_t> cells);

  std::size_t n() const { return n_; }
  std::size_t at(std::size_t x, std::size_t y) const { return cells_[x * n_ + y]; }
  std::size_t at(Cell c) const { return at(c.first, c.second); }
  Cell position(std::size_t id) const { return pos_[id]; }
  const std::vector<std::size_t>& cells() const { return cells_; }
  void swap_cells(std::size_t p, std::size_t q);

  bool operator==(const Board& o) const { return cells_ == o.cells_; }

  nlohmann::json to_json() const;
  static Board from_json(const nlohmann::json& j);

 private:
  std::size_t n_ = 0;
  std::vector<std::size_t> cells_;
  std::vector<Cell> pos_;
};

// Sum over cells of the distances to their 4-neighbors; every adjacent pair
// contributes twice.
double h(const Board& b, const DistanceMatrix& d);

// Change in h if cells p and q (flat indices) were swapped.
double swap_delta(const Board& b, const DistanceMatrix& d, std::size_t p,
                  std::size_t q);

Board greedy_arrange(const DistanceMatrix& d, std::size_t n, Rng& rng);

struct SaSchedule {
  double t0 = 0.0;     // 0: mean |Δh| over `calibration_swaps` random swaps
  double cooling = 0.995;
  std::size_t iterations_per_temperature = 200;
  double t_min = 0.0;  // 0: 1e-3 * t0
  std::size_t calibration_swaps = 100;

  void validate() const;
  nlohmann::json to_json() const;
  static SaSchedule from_json(const nlohmann::json& j);
};

struct SaResult {
  Board board;
  double h_start = 0.0;  // greedy board
  double h_best = 0.0;
  double t0 = 0.0;
  std::size_t proposals = 0;
  std::size_t accepted = 0;
};

SaResult sa_arrange(const DistanceMatrix& d, std::size_t n,
                    const SaSchedule& schedule, Rng& rng);

// K annealing runs, each seeded from its own draw of `rng`, run concurrently.
std::vector<Board> build_boards(const DistanceMatrix& d, std::size_t n,
                                std::size_t k, const SaSchedule& schedule,
                                Rng& rng);

enum class Direction { kUp = 0, kDown = 1, kLeft = 2, kRight = 3 };

struct GridAction {
  std::size_t board = 0;
  Direction direction = Direction::kUp;

  std::size_t index() const { return board * 4 + static_cast<std::size_t>(direction); }
  static GridAction from_index(std::size_t a) {
    return {a / 4, static_cast<Direction>(a % 4)};
  }
};

// Neighbor of c in direction dir ("down" increments x), if on the grid.
std::optional<Cell> step_cell(Cell c, Direction dir, std::size_t n);

struct MultiBoardState {
  std::size_t id = 0;
  std::vector<Cell> coords;  // one per board
};

// K boards over one bicluster set; a state is a bicluster id.
class MultiBoardWorld {
 public:
  MultiBoardWorld(std::vector<Board> boards, const std::vector<Bicluster>& biclusters);

  std::size_t n() const { return boards_.front().n(); }
  std::size_t boards() const { return boards_.size(); }
  std::size_t num_states() const { return n() * n(); }
  std::size_t num_actions() const { return 4 * boards_.size(); }
  const Board& board(std::size_t k) const { return boards_[k]; }
  const Bicluster& bicluster(std::size_t id) const { return biclusters_[id]; }

  MultiBoardState state(std::size_t id) const;
  bool valid(std::size_t id, std::size_t action) const;
  std::vector<std::size_t> valid_actions(std::size_t id) const;
  // Throws std::invalid_argument for an off-grid move.
  std::size_t transition(std::size_t id, std::size_t action) const;
  double reward(std::size_t from, std::size_t to) const {
    return sim_[from * num_states() + to];
  }

 private:
  std::vector<Board> boards_;
  std::vector<Bicluster> biclusters_;
  std::vector<double> sim_;
};

struct GridQConfig {
  double alpha = 0.1;
  double gamma = 0.9;
  // Linear from start to end over the first half of all training steps.
  double epsilon_start = 1.0;
  double epsilon_end = 0.05;
  std::size_t episodes = 500;
  std::size_t max_steps = 0;  // 0: 4·n² per episode

  double epsilon(std::size_t step, std::size_t total_steps) const;

  void validate() const;
  nlohmann::json to_json() const;
  static GridQConfig from_json(const nlohmann::json& j);
};

// Greedy action among the valid ones, ties to the lowest index.
std::size_t greedy_action(const QTable& q, const MultiBoardWorld& w, std::size_t id);

QTable q_learn(const MultiBoardWorld& w, const GridQConfig& cfg, Rng& rng);

enum class TraceEnd { kListFull, kStartsExhausted };

struct RecommendationTrace {
  std::vector<std::size_t> items;   // item indices, duplicate free, ≤ N
  std::vector<std::size_t> starts;  // bicluster ids
  std::vector<std::size_t> visited; // bicluster ids in entry order
  TraceEnd end = TraceEnd::kStartsExhausted;
  bool random_starts = false;       // user had no observable items
};

std::string_view to_string(TraceEnd e);

// The m biclusters whose item sets are most Jaccard-similar to `observed`,
// ties by id.
std::vector<std::size_t> choose_starts(const MultiBoardWorld& w,
                                       std::span<const std::size_t> observed,
                                       std::size_t m);

RecommendationTrace recommend(const MultiBoardWorld& w, const QTable& q,
                              std::span<const std::size_t> observed,
                              std::size_t n_items, std::size_t m, Rng& rng);

// The original one-board formulation with (x, y) states and four actions,
// kept as its own code path so the K = 1 reduction can be checked.
class SingleBoardWorld {
 public:
  SingleBoardWorld(Board board, const std::vector<Bicluster>& biclusters);

  const Board& board() const { return board_; }
  std::size_t n() const { return board_.n(); }
  bool valid(Cell c, Direction d) const { return step_cell(c, d, n()).has_value(); }
  Cell transition(Cell c, Direction d) const;
  double reward(Cell from, Cell to) const;
  const Bicluster& bicluster(Cell c) const { return biclusters_[board_.at(c)]; }

 private:
  Board board_;
  std::vector<Bicluster> biclusters_;
};

QTable q_learn(const SingleBoardWorld& w, const GridQConfig& cfg, Rng& rng);

RecommendationTrace recommend(const SingleBoardWorld& w, const QTable& q,
                              std::span<const std::size_t> observed,
                              std::size_t n_items, std::size_t m, Rng& rng);

enum class RecallMode { kStandard, kPaperLiteral };

RecallMode parse_recall_mode(std::string_view s);

struct UserRecall {
  std::size_t user = 0;
  std::size_t hits = 0;
  double recall = 0.0;
};

struct RecallResult {
  double mean = 0.0;
  std::vector<UserRecall> per_user;  // evaluable users only
  std::size_t excluded_empty = 0;    // users with an empty hidden set
};

// lists[u] is truncated to its first N entries; hidden[u] need not be sorted.
RecallResult recall_at_n(const std::vector<std::vector<std::size_t>>& lists,
                         const std::vector<std::vector<std::size_t>>& hidden,
                         std::size_t n, RecallMode mode);

// N distinct items drawn uniformly from [0, universe).
std::vector<std::size_t> random_items(std::size_t universe, std::size_t n, Rng& rng);

// Boards together with the n² biclusters they arrange, so that a boards file
// is self-contained for recommendation.
struct BoardSet {
  BiclusterSet biclusters;
  std::vector<Board> boards;

  nlohmann::json to_json() const;
  static BoardSet from_json(const nlohmann::json& j);
};

}  // namespace replayrec::grid
