#include <algorithm>
#include <numeric>

#include "replayrec/agents.hpp"

namespace replayrec {

namespace {

constexpr std::size_t kMemoryCells = MemoryBlock::kRows * MemoryBlock::kCols;

std::size_t per_slot_input(std::size_t d, std::size_t c) {
  return d + MemoryBlock::kRows + c + d;
}

}  // namespace

SlotScorer::SlotScorer(NetworkInput input, std::size_t feature_dim,
                       std::size_t context_dim,
                       const std::vector<std::size_t>& hidden, Rng& rng)
    : input_(input), feature_dim_(feature_dim), context_dim_(context_dim) {
  std::vector<std::size_t> sizes;
  if (input_ == NetworkInput::kFlat) {
    sizes.push_back(state_size());
    sizes.insert(sizes.end(), hidden.begin(), hidden.end());
    sizes.push_back(kMaxImpressions);
  } else {
    sizes.push_back(per_slot_input(feature_dim, context_dim));
    sizes.insert(sizes.end(), hidden.begin(), hidden.end());
    sizes.push_back(1);
  }
  net_ = Mlp(sizes, rng);
}

std::size_t SlotScorer::state_size() const {
  return flat_state_size(feature_dim_, context_dim_);
}

Eigen::MatrixXd SlotScorer::inputs(
    const std::vector<const std::vector<double>*>& states) const {
  const std::size_t n = state_size();
  for (const auto* s : states) {
    if (s->size() != n) {
      throw std::invalid_argument("state has size " + std::to_string(s->size()) +
                                  ", scorer expects " + std::to_string(n));
    }
  }
  const auto batch = static_cast<Eigen::Index>(states.size());
  if (input_ == NetworkInput::kFlat) {
    Eigen::MatrixXd x(static_cast<Eigen::Index>(n), batch);
    for (Eigen::Index b = 0; b < batch; ++b) {
      x.col(b) = Eigen::Map<const Eigen::VectorXd>(states[b]->data(),
                                                   static_cast<Eigen::Index>(n));
    }
    return x;
  }
  // Per slot k: [candidate_k; memory column k; user context; preference].
  const std::size_t d = feature_dim_, c = context_dim_;
  const std::size_t in = per_slot_input(d, c);
  const std::size_t cand_off = kMemoryCells;
  const std::size_t ctx_off = cand_off + kMaxImpressions * d;
  const std::size_t pref_off = ctx_off + c;
  Eigen::MatrixXd x(static_cast<Eigen::Index>(in),
                    batch * static_cast<Eigen::Index>(kMaxImpressions));
  for (Eigen::Index b = 0; b < batch; ++b) {
    const double* s = states[b]->data();
    for (std::size_t k = 0; k < kMaxImpressions; ++k) {
      double* col = x.col(b * kMaxImpressions + k).data();
      std::copy_n(s + cand_off + k * d, d, col);
      for (std::size_t r = 0; r < MemoryBlock::kRows; ++r) {
        col[d + r] = s[r * MemoryBlock::kCols + k];
      }
      std::copy_n(s + ctx_off, c, col + d + MemoryBlock::kRows);
      std::copy_n(s + pref_off, d, col + d + MemoryBlock::kRows + c);
    }
  }
  return x;
}

Eigen::MatrixXd SlotScorer::scores(
    const std::vector<const std::vector<double>*>& states,
    MlpCache* cache) const {
  Eigen::MatrixXd out = net_.forward(inputs(states), cache);
  if (input_ == NetworkInput::kFlat) return out;
  return Eigen::Map<const Eigen::MatrixXd>(
      out.data(), static_cast<Eigen::Index>(kMaxImpressions),
      static_cast<Eigen::Index>(states.size()));
}

Eigen::VectorXd SlotScorer::scores(const std::vector<double>& state) const {
  return scores(std::vector<const std::vector<double>*>{&state}, nullptr).col(0);
}

MlpGradients SlotScorer::backward(const MlpCache& cache,
                                  const Eigen::MatrixXd& upstream) const {
  if (input_ == NetworkInput::kFlat) return net_.backward(cache, upstream);
  Eigen::MatrixXd flat =
      Eigen::Map<const Eigen::MatrixXd>(upstream.data(), 1, upstream.size());
  return net_.backward(cache, flat);
}

nlohmann::json SlotScorer::to_json() const {
  return {{"input", std::string(to_string(input_))},
          {"feature_dim", feature_dim_},
          {"context_dim", context_dim_},
          {"mlp", net_.to_json()}};
}

SlotScorer SlotScorer::from_json(const nlohmann::json& j) {
  SlotScorer s;
  s.input_ = parse_network_input(j.at("input").get<std::string>());
  s.feature_dim_ = j.at("feature_dim").get<std::size_t>();
  s.context_dim_ = j.at("context_dim").get<std::size_t>();
  s.net_ = Mlp::from_json(j.at("mlp"));
  const std::size_t expect_in =
      s.input_ == NetworkInput::kFlat
          ? s.state_size()
          : per_slot_input(s.feature_dim_, s.context_dim_);
  if (s.net_.input_size() != expect_in) {
    throw DataError("model network input size does not match its dimensions");
  }
  return s;
}

std::size_t argmax_slot(const Eigen::VectorXd& scores, std::size_t n_valid) {
  if (n_valid == 0) throw std::invalid_argument("no valid slots");
  std::size_t best = 0;
  for (std::size_t k = 1; k < n_valid; ++k) {
    if (scores(static_cast<Eigen::Index>(k)) >
        scores(static_cast<Eigen::Index>(best))) {
      best = k;
    }
  }
  return best;
}

std::vector<std::size_t> sort_slots(const Eigen::VectorXd& scores,
                                    std::size_t n_valid) {
  std::vector<std::size_t> order(n_valid);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) {
                     return scores(static_cast<Eigen::Index>(a)) >
                            scores(static_cast<Eigen::Index>(b));
                   });
  return order;
}

}  // namespace replayrec
