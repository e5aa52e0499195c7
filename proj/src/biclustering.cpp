#include "replayrec/biclustering.hpp"

#include <algorithm>
#include <bit>
#include <fstream>
#include <numeric>

namespace replayrec {

namespace {

// Fixed-width column set.
class Bits {
 public:
  Bits() = default;
  explicit Bits(std::size_t n) : w_((n + 63) / 64, 0) {}

  void set(std::size_t i) { w_[i >> 6] |= std::uint64_t{1} << (i & 63); }
  bool test(std::size_t i) const { return (w_[i >> 6] >> (i & 63)) & 1; }

  bool any() const {
    return std::any_of(w_.begin(), w_.end(), [](auto x) { return x != 0; });
  }
  std::size_t count() const {
    std::size_t c = 0;
    for (auto x : w_) c += static_cast<std::size_t>(std::popcount(x));
    return c;
  }
  bool intersects(const Bits& o) const {
    for (std::size_t k = 0; k < w_.size(); ++k) {
      if (w_[k] & o.w_[k]) return true;
    }
    return false;
  }
  // Every bit of *this is also set in o.
  bool subset_of(const Bits& o) const {
    for (std::size_t k = 0; k < w_.size(); ++k) {
      if (w_[k] & ~o.w_[k]) return false;
    }
    return true;
  }
  Bits operator&(const Bits& o) const {
    Bits r = *this;
    for (std::size_t k = 0; k < w_.size(); ++k) r.w_[k] &= o.w_[k];
    return r;
  }
  Bits minus(const Bits& o) const {
    Bits r = *this;
    for (std::size_t k = 0; k < w_.size(); ++k) r.w_[k] &= ~o.w_[k];
    return r;
  }
  std::vector<std::size_t> indices() const {
    std::vector<std::size_t> out;
    for (std::size_t k = 0; k < w_.size(); ++k) {
      std::uint64_t x = w_[k];
      while (x) {
        out.push_back(k * 64 + static_cast<std::size_t>(std::countr_zero(x)));
        x &= x - 1;
      }
    }
    return out;
  }

 private:
  std::vector<std::uint64_t> w_;
};

class Enumerator {
 public:
  Enumerator(const RatingMatrix& m, const BimaxOptions& opt) : m_(m), opt_(opt) {
    rows_.reserve(m.users());
    for (std::size_t u = 0; u < m.users(); ++u) {
      Bits b(m.items());
      for (std::size_t i = 0; i < m.items(); ++i) {
        if (m.at(u, i)) b.set(i);
      }
      rows_.push_back(std::move(b));
    }
  }

  std::vector<Bicluster> run() {
    std::vector<std::size_t> all(m_.users());
    std::iota(all.begin(), all.end(), 0);
    Bits cols(m_.items());
    for (std::size_t i = 0; i < m_.items(); ++i) cols.set(i);
    std::vector<Bits> mandatory;
    divide(std::move(all), cols, mandatory);
    return std::move(found_);
  }

 private:
  // Every maximal bicluster with rows in R and columns in C that meets each
  // mandatory column set is reached by exactly one branch.
  void divide(std::vector<std::size_t> rows, const Bits& cols,
              std::vector<Bits>& mandatory) {
    if (cols.count() < opt_.min_items) return;
    std::vector<Bits> live;
    for (const auto& z : mandatory) {
      Bits zc = z & cols;
      if (!zc.any()) return;
      live.push_back(std::move(zc));
    }
    std::erase_if(rows, [&](std::size_t r) {
      if (!rows_[r].intersects(cols)) return true;
      for (const auto& z : live) {
        if (!rows_[r].intersects(z)) return true;
      }
      return false;
    });
    if (rows.size() < opt_.min_users) return;

    auto split = std::find_if(rows.begin(), rows.end(), [&](std::size_t r) {
      return !cols.subset_of(rows_[r]);
    });
    if (split == rows.end()) {
      report(rows, cols);
      return;
    }
    const std::size_t r = *split;
    const Bits cu = cols & rows_[r];
    const Bits cv = cols.minus(rows_[r]);

    // Columns confined to the split row's ones.
    divide(rows, cu, mandatory);

    // Columns touching the split row's zeros: that row cannot take part.
    rows.erase(split);
    mandatory.push_back(cv);
    divide(std::move(rows), cols, mandatory);
    mandatory.pop_back();
  }

  void report(const std::vector<std::size_t>& rows, const Bits& cols) {
    found_.push_back({rows, cols.indices()});
    if (opt_.max_biclusters && found_.size() > opt_.max_biclusters) {
      throw DataError("bimax found more than " +
                      std::to_string(opt_.max_biclusters) +
                      " biclusters; raise min_users/min_items");
    }
  }

  const RatingMatrix& m_;
  const BimaxOptions& opt_;
  std::vector<Bits> rows_;
  std::vector<Bicluster> found_;
};

}  // namespace

bool is_all_ones(const RatingMatrix& m, const Bicluster& b) {
  for (auto u : b.users) {
    for (auto i : b.items) {
      if (u >= m.users() || i >= m.items() || !m.at(u, i)) return false;
    }
  }
  return true;
}

bool is_maximal(const RatingMatrix& m, const Bicluster& b) {
  if (b.users.empty() || b.items.empty() || !is_all_ones(m, b)) return false;
  for (std::size_t u = 0; u < m.users(); ++u) {
    if (std::binary_search(b.users.begin(), b.users.end(), u)) continue;
    if (std::all_of(b.items.begin(), b.items.end(),
                    [&](std::size_t i) { return m.at(u, i); })) {
      return false;
    }
  }
  for (std::size_t i = 0; i < m.items(); ++i) {
    if (std::binary_search(b.items.begin(), b.items.end(), i)) continue;
    if (std::all_of(b.users.begin(), b.users.end(),
                    [&](std::size_t u) { return m.at(u, i); })) {
      return false;
    }
  }
  return true;
}

std::vector<Bicluster> bimax(const RatingMatrix& m, const BimaxOptions& opt) {
  if (opt.min_users == 0 || opt.min_items == 0) {
    throw ConfigError("bimax minimum sizes must be >= 1");
  }
  auto found = Enumerator(m, opt).run();
  std::erase_if(found, [&](const Bicluster& b) { return !is_maximal(m, b); });
  std::sort(found.begin(), found.end());
  found.erase(std::unique(found.begin(), found.end()), found.end());
  return found;
}

std::vector<Bicluster> sample_biclusters(const std::vector<Bicluster>& all,
                                         std::size_t n, Rng& rng) {
  const std::size_t want = n * n;
  if (n == 0) throw ConfigError("board size n must be >= 1");
  if (all.size() < want) {
    throw DataError("need " + std::to_string(want) + " biclusters but only " +
                    std::to_string(all.size()) +
                    " were found; use a smaller n or lower minimum sizes");
  }
  std::vector<std::size_t> idx(all.size());
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t k = 0; k < want; ++k) {
    std::uniform_int_distribution<std::size_t> d(k, idx.size() - 1);
    std::swap(idx[k], idx[d(rng)]);
  }
  idx.resize(want);
  std::sort(idx.begin(), idx.end());
  std::vector<Bicluster> out;
  out.reserve(want);
  for (auto k : idx) out.push_back(all[k]);
  return out;
}

nlohmann::json BiclusterSet::to_json() const {
  nlohmann::json list = nlohmann::json::array();
  for (const auto& b : biclusters) {
    list.push_back({{"users", b.users}, {"items", b.items}});
  }
  return {{"format", "replayrec-biclusters"},
          {"user_ids", user_ids},
          {"item_ids", item_ids},
          {"biclusters", list}};
}

BiclusterSet BiclusterSet::from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "replayrec-biclusters") {
    throw DataError("not a bicluster file");
  }
  BiclusterSet s;
  try {
    j.at("user_ids").get_to(s.user_ids);
    j.at("item_ids").get_to(s.item_ids);
    for (const auto& b : j.at("biclusters")) {
      Bicluster bc{b.at("users").get<std::vector<std::size_t>>(),
                   b.at("items").get<std::vector<std::size_t>>()};
      if (bc.users.empty() || bc.items.empty()) {
        throw DataError("empty bicluster in file");
      }
      for (auto u : bc.users) {
        if (u >= s.user_ids.size()) throw DataError("bicluster user out of range");
      }
      for (auto i : bc.items) {
        if (i >= s.item_ids.size()) throw DataError("bicluster item out of range");
      }
      s.biclusters.push_back(std::move(bc));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("bicluster file: ") + e.what());
  }
  return s;
}

void BiclusterSet::save(const std::filesystem::path& p) const {
  std::ofstream out(p);
  if (!out) throw DataError("cannot write " + p.string());
  out << to_json().dump(1) << '\n';
}

BiclusterSet BiclusterSet::load(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw DataError("cannot read " + p.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(p.string() + ": " + e.what());
  }
  return from_json(j);
}

}  // namespace replayrec
