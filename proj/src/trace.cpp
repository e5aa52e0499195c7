#include "replayrec/trace.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <stdexcept>

#include "replayrec/common.hpp"

namespace replayrec {

void MetricTrace::append(std::uint64_t step, double value) {
  if (!points_.empty() && step <= points_.back().step) {
    throw std::invalid_argument("metric trace steps must increase");
  }
  points_.push_back({step, value});
}

std::vector<double> MetricTrace::values() const {
  std::vector<double> v;
  v.reserve(points_.size());
  for (const auto& p : points_) v.push_back(p.value);
  return v;
}

void MetricTrace::write_csv(std::ostream& out, std::size_t window) const {
  auto avg = moving_average(values(), window);
  out << "step,reward,moving_average\n";
  out << std::setprecision(10);
  for (std::size_t i = 0; i < points_.size(); ++i) {
    out << points_[i].step << ',' << points_[i].value << ',' << avg[i] << '\n';
  }
}

void MetricTrace::write_csv(const std::filesystem::path& path,
                            std::size_t window) const {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  write_csv(out, window);
}

std::vector<double> moving_average(const std::vector<double>& values,
                                   std::size_t window) {
  if (window == 0) throw std::invalid_argument("moving average window 0");
  std::vector<double> out(values.size());
  // Running sum, recomputed exactly every 4096 steps to bound drift.
  double sum = 0.0;
  for (std::size_t t = 0; t < values.size(); ++t) {
    sum += values[t];
    if (t >= window) sum -= values[t - window];
    if (t % 4096 == 0) {
      sum = 0.0;
      std::size_t lo = t + 1 > window ? t + 1 - window : 0;
      for (std::size_t k = lo; k <= t; ++k) sum += values[k];
    }
    const std::size_t n = std::min(window, t + 1);
    out[t] = sum / static_cast<double>(n);
  }
  return out;
}

}  // namespace replayrec
