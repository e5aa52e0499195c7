#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

namespace replayrec {

inline constexpr std::size_t kDefaultMovingAverageWindow = 1500;

// Ordered (step, value) pairs with strictly increasing steps.
class MetricTrace {
 public:
  struct Point {
    std::uint64_t step;
    double value;
  };

  void append(std::uint64_t step, double value);
  const std::vector<Point>& points() const { return points_; }
  std::vector<double> values() const;
  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }

  // CSV with header step,reward,moving_average.
  void write_csv(std::ostream& out, std::size_t window) const;
  void write_csv(const std::filesystem::path& path, std::size_t window) const;

 private:
  std::vector<Point> points_;
};

// Value at position t is the mean of the most recent min(window, t+1) values.
std::vector<double> moving_average(const std::vector<double>& values,
                                   std::size_t window);

}  // namespace replayrec
