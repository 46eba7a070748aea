#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <set>
#include <string>
#include <vector>

#include <unistd.h>

#include "hyspec/rng.hpp"
#include "hyspec/tickdata.hpp"

namespace testing_support {

using hyspec::Rng;
using hyspec::TickPanel;
using hyspec::TickSeries;

/// Random series with at most `max_returns` returns. Half the time the times
/// sit on a coarse integer lattice so that different assets tie often.
inline TickSeries random_series(Rng& rng, const std::string& id, std::size_t max_returns, double horizon = 40.0) {
  const std::size_t n = 1 + rng.below(max_returns);
  std::set<double> times;
  const bool lattice = rng.below(2) == 0 && 2 * n <= static_cast<std::size_t>(horizon);
  while (times.size() < n) {
    const double t = lattice ? static_cast<double>(1 + rng.below(static_cast<std::uint64_t>(horizon)))
                             : horizon * rng.uniform();
    times.insert(t);
  }
  std::vector<double> t{0.0}, x{rng.normal()};
  for (double v : times) {
    t.push_back(v);
    x.push_back(x.back() + rng.normal() * 0.1);
  }
  return TickSeries(id, std::move(t), std::move(x));
}

inline TickPanel random_pair(Rng& rng, std::size_t max_returns = 20) {
  return TickPanel(40.0, {random_series(rng, "X", max_returns), random_series(rng, "Y", max_returns)});
}

/// All assets tick at the same random times.
inline TickPanel random_synchronous_panel(Rng& rng, std::size_t p, std::size_t max_returns = 20) {
  const TickSeries clock = random_series(rng, "clock", max_returns);
  std::vector<TickSeries> series;
  for (std::size_t a = 0; a < p; ++a) {
    std::vector<double> x{0.0};
    for (std::size_t k = 1; k < clock.size(); ++k) x.push_back(x.back() + 0.1 * rng.normal());
    series.emplace_back("A" + std::to_string(a), clock.times(), std::move(x));
  }
  return TickPanel(40.0, std::move(series));
}

inline double rel_diff(double a, double b) { return std::abs(a - b) / std::max(1.0, std::max(std::abs(a), std::abs(b))); }

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("hyspec_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  std::string file(const std::string& name) const { return (path_ / name).string(); }
  const std::filesystem::path& path() const { return path_; }

private:
  std::filesystem::path path_;
};

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream(path, std::ios::binary) << text;
}

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace testing_support
