// Shared helpers for the test binaries.

#ifndef UVSEL_TESTS_TEST_UTIL_HPP
#define UVSEL_TESTS_TEST_UTIL_HPP

#include <filesystem>
#include <random>
#include <string>

#include "oracles.hpp"
#include "uvsel/mask.hpp"

namespace testutil {

/// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("uvsel_" + tag + "_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline uvsel::BinaryMask random_mask(std::mt19937& rng, int w, int h, double density) {
  std::bernoulli_distribution bit(density);
  uvsel::BinaryMask m(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) m.set(x, y, bit(rng));
  }
  return m;
}

/// Random mask made of a few filled rectangles over sparse noise, so erosion
/// has something to keep.
inline uvsel::BinaryMask blobby_mask(std::mt19937& rng, int w, int h) {
  auto m = random_mask(rng, w, h, 0.05);
  std::uniform_int_distribution<int> xs(0, w - 1), ys(0, h - 1), len(3, std::max(4, w / 2));
  for (int r = 0; r < 6; ++r) {
    const int x0 = xs(rng), y0 = ys(rng), rw = len(rng), rh = len(rng);
    for (int y = y0; y < std::min(h, y0 + rh); ++y) {
      for (int x = x0; x < std::min(w, x0 + rw); ++x) m.set(x, y);
    }
  }
  return m;
}

inline oracle::Grid to_grid(const uvsel::BinaryMask& m) {
  oracle::Grid g{m.width(), m.height(), {}};
  for (auto b : m.bits()) g.px.push_back(b ? 1 : 0);
  return g;
}

inline uvsel::BinaryMask from_grid(const oracle::Grid& g) {
  uvsel::BinaryMask m(g.w, g.h);
  for (int y = 0; y < g.h; ++y) {
    for (int x = 0; x < g.w; ++x) m.set(x, y, g.at(x, y) != 0);
  }
  return m;
}

inline uvsel::BinaryMask rect_mask(int w, int h, int x0, int y0, int rw, int rh) {
  uvsel::BinaryMask m(w, h);
  for (int y = y0; y < y0 + rh; ++y) {
    for (int x = x0; x < x0 + rw; ++x) {
      if (m.in_bounds(x, y)) m.set(x, y);
    }
  }
  return m;
}

}  // namespace testutil

#endif  // UVSEL_TESTS_TEST_UTIL_HPP
