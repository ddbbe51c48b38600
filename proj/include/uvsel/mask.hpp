// Binary masks and the morphology / set algebra used by the perception stage.

#ifndef UVSEL_MASK_HPP
#define UVSEL_MASK_HPP

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "uvsel/core.hpp"

namespace uvsel {

/// Row-major boolean image. Storage is one byte per pixel holding 0 or 1.
class BinaryMask {
 public:
  BinaryMask() = default;
  BinaryMask(int width, int height, bool value = false)
      : width_(width), height_(height) {
    if (width < 0 || height < 0) {
      throw InvalidArgument("BinaryMask: negative dimensions");
    }
    bits_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height),
                 value ? 1 : 0);
  }

  static BinaryMask full(int width, int height) { return {width, height, true}; }

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return bits_.size(); }
  bool empty() const { return bits_.empty(); }

  bool at(int x, int y) const { return bits_[index(x, y)] != 0; }
  void set(int x, int y, bool v = true) { bits_[index(x, y)] = v ? 1 : 0; }
  bool in_bounds(int x, int y) const {
    return x >= 0 && y >= 0 && x < width_ && y < height_;
  }

  std::span<const std::uint8_t> bits() const { return bits_; }
  std::span<std::uint8_t> bits() { return bits_; }

  bool same_shape(const BinaryMask& o) const {
    return width_ == o.width_ && height_ == o.height_;
  }

  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;

 private:
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> bits_;
};

namespace detail {

inline void require_same_shape(const BinaryMask& a, const BinaryMask& b,
                               const char* op) {
  if (!a.same_shape(b)) {
    throw InvalidArgument(std::string(op) + ": mask dimensions differ (" +
                          std::to_string(a.width()) + "x" + std::to_string(a.height()) +
                          " vs " + std::to_string(b.width()) + "x" +
                          std::to_string(b.height()) + ")");
  }
}

// 1-D erosion of `count` samples spaced `stride` apart, window [i-before, i+after].
// Out-of-range samples count as set, so only clear samples inside the line matter:
// a sample survives iff no clear sample lies within its window.
inline void erode_line(const std::uint8_t* in, std::uint8_t* out, int count,
                       std::ptrdiff_t stride, int before, int after,
                       std::vector<int>& scratch) {
  // scratch[i] = number of clear samples in [0, i)
  scratch.resize(static_cast<std::size_t>(count) + 1);
  scratch[0] = 0;
  for (int i = 0; i < count; ++i) {
    scratch[i + 1] = scratch[i] + (in[i * stride] == 0 ? 1 : 0);
  }
  for (int i = 0; i < count; ++i) {
    const int lo = i - before < 0 ? 0 : i - before;
    const int hi = i + after + 1 > count ? count : i + after + 1;
    out[i * stride] = (scratch[hi] - scratch[lo] == 0) ? 1 : 0;
  }
}

}  // namespace detail

/// Number of set pixels.
inline std::size_t area(const BinaryMask& m) {
  std::size_t n = 0;
  for (auto b : m.bits()) n += b;
  return n;
}

inline BinaryMask invert(const BinaryMask& m) {
  BinaryMask out(m.width(), m.height());
  auto src = m.bits();
  auto dst = out.bits();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] ? 0 : 1;
  return out;
}

/// Pixelwise OR. An empty list yields an empty (0x0) mask.
inline BinaryMask unite(std::span<const BinaryMask> masks) {
  if (masks.empty()) return {};
  BinaryMask out(masks.front().width(), masks.front().height());
  auto dst = out.bits();
  for (const auto& m : masks) {
    detail::require_same_shape(out, m, "unite");
    auto src = m.bits();
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] |= src[i];
  }
  return out;
}

inline BinaryMask unite(const BinaryMask& a, const BinaryMask& b) {
  detail::require_same_shape(a, b, "unite");
  BinaryMask out = a;
  auto dst = out.bits();
  auto src = b.bits();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] |= src[i];
  return out;
}

inline BinaryMask intersect(const BinaryMask& a, const BinaryMask& b) {
  detail::require_same_shape(a, b, "intersect");
  BinaryMask out = a;
  auto dst = out.bits();
  auto src = b.bits();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] &= src[i];
  return out;
}

/// a AND NOT b
inline BinaryMask subtract(const BinaryMask& a, const BinaryMask& b) {
  detail::require_same_shape(a, b, "subtract");
  BinaryMask out = a;
  auto dst = out.bits();
  auto src = b.bits();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = dst[i] && !src[i];
  return out;
}

inline std::size_t intersection_area(const BinaryMask& a, const BinaryMask& b) {
  detail::require_same_shape(a, b, "intersection_area");
  auto x = a.bits();
  auto y = b.bits();
  std::size_t n = 0;
  for (std::size_t i = 0; i < x.size(); ++i) n += (x[i] & y[i]);
  return n;
}

/// True iff every set pixel of `a` is set in `b`.
inline bool is_subset(const BinaryMask& a, const BinaryMask& b) {
  detail::require_same_shape(a, b, "is_subset");
  auto x = a.bits();
  auto y = b.bits();
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] && !y[i]) return false;
  }
  return true;
}

/// Erosion with a k x k kernel of ones anchored at (k/2, k/2). The window of
/// pixel (x, y) spans x-k/2 .. x+k-1-k/2 (same for y). Pixels outside the image
/// count as set, so a full mask is a fixed point. Runs as a row pass followed
/// by a column pass, each linear in the pixel count.
inline BinaryMask erode(const BinaryMask& m, int k) {
  if (k <= 0) throw InvalidArgument("erode: kernel size must be >= 1");
  const int before = k / 2;
  const int after = k - 1 - before;
  const int w = m.width();
  const int h = m.height();
  BinaryMask rows(w, h);
  BinaryMask out(w, h);
  std::vector<int> scratch;
  for (int y = 0; y < h; ++y) {
    const std::size_t off = static_cast<std::size_t>(y) * static_cast<std::size_t>(w);
    detail::erode_line(m.bits().data() + off, rows.bits().data() + off, w, 1, before,
                       after, scratch);
  }
  for (int x = 0; x < w; ++x) {
    detail::erode_line(rows.bits().data() + x, out.bits().data() + x, h, w, before,
                       after, scratch);
  }
  return out;
}

/// Square dilation by `radius` pixels (window 2r+1, centered). Out-of-bounds
/// pixels count as clear. Used to simulate segmenter bleed in synthetic scenes.
inline BinaryMask dilate(const BinaryMask& m, int radius) {
  if (radius < 0) throw InvalidArgument("dilate: radius must be >= 0");
  if (radius == 0) return m;
  // dilate(m) = invert(erode(invert(m))) with symmetric window; the erosion
  // treats outside as set, which the double inversion maps to "outside clear".
  return invert(erode(invert(m), 2 * radius + 1));
}

}  // namespace uvsel

#endif  // UVSEL_MASK_HPP
