// Detection records, the detector backend contract, and the run-length mask
// encoding used on the wire.

#ifndef UVSEL_DETECTION_HPP
#define UVSEL_DETECTION_HPP

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "uvsel/core.hpp"
#include "uvsel/image.hpp"
#include "uvsel/mask.hpp"

namespace uvsel {

struct BoundingBox {
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;
  int y1 = 0;

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

/// One labeled, scored instance from an open-vocabulary detector + segmenter.
/// The mask spans the whole image; set pixels may extend past the box.
struct Detection {
  std::string label;
  double score = 0.0;
  BoundingBox bbox;
  BinaryMask mask;

  friend bool operator==(const Detection&, const Detection&) = default;
};

struct DetectRequest {
  RgbImage image;
  std::string prompt;
  double confidence_threshold = 0.35;
};

/// Raised when a backend cannot be reached or answers with a transport-level
/// failure. Distinct from an empty detection list, which is a valid answer.
class BackendError : public Error {
 public:
  using Error::Error;
};

class BackendTimeout : public BackendError {
 public:
  using BackendError::BackendError;
};

class BackendStatusError : public BackendError {
 public:
  BackendStatusError(int status, const std::string& what)
      : BackendError(what), status_(status) {}
  int status() const { return status_; }

 private:
  int status_;
};

/// A response mask whose runs do not add up to width*height, or that is
/// otherwise unparseable.
class MalformedMask : public BackendError {
 public:
  using BackendError::BackendError;
};

/// Pluggable detect/segment step.
class DetectorBackend {
 public:
  virtual ~DetectorBackend() = default;
  virtual std::vector<Detection> detect(const DetectRequest& req) = 0;
};

inline void validate_request(const DetectRequest& req) {
  if (req.image.width() <= 0 || req.image.height() <= 0) {
    throw InvalidArgument("detect: image has zero size");
  }
  if (req.prompt.empty()) throw InvalidArgument("detect: prompt is empty");
  if (!(req.confidence_threshold > 0.0 && req.confidence_threshold < 1.0)) {
    throw InvalidArgument("detect: confidence threshold must lie in (0, 1)");
  }
}

inline void validate_detection(const Detection& d, int width, int height) {
  const auto& b = d.bbox;
  if (!(b.x0 < b.x1 && b.y0 < b.y1) || b.x0 < 0 || b.y0 < 0 || b.x1 > width ||
      b.y1 > height) {
    throw InvalidArgument("detection '" + d.label + "': bbox outside image or empty");
  }
  if (!(d.score >= 0.0 && d.score <= 1.0)) {
    throw InvalidArgument("detection '" + d.label + "': score outside [0, 1]");
  }
  if (d.mask.width() != width || d.mask.height() != height) {
    throw InvalidArgument("detection '" + d.label + "': mask size differs from image");
  }
}

// Row-major run-length code: runs alternate clear/set, the first run counts
// clear pixels and may be zero.

inline std::vector<std::int64_t> rle_encode(const BinaryMask& m) {
  std::vector<std::int64_t> runs;
  std::uint8_t current = 0;
  std::int64_t count = 0;
  for (auto b : m.bits()) {
    if (b != current) {
      runs.push_back(count);
      current = b;
      count = 0;
    }
    ++count;
  }
  runs.push_back(count);
  return runs;
}

inline BinaryMask rle_decode(const std::vector<std::int64_t>& runs, int width,
                             int height) {
  if (width <= 0 || height <= 0) throw MalformedMask("rle: non-positive mask size");
  const std::int64_t total = static_cast<std::int64_t>(width) * height;
  std::int64_t sum = 0;
  for (auto r : runs) {
    if (r < 0) throw MalformedMask("rle: negative run length");
    sum += r;
    if (sum > total) break;
  }
  if (sum != total) {
    throw MalformedMask("rle: runs sum to " + std::to_string(sum) + ", expected " +
                        std::to_string(total));
  }
  BinaryMask m(width, height);
  auto bits = m.bits();
  std::int64_t pos = 0;
  std::uint8_t value = 0;
  for (auto r : runs) {
    if (value) {
      std::fill(bits.begin() + pos, bits.begin() + pos + r, std::uint8_t{1});
    }
    pos += r;
    value ^= 1;
  }
  return m;
}

/// Tight box around the set pixels, half-open on the max side. Returns an
/// empty box (all zero) for an empty mask.
inline BoundingBox mask_bbox(const BinaryMask& m) {
  int x0 = m.width(), y0 = m.height(), x1 = -1, y1 = -1;
  for (int y = 0; y < m.height(); ++y) {
    for (int x = 0; x < m.width(); ++x) {
      if (!m.at(x, y)) continue;
      x0 = std::min(x0, x);
      y0 = std::min(y0, y);
      x1 = std::max(x1, x);
      y1 = std::max(y1, y);
    }
  }
  if (x1 < 0) return {};
  return {x0, y0, x1 + 1, y1 + 1};
}

}  // namespace uvsel

#endif  // UVSEL_DETECTION_HPP
