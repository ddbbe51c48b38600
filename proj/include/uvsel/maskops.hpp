// Target / non-target mask construction from two detector passes.
//
// Pass one (user prompt) gives the raw target mask, eroded with a small kernel
// to drop segmentation noise. The non-target mask starts from the inverse of the
// *raw* target mask eroded with a larger kernel; that erosion wipes out thin
// objects, so pass two (fixed small-object prompt) supplies a fine-feature mask
// that is merged back in without erosion.

#ifndef UVSEL_MASKOPS_HPP
#define UVSEL_MASKOPS_HPP

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "uvsel/detection.hpp"
#include "uvsel/mask.hpp"

namespace uvsel {

struct RefinementConfig {
  int target_erosion_kernel = 10;
  int inverted_erosion_kernel = 20;
  std::size_t fine_feature_area_max = 20000;  // pixels, strict upper bound
  std::string fine_feature_prompt = "string. accessories";
  double target_confidence = 0.35;
  double fine_confidence = 0.2;

  void validate() const {
    if (target_erosion_kernel < 1 || inverted_erosion_kernel < 1) {
      throw ConfigError("refinement: erosion kernels must be >= 1");
    }
    if (!(target_confidence > 0.0 && target_confidence < 1.0) ||
        !(fine_confidence > 0.0 && fine_confidence < 1.0)) {
      throw ConfigError("refinement: confidence thresholds must lie in (0, 1)");
    }
    if (fine_feature_prompt.empty()) throw ConfigError("refinement: empty fine-feature prompt");
  }

  friend bool operator==(const RefinementConfig&, const RefinementConfig&) = default;
};

struct TargetMasks {
  BinaryMask raw;
  BinaryMask eroded;
};

namespace detail {
inline void require_common_shape(std::span<const Detection> dets, const char* op) {
  for (const auto& d : dets) detail::require_same_shape(dets.front().mask, d.mask, op);
}
}  // namespace detail

/// Union of every detection mask, plus its erosion. With no detections both
/// masks are 0x0; callers treat that as "target not found".
inline TargetMasks build_target_mask(std::span<const Detection> detections,
                                     int erosion_kernel = 10) {
  if (detections.empty()) return {};
  detail::require_common_shape(detections, "build_target_mask");
  BinaryMask raw(detections.front().mask.width(), detections.front().mask.height());
  for (const auto& d : detections) raw = unite(raw, d.mask);
  auto eroded = erode(raw, erosion_kernel);
  return {std::move(raw), std::move(eroded)};
}

/// Union of the detection masks whose own area is strictly below `area_max`.
/// No erosion. `width`/`height` size the result when nothing qualifies.
inline BinaryMask build_fine_feature_mask(std::span<const Detection> detections,
                                          std::size_t area_max, int width, int height) {
  BinaryMask out(width, height);
  for (const auto& d : detections) {
    detail::require_same_shape(out, d.mask, "build_fine_feature_mask");
    if (area(d.mask) < area_max) out = unite(out, d.mask);
  }
  return out;
}

/// erode(invert(raw_target), k) OR fine_feature. Uses the raw, unfiltered
/// target mask.
inline BinaryMask build_non_target_mask(const BinaryMask& raw_target,
                                        const BinaryMask& fine_feature,
                                        int inverted_erosion_kernel = 20) {
  detail::require_same_shape(raw_target, fine_feature, "build_non_target_mask");
  return unite(erode(invert(raw_target), inverted_erosion_kernel), fine_feature);
}

/// All masks produced by the perception stage for one image.
struct PerceptionMasks {
  BinaryMask raw_target;
  BinaryMask eroded_target;
  BinaryMask fine_feature;
  BinaryMask non_target;
  bool target_found = false;
};

/// Runs both detector passes through `backend` and assembles the masks.
/// When the target prompt yields nothing the target masks are left empty
/// (full image size) and target_found is false; the non-target masks are still
/// built so downstream artifacts exist.
inline PerceptionMasks run_perception(DetectorBackend& backend, const RgbImage& image,
                                      const std::string& target_prompt,
                                      const RefinementConfig& cfg) {
  cfg.validate();
  const int w = image.width();
  const int h = image.height();
  PerceptionMasks out;

  auto targets = backend.detect({image, target_prompt, cfg.target_confidence});
  out.target_found = !targets.empty();
  auto tm = build_target_mask(targets, cfg.target_erosion_kernel);
  out.raw_target = out.target_found ? std::move(tm.raw) : BinaryMask(w, h);
  out.eroded_target = out.target_found ? std::move(tm.eroded) : BinaryMask(w, h);
  detail::require_same_shape(out.raw_target, BinaryMask(w, h), "run_perception");

  auto fine = backend.detect({image, cfg.fine_feature_prompt, cfg.fine_confidence});
  out.fine_feature = build_fine_feature_mask(fine, cfg.fine_feature_area_max, w, h);
  out.non_target =
      build_non_target_mask(out.raw_target, out.fine_feature, cfg.inverted_erosion_kernel);
  return out;
}

}  // namespace uvsel

#endif  // UVSEL_MASKOPS_HPP
