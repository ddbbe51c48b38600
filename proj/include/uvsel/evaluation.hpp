// Mask-level scoring against ground truth: target score T (at least half of
// each visible target region segmented) and per-object non-target score NT
// (no predicted target pixel over the object).

#ifndef UVSEL_EVALUATION_HPP
#define UVSEL_EVALUATION_HPP

#include <algorithm>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "uvsel/mask.hpp"

namespace uvsel {

struct WeightedRegion {
  std::string name;
  BinaryMask mask;
  double weight = 1.0;

  friend bool operator==(const WeightedRegion&, const WeightedRegion&) = default;
};

struct NamedMask {
  std::string name;
  BinaryMask mask;

  friend bool operator==(const NamedMask&, const NamedMask&) = default;
};

struct GroundTruth {
  BinaryMask target;          // full target surface, ignoring occluders
  BinaryMask visible_target;  // target minus the union of object masks
  std::vector<WeightedRegion> target_regions;
  std::vector<NamedMask> objects;

  void validate() const {
    if (target_regions.empty()) throw InvalidArgument("ground truth: no target regions");
    double sum = 0.0;
    for (const auto& r : target_regions) {
      detail::require_same_shape(visible_target, r.mask, "ground truth region");
      sum += r.weight;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
      throw InvalidArgument("ground truth: region weights sum to " + std::to_string(sum));
    }
    detail::require_same_shape(visible_target, target, "ground truth target");
    for (const auto& o : objects) {
      detail::require_same_shape(visible_target, o.mask, "ground truth object");
    }
  }

  friend bool operator==(const GroundTruth&, const GroundTruth&) = default;
};

/// Visible target = gt target minus every object mask.
inline BinaryMask visible_target_of(const BinaryMask& target,
                                    const std::vector<NamedMask>& objects) {
  BinaryMask out = target;
  for (const auto& o : objects) out = subtract(out, o.mask);
  return out;
}

struct TargetScore {
  double value = 0.0;
  std::vector<std::string> warnings;
};

/// Per region r: credit weight_r iff |pred & visible_r| * 2 >= |visible_r|.
/// Regions with no visible pixels are skipped and the remaining weights are
/// renormalized.
inline TargetScore score_target(const BinaryMask& pred, const GroundTruth& gt) {
  detail::require_same_shape(pred, gt.visible_target, "score_target");
  TargetScore s;
  double credited = 0.0, live_weight = 0.0;
  for (const auto& r : gt.target_regions) {
    const auto visible = intersect(r.mask, gt.visible_target);
    const auto vis_area = area(visible);
    if (vis_area == 0) {
      s.warnings.push_back("region '" + r.name + "' has no visible pixels; skipped");
      continue;
    }
    live_weight += r.weight;
    if (2 * intersection_area(pred, visible) >= vis_area) credited += r.weight;
  }
  if (live_weight > 0.0) s.value = credited / live_weight;
  return s;
}

struct ObjectScore {
  std::string name;
  int score = 0;  // 1 = correctly excluded
  std::size_t overlap_px = 0;

  friend bool operator==(const ObjectScore&, const ObjectScore&) = default;
};

/// 1 per object iff |pred & object| <= tolerance_px. Output is sorted by name
/// so results do not depend on the order objects are listed in.
inline std::vector<ObjectScore> score_non_target(const BinaryMask& pred, const GroundTruth& gt,
                                                 std::size_t tolerance_px = 0) {
  std::vector<ObjectScore> out;
  for (const auto& o : gt.objects) {
    const auto overlap = intersection_area(pred, o.mask);
    out.push_back({o.name, overlap <= tolerance_px ? 1 : 0, overlap});
  }
  std::sort(out.begin(), out.end(),
            [](const ObjectScore& a, const ObjectScore& b) { return a.name < b.name; });
  return out;
}

enum class Variant { without_ntm, with_ntm };

inline const char* to_string(Variant v) {
  return v == Variant::with_ntm ? "with_ntm" : "without_ntm";
}

struct ScoreReport {
  Variant variant = Variant::without_ntm;
  double target = 0.0;
  std::vector<ObjectScore> objects;
  std::vector<std::string> warnings;

  /// Mean NT; empty when the scene has no objects.
  std::optional<double> non_target() const {
    if (objects.empty()) return std::nullopt;
    double s = 0.0;
    for (const auto& o : objects) s += o.score;
    return s / static_cast<double>(objects.size());
  }
};

struct VariantComparison {
  ScoreReport without_ntm;
  ScoreReport with_ntm;
};

/// Scores the eroded target mask alone, and the eroded target mask minus the
/// final non-target mask. T always comes from the eroded target mask.
inline VariantComparison compare_variants(const BinaryMask& eroded_target,
                                          const BinaryMask& non_target, const GroundTruth& gt,
                                          std::size_t tolerance_px = 0) {
  VariantComparison c;
  const auto t = score_target(eroded_target, gt);
  c.without_ntm.variant = Variant::without_ntm;
  c.without_ntm.target = t.value;
  c.without_ntm.warnings = t.warnings;
  c.without_ntm.objects = score_non_target(eroded_target, gt, tolerance_px);

  c.with_ntm.variant = Variant::with_ntm;
  c.with_ntm.target = t.value;
  c.with_ntm.warnings = t.warnings;
  c.with_ntm.objects = score_non_target(subtract(eroded_target, non_target), gt, tolerance_px);
  return c;
}

inline nlohmann::json to_json(const ScoreReport& r) {
  nlohmann::json objs = nlohmann::json::array();
  for (const auto& o : r.objects) {
    objs.push_back({{"name", o.name}, {"score", o.score}, {"overlap_px", o.overlap_px}});
  }
  nlohmann::json j = {{"variant", to_string(r.variant)},
                      {"T", r.target},
                      {"NT_per_object", objs},
                      {"warnings", r.warnings}};
  if (auto nt = r.non_target()) j["NT"] = *nt; else j["NT"] = nullptr;
  return j;
}

inline nlohmann::json to_json(const VariantComparison& c) {
  return {{"without_ntm", to_json(c.without_ntm)}, {"with_ntm", to_json(c.with_ntm)}};
}

/// Aggregate row of the T / NT-without / NT-with table. NT percentages pool
/// all object appearances in the group.
struct ScoreTableRow {
  std::string group;
  std::size_t scenes = 0;
  double target_sum = 0.0;
  std::size_t objects = 0;
  std::size_t excluded_without = 0;
  std::size_t excluded_with = 0;

  void add(const VariantComparison& c) {
    ++scenes;
    target_sum += c.without_ntm.target;
    objects += c.without_ntm.objects.size();
    for (const auto& o : c.without_ntm.objects) excluded_without += o.score;
    for (const auto& o : c.with_ntm.objects) excluded_with += o.score;
  }
  double t_pct() const { return scenes ? 100.0 * target_sum / scenes : 0.0; }
  std::optional<double> nt_without_pct() const {
    if (!objects) return std::nullopt;
    return 100.0 * static_cast<double>(excluded_without) / static_cast<double>(objects);
  }
  std::optional<double> nt_with_pct() const {
    if (!objects) return std::nullopt;
    return 100.0 * static_cast<double>(excluded_with) / static_cast<double>(objects);
  }
};

inline std::string format_score_table(const std::vector<ScoreTableRow>& rows) {
  std::ostringstream os;
  auto pct = [](std::optional<double> v) {
    if (!v) return std::string("-");
    std::ostringstream s;
    s.setf(std::ios::fixed);
    s.precision(1);
    s << *v;
    return s.str();
  };
  os << "group                 scenes   T(%)  NT(%) woNTM  NT(%) wNTM\n";
  for (const auto& r : rows) {
    char line[160];
    std::snprintf(line, sizeof line, "%-20s %7zu %6s %12s %11s\n", r.group.c_str(), r.scenes,
                  pct(r.t_pct()).c_str(), pct(r.nt_without_pct()).c_str(),
                  pct(r.nt_with_pct()).c_str());
    os << line;
  }
  return os.str();
}

}  // namespace uvsel

#endif  // UVSEL_EVALUATION_HPP
