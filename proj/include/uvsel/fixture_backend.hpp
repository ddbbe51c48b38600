// File-backed deterministic detector: stored detections keyed by prompt.
//
// Layout inside a bundle directory:
//   detections.json  {"<prompt>": [{"label", "score", "bbox_xyxy", "mask_file"}, ...]}
//   masks/*.png      8-bit single-channel masks referenced by mask_file

#ifndef UVSEL_FIXTURE_BACKEND_HPP
#define UVSEL_FIXTURE_BACKEND_HPP

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "uvsel/detection.hpp"
#include "uvsel/image.hpp"

namespace uvsel {

using DetectionTable = std::map<std::string, std::vector<Detection>>;

/// Raised when a fixture has no entry for the requested prompt.
class MissingPromptError : public IoError {
 public:
  explicit MissingPromptError(const std::string& prompt)
      : IoError("fixture has no detections for prompt '" + prompt + "'"), prompt_(prompt) {}
  const std::string& prompt() const { return prompt_; }

 private:
  std::string prompt_;
};

inline std::vector<Detection> filter_by_score(const std::vector<Detection>& dets,
                                              double threshold) {
  std::vector<Detection> out;
  for (const auto& d : dets) {
    if (d.score >= threshold) out.push_back(d);
  }
  return out;
}

inline DetectionTable load_detection_table(const std::filesystem::path& bundle_dir) {
  const auto file = bundle_dir / "detections.json";
  if (!std::filesystem::exists(file)) throw IoError(file.string() + " absent");
  nlohmann::json doc;
  try {
    std::ifstream in(file);
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(file.string() + ": " + e.what());
  }
  if (!doc.is_object()) throw IoError(file.string() + ": expected an object keyed by prompt");
  DetectionTable table;
  for (const auto& [prompt, entries] : doc.items()) {
    auto& list = table[prompt];
    for (const auto& e : entries) {
      Detection d;
      try {
        d.label = e.at("label").get<std::string>();
        d.score = e.at("score").get<double>();
        const auto& b = e.at("bbox_xyxy");
        d.bbox = {b.at(0).get<int>(), b.at(1).get<int>(), b.at(2).get<int>(),
                  b.at(3).get<int>()};
        d.mask = read_mask(bundle_dir / e.at("mask_file").get<std::string>());
      } catch (const nlohmann::json::exception& ex) {
        throw IoError(file.string() + ": prompt '" + prompt + "': " + ex.what());
      }
      list.push_back(std::move(d));
    }
  }
  return table;
}

/// Writes detections.json and masks/<index>.png. Mask numbering follows the
/// table's (sorted) prompt order, then list order.
inline void save_detection_table(const std::filesystem::path& bundle_dir,
                                 const DetectionTable& table) {
  std::filesystem::create_directories(bundle_dir / "masks");
  nlohmann::json doc = nlohmann::json::object();
  int index = 0;
  for (const auto& [prompt, list] : table) {
    auto& arr = doc[prompt];
    arr = nlohmann::json::array();
    for (const auto& d : list) {
      const std::string rel = "masks/det_" + std::to_string(index++) + ".png";
      write_png(bundle_dir / rel, d.mask);
      arr.push_back({{"label", d.label},
                     {"score", d.score},
                     {"bbox_xyxy", {d.bbox.x0, d.bbox.y0, d.bbox.x1, d.bbox.y1}},
                     {"mask_file", rel}});
    }
  }
  write_text_atomic(bundle_dir / "detections.json", doc.dump(2) + "\n");
}

/// Stored detections for req.prompt with score >= req.confidence_threshold.
/// Throws MissingPromptError when the fixture has no entry for the prompt.
inline std::vector<Detection> fixture_detect(const DetectionTable& table,
                                             const DetectRequest& req) {
  validate_request(req);
  auto it = table.find(req.prompt);
  if (it == table.end()) throw MissingPromptError(req.prompt);
  for (const auto& d : it->second) {
    validate_detection(d, req.image.width(), req.image.height());
  }
  return filter_by_score(it->second, req.confidence_threshold);
}

inline std::vector<Detection> fixture_detect(const std::filesystem::path& bundle_dir,
                                             const DetectRequest& req) {
  return fixture_detect(load_detection_table(bundle_dir), req);
}

/// DetectorBackend over a detection table. An unknown prompt is answered with
/// an empty list, the same as a detector that finds nothing.
class FixtureBackend : public DetectorBackend {
 public:
  explicit FixtureBackend(DetectionTable table) : table_(std::move(table)) {}
  static FixtureBackend from_bundle(const std::filesystem::path& dir) {
    return FixtureBackend(load_detection_table(dir));
  }

  std::vector<Detection> detect(const DetectRequest& req) override {
    try {
      return fixture_detect(table_, req);
    } catch (const MissingPromptError&) {
      return {};
    }
  }

  const DetectionTable& table() const { return table_; }

 private:
  DetectionTable table_;
};

}  // namespace uvsel

#endif  // UVSEL_FIXTURE_BACKEND_HPP
