// HTTP client for a detector/segmenter service.
//
//   POST /v1/detect  {"image_png_base64", "prompt", "confidence_threshold", "return_masks": true}
//   200 -> {"detections": [{"label", "score", "bbox_xyxy": [x0,y0,x1,y1],
//           "mask": {"encoding": "rle_rowmajor", "size": [h, w], "runs": [...]}}]}
//   400 / 503 -> {"error": "..."}
//   GET /v1/health -> {"status": "ok"}

#ifndef UVSEL_REMOTE_BACKEND_HPP
#define UVSEL_REMOTE_BACKEND_HPP

#include <chrono>
#include <string>
#include <vector>

// Eigen has to come before httplib: <resolv.h> defines a `_res` macro that
// breaks Eigen's product kernels.
#include <Eigen/Core>
#include <httplib.h>
#include <json.hpp>

#include "uvsel/detection.hpp"
#include "uvsel/image.hpp"

namespace uvsel {

inline nlohmann::json make_detect_request_json(const DetectRequest& req) {
  const auto png = encode_png(req.image);
  return {{"image_png_base64",
           httplib::detail::base64_encode(std::string(png.begin(), png.end()))},
          {"prompt", req.prompt},
          {"confidence_threshold", req.confidence_threshold},
          {"return_masks", true}};
}

/// Decodes a 200 response body. Masks must match the request image size.
inline std::vector<Detection> parse_detect_response(const std::string& body, int width,
                                                    int height) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(body);
  } catch (const nlohmann::json::exception& e) {
    throw BackendError(std::string("detect response is not JSON: ") + e.what());
  }
  std::vector<Detection> out;
  try {
    for (const auto& e : doc.at("detections")) {
      Detection d;
      d.label = e.at("label").get<std::string>();
      d.score = e.at("score").get<double>();
      const auto& b = e.at("bbox_xyxy");
      d.bbox = {b.at(0).get<int>(), b.at(1).get<int>(), b.at(2).get<int>(),
                b.at(3).get<int>()};
      const auto& m = e.at("mask");
      if (m.at("encoding").get<std::string>() != "rle_rowmajor") {
        throw MalformedMask("unsupported mask encoding '" +
                            m.at("encoding").get<std::string>() + "'");
      }
      const int mh = m.at("size").at(0).get<int>();
      const int mw = m.at("size").at(1).get<int>();
      if (mw != width || mh != height) {
        throw MalformedMask("mask size " + std::to_string(mw) + "x" + std::to_string(mh) +
                            " differs from image " + std::to_string(width) + "x" +
                            std::to_string(height));
      }
      d.mask = rle_decode(m.at("runs").get<std::vector<std::int64_t>>(), mw, mh);
      validate_detection(d, width, height);
      out.push_back(std::move(d));
    }
  } catch (const nlohmann::json::exception& e) {
    throw BackendError(std::string("detect response has wrong shape: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw BackendError(std::string("detect response rejected: ") + e.what());
  }
  return out;
}

inline nlohmann::json detection_to_wire(const Detection& d) {
  return {{"label", d.label},
          {"score", d.score},
          {"bbox_xyxy", {d.bbox.x0, d.bbox.y0, d.bbox.x1, d.bbox.y1}},
          {"mask",
           {{"encoding", "rle_rowmajor"},
            {"size", {d.mask.height(), d.mask.width()}},
            {"runs", rle_encode(d.mask)}}}};
}

class RemoteBackend : public DetectorBackend {
 public:
  explicit RemoteBackend(std::string endpoint,
                         std::chrono::milliseconds timeout = std::chrono::seconds(30))
      : endpoint_(std::move(endpoint)), timeout_(timeout) {}

  std::vector<Detection> detect(const DetectRequest& req) override {
    validate_request(req);
    auto cli = client();
    const auto body = make_detect_request_json(req).dump();
    auto res = cli.Post("/v1/detect", body, "application/json");
    check(res, "POST /v1/detect");
    auto dets = parse_detect_response(res->body, req.image.width(), req.image.height());
    for (const auto& d : dets) {
      if (d.score < req.confidence_threshold) {
        throw BackendError("service returned detection below the requested threshold");
      }
    }
    return dets;
  }

  /// True when the service reports ready; false on 503.
  bool healthy() {
    auto cli = client();
    auto res = cli.Get("/v1/health");
    if (res && res->status == 503) return false;
    check(res, "GET /v1/health");
    return true;
  }

 private:
  httplib::Client client() const {
    httplib::Client cli(endpoint_);
    const auto sec = std::chrono::duration_cast<std::chrono::seconds>(timeout_);
    const auto usec = std::chrono::duration_cast<std::chrono::microseconds>(timeout_ - sec);
    cli.set_connection_timeout(sec.count(), usec.count());
    cli.set_read_timeout(sec.count(), usec.count());
    cli.set_write_timeout(sec.count(), usec.count());
    return cli;
  }

  static void check(const httplib::Result& res, const char* what) {
    if (!res) {
      const auto err = res.error();
      const std::string msg = std::string(what) + ": " + httplib::to_string(err);
      if (err == httplib::Error::Read || err == httplib::Error::Write ||
          err == httplib::Error::ConnectionTimeout) {
        throw BackendTimeout(msg);
      }
      throw BackendError(msg);
    }
    if (res->status < 200 || res->status >= 300) {
      std::string detail;
      try {
        detail = nlohmann::json::parse(res->body).value("error", "");
      } catch (const nlohmann::json::exception&) {
      }
      throw BackendStatusError(res->status, std::string(what) + ": HTTP " +
                                                std::to_string(res->status) +
                                                (detail.empty() ? "" : " (" + detail + ")"));
    }
  }

  std::string endpoint_;
  std::chrono::milliseconds timeout_;
};

}  // namespace uvsel

#endif  // UVSEL_REMOTE_BACKEND_HPP
