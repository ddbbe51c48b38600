// Client side of the detect wire protocol, checked against golden files and an
// in-process HTTP server.

#include <gtest/gtest.h>

#include <atomic>
#include <chrono>
#include <fstream>
#include <sstream>
#include <thread>

#include "uvsel/remote_backend.hpp"

#include <httplib.h>

using namespace uvsel;
using nlohmann::json;

namespace {

const std::filesystem::path kData = UVSEL_TEST_DATA_DIR;

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string base64_decode(const std::string& in) {
  static const std::string alphabet =
      "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  int val = 0, bits = -8;
  for (char c : in) {
    if (c == '=') break;
    const auto pos = alphabet.find(c);
    if (pos == std::string::npos) continue;
    val = (val << 6) + static_cast<int>(pos);
    bits += 6;
    if (bits >= 0) {
      out.push_back(static_cast<char>((val >> bits) & 0xff));
      bits -= 8;
    }
  }
  return out;
}

RgbImage image_from_base64(const std::string& b64) {
  const auto bytes = base64_decode(b64);
  return decode_rgb(std::span<const std::uint8_t>(
      reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size()));
}

std::vector<Detection> expected_detections(int w, int h) {
  std::vector<Detection> out;
  for (const auto& e : json::parse(slurp(kData / "golden_expected.json"))) {
    Detection d;
    d.label = e.at("label");
    d.score = e.at("score");
    const auto b = e.at("bbox_xyxy");
    d.bbox = {b[0], b[1], b[2], b[3]};
    d.mask = BinaryMask(w, h);
    for (const auto& p : e.at("set_pixels")) d.mask.set(p[0], p[1]);
    out.push_back(std::move(d));
  }
  return out;
}

/// httplib server on an ephemeral port, stopped on destruction.
class TestServer {
 public:
  TestServer() {
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~TestServer() {
    server_.stop();
    thread_.join();
  }
  httplib::Server& server() { return server_; }
  std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port_); }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

class RemoteBackendTest : public ::testing::Test {
 protected:
  void SetUp() override {
    image = read_rgb(kData / "golden_image.png");
    golden_request = json::parse(slurp(kData / "golden_request.json"));
    golden_response = slurp(kData / "golden_response.json");
  }
  DetectRequest request() const {
    return {image, golden_request.at("prompt"), golden_request.at("confidence_threshold")};
  }

  RgbImage image;
  json golden_request;
  std::string golden_response;
};

}  // namespace

TEST_F(RemoteBackendTest, RequestMatchesGoldenSchema) {
  const auto j = make_detect_request_json(request());
  ASSERT_EQ(j.size(), golden_request.size());
  for (const auto& [key, value] : golden_request.items()) {
    ASSERT_TRUE(j.contains(key)) << key;
    if (key != "image_png_base64") EXPECT_EQ(j.at(key), value) << key;
  }
  // PNG bytes may differ between encoders; the pixels may not.
  EXPECT_EQ(image_from_base64(j.at("image_png_base64")),
            image_from_base64(golden_request.at("image_png_base64")));
}

TEST_F(RemoteBackendTest, GoldenResponseDecodes) {
  EXPECT_EQ(parse_detect_response(golden_response, 8, 6), expected_detections(8, 6));
}

TEST_F(RemoteBackendTest, WireRoundTrip) {
  const auto dets = expected_detections(8, 6);
  json body = {{"detections", json::array()}};
  for (const auto& d : dets) body["detections"].push_back(detection_to_wire(d));
  EXPECT_EQ(body, json::parse(golden_response));
  EXPECT_EQ(parse_detect_response(body.dump(), 8, 6), dets);
}

TEST_F(RemoteBackendTest, DetectOverHttp) {
  TestServer srv;
  json seen;
  srv.server().Post("/v1/detect", [&](const httplib::Request& req, httplib::Response& res) {
    seen = json::parse(req.body);
    res.set_content(golden_response, "application/json");
  });
  RemoteBackend backend(srv.endpoint());
  EXPECT_EQ(backend.detect(request()), expected_detections(8, 6));
  EXPECT_EQ(seen.at("prompt"), "white table");
  EXPECT_EQ(seen.at("return_masks"), true);
  EXPECT_EQ(image_from_base64(seen.at("image_png_base64")), image);
}

TEST_F(RemoteBackendTest, EmptyResponseIsNotAnError) {
  TestServer srv;
  srv.server().Post("/v1/detect", [](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"detections": []})", "application/json");
  });
  RemoteBackend backend(srv.endpoint());
  EXPECT_TRUE(backend.detect(request()).empty());
}

TEST_F(RemoteBackendTest, BadRequestCarriesServerMessage) {
  TestServer srv;
  const auto body = slurp(kData / "golden_error_400.json");
  srv.server().Post("/v1/detect", [&](const httplib::Request&, httplib::Response& res) {
    res.status = 400;
    res.set_content(body, "application/json");
  });
  RemoteBackend backend(srv.endpoint());
  try {
    backend.detect(request());
    FAIL() << "expected BackendStatusError";
  } catch (const BackendStatusError& e) {
    EXPECT_EQ(e.status(), 400);
    EXPECT_NE(std::string(e.what()).find("image is not a PNG"), std::string::npos);
  }
}

TEST_F(RemoteBackendTest, HealthReflectsReadiness) {
  TestServer srv;
  std::atomic<bool> ready{false};
  const auto ok = slurp(kData / "golden_health_ok.json");
  srv.server().Get("/v1/health", [&](const httplib::Request&, httplib::Response& res) {
    if (!ready) {
      res.status = 503;
      res.set_content(R"({"error": "model not ready"})", "application/json");
      return;
    }
    res.set_content(ok, "application/json");
  });
  RemoteBackend backend(srv.endpoint());
  EXPECT_FALSE(backend.healthy());
  ready = true;
  EXPECT_TRUE(backend.healthy());
}

TEST_F(RemoteBackendTest, NotReadyDetectIsStatusError) {
  TestServer srv;
  srv.server().Post("/v1/detect", [](const httplib::Request&, httplib::Response& res) {
    res.status = 503;
    res.set_content(R"({"error": "model not ready"})", "application/json");
  });
  RemoteBackend backend(srv.endpoint());
  try {
    backend.detect(request());
    FAIL() << "expected BackendStatusError";
  } catch (const BackendStatusError& e) {
    EXPECT_EQ(e.status(), 503);
  }
}

TEST_F(RemoteBackendTest, SlowServerTimesOut) {
  TestServer srv;
  srv.server().Post("/v1/detect", [&](const httplib::Request&, httplib::Response& res) {
    std::this_thread::sleep_for(std::chrono::milliseconds(800));
    res.set_content(golden_response, "application/json");
  });
  RemoteBackend backend(srv.endpoint(), std::chrono::milliseconds(200));
  EXPECT_THROW(backend.detect(request()), BackendTimeout);
}

TEST_F(RemoteBackendTest, UnreachableServerIsTransportError) {
  std::string endpoint;
  {
    TestServer srv;
    endpoint = srv.endpoint();
  }
  RemoteBackend backend(endpoint, std::chrono::milliseconds(500));
  try {
    backend.detect(request());
    FAIL() << "expected BackendError";
  } catch (const BackendStatusError&) {
    FAIL() << "no HTTP status expected";
  } catch (const BackendError&) {
  }
}

TEST_F(RemoteBackendTest, MalformedMasksAreRejected) {
  auto body = json::parse(golden_response);
  auto bad_sum = body;
  bad_sum["detections"][0]["mask"]["runs"].back() = 9;
  EXPECT_THROW(parse_detect_response(bad_sum.dump(), 8, 6), MalformedMask);

  auto bad_size = body;
  bad_size["detections"][0]["mask"]["size"] = {8, 6};
  EXPECT_THROW(parse_detect_response(bad_size.dump(), 8, 6), MalformedMask);

  auto bad_encoding = body;
  bad_encoding["detections"][0]["mask"]["encoding"] = "png";
  EXPECT_THROW(parse_detect_response(bad_encoding.dump(), 8, 6), MalformedMask);

  EXPECT_THROW(parse_detect_response("not json", 8, 6), BackendError);
  EXPECT_THROW(parse_detect_response(R"({"detections": [{"label": "x"}]})", 8, 6), BackendError);
}

TEST_F(RemoteBackendTest, DetectionBelowThresholdIsRejected) {
  TestServer srv;
  srv.server().Post("/v1/detect", [&](const httplib::Request&, httplib::Response& res) {
    res.set_content(golden_response, "application/json");
  });
  RemoteBackend backend(srv.endpoint());
  auto req = request();
  req.confidence_threshold = 0.6;
  EXPECT_THROW(backend.detect(req), BackendError);
}
