#include <doctest.h>

#include <map>
#include <random>
#include <thread>

#include "flymethrough/mask_rle.hpp"
#include "flymethrough/remote_provider.hpp"
#include "support/oracles.hpp"

// After Eigen: httplib pulls in resolv.h, whose _res macro breaks Eigen headers.
#include <httplib.h>
#include <json.hpp>

using namespace flymethrough;

namespace {

std::vector<std::uint8_t> bytes(const std::string& s) { return {s.begin(), s.end()}; }

RgbImage square_image(int w, int h, int x0, int y0, int side) {
  RgbImage img(w, h);
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      const bool in = u >= x0 && u < x0 + side && v >= y0 && v < y0 + side;
      img.set(u, v, in ? std::array<std::uint8_t, 3>{200, 20, 20} : std::array<std::uint8_t, 3>{10, 10, 90});
    }
  }
  return img;
}

FrameInput frame_of(const std::string& id, RgbImage img) {
  return {id, {}, std::make_shared<const RgbImage>(std::move(img))};
}

// Serves a fixed reply on every route.
struct CannedServer {
  httplib::Server server;
  std::thread thread;
  int port = 0;

  CannedServer(int status, std::string body) {
    auto handler = [status, body](const httplib::Request&, httplib::Response& res) {
      res.status = status;
      res.set_content(body, "application/json");
    };
    server.Post("/segment", handler);
    server.Post("/propagate", handler);
    port = server.bind_to_any_port("127.0.0.1");
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }
  ~CannedServer() {
    server.stop();
    thread.join();
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port); }
};

RemoteConfig config_for(const std::string& url) {
  RemoteConfig c;
  c.endpoint = url;
  c.timeout = std::chrono::seconds(5);
  return c;
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::IoError;
}

}  // namespace

TEST_SUITE("remote") {

TEST_CASE("base64 test vectors") {
  const std::vector<std::pair<std::string, std::string>> vectors = {
      {"", ""},         {"f", "Zg=="},         {"fo", "Zm8="},        {"foo", "Zm9v"},
      {"foob", "Zm9vYg=="}, {"fooba", "Zm9vYmE="}, {"foobar", "Zm9vYmFy"}};
  for (const auto& [plain, encoded] : vectors) {
    CHECK(base64_encode(bytes(plain)) == encoded);
    CHECK(base64_decode(encoded) == bytes(plain));
  }
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> byte(0, 255), len(0, 300);
  for (int i = 0; i < 50; ++i) {
    std::vector<std::uint8_t> data(static_cast<std::size_t>(len(rng)));
    for (auto& b : data) b = static_cast<std::uint8_t>(byte(rng));
    CHECK(base64_decode(base64_encode(data)) == data);
  }
  CHECK_THROWS_AS(base64_decode("abc"), Error);
  CHECK_THROWS_AS(base64_decode("a*c="), Error);
}

TEST_CASE("provider server answers like the fallback segmenter") {
  std::map<std::string, RgbImage> images = {{"f0", square_image(64, 48, 10, 10, 20)},
                                            {"f1", square_image(64, 48, 14, 10, 20)}};
  ProviderServer server([&](const std::string& id) { return frame_of(id, images.at(id)); });
  const int port = server.start();
  RemoteProvider remote(config_for("http://127.0.0.1:" + std::to_string(port)));
  FallbackSegmenter local;

  const FrameInput f0 = frame_of("f0", images["f0"]);
  const FrameInput f1 = frame_of("f1", images["f1"]);
  const std::vector<PromptPoint> prompts = {{{15.5, 15.5}, Polarity::Positive}, {{60, 40}, Polarity::Negative}};
  const SegMask a = remote.segment(f0, prompts);
  CHECK(a == local.segment(f0, prompts));
  CHECK(a.count() == 400);
  CHECK(remote.track(f0, a, f1) == local.track(f0, a, f1));
  CHECK(remote.attempts() == 2);

  // Bad prompts are rejected before any request is made.
  CHECK(code_of([&] { remote.segment(f0, {{{5, 5}, Polarity::Negative}}); }) == ErrorCode::NoPositivePrompt);
  CHECK(remote.attempts() == 2);

  server.set_busy(true);
  CHECK(code_of([&] { remote.segment(f0, prompts); }) == ErrorCode::ProviderUnavailable);
  CHECK(code_of([&] { remote.track(f0, a, f1); }) == ErrorCode::ProviderUnavailable);
  server.set_busy(false);
  CHECK(remote.segment(f0, prompts) == a);
}

TEST_CASE("unreachable endpoint is retried once then reported") {
  RemoteProvider remote(config_for("http://127.0.0.1:" + std::to_string(oracle::closed_port())));
  const FrameInput f = frame_of("f", square_image(16, 16, 2, 2, 6));
  CHECK(code_of([&] { remote.segment(f, {{{3, 3}, Polarity::Positive}}); }) == ErrorCode::ProviderUnavailable);
  CHECK(remote.attempts() == 2);
}

TEST_CASE("bad provider replies") {
  const FrameInput f = frame_of("f", square_image(16, 12, 2, 2, 6));
  const std::vector<PromptPoint> prompts = {{{3, 3}, Polarity::Positive}};

  SUBCASE("422 maps to InvalidPrompt") {
    CannedServer s(422, R"({"error":"no"})");
    RemoteProvider remote(config_for(s.url()));
    CHECK(code_of([&] { remote.segment(f, prompts); }) == ErrorCode::InvalidPrompt);
  }
  SUBCASE("mask size differs from the frame") {
    SegMask wrong(8, 8);
    wrong.set(3, 3);
    CannedServer s(200, nlohmann::json{{"mask_rle", rle_to_json(wrong)}, {"width", 8}, {"height", 8}}.dump());
    RemoteProvider remote(config_for(s.url()));
    CHECK(code_of([&] { remote.segment(f, prompts); }) == ErrorCode::ProviderUnavailable);
  }
  SUBCASE("mask ignores a positive prompt") {
    const SegMask empty(16, 12);
    CannedServer s(200, nlohmann::json{{"mask_rle", rle_to_json(empty)}, {"width", 16}, {"height", 12}}.dump());
    RemoteProvider remote(config_for(s.url()));
    CHECK(code_of([&] { remote.segment(f, prompts); }) == ErrorCode::ProviderUnavailable);
  }
  SUBCASE("malformed body") {
    CannedServer s(200, "not json");
    RemoteProvider remote(config_for(s.url()));
    CHECK(code_of([&] { remote.segment(f, prompts); }) == ErrorCode::ProviderUnavailable);
    CHECK(code_of([&] { remote.track(f, SegMask(16, 12), f); }) == ErrorCode::ProviderUnavailable);
  }
  SUBCASE("server error") {
    CannedServer s(500, "{}");
    RemoteProvider remote(config_for(s.url()));
    CHECK(code_of([&] { remote.segment(f, prompts); }) == ErrorCode::ProviderUnavailable);
    CHECK(remote.attempts() == 1);
  }
}

}
