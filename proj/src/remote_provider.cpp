#include "flymethrough/remote_provider.hpp"

#include <openssl/evp.h>

#include <atomic>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "flymethrough/mask_rle.hpp"

namespace flymethrough {

using nlohmann::json;

std::string base64_encode(const std::vector<std::uint8_t>& bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(),
                                static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::vector<std::uint8_t> base64_decode(const std::string& text) {
  if (text.size() % 4 != 0) throw Error(ErrorCode::ParseError, "base64 length is not a multiple of 4");
  std::vector<std::uint8_t> out(3 * text.size() / 4);
  const int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(text.data()),
                                static_cast<int>(text.size()));
  if (n < 0) throw Error(ErrorCode::ParseError, "invalid base64");
  // EVP_DecodeBlock keeps the zero bytes produced by '=' padding.
  std::size_t size = static_cast<std::size_t>(n);
  if (!text.empty() && text.back() == '=') --size;
  if (text.size() >= 2 && text[text.size() - 2] == '=') --size;
  out.resize(size);
  return out;
}

namespace {

json prompts_to_json(const std::vector<PromptPoint>& prompts) {
  json points = json::array();
  for (const PromptPoint& p : prompts) {
    points.push_back({{"u", p.pixel.u}, {"v", p.pixel.v}, {"polarity", to_string(p.polarity)}});
  }
  return points;
}

std::vector<PromptPoint> prompts_from_json(const json& points) {
  if (!points.is_array()) throw Error(ErrorCode::InvalidPrompt, "points must be an array");
  std::vector<PromptPoint> prompts;
  for (const json& p : points) {
    if (!p.is_object() || !p.contains("u") || !p.contains("v") || !p["u"].is_number() ||
        !p["v"].is_number()) {
      throw Error(ErrorCode::InvalidPrompt, "point needs numeric u and v");
    }
    prompts.push_back({{p["u"].get<double>(), p["v"].get<double>()},
                       parse_polarity(p.value("polarity", std::string("positive")))});
  }
  return prompts;
}

}  // namespace

struct RemoteProvider::Impl {
  RemoteConfig config;
  httplib::Client client;
  std::atomic<int> attempts{0};

  explicit Impl(RemoteConfig c) : config(std::move(c)), client(config.endpoint) {
    client.set_connection_timeout(config.timeout);
    client.set_read_timeout(config.timeout);
    client.set_write_timeout(config.timeout);
  }

  json post(const std::string& path, const json& body) {
    const std::string payload = body.dump();
    httplib::Result res;
    for (int attempt = 0; attempt <= config.retries; ++attempt) {
      ++attempts;
      res = client.Post(path, payload, "application/json");
      if (res) break;
    }
    if (!res) {
      throw Error(ErrorCode::ProviderUnavailable,
                  config.endpoint + path + ": " + httplib::to_string(res.error()));
    }
    if (res->status == 422) throw Error(ErrorCode::InvalidPrompt, "provider rejected prompt: " + res->body);
    if (res->status != 200) {
      throw Error(ErrorCode::ProviderUnavailable,
                  config.endpoint + path + " answered HTTP " + std::to_string(res->status));
    }
    try {
      return json::parse(res->body);
    } catch (const json::exception& e) {
      throw Error(ErrorCode::ProviderUnavailable, std::string("malformed provider response: ") + e.what());
    }
  }
};

RemoteProvider::RemoteProvider(RemoteConfig config) : impl_(std::make_unique<Impl>(std::move(config))) {}
RemoteProvider::~RemoteProvider() = default;

int RemoteProvider::attempts() const { return impl_->attempts.load(); }

SegMask RemoteProvider::segment(const FrameInput& frame, const std::vector<PromptPoint>& prompts) {
  const RgbImage image = frame.load();
  validate_prompts(prompts, image.width, image.height);
  const json body = {{"frame_id", frame.frame_id},
                     {"image_b64", base64_encode(encode_png_rgb(image))},
                     {"points", prompts_to_json(prompts)}};
  const json res = impl_->post("/segment", body);
  try {
    if (res.at("width").get<int>() != image.width || res.at("height").get<int>() != image.height) {
      throw Error(ErrorCode::ProviderUnavailable, "provider mask is " +
                                                      res.at("width").dump() + "x" + res.at("height").dump() +
                                                      ", frame is " + std::to_string(image.width) + "x" +
                                                      std::to_string(image.height));
    }
    SegMask mask = rle_from_json(res.at("mask_rle"), image.width, image.height, frame.frame_id);
    if (!respects_prompts(mask, prompts)) {
      throw Error(ErrorCode::ProviderUnavailable, "provider mask violates prompt polarity");
    }
    return mask;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ProviderUnavailable, std::string("malformed provider response: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ProviderUnavailable) throw;
    throw Error(ErrorCode::ProviderUnavailable, std::string("bad provider mask: ") + e.what());
  }
}

SegMask RemoteProvider::track(const FrameInput& prev, const SegMask& prev_mask, const FrameInput& next) {
  const json body = {{"session_id", prev.frame_id + ">" + next.frame_id},
                     {"anchor_frame_id", prev.frame_id},
                     {"mask_rle", rle_to_json(prev_mask)},
                     {"frame_refs", json::array({next.frame_id})}};
  const json res = impl_->post("/propagate", body);
  try {
    const json& masks = res.at("masks");
    if (masks.empty()) return SegMask(prev_mask.width(), prev_mask.height(), next.frame_id);
    // The provider sees only one frame at a time here, so it may report the
    // anchor first; take the entry for the requested frame.
    for (const json& m : masks) {
      if (m.at("frame_id").get<std::string>() != next.frame_id) continue;
      return rle_from_json(m.at("mask_rle"), prev_mask.width(), prev_mask.height(), next.frame_id);
    }
    return SegMask(prev_mask.width(), prev_mask.height(), next.frame_id);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ProviderUnavailable, std::string("malformed provider response: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ProviderUnavailable) throw;
    throw Error(ErrorCode::ProviderUnavailable, std::string("bad provider mask: ") + e.what());
  }
}

struct ProviderServer::Impl {
  Resolver resolve;
  FallbackSegmenter segmenter;
  httplib::Server server;
  std::thread thread;
  std::atomic<bool> busy{false};

  Impl(Resolver r, FallbackConfig config) : resolve(std::move(r)), segmenter(config) {}

  static void reply(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  void handle_segment(const httplib::Request& req, httplib::Response& res) {
    try {
      const json body = json::parse(req.body);
      FrameInput frame;
      frame.frame_id = body.value("frame_id", std::string());
      if (body.contains("image_b64")) {
        frame.image = std::make_shared<RgbImage>(decode_png_rgb(base64_decode(body["image_b64"].get<std::string>())));
      } else {
        frame = resolve(body.value("image_ref", frame.frame_id));
      }
      const SegMask mask = segmenter.segment(frame, prompts_from_json(body.at("points")));
      reply(res, 200, {{"mask_rle", rle_to_json(mask)}, {"width", mask.width()}, {"height", mask.height()}});
    } catch (const Error& e) {
      const bool prompt = e.code() == ErrorCode::InvalidPrompt || e.code() == ErrorCode::NoPositivePrompt;
      reply(res, prompt ? 422 : 400, {{"error", e.what()}});
    } catch (const std::exception& e) {
      reply(res, 400, {{"error", e.what()}});
    }
  }

  void handle_propagate(const httplib::Request& req, httplib::Response& res) {
    try {
      const json body = json::parse(req.body);
      const std::string anchor_id = body.at("anchor_frame_id").get<std::string>();
      FrameInput anchor = resolve(anchor_id);
      const RgbImage anchor_image = anchor.load();
      anchor.image = std::make_shared<RgbImage>(anchor_image);
      AnnotationSession session;
      session.id = body.value("session_id", std::string());
      session.frame_id = anchor_id;
      session.current_mask = rle_from_json(body.at("mask_rle"), anchor_image.width, anchor_image.height, anchor_id);
      session.state = SessionState::Confirmed;
      std::vector<FrameInput> frames{anchor};
      for (const json& ref : body.at("frame_refs")) frames.push_back(resolve(ref.get<std::string>()));
      const PropagationResult result = propagate(session, frames, segmenter);
      json masks = json::array();
      for (std::size_t i = 1; i < result.masks.size(); ++i) {
        masks.push_back({{"frame_id", result.masks[i].first}, {"mask_rle", rle_to_json(result.masks[i].second)}});
      }
      reply(res, 200, {{"masks", masks}, {"termination_reason", to_string(result.termination_reason)}});
    } catch (const std::exception& e) {
      reply(res, 400, {{"error", e.what()}});
    }
  }
};

ProviderServer::ProviderServer(Resolver resolve, FallbackConfig config)
    : impl_(std::make_unique<Impl>(std::move(resolve), config)) {
  impl_->server.set_pre_routing_handler([this](const httplib::Request&, httplib::Response& res) {
    if (!impl_->busy) return httplib::Server::HandlerResponse::Unhandled;
    Impl::reply(res, 503, {{"error", "provider busy"}});
    return httplib::Server::HandlerResponse::Handled;
  });
  impl_->server.Post("/segment", [this](const httplib::Request& req, httplib::Response& res) {
    impl_->handle_segment(req, res);
  });
  impl_->server.Post("/propagate", [this](const httplib::Request& req, httplib::Response& res) {
    impl_->handle_propagate(req, res);
  });
}

ProviderServer::~ProviderServer() { stop(); }

int ProviderServer::start(const std::string& host, int port) {
  const int bound = port == 0 ? impl_->server.bind_to_any_port(host) : (impl_->server.bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw Error(ErrorCode::IoError, "cannot bind provider server to " + host);
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return bound;
}

void ProviderServer::stop() {
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

void ProviderServer::set_busy(bool busy) { impl_->busy = busy; }

}  // namespace flymethrough
