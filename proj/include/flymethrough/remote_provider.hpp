#pragma once

#include <chrono>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "flymethrough/segmentation.hpp"

namespace flymethrough {

std::string base64_encode(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> base64_decode(const std::string& text);

struct RemoteConfig {
  std::string endpoint;  // e.g. http://127.0.0.1:8700
  std::chrono::seconds timeout{120};
  int retries = 1;
};

/// HTTP client for an external segmentation service. Every mask returned is
/// checked against the frame size and, for /segment, the prompt polarity.
class RemoteProvider : public SegmentationProvider {
public:
  explicit RemoteProvider(RemoteConfig config);
  ~RemoteProvider() override;

  SegMask segment(const FrameInput& frame, const std::vector<PromptPoint>& prompts) override;
  /// One /propagate call per frame so earlier frames survive a later failure.
  SegMask track(const FrameInput& prev, const SegMask& prev_mask, const FrameInput& next) override;

  /// Number of HTTP attempts made so far, retries included.
  int attempts() const;

private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Minimal provider service speaking the same contract, backed by the
/// fallback segmenter. Frames referenced by id are resolved with resolve.
class ProviderServer {
public:
  using Resolver = std::function<FrameInput(const std::string& frame_id)>;

  ProviderServer(Resolver resolve, FallbackConfig config = {});
  ~ProviderServer();
  ProviderServer(const ProviderServer&) = delete;
  ProviderServer& operator=(const ProviderServer&) = delete;

  /// Binds to host on port (0 picks a free port) and serves on a background thread.
  int start(const std::string& host = "127.0.0.1", int port = 0);
  void stop();
  /// While set, every request answers 503.
  void set_busy(bool busy);

private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace flymethrough
