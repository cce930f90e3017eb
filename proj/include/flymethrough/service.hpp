#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "flymethrough/segmentation.hpp"

namespace flymethrough {

struct ServiceOptions {
  std::vector<std::filesystem::path> projects;
  /// Empty means the built-in fallback segmenter.
  std::string provider_url;
  int workers = 2;
  std::string cors_origin = "*";
};

/// REST service over one or more projects. Every mutation is persisted to
/// the project manifest before the response goes out; jobs run on a fixed
/// worker pool.
class Service {
public:
  explicit Service(ServiceOptions options);
  /// Test hook: use this provider instead of building one from options.
  Service(ServiceOptions options, std::shared_ptr<SegmentationProvider> provider);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Binds (port 0 picks a free one) and serves on a background thread.
  int start(const std::string& host = "127.0.0.1", int port = 0);
  /// Serves on the calling thread until stop() is called.
  void listen(const std::string& host, int port);
  void stop();

private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace flymethrough
