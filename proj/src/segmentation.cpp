#include "flymethrough/segmentation.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <deque>

namespace flymethrough {

namespace {

using Mean = std::array<double, 3>;

bool close_to(const RgbImage& img, std::size_t idx, const Mean& mean, double tau) {
  const std::size_t i = idx * 3;
  for (int c = 0; c < 3; ++c) {
    if (std::abs(static_cast<double>(img.data[i + c]) - mean[c]) > tau) return false;
  }
  return true;
}

// 4-connected region growing against the running mean of the region.
std::vector<std::size_t> grow_region(const RgbImage& img, std::size_t seed, double tau) {
  const int w = img.width;
  const int h = img.height;
  std::vector<std::uint8_t> in(static_cast<std::size_t>(w) * h, 0);
  Mean sum{};
  for (int c = 0; c < 3; ++c) sum[c] = img.data[seed * 3 + c];
  std::vector<std::size_t> region{seed};
  in[seed] = 1;
  std::deque<std::size_t> queue{seed};
  while (!queue.empty()) {
    const std::size_t idx = queue.front();
    queue.pop_front();
    const int u = static_cast<int>(idx % w);
    const int v = static_cast<int>(idx / w);
    const int du[4] = {1, -1, 0, 0};
    const int dv[4] = {0, 0, 1, -1};
    for (int k = 0; k < 4; ++k) {
      const int nu = u + du[k];
      const int nv = v + dv[k];
      if (nu < 0 || nv < 0 || nu >= w || nv >= h) continue;
      const std::size_t n = static_cast<std::size_t>(nv) * w + nu;
      if (in[n]) continue;
      const double count = static_cast<double>(region.size());
      const Mean mean{sum[0] / count, sum[1] / count, sum[2] / count};
      if (!close_to(img, n, mean, tau)) continue;
      in[n] = 1;
      region.push_back(n);
      for (int c = 0; c < 3; ++c) sum[c] += img.data[n * 3 + c];
      queue.push_back(n);
    }
  }
  return region;
}

std::size_t prompt_index(const PromptPoint& p, int width) {
  return static_cast<std::size_t>(std::floor(p.pixel.v)) * width +
         static_cast<std::size_t>(std::floor(p.pixel.u));
}

double dist2(std::size_t a, std::size_t b, int width) {
  const double du = static_cast<double>(a % width) - static_cast<double>(b % width);
  const double dv = static_cast<double>(a / width) - static_cast<double>(b / width);
  return du * du + dv * dv;
}

}  // namespace

std::string to_string(Polarity polarity) {
  return polarity == Polarity::Positive ? "positive" : "negative";
}

Polarity parse_polarity(const std::string& text) {
  if (text == "positive") return Polarity::Positive;
  if (text == "negative") return Polarity::Negative;
  throw Error(ErrorCode::InvalidPrompt, "unknown polarity '" + text + "'");
}

std::string to_string(SessionState state) {
  switch (state) {
    case SessionState::Drafting: return "drafting";
    case SessionState::Confirmed: return "confirmed";
    case SessionState::Propagated: return "propagated";
    case SessionState::Failed: return "failed";
  }
  return "drafting";
}

SessionState parse_session_state(const std::string& text) {
  if (text == "drafting") return SessionState::Drafting;
  if (text == "confirmed") return SessionState::Confirmed;
  if (text == "propagated") return SessionState::Propagated;
  if (text == "failed") return SessionState::Failed;
  throw Error(ErrorCode::ParseError, "unknown session state '" + text + "'");
}

std::string to_string(TerminationReason reason) {
  switch (reason) {
    case TerminationReason::ObjectExited: return "objectExited";
    case TerminationReason::SequenceEnd: return "sequenceEnd";
    case TerminationReason::ProviderError: return "providerError";
  }
  return "sequenceEnd";
}

TerminationReason parse_termination_reason(const std::string& text) {
  if (text == "objectExited") return TerminationReason::ObjectExited;
  if (text == "sequenceEnd") return TerminationReason::SequenceEnd;
  if (text == "providerError") return TerminationReason::ProviderError;
  throw Error(ErrorCode::ParseError, "unknown termination reason '" + text + "'");
}

RgbImage FrameInput::load() const {
  if (image) return *image;
  return read_png_rgb(image_path);
}

void validate_prompts(const std::vector<PromptPoint>& prompts, int width, int height) {
  bool any_positive = false;
  for (const PromptPoint& p : prompts) {
    if (!std::isfinite(p.pixel.u) || !std::isfinite(p.pixel.v) || p.pixel.u < 0.0 ||
        p.pixel.v < 0.0 || p.pixel.u >= width || p.pixel.v >= height) {
      throw Error(ErrorCode::InvalidPrompt, "prompt outside the frame");
    }
    any_positive = any_positive || p.polarity == Polarity::Positive;
  }
  if (!any_positive) throw Error(ErrorCode::NoPositivePrompt, "at least one positive prompt is required");
  for (const PromptPoint& a : prompts) {
    for (const PromptPoint& b : prompts) {
      if (a.polarity != b.polarity && prompt_index(a, width) == prompt_index(b, width)) {
        throw Error(ErrorCode::InvalidPrompt, "pixel prompted as both positive and negative");
      }
    }
  }
}

bool respects_prompts(const SegMask& mask, const std::vector<PromptPoint>& prompts) {
  for (const PromptPoint& p : prompts) {
    const int u = static_cast<int>(std::floor(p.pixel.u));
    const int v = static_cast<int>(std::floor(p.pixel.v));
    if (!mask.in_bounds(u, v)) return false;
    if (mask.at(u, v) != (p.polarity == Polarity::Positive)) return false;
  }
  return true;
}

SegMask FallbackSegmenter::segment(const FrameInput& frame, const std::vector<PromptPoint>& prompts) {
  SegMask mask = segment_image(frame.load(), prompts);
  mask.set_frame_id(frame.frame_id);
  return mask;
}

SegMask FallbackSegmenter::track(const FrameInput& prev, const SegMask& prev_mask,
                                 const FrameInput& next) {
  SegMask mask = track_images(prev.load(), prev_mask, next.load());
  mask.set_frame_id(next.frame_id);
  return mask;
}

SegMask FallbackSegmenter::segment_image(const RgbImage& image,
                                         const std::vector<PromptPoint>& prompts) const {
  validate_prompts(prompts, image.width, image.height);
  SegMask mask(image.width, image.height);
  std::vector<std::size_t> positives;
  for (const PromptPoint& p : prompts) {
    if (p.polarity != Polarity::Positive) continue;
    const std::size_t seed = prompt_index(p, image.width);
    positives.push_back(seed);
    if (mask.at_index(seed)) continue;
    for (std::size_t idx : grow_region(image, seed, config_.tau)) mask.set_index(idx);
  }
  for (const PromptPoint& p : prompts) {
    if (p.polarity != Polarity::Negative) continue;
    const std::size_t seed = prompt_index(p, image.width);
    const std::vector<std::size_t> carve = grow_region(image, seed, config_.tau);
    std::vector<std::uint8_t> in_carve(mask.bits().size(), 0);
    for (std::size_t idx : carve) in_carve[idx] = 1;
    std::vector<std::size_t> shared;
    for (std::size_t pos : positives) {
      if (in_carve[pos]) shared.push_back(pos);
    }
    // When a positive seed sits in the same region, split it between the
    // seeds by distance instead of dropping the whole region.
    for (std::size_t idx : carve) {
      bool keep = false;
      for (std::size_t pos : shared) {
        if (dist2(idx, pos, image.width) <= dist2(idx, seed, image.width)) {
          keep = true;
          break;
        }
      }
      if (!keep) mask.set_index(idx, false);
    }
  }
  return mask;
}

SegMask FallbackSegmenter::track_images(const RgbImage& prev, const SegMask& prev_mask,
                                        const RgbImage& next) const {
  if (prev.width != next.width || prev.height != next.height || prev_mask.width() != next.width ||
      prev_mask.height() != next.height) {
    throw Error(ErrorCode::DimensionMismatch, "tracked frames differ in size");
  }
  SegMask mask(next.width, next.height);
  const auto centroid = prev_mask.centroid();
  if (!centroid) return mask;

  Mean mean{0.0, 0.0, 0.0};
  std::vector<std::size_t> members;
  for (std::size_t i = 0; i < prev_mask.bits().size(); ++i) {
    if (!prev_mask.at_index(i)) continue;
    members.push_back(i);
    for (int c = 0; c < 3; ++c) mean[c] += prev.data[i * 3 + c];
  }
  for (double& m : mean) m /= static_cast<double>(members.size());

  // Seeds: previous object pixels that still look like the object, nearest
  // to the previous centroid first.
  std::vector<std::pair<double, std::size_t>> seeds;
  for (std::size_t i : members) {
    if (!close_to(next, i, mean, config_.tau)) continue;
    const double du = static_cast<double>(i % next.width) + 0.5 - centroid->u;
    const double dv = static_cast<double>(i / next.width) + 0.5 - centroid->v;
    seeds.emplace_back(du * du + dv * dv, i);
  }
  std::sort(seeds.begin(), seeds.end());
  for (const auto& [d, seed] : seeds) {
    if (mask.at_index(seed)) continue;
    for (std::size_t idx : grow_region(next, seed, config_.tau)) mask.set_index(idx);
  }
  return mask;
}

PropagationResult propagate(const AnnotationSession& session, const std::vector<FrameInput>& frames,
                            SegmentationProvider& provider) {
  if (!session.current_mask || session.current_mask->empty()) {
    throw Error(ErrorCode::InvalidArgument, "session has no mask to propagate");
  }
  if (frames.empty() || frames.front().frame_id != session.frame_id) {
    throw Error(ErrorCode::InvalidArgument, "propagation must start at the anchor frame");
  }
  PropagationResult result;
  result.session_id = session.id;
  SegMask anchor = *session.current_mask;
  anchor.set_frame_id(session.frame_id);
  result.masks.emplace_back(session.frame_id, anchor);

  for (std::size_t i = 1; i < frames.size(); ++i) {
    const SegMask& prev = result.masks.back().second;
    SegMask next;
    try {
      next = provider.track(frames[i - 1], prev, frames[i]);
    } catch (const Error& e) {
      result.termination_reason = TerminationReason::ProviderError;
      result.termination_frame = frames[i].frame_id;
      result.detail = e.what();
      return result;
    }
    const auto c = next.centroid();
    const bool gone = next.width() <= 0 || next.count() < kMinTrackedArea || !c ||
                      c->u < 0.0 || c->v < 0.0 || c->u > next.width() || c->v > next.height();
    if (gone) {
      result.termination_reason = TerminationReason::ObjectExited;
      result.termination_frame = frames[i].frame_id;
      return result;
    }
    next.set_frame_id(frames[i].frame_id);
    result.masks.emplace_back(frames[i].frame_id, std::move(next));
  }
  result.termination_reason = TerminationReason::SequenceEnd;
  return result;
}

}  // namespace flymethrough
