#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "flymethrough/image.hpp"
#include "flymethrough/projection.hpp"

namespace flymethrough {

enum class Polarity { Positive, Negative };

struct PromptPoint {
  Pixel pixel;
  Polarity polarity = Polarity::Positive;
};

std::string to_string(Polarity polarity);
Polarity parse_polarity(const std::string& text);

enum class SessionState { Drafting, Confirmed, Propagated, Failed };

std::string to_string(SessionState state);
SessionState parse_session_state(const std::string& text);

struct AnnotationSession {
  std::string id;
  std::string frame_id;
  std::string label;
  std::string description;
  std::vector<PromptPoint> prompts;
  std::optional<SegMask> current_mask;
  SessionState state = SessionState::Drafting;
};

enum class TerminationReason { ObjectExited, SequenceEnd, ProviderError };

std::string to_string(TerminationReason reason);
TerminationReason parse_termination_reason(const std::string& text);

struct PropagationResult {
  std::string session_id;
  /// Contiguous run of frames starting at the anchor, in frame order.
  std::vector<std::pair<std::string, SegMask>> masks;
  /// Frame where tracking stopped; absent when the sequence simply ran out.
  std::optional<std::string> termination_frame;
  TerminationReason termination_reason = TerminationReason::SequenceEnd;
  std::string detail;
};

/// A frame as seen by a provider. Either image is preloaded or it is read
/// from image_path on demand.
struct FrameInput {
  std::string frame_id;
  std::filesystem::path image_path;
  std::shared_ptr<const RgbImage> image;

  RgbImage load() const;
};

class SegmentationProvider {
public:
  virtual ~SegmentationProvider() = default;
  /// Mask for the frame from point prompts.
  virtual SegMask segment(const FrameInput& frame, const std::vector<PromptPoint>& prompts) = 0;
  /// Carries prev_mask from prev into next. An empty mask means the object is gone.
  virtual SegMask track(const FrameInput& prev, const SegMask& prev_mask,
                        const FrameInput& next) = 0;
};

/// Throws NoPositivePrompt or InvalidPrompt (pixel outside the frame).
void validate_prompts(const std::vector<PromptPoint>& prompts, int width, int height);
/// True when every positive prompt pixel is set and every negative one is not.
bool respects_prompts(const SegMask& mask, const std::vector<PromptPoint>& prompts);

struct FallbackConfig {
  /// Maximum per-channel distance to the running region mean.
  double tau = 24.0;
};

/// Color region growing from the prompt seeds, 4-connected. Needs no model.
class FallbackSegmenter : public SegmentationProvider {
public:
  explicit FallbackSegmenter(FallbackConfig config = {}) : config_(config) {}

  SegMask segment(const FrameInput& frame, const std::vector<PromptPoint>& prompts) override;
  SegMask track(const FrameInput& prev, const SegMask& prev_mask, const FrameInput& next) override;

  SegMask segment_image(const RgbImage& image, const std::vector<PromptPoint>& prompts) const;
  SegMask track_images(const RgbImage& prev, const SegMask& prev_mask, const RgbImage& next) const;

private:
  FallbackConfig config_;
};

/// Tracks below this many pixels count as the object having left the view.
inline constexpr std::size_t kMinTrackedArea = 25;

/// Forward-only propagation from the session's confirmed mask. frames[0]
/// must be the anchor. Stops for good at the first lost, tiny or off-image
/// mask, at the end of frames, or when the provider throws.
PropagationResult propagate(const AnnotationSession& session, const std::vector<FrameInput>& frames,
                            SegmentationProvider& provider);

}  // namespace flymethrough
