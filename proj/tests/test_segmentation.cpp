#include <doctest.h>

#include <memory>
#include <random>

#include "flymethrough/image.hpp"
#include "flymethrough/segmentation.hpp"

using namespace flymethrough;

namespace {

constexpr std::array<std::uint8_t, 3> kRed{220, 30, 30};
constexpr std::array<std::uint8_t, 3> kBlue{20, 40, 200};

// Flat blue field with a red square whose top-left corner is (x0, y0).
RgbImage square_image(int w, int h, int x0, int y0, int side) {
  RgbImage img(w, h);
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      const bool in = u >= x0 && u < x0 + side && v >= y0 && v < y0 + side;
      img.set(u, v, in ? kRed : kBlue);
    }
  }
  return img;
}

FrameInput frame_of(const std::string& id, RgbImage img) {
  return {id, {}, std::make_shared<const RgbImage>(std::move(img))};
}

AnnotationSession confirmed_session(const std::string& frame, SegMask mask) {
  AnnotationSession s;
  s.id = "s1";
  s.frame_id = frame;
  s.prompts = {{{1, 1}, Polarity::Positive}};
  s.current_mask = std::move(mask);
  s.state = SessionState::Confirmed;
  return s;
}

// Fails on the n-th track call.
class FlakyProvider : public SegmentationProvider {
public:
  explicit FlakyProvider(int fail_at) : fail_at_(fail_at) {}
  SegMask segment(const FrameInput& f, const std::vector<PromptPoint>& p) override { return inner_.segment(f, p); }
  SegMask track(const FrameInput& a, const SegMask& m, const FrameInput& b) override {
    if (++calls_ == fail_at_) throw Error(ErrorCode::ProviderUnavailable, "timeout");
    return inner_.track(a, m, b);
  }

private:
  FallbackSegmenter inner_;
  int fail_at_;
  int calls_ = 0;
};

}  // namespace

TEST_SUITE("segmentation") {

TEST_CASE("positive click fills exactly a flat square") {
  const RgbImage img = square_image(100, 80, 30, 20, 40);
  const SegMask mask = FallbackSegmenter().segment_image(img, {{{50.5, 40.5}, Polarity::Positive}});
  CHECK(mask.count() == 1600);
  for (int v = 0; v < 80; ++v) {
    for (int u = 0; u < 100; ++u) {
      CHECK(mask.at(u, v) == (u >= 30 && u < 70 && v >= 20 && v < 60));
    }
  }
}

TEST_CASE("negative click in the same region is excluded") {
  const RgbImage img = square_image(100, 80, 30, 20, 40);
  const std::vector<PromptPoint> prompts = {{{35, 25}, Polarity::Positive}, {{65, 55}, Polarity::Negative}};
  const SegMask mask = FallbackSegmenter().segment_image(img, prompts);
  CHECK(mask.at(35, 25));
  CHECK_FALSE(mask.at(65, 55));
  CHECK(respects_prompts(mask, prompts));

  // A negative click in another region removes that region only.
  const std::vector<PromptPoint> two = {{{35, 25}, Polarity::Positive}, {{5, 5}, Polarity::Positive},
                                        {{95, 75}, Polarity::Negative}};
  const SegMask m2 = FallbackSegmenter().segment_image(img, two);
  CHECK(respects_prompts(m2, two));
  CHECK(m2.at(35, 25));
}

TEST_CASE("prompt validation") {
  const RgbImage img = square_image(20, 20, 5, 5, 5);
  FallbackSegmenter seg;
  auto code_of = [&](const std::vector<PromptPoint>& p) {
    try {
      seg.segment_image(img, p);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::InvalidArgument;
  };
  CHECK(code_of({}) == ErrorCode::NoPositivePrompt);
  CHECK(code_of({{{3, 3}, Polarity::Negative}}) == ErrorCode::NoPositivePrompt);
  CHECK(code_of({{{20, 3}, Polarity::Positive}}) == ErrorCode::InvalidPrompt);
  CHECK(code_of({{{-0.1, 3}, Polarity::Positive}}) == ErrorCode::InvalidPrompt);
  CHECK(code_of({{{3.2, 3}, Polarity::Positive}, {{3.7, 3.1}, Polarity::Negative}}) == ErrorCode::InvalidPrompt);
  CHECK(parse_polarity("negative") == Polarity::Negative);
  CHECK_THROWS_AS(parse_polarity("maybe"), Error);
}

TEST_CASE("random prompts are always respected and segmentation is deterministic") {
  std::mt19937_64 rng(21);
  std::uniform_int_distribution<int> px(0, 63), color(0, 255), count(1, 6);
  FallbackSegmenter seg;
  for (int trial = 0; trial < 40; ++trial) {
    // Patchwork of 8x8 flat tiles.
    RgbImage img(64, 64);
    std::vector<std::array<std::uint8_t, 3>> tiles(64);
    for (auto& t : tiles) t = {static_cast<std::uint8_t>(color(rng)), static_cast<std::uint8_t>(color(rng)),
                               static_cast<std::uint8_t>(color(rng))};
    for (int v = 0; v < 64; ++v) {
      for (int u = 0; u < 64; ++u) img.set(u, v, tiles[(v / 8) * 8 + u / 8]);
    }
    std::vector<PromptPoint> prompts = {{{px(rng) + 0.5, px(rng) + 0.5}, Polarity::Positive}};
    const int extra = count(rng);
    for (int i = 0; i < extra; ++i) {
      const PromptPoint p{{px(rng) + 0.5, px(rng) + 0.5}, i % 2 ? Polarity::Positive : Polarity::Negative};
      bool clash = false;
      for (const auto& q : prompts) clash |= q.pixel.u == p.pixel.u && q.pixel.v == p.pixel.v;
      if (!clash) prompts.push_back(p);
    }
    const SegMask a = seg.segment_image(img, prompts);
    CHECK(respects_prompts(a, prompts));
    CHECK(a == seg.segment_image(img, prompts));
  }
}

TEST_CASE("propagation stops when the object leaves the frame") {
  // 40 px square moving 10 px per frame; fully outside a 100 px frame at index 7.
  std::vector<FrameInput> frames;
  for (int i = 0; i < 10; ++i) frames.push_back(frame_of("f" + std::to_string(i), square_image(100, 60, 30 + 10 * i, 10, 40)));
  FallbackSegmenter seg;
  SegMask anchor = seg.segment(frames[0], {{{40, 20}, Polarity::Positive}});
  const PropagationResult r = propagate(confirmed_session("f0", anchor), frames, seg);
  REQUIRE(r.masks.size() == 7);
  for (int i = 0; i < 7; ++i) {
    CHECK(r.masks[i].first == "f" + std::to_string(i));
    const int visible = std::min(40, 100 - (30 + 10 * i));
    CHECK(r.masks[i].second.count() == static_cast<std::size_t>(visible * 40));
  }
  CHECK(r.termination_reason == TerminationReason::ObjectExited);
  CHECK(r.termination_frame == "f7");
}

TEST_CASE("static sequence runs to the end") {
  std::vector<FrameInput> frames;
  for (int i = 0; i < 5; ++i) frames.push_back(frame_of("f" + std::to_string(i), square_image(60, 60, 10, 10, 30)));
  FallbackSegmenter seg;
  const SegMask anchor = seg.segment(frames[0], {{{20, 20}, Polarity::Positive}});
  const PropagationResult r = propagate(confirmed_session("f0", anchor), frames, seg);
  CHECK(r.masks.size() == 5);
  CHECK(r.termination_reason == TerminationReason::SequenceEnd);
  CHECK_FALSE(r.termination_frame);
  for (const auto& [id, m] : r.masks) CHECK(m == anchor);
}

TEST_CASE("provider failure keeps the masks before it") {
  std::vector<FrameInput> frames;
  for (int i = 0; i < 6; ++i) frames.push_back(frame_of("f" + std::to_string(i), square_image(60, 60, 10, 10, 30)));
  FlakyProvider flaky(3);  // third track call produces frame 3
  const SegMask anchor = FallbackSegmenter().segment(frames[0], {{{20, 20}, Polarity::Positive}});
  const PropagationResult r = propagate(confirmed_session("f0", anchor), frames, flaky);
  REQUIRE(r.masks.size() == 3);
  CHECK(r.masks[2].first == "f2");
  CHECK(r.termination_reason == TerminationReason::ProviderError);
  CHECK(r.termination_frame == "f3");
}

TEST_CASE("small remnants count as exited and nothing resumes afterwards") {
  // Square shrinks to 4x4 (16 px < 25) at frame 2, then reappears at frame 3.
  std::vector<FrameInput> frames = {frame_of("a", square_image(50, 50, 10, 10, 20)),
                                    frame_of("b", square_image(50, 50, 10, 10, 20)),
                                    frame_of("c", square_image(50, 50, 10, 10, 4)),
                                    frame_of("d", square_image(50, 50, 10, 10, 20))};
  FallbackSegmenter seg;
  const SegMask anchor = seg.segment(frames[0], {{{15, 15}, Polarity::Positive}});
  const PropagationResult r = propagate(confirmed_session("a", anchor), frames, seg);
  CHECK(r.masks.size() == 2);
  CHECK(r.termination_frame == "c");
  CHECK(r.termination_reason == TerminationReason::ObjectExited);
}

TEST_CASE("propagate preconditions") {
  std::vector<FrameInput> frames = {frame_of("a", square_image(20, 20, 5, 5, 8))};
  FallbackSegmenter seg;
  AnnotationSession empty = confirmed_session("a", SegMask(20, 20));
  CHECK_THROWS_AS(propagate(empty, frames, seg), Error);
  AnnotationSession wrong_anchor = confirmed_session("z", seg.segment(frames[0], {{{6, 6}, Polarity::Positive}}));
  CHECK_THROWS_AS(propagate(wrong_anchor, frames, seg), Error);
}

TEST_CASE("enum names round-trip") {
  for (auto s : {SessionState::Drafting, SessionState::Confirmed, SessionState::Propagated, SessionState::Failed}) {
    CHECK(parse_session_state(to_string(s)) == s);
  }
  for (auto r : {TerminationReason::ObjectExited, TerminationReason::SequenceEnd, TerminationReason::ProviderError}) {
    CHECK(parse_termination_reason(to_string(r)) == r);
  }
}

}
