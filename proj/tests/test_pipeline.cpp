#include <doctest.h>

#include "flymethrough/pipeline.hpp"
#include "flymethrough/synth.hpp"
#include "support/oracles.hpp"

using namespace flymethrough;

namespace {

bool same_box(const PoiInstance& a, const PoiInstance& b) {
  if (a.box.has_value() != b.box.has_value()) return false;
  if (!a.box) return true;
  return a.box->center() == b.box->center() && a.box->axes() == b.box->axes() &&
         a.box->half_extents() == b.box->half_extents();
}

}  // namespace

TEST_SUITE("pipeline") {

TEST_CASE("fixture annotation localizes near the true box at any hidden scale") {
  for (double g : {0.5, 2.0}) {
    const auto dir = oracle::scratch_dir("pipeline-scale-" + std::to_string(static_cast<int>(g * 10)));
    FixtureOptions options;
    options.hidden_scale = g;
    const Fixture fx = write_fixture(dir, options);
    const Project project = load_project(dir);
    const TriMesh mesh = load_project_mesh(project);

    std::vector<double> progress;
    const PoiInstance poi =
        localize_annotation(project, project.annotations[0], mesh, [&](double f) { progress.push_back(f); });
    REQUIRE(poi.status == PoiStatus::Cast);
    CHECK(poi.casts.size() == 3);
    for (const CastSummary& c : poi.casts) {
      REQUIRE(c.failure.empty());
      CHECK(std::abs(c.accepted_scale * g - 1.0) <= 0.02);
    }
    CHECK(std::is_sorted(progress.begin(), progress.end()));
    CHECK(progress.back() == 1.0);
    CHECK(score_iou(fx.scene.pois[0].box, *poi.box) > 0.5);
  }
}

TEST_CASE("missing anchor pose fails before any computation") {
  const auto dir = oracle::scratch_dir("pipeline-missing-pose");
  FixtureOptions options;
  options.pose_missing = {0};
  write_fixture(dir, options);
  const Project project = load_project(dir);
  REQUIRE_FALSE(project.frames[0].pose);
  bool touched = false;
  // An empty mesh would throw if anything were cast against it.
  const PoiInstance poi = localize_annotation(project, project.annotations[0], TriMesh(), [&](double) { touched = true; });
  CHECK(poi.status == PoiStatus::Failed);
  CHECK(poi.failure == FailureReason::MissingPose);
  CHECK(poi.casts.empty());
  CHECK_FALSE(touched);
}

TEST_CASE("per-frame failures and the overall reason") {
  const auto dir = oracle::scratch_dir("pipeline-frames");
  FixtureOptions options;
  options.pose_missing = {1};
  write_fixture(dir, options);
  Project project = load_project(dir);
  const TriMesh mesh = load_project_mesh(project);
  const PoiInstance poi = localize_annotation(project, project.annotations[0], mesh);
  REQUIRE(poi.casts.size() == 3);
  CHECK(poi.casts[1].failure == "MissingPose");
  CHECK(poi.casts[0].failure.empty());
  CHECK(poi.status == PoiStatus::Cast);

  AnnotationRecord no_masks = project.annotations[0];
  no_masks.masks.clear();
  no_masks.session.current_mask.reset();
  CHECK(localize_annotation(project, no_masks, mesh).failure == FailureReason::MissingMask);

  // Far outside the room: no frame reaches contact.
  const TriMesh far(std::vector<WorldPoint>{{100, 100, 100}, {101, 100, 100}, {100, 101, 100}}, {{0, 1, 2}});
  const PoiInstance lost = localize_annotation(project, project.annotations[0], far);
  CHECK(lost.status == PoiStatus::Failed);
  CHECK(lost.failure == FailureReason::NoContact);
}

TEST_CASE("localize_project orders by id and does not depend on thread count") {
  const auto dir = oracle::scratch_dir("pipeline-order");
  write_fixture(dir);
  Project project = load_project(dir);
  const AnnotationRecord base = project.annotations[0];
  project.annotations.clear();
  for (const char* id : {"c", "a", "b"}) {
    AnnotationRecord a = base;
    a.session.id = id;
    project.annotations.push_back(a);
  }
  const TriMesh mesh = load_project_mesh(project);

  Project serial = project;
  const auto one = localize_project(serial, {}, mesh, 1);
  Project parallel = project;
  const auto three = localize_project(parallel, {}, mesh, 3);
  REQUIRE(one.size() == 3);
  REQUIRE(three.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(one[i].id == std::string(1, static_cast<char>('a' + i)));
    CHECK(three[i].id == one[i].id);
    CHECK(same_box(one[i], three[i]));
    CHECK(parallel.pois[i].id == one[i].id);
  }

  Project subset = project;
  subset.pois.clear();
  const auto some = localize_project(subset, {"b", "a", "b"}, mesh, 2);
  CHECK(some.size() == 2);
  CHECK(subset.pois.size() == 2);
  CHECK(subset.pois[0].id == "a");

  try {
    localize_project(subset, {"zzz"}, mesh);
    FAIL("expected NotFound");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NotFound);
  }
}

TEST_CASE("upsert keeps ids unique and sorted") {
  std::vector<PoiInstance> pois;
  for (const char* id : {"m", "b", "x", "b"}) {
    PoiInstance p;
    p.id = id;
    p.support_count = pois.size();
    upsert_poi(pois, p);
  }
  REQUIRE(pois.size() == 3);
  CHECK(pois[0].id == "b");
  CHECK(pois[0].support_count == 3);
  CHECK(pois[1].id == "m");
  CHECK(pois[2].id == "x");
}

}
