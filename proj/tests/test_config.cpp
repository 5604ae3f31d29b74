#include <gtest/gtest.h>

#include <filesystem>

#include "support.hpp"
#include "usnav/config.hpp"
#include "usnav/image_io.hpp"

using namespace usnav;
using namespace usnav::testing;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::kInvalidArgument;
}

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "usnav_test_config";
  std::filesystem::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST(Config, DefaultsSurviveJsonRoundTrip) {
  const Json once = app_config_to_json(default_app_config());
  const Json twice = app_config_to_json(app_config_from_json(once));
  EXPECT_EQ(once, twice);
  EXPECT_EQ(app_config_to_json(app_config_from_json(Json::object())), once);
}

TEST(Config, PartialSectionsKeepOtherDefaults) {
  const AppConfig a = app_config_from_json(Json::parse(R"({
    "camera": {"sigma_z_mm": 0.5},
    "cue": {"switch_distance_mm": 30},
    "service": {"port": 0, "grace_ms": 250,
                "sessions": [{"session_id": "s", "mode": "out_of_plane", "needle_tool_id": 2}]}
  })"));
  const AppConfig d = default_app_config();
  EXPECT_DOUBLE_EQ(a.camera.sigma_z, 0.5);
  EXPECT_DOUBLE_EQ(a.camera.sigma_xy, d.camera.sigma_xy);
  EXPECT_DOUBLE_EQ(a.cue.switch_distance, 30.0);
  EXPECT_DOUBLE_EQ(a.cue.contact_epsilon, d.cue.contact_epsilon);
  EXPECT_EQ(a.service.port, 0);
  EXPECT_EQ(a.service.udp_port, d.service.udp_port);
  EXPECT_EQ(a.service.grace_us, 250000u);
  ASSERT_EQ(a.service.sessions.size(), 1u);
  EXPECT_EQ(a.service.sessions[0].mode, GuidanceMode::kOutOfPlane);
  EXPECT_EQ(a.tools.size(), 2u);
}

TEST(Config, PoseJsonRenormalizesNearUnitQuaternions) {
  Rng rng(41);
  for (int i = 0; i < 200; ++i) {
    const RigidTransform t = random_pose(rng, 100.0);
    const RigidTransform back = pose_from_json(pose_to_json(t));
    EXPECT_LT((back.rotation() - t.rotation()).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT(max_abs_diff(back.translation(), t.translation()), 1e-12);
  }
  Json j = pose_to_json(RigidTransform());
  j["quaternion"] = {1.0 + 1e-8, 0, 0, 0};
  EXPECT_NO_THROW(pose_from_json(j));
  j["quaternion"] = {1.1, 0, 0, 0};
  EXPECT_EQ(code_of([&] { pose_from_json(j); }), ErrorCode::kConfig);
  EXPECT_EQ(code_of([&] { pose_from_json(j, ErrorCode::kMalformedMessage); }),
            ErrorCode::kMalformedMessage);
}

TEST(Config, RejectsInvalidValues) {
  auto load = [](const char* text) { return [text] { app_config_from_json(Json::parse(text)); }; };
  EXPECT_EQ(code_of(load("[]")), ErrorCode::kConfig);
  EXPECT_EQ(code_of(load(R"({"match_tolerance_mm": -1})")), ErrorCode::kConfig);
  EXPECT_EQ(code_of(load(R"({"camera": {"sigma_z_mm": -1}})")), ErrorCode::kConfig);
  EXPECT_EQ(code_of(load(R"({"camera": {"sigma_z_mm": "big"}})")), ErrorCode::kConfig);
  EXPECT_EQ(code_of(load(R"({"cue": {"no_such_key": 1}})")), ErrorCode::kConfig);
  EXPECT_EQ(code_of(load(R"({"grid": {"frames_per_target": 0}})")), ErrorCode::kConfig);
  EXPECT_EQ(code_of(load(R"({"service": {"port": 70000}})")), ErrorCode::kConfig);
  EXPECT_EQ(code_of(load(R"({"service": {"sessions": [{"mode": "in_plane"}]}})")), ErrorCode::kConfig);
  EXPECT_EQ(code_of(load(R"({"service": {"sessions": [{"session_id": "a", "mode": "sideways"}]}})")),
            ErrorCode::kConfig);
  EXPECT_EQ(code_of(load(R"({"needle": {"tip_offset_mm": 0}})")), ErrorCode::kConfig);
  EXPECT_EQ(code_of(load(R"({"tools": [{"tool_id": 1, "markers": [[0,0,0],[1,0,0],[2,0,0],[3,0,0]]}]})")),
            ErrorCode::kConfig);
  EXPECT_EQ(code_of(load(R"({"probe_mask": {"path": "/nonexistent.pgm", "sensor_width_mm": 40}})")),
            ErrorCode::kIo);
}

TEST(Config, ProbeMaskSectionCalibratesFromFile) {
  FanSpec fan;
  fan.width = 200;
  fan.height = 150;
  fan.apex_u = 100;
  fan.top_v = 10;
  fan.top_half_span = 30;
  fan.half_angle = 30.0 * kDegree;
  fan.radius = 120;
  const auto path = scratch("fan.pgm");
  write_pgm(path.string(), gray_from_mask(fan.rasterize()));
  Json j = {{"probe_mask", {{"path", path.string()}, {"sensor_width_mm", 40.0}, {"probe_tag", "T1"}}}};
  const AppConfig a = app_config_from_json(j);
  EXPECT_EQ(a.probe_mask_path, path.string());
  EXPECT_EQ(a.probe.u_left, 70);
  EXPECT_EQ(a.probe.u_right, 130);
  EXPECT_EQ(a.probe.probe_tag, "T1");
  EXPECT_NEAR(a.probe.pixel_width, 40.0 / 60.0, 1e-12);

  write_pgm(path.string(), gray_from_mask(ImageMask::filled(20, 20, false)));
  EXPECT_EQ(code_of([&] { app_config_from_json(j); }), ErrorCode::kConfig);
}

TEST(Config, LoadReportsIoAndParseErrors) {
  EXPECT_EQ(code_of([] { load_app_config("/nonexistent/usnav.json"); }), ErrorCode::kIo);
  const auto path = scratch("broken.json");
  write_text_file(path.string(), "{\"camera\": ");
  EXPECT_EQ(code_of([&] { load_app_config(path.string()); }), ErrorCode::kConfig);
  write_text_file(path.string(), R"({"target_radius_mm": 4})");
  EXPECT_DOUBLE_EQ(load_app_config(path.string()).target_radius, 4.0);
}
