#include "usnav/usnav.h"

#include <cstdlib>
#include <cstring>
#include <memory>
#include <string>

#include "usnav/cli_ops.hpp"
#include "usnav/codec.hpp"
#include "usnav/config.hpp"
#include "usnav/server.hpp"
#include "usnav/session.hpp"

using namespace usnav;

struct usnav_tracker {
  MarkerTracker tracker;
};

struct usnav_session {
  Session session;
};

struct usnav_service {
  NavServer server;
};

namespace {

thread_local std::string g_last_error;

usnav_status fail(usnav_status status, const std::string& what) {
  g_last_error = what;
  return status;
}

// Runs `body`, translating exceptions into status codes.
template <typename F>
usnav_status guarded(F&& body) {
  try {
    g_last_error.clear();
    body();
    return USNAV_OK;
  } catch (const Error& e) {
    return fail(static_cast<usnav_status>(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return fail(USNAV_E_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(USNAV_E_INTERNAL, e.what());
  } catch (...) {
    return fail(USNAV_E_INTERNAL, "unknown failure");
  }
}

void require(bool ok, const char* what) {
  if (!ok) throw Error(ErrorCode::kInvalidArgument, what);
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void give(char** out, const std::string& s) { *out = dup_string(s); }

std::string str(const char* s) { return s ? std::string(s) : std::string(); }

Vec3 vec(const double* v) { return Vec3(v[0], v[1], v[2]); }

void put(const Vec3& v, double* out) {
  out[0] = v.x();
  out[1] = v.y();
  out[2] = v.z();
}

RigidTransform pose_from_rows(const double* p) {
  Mat3 r;
  r << p[0], p[1], p[2], p[4], p[5], p[6], p[8], p[9], p[10];
  return RigidTransform(r, Vec3(p[3], p[7], p[11]));
}

ImagePlane plane_in(const usnav_plane* p) {
  ImagePlane plane{vec(p->origin), vec(p->normal), vec(p->axis_x), vec(p->axis_y)};
  plane.validate();
  return plane;
}

NeedleState needle_in(const usnav_needle* n) {
  NeedleState needle{vec(n->tip), vec(n->direction), n->length};
  needle.validate();
  return needle;
}

AppConfig config_from_text(const char* text) {
  if (!text || !*text) return default_app_config();
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw Error(ErrorCode::kConfig, std::string("invalid configuration JSON: ") + e.what());
  }
  return app_config_from_json(j);
}

OpContext context(const char* config_path, std::uint64_t seed, const char* out_dir) {
  return make_op_context(str(config_path), seed, str(out_dir));
}

}  // namespace

extern "C" {

const char* usnav_version(void) { return "0.1.0"; }

const char* usnav_status_name(int status) {
  if (status == USNAV_OK) return "ok";
  if (status == USNAV_E_INTERNAL) return "internal";
  if (status >= 1 && status <= 18) return error_code_name(static_cast<ErrorCode>(status));
  return "unknown";
}

const char* usnav_last_error(void) { return g_last_error.c_str(); }

void usnav_string_free(char* s) { std::free(s); }

usnav_status usnav_plane_from_pose(const double pose[12], usnav_plane* out) {
  return guarded([&] {
    require(pose && out, "null argument");
    const ImagePlane p = ImagePlane::from_pose(pose_from_rows(pose));
    put(p.origin, out->origin);
    put(p.normal, out->normal);
    put(p.axis_x, out->axis_x);
    put(p.axis_y, out->axis_y);
  });
}

usnav_status usnav_project_needle(const usnav_needle* needle, const usnav_plane* plane,
                                  double origin_out[3], double direction_out[3]) {
  return guarded([&] {
    require(needle && plane && origin_out && direction_out, "null argument");
    const ProjectedNeedle p = project_needle_to_plane(needle_in(needle), plane_in(plane));
    put(p.origin, origin_out);
    put(p.direction, direction_out);
  });
}

usnav_status usnav_plane_hit(const usnav_needle* needle, const usnav_plane* plane, int exact,
                             double* distance_out, double point_out[3]) {
  return guarded([&] {
    require(needle && plane && distance_out && point_out, "null argument");
    const PlaneHit h = plane_distance_and_hit(needle_in(needle), plane_in(plane),
                                              exact ? HitMode::kExact : HitMode::kPaper);
    *distance_out = h.distance;
    put(h.point, point_out);
  });
}

usnav_status usnav_solve_intersection(const double image_pose[12], const usnav_needle* needle,
                                      double nominal_length, double out[3]) {
  return guarded([&] {
    require(image_pose && needle && out, "null argument");
    const ImageIntersection s =
        solve_image_intersection(pose_from_rows(image_pose), needle_in(needle), nominal_length);
    out[0] = s.x;
    out[1] = s.y;
    out[2] = s.delta_length;
  });
}

usnav_status usnav_biopsy_error(const usnav_needle* needle, const double target[3],
                                double* directional_out, double* depth_out) {
  return guarded([&] {
    require(needle && target && directional_out && depth_out, "null argument");
    const BiopsyError e = biopsy_error(needle_in(needle), vec(target));
    *directional_out = e.directional;
    *depth_out = e.depth;
  });
}

usnav_status usnav_calibrate(const uint8_t* mask, int width, int height, const char* kind,
                             double sensor_width, const char* probe_tag, char** json_out) {
  return guarded([&] {
    require(mask && json_out && width > 0 && height > 0, "invalid mask arguments");
    std::vector<std::uint8_t> bits(mask, mask + static_cast<std::size_t>(width) * height);
    const ImageMask m(width, height, std::move(bits));
    const ProbeGeometry g = compute_probe_geometry(
        m, parse_probe_kind(kind ? kind : "convex"), sensor_width, str(probe_tag));
    give(json_out, probe_geometry_to_json(g).dump());
  });
}

usnav_status usnav_tracker_create(const char* config_json, usnav_tracker** out) {
  return guarded([&] {
    require(out != nullptr, "null argument");
    const AppConfig c = config_from_text(config_json);
    *out = new usnav_tracker{MarkerTracker(c.tools, c.match_tolerance)};
  });
}

void usnav_tracker_destroy(usnav_tracker* tracker) { delete tracker; }

usnav_status usnav_tracker_track(const usnav_tracker* tracker, const double* points,
                                 size_t count, uint64_t timestamp_us, char** json_out) {
  return guarded([&] {
    require(tracker && json_out && (points || count == 0), "null argument");
    MarkerObservation obs;
    obs.timestamp_us = timestamp_us;
    for (std::size_t i = 0; i < count; ++i) obs.points.push_back(vec(points + 3 * i));
    const FrameTracking ft = tracker->tracker.track(obs);
    Json poses = Json::array();
    for (const ToolPose& p : ft.poses) poses.push_back(tool_pose_to_json(p));
    give(json_out, Json{{"timestamp_us", timestamp_us},
                        {"poses", poses},
                        {"budget_exceeded", ft.budget_exceeded_tools}}
                       .dump());
  });
}

usnav_status usnav_tracking_encode(const char* packet_json, uint8_t out[75]) {
  return guarded([&] {
    require(packet_json && out, "null argument");
    const std::vector<TrackingPacket> p = parse_trace(packet_json);
    require(p.size() == 1, "expected exactly one packet");
    const auto bytes = encode_tracking(p.front());
    std::memcpy(out, bytes.data(), bytes.size());
  });
}

usnav_status usnav_tracking_decode(const uint8_t* bytes, size_t size, char** json_out) {
  return guarded([&] {
    require(bytes && json_out, "null argument");
    std::string line = format_trace({decode_tracking({bytes, size})});
    if (!line.empty() && line.back() == '\n') line.pop_back();
    give(json_out, line);
  });
}

usnav_status usnav_frame_inspect(const uint8_t* bytes, size_t size, char** json_out,
                                 size_t* offset_out) {
  try {
    require(bytes && json_out, "null argument");
    const FramePacket f = decode_frame({bytes, size});
    give(json_out, Json{{"version", f.version},
                        {"frame_id", f.frame_id},
                        {"capture_timestamp_us", f.capture_timestamp_us},
                        {"bounds",
                         {{"u_min", f.bounds.u_min},
                          {"u_max", f.bounds.u_max},
                          {"v_min", f.bounds.v_min},
                          {"v_max", f.bounds.v_max}}},
                        {"probe_tag", f.probe_tag},
                        {"valid_pixels", f.mask.valid_count()}}
                       .dump());
    g_last_error.clear();
    return USNAV_OK;
  } catch (const MalformedPacket& e) {
    if (offset_out) *offset_out = e.offset();
    return fail(USNAV_E_MALFORMED_PACKET, e.what());
  } catch (...) {
    return guarded([] { throw; });
  }
}

usnav_status usnav_session_create(const char* config_json, const char* session_json,
                                  usnav_session** out) {
  return guarded([&] {
    require(out != nullptr, "null argument");
    const AppConfig c = config_from_text(config_json);
    SessionSpec spec{"local", 1, 2, GuidanceMode::kInPlane};
    if (session_json && *session_json) {
      Json j;
      try {
        j = Json::parse(session_json);
        spec.session_id = j.value("session_id", spec.session_id);
        spec.probe_tool_id = j.value("probe_tool_id", spec.probe_tool_id);
        spec.needle_tool_id = j.value("needle_tool_id", spec.needle_tool_id);
        spec.mode = parse_guidance_mode(j.value("mode", std::string("in_plane")));
      } catch (const Json::exception& e) {
        throw Error(ErrorCode::kConfig, std::string("invalid session JSON: ") + e.what());
      }
    }
    *out = new usnav_session{Session(session_config_for(c, spec))};
  });
}

void usnav_session_destroy(usnav_session* session) { delete session; }

usnav_status usnav_session_handle(usnav_session* session, const char* message_json,
                                  char** messages_out) {
  return guarded([&] {
    require(session && message_json && messages_out, "null argument");
    Session& s = session->session;
    std::vector<ServerMessage> msgs;
    std::optional<std::uint64_t> reply_to;
    try {
      const Json msg = Json::parse(message_json);
      if (msg.is_object() && msg.contains("seq") && msg["seq"].is_number_unsigned()) {
        reply_to = msg["seq"].get<std::uint64_t>();
      }
      if (msg.is_object() && msg.value("type", std::string()) == "subscribe") {
        msgs.push_back(s.subscribed_reply(reply_to));
      } else {
        msgs = s.handle_client_message(msg);
      }
    } catch (const Error& e) {
      msgs = {s.error_reply(e.code(), e.what(), reply_to)};
    } catch (const Json::exception& e) {
      msgs = {s.error_reply(ErrorCode::kMalformedMessage, e.what(), reply_to)};
    }
    give(messages_out, format_message_log(msgs));
  });
}

usnav_status usnav_session_ingest(usnav_session* session, const uint8_t* packet, size_t size,
                                  char** messages_out) {
  return guarded([&] {
    require(session && packet && messages_out, "null argument");
    const TrackingPacket p = decode_tracking({packet, size});
    give(messages_out, format_message_log(session->session.ingest_tracking(p)));
  });
}

usnav_status usnav_session_advance(usnav_session* session, uint64_t now_us, char** messages_out) {
  return guarded([&] {
    require(session && messages_out, "null argument");
    give(messages_out, format_message_log(session->session.advance_clock(now_us)));
  });
}

usnav_status usnav_session_flush(usnav_session* session, char** messages_out) {
  return guarded([&] {
    require(session && messages_out, "null argument");
    give(messages_out, format_message_log(session->session.flush()));
  });
}

usnav_status usnav_service_create(const char* config_json, usnav_service** out) {
  return guarded([&] {
    require(out != nullptr, "null argument");
    *out = new usnav_service{NavServer(config_from_text(config_json))};
  });
}

usnav_status usnav_service_start(usnav_service* service) {
  return guarded([&] {
    require(service != nullptr, "null argument");
    service->server.start();
  });
}

usnav_status usnav_service_ports(const usnav_service* service, uint16_t* tcp, uint16_t* udp,
                                 uint16_t* http) {
  return guarded([&] {
    require(service != nullptr, "null argument");
    if (tcp) *tcp = service->server.port();
    if (udp) *udp = service->server.udp_port();
    if (http) *http = service->server.http_port();
  });
}

usnav_status usnav_service_health(const usnav_service* service, char** json_out) {
  return guarded([&] {
    require(service && json_out, "null argument");
    give(json_out, service->server.health().dump());
  });
}

usnav_status usnav_service_wait(usnav_service* service) {
  return guarded([&] {
    require(service != nullptr, "null argument");
    service->server.wait();
  });
}

usnav_status usnav_service_stop(usnav_service* service) {
  return guarded([&] {
    require(service != nullptr, "null argument");
    service->server.stop();
  });
}

void usnav_service_destroy(usnav_service* service) { delete service; }

usnav_status usnav_load_config(const char* config_path, char** json_out) {
  return guarded([&] {
    require(json_out != nullptr, "null argument");
    const AppConfig c =
        config_path && *config_path ? load_app_config(config_path) : default_app_config();
    give(json_out, app_config_to_json(c).dump(2));
  });
}

usnav_status usnav_run_calibrate(const char* config_path, const char* out_dir,
                                 const char* mask_path, const char* image_path,
                                 const char* kind, double sensor_width, const char* probe_tag,
                                 char** json_out) {
  return guarded([&] {
    require(mask_path && json_out, "null argument");
    CalibrateArgs args;
    args.mask_path = mask_path;
    args.image_path = str(image_path);
    if (kind && *kind) args.kind = kind;
    args.sensor_width = sensor_width;
    args.probe_tag = str(probe_tag);
    give(json_out, op_calibrate(context(config_path, 1, out_dir), args).dump(2));
  });
}

usnav_status usnav_run_track(const char* config_path, const char* out_dir,
                             const char* observations_path, char** json_out) {
  return guarded([&] {
    require(observations_path && json_out, "null argument");
    give(json_out, op_track(context(config_path, 1, out_dir), observations_path).dump(2));
  });
}

usnav_status usnav_run_accuracy(const char* config_path, uint64_t seed, const char* out_dir,
                                int frames_per_target, char** json_out) {
  return guarded([&] {
    require(json_out != nullptr, "null argument");
    std::optional<int> frames;
    if (frames_per_target > 0) frames = frames_per_target;
    give(json_out, op_accuracy(context(config_path, seed, out_dir), frames).dump(2));
  });
}

usnav_status usnav_run_latency(const char* config_path, uint64_t seed, const char* out_dir,
                               double duration_s, double fps, double host_delay_ms,
                               char** json_out) {
  return guarded([&] {
    require(json_out != nullptr, "null argument");
    LatencyOverrides o;
    if (duration_s >= 0.0) o.duration_s = duration_s;
    if (fps >= 0.0) o.fps = fps;
    if (host_delay_ms >= 0.0) o.host_delay_ms = host_delay_ms;
    give(json_out, op_latency(context(config_path, seed, out_dir), o).dump(2));
  });
}

usnav_status usnav_run_metrics(const char* config_path, uint64_t seed, const char* out_dir,
                               const char* punctures_path, size_t synthetic_count,
                               char** json_out) {
  return guarded([&] {
    require(json_out != nullptr, "null argument");
    give(json_out, op_metrics(context(config_path, seed, out_dir), str(punctures_path),
                              synthetic_count)
                       .dump(2));
  });
}

usnav_status usnav_run_replay(const char* config_path, uint64_t seed, const char* out_dir,
                              const char* trace_path, const char* mode, char** json_out) {
  return guarded([&] {
    require(json_out != nullptr, "null argument");
    give(json_out, op_replay(context(config_path, seed, out_dir), str(trace_path),
                             mode && *mode ? mode : "in_plane")
                       .dump(2));
  });
}

}  // extern "C"
