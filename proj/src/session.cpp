#include "usnav/session.hpp"

#include <chrono>
#include <cmath>
#include <random>
#include <sstream>

namespace usnav {

namespace {

constexpr double kPi = 3.14159265358979323846;

std::uint64_t message_seq(const Json& msg) {
  const auto it = msg.find("seq");
  if (it == msg.end()) return 0;
  if (!it->is_number_unsigned() && !(it->is_number_integer() && it->get<std::int64_t>() >= 0)) {
    throw Error(ErrorCode::kMalformedMessage, "'seq' must be a non-negative integer");
  }
  return it->get<std::uint64_t>();
}

std::optional<std::uint64_t> reply_seq(const Json& msg) {
  if (!msg.is_object() || !msg.contains("seq")) return std::nullopt;
  try {
    return message_seq(msg);
  } catch (const Error&) {
    return std::nullopt;
  }
}

const Json& required(const Json& msg, const char* key) {
  const auto it = msg.find(key);
  if (it == msg.end()) {
    throw Error(ErrorCode::kMalformedMessage, std::string("missing '") + key + "'");
  }
  return *it;
}

std::string required_string(const Json& msg, const char* key) {
  const Json& v = required(msg, key);
  if (!v.is_string()) {
    throw Error(ErrorCode::kMalformedMessage, std::string("'") + key + "' must be a string");
  }
  return v.get<std::string>();
}

int required_tool_id(const Json& msg) {
  const Json& v = required(msg, "tool_id");
  if (!v.is_number_integer()) throw Error(ErrorCode::kMalformedMessage, "'tool_id' must be an integer");
  return v.get<int>();
}

}  // namespace

Json ServerMessage::to_json() const {
  Json j = {{"type", type}, {"session_id", session_id}, {"seq", seq}};
  if (reply_to) j["reply_to"] = *reply_to;
  for (const auto& [k, v] : body.items()) j[k] = v;
  return j;
}

// ---------------------------------------------------------------------------

Session::Session(SessionConfig config) : config_(std::move(config)) {
  if (config_.session_id.empty()) throw Error(ErrorCode::kInvalidArgument, "empty session id");
  if (config_.probe_tool_id == config_.needle_tool_id) {
    throw Error(ErrorCode::kInvalidArgument, "probe and needle must be different tools");
  }
  config_.cue.validate();
}

std::optional<TrackedPose> Session::pose(int tool_id) const {
  const auto it = poses_.find(tool_id);
  if (it == poses_.end()) return std::nullopt;
  return it->second;
}

ServerMessage Session::broadcast(const std::string& type, Json body) {
  return ServerMessage{type, config_.session_id, ++seq_, std::nullopt, std::move(body)};
}

ServerMessage Session::error_reply(ErrorCode code, const std::string& what,
                                   std::optional<std::uint64_t> reply_to) const {
  return ServerMessage{"error", config_.session_id, seq_, reply_to,
                       Json{{"code", error_code_name(code)}, {"message", what}}};
}

ServerMessage Session::subscribed_reply(std::optional<std::uint64_t> reply_to) const {
  return ServerMessage{"subscribed", config_.session_id, seq_, reply_to,
                       Json{{"mode", guidance_mode_name(config_.mode)},
                            {"probe_tool_id", config_.probe_tool_id},
                            {"needle_tool_id", config_.needle_tool_id},
                            {"probe", probe_geometry_to_json(config_.geometry)},
                            {"cue_config", cue_config_to_json(config_.cue)}}};
}

void Session::evaluate(std::uint64_t at_us, std::vector<ServerMessage>& out) {
  const auto probe = pose(config_.probe_tool_id);
  const auto needle = pose(config_.needle_tool_id);
  if (!probe || !needle) return;  // nothing to guide before first acquisition
  // A frame older than the loss must not count as recovery.
  if (lost_) at_us = std::max(at_us, lost_at_us_);

  if (config_.mode == GuidanceMode::kOutOfPlane && !normal_sign_) {
    // Orient the image normal so the needle starts on the positive side.
    const ImagePlane plane = image_plane_from_probe(probe->pose, config_.geometry);
    const NeedleState n = config_.needle.needle_from_pose(needle->pose);
    normal_sign_ = (plane.origin - n.tip).dot(plane.normal) < 0.0 ? -1.0 : 1.0;
  }

  CueInputs in;
  in.probe = probe;
  in.needle = needle;
  in.now_us = at_us;
  in.grace_us = config_.grace_us;
  in.mode = config_.mode;
  in.normal_sign = normal_sign_.value_or(1.0);
  in.insertion_point = config_.insertion_point;

  CueFrame frame;
  try {
    frame = cue_frame(in, config_.geometry, config_.needle, config_.cue);
  } catch (const Error& e) {
    // Degenerate geometry for this mode (needle perpendicular in-plane or
    // parallel out-of-plane): no cue can be drawn for this frame.
    out.push_back(broadcast("error", Json{{"code", error_code_name(e.code())},
                                          {"message", e.what()},
                                          {"timestamp_us", at_us}}));
    return;
  }

  if (const auto* lost = std::get_if<TrackingLostState>(&frame)) {
    if (lost_) return;
    lost_ = true;
    lost_at_us_ = at_us;
    ++counters_.tracking_lost;
    out.push_back(broadcast("tracking_lost", Json{{"timestamp_us", at_us},
                                                  {"probe_lost", lost->probe_lost},
                                                  {"needle_lost", lost->needle_lost}}));
    return;
  }
  lost_ = false;
  ++counters_.cue_states;
  out.push_back(broadcast("cue_state", Json{{"timestamp_us", at_us},
                                            {"mode", guidance_mode_name(config_.mode)},
                                            {"cue", cue_frame_to_json(frame, config_.cue)}}));
}

std::vector<ServerMessage> Session::handle_client_message(const Json& msg) {
  if (!msg.is_object()) throw Error(ErrorCode::kMalformedMessage, "message must be an object");
  const std::string type = required_string(msg, "type");
  std::vector<ServerMessage> out;

  if (type == "set_mode") {
    const std::string m = required_string(msg, "mode");
    GuidanceMode mode;
    try {
      mode = parse_guidance_mode(m);
    } catch (const Error& e) {
      throw Error(ErrorCode::kMalformedMessage, e.what());
    }
    config_.mode = mode;  // applies from the next frame
    return out;
  }

  if (type == "set_cue_config") {
    config_.cue = cue_config_from_json(required(msg, "cue"), config_.cue,
                                       ErrorCode::kMalformedMessage);
    return out;
  }

  if (type == "set_pose") {
    const int tool_id = required_tool_id(msg);
    if (!bound(tool_id)) {
      throw Error(ErrorCode::kUnknownTool,
                  "tool " + std::to_string(tool_id) + " is not bound to this session");
    }
    const RigidTransform p = pose_from_json(required(msg, "pose"), ErrorCode::kMalformedMessage);
    const auto prev = pose(tool_id);
    std::uint64_t ts;
    if (const auto it = msg.find("timestamp_us"); it != msg.end()) {
      if (!it->is_number_unsigned()) {
        throw Error(ErrorCode::kMalformedMessage, "'timestamp_us' must be a non-negative integer");
      }
      ts = it->get<std::uint64_t>();
    } else {
      ts = std::max(clock_us_, prev ? prev->timestamp_us + 1 : 0);
    }
    if (prev && ts <= prev->timestamp_us) {
      ++counters_.stale_dropped;
      return out;
    }
    poses_[tool_id] = TrackedPose{p, ts, true};
    clock_us_ = std::max(clock_us_, ts);
    ++counters_.poses_steered;
    pending_frame_us_.reset();  // this evaluation covers any partial frame
    out.push_back(broadcast("pose_update", Json{{"tool_id", tool_id},
                                                {"timestamp_us", ts},
                                                {"source", "steer"},
                                                {"pose", pose_to_json(p)}}));
    evaluate(clock_us_, out);
    return out;
  }

  throw Error(ErrorCode::kMalformedMessage, "unknown message type '" + type + "'");
}

std::vector<ServerMessage> Session::ingest_tracking(const TrackingPacket& packet) {
  std::vector<ServerMessage> out;
  const int tool_id = packet.tool_id;
  if (!bound(tool_id)) {
    ++counters_.unbound_ignored;
    return out;
  }
  const auto prev = pose(tool_id);
  if (prev && packet.timestamp_us <= prev->timestamp_us) {
    ++counters_.stale_dropped;
    return out;
  }
  if (pending_frame_us_ && packet.timestamp_us > *pending_frame_us_) {
    evaluate(*pending_frame_us_, out);
    pending_frame_us_.reset();
  }
  poses_[tool_id] = TrackedPose{packet.pose(), packet.timestamp_us, false};
  clock_us_ = std::max(clock_us_, packet.timestamp_us);
  ++counters_.packets_applied;
  if (!pending_frame_us_) pending_frame_us_ = packet.timestamp_us;

  const auto probe = pose(config_.probe_tool_id);
  const auto needle = pose(config_.needle_tool_id);
  const auto at_frame = [&](const std::optional<TrackedPose>& p) {
    return p && p->timestamp_us == *pending_frame_us_;
  };
  if (at_frame(probe) && at_frame(needle)) {
    evaluate(*pending_frame_us_, out);
    pending_frame_us_.reset();
  }
  return out;
}

std::vector<ServerMessage> Session::advance_clock(std::uint64_t now_us) {
  std::vector<ServerMessage> out;
  if (pending_frame_us_ && now_us >= *pending_frame_us_ + kFrameWindowUs) {
    evaluate(*pending_frame_us_, out);
    pending_frame_us_.reset();
  }
  if (!lost_) {
    const auto probe = pose(config_.probe_tool_id);
    const auto needle = pose(config_.needle_tool_id);
    const auto stale = [&](const std::optional<TrackedPose>& p) {
      return p && !p->held && now_us > p->timestamp_us + config_.grace_us;
    };
    if (probe && needle && (stale(probe) || stale(needle))) evaluate(now_us, out);
  }
  return out;
}

std::vector<ServerMessage> Session::flush() {
  std::vector<ServerMessage> out;
  if (pending_frame_us_) {
    evaluate(*pending_frame_us_, out);
    pending_frame_us_.reset();
  }
  return out;
}

// ---------------------------------------------------------------------------

SessionHub::SessionHub(AppConfig config, Sink sink)
    : config_(std::move(config)), sink_(std::move(sink)) {
  for (const SessionSpec& spec : config_.service.sessions) open_session(spec);
}

SessionHub::Slot* SessionHub::find(const std::string& id) const {
  std::lock_guard lock(mu_);
  const auto it = sessions_.find(id);
  return it == sessions_.end() ? nullptr : it->second.get();
}

SessionConfig session_config_for(const AppConfig& config, const SessionSpec& spec) {
  auto has_tool = [&](int id) {
    for (const ToolDefinition& t : config.tools) {
      if (t.tool_id() == id) return true;
    }
    return false;
  };
  if (!has_tool(spec.probe_tool_id) || !has_tool(spec.needle_tool_id)) {
    throw Error(ErrorCode::kUnknownTool, "session '" + spec.session_id + "' binds an undefined tool");
  }
  SessionConfig sc;
  sc.session_id = spec.session_id;
  sc.probe_tool_id = spec.probe_tool_id;
  sc.needle_tool_id = spec.needle_tool_id;
  sc.mode = spec.mode;
  sc.geometry = config.probe;
  sc.needle = config.needle;
  sc.cue = config.cue;
  sc.grace_us = config.service.grace_us;
  return sc;
}

void SessionHub::open_session(const SessionSpec& spec) {
  SessionConfig sc = session_config_for(config_, spec);
  auto slot = std::make_unique<Slot>();
  slot->session = std::make_unique<Session>(std::move(sc));

  std::lock_guard lock(mu_);
  if (sessions_.count(spec.session_id)) {
    throw Error(ErrorCode::kInvalidArgument, "session '" + spec.session_id + "' already exists");
  }
  sessions_.emplace(spec.session_id, std::move(slot));
}

bool SessionHub::has_session(const std::string& id) const { return find(id) != nullptr; }

std::size_t SessionHub::session_count() const {
  std::lock_guard lock(mu_);
  return sessions_.size();
}

void SessionHub::emit(const std::vector<ServerMessage>& msgs) {
  if (!sink_) return;
  for (const ServerMessage& m : msgs) sink_(m);
}

std::vector<ServerMessage> SessionHub::handle(const std::string& raw) {
  Json msg;
  try {
    msg = Json::parse(raw);
  } catch (const Json::parse_error& e) {
    std::lock_guard lock(mu_);
    ++messages_rejected_;
    return {ServerMessage{"error", "", 0, std::nullopt,
                          Json{{"code", error_code_name(ErrorCode::kMalformedMessage)},
                               {"message", std::string("invalid JSON: ") + e.what()}}}};
  }
  const std::optional<std::uint64_t> reply_to = reply_seq(msg);
  std::string session_id;
  auto fail = [&](ErrorCode code, const std::string& what) {
    std::lock_guard lock(mu_);
    ++messages_rejected_;
    return ServerMessage{"error", session_id, 0, reply_to,
                         Json{{"code", error_code_name(code)}, {"message", what}}};
  };

  try {
    if (!msg.is_object()) throw Error(ErrorCode::kMalformedMessage, "message must be an object");
    message_seq(msg);
    const std::string type = required_string(msg, "type");
    session_id = required_string(msg, "session_id");

    if (type == "open_session") {
      SessionSpec spec;
      spec.session_id = session_id;
      spec.probe_tool_id = msg.value("probe_tool_id", 1);
      spec.needle_tool_id = msg.value("needle_tool_id", 2);
      try {
        spec.mode = parse_guidance_mode(msg.value("mode", std::string("in_plane")));
      } catch (const Error& e) {
        throw Error(ErrorCode::kMalformedMessage, e.what());
      }
      open_session(spec);
      {
        std::lock_guard lock(mu_);
        ++messages_handled_;
      }
      return {ServerMessage{"session_opened", session_id, 0, reply_to,
                            Json{{"mode", guidance_mode_name(spec.mode)},
                                 {"probe_tool_id", spec.probe_tool_id},
                                 {"needle_tool_id", spec.needle_tool_id}}}};
    }

    Slot* slot = find(session_id);
    if (!slot) throw Error(ErrorCode::kUnknownSession, "unknown session '" + session_id + "'");
    std::lock_guard slot_lock(slot->mu);
    Session& s = *slot->session;
    std::vector<ServerMessage> replies;
    try {
      if (type == "subscribe") {
        replies.push_back(s.subscribed_reply(reply_to));
      } else {
        const std::vector<ServerMessage> out = s.handle_client_message(msg);
        slot->last_wall_us = wall_now_us();
        emit(out);
      }
    } catch (const Error& e) {
      std::lock_guard lock(mu_);
      ++messages_rejected_;
      return {s.error_reply(e.code(), e.what(), reply_to)};
    }
    std::lock_guard lock(mu_);
    ++messages_handled_;
    return replies;
  } catch (const Error& e) {
    return {fail(e.code(), e.what())};
  } catch (const Json::exception& e) {
    return {fail(ErrorCode::kMalformedMessage, e.what())};
  }
}

void SessionHub::ingest(const TrackingPacket& packet, std::uint64_t wall_us) {
  std::vector<Slot*> slots;
  {
    std::lock_guard lock(mu_);
    ++packets_received_;
    for (auto& [id, slot] : sessions_) slots.push_back(slot.get());
  }
  bool routed = false;
  for (Slot* slot : slots) {
    std::lock_guard lock(slot->mu);
    const SessionConfig& c = slot->session->config();
    if (packet.tool_id == c.probe_tool_id || packet.tool_id == c.needle_tool_id) routed = true;
    const std::vector<ServerMessage> out = slot->session->ingest_tracking(packet);
    slot->last_wall_us = wall_us;
    emit(out);
  }
  if (!routed) {
    std::lock_guard lock(mu_);
    ++packets_unrouted_;
  }
}

void SessionHub::ingest_bytes(std::span<const std::uint8_t> bytes, std::uint64_t wall_us) {
  TrackingPacket packet;
  try {
    packet = decode_tracking(bytes);
  } catch (const Error&) {
    std::lock_guard lock(mu_);
    ++packets_malformed_;
    return;
  }
  ingest(packet, wall_us);
}

void SessionHub::tick(std::uint64_t wall_us) {
  std::vector<Slot*> slots;
  {
    std::lock_guard lock(mu_);
    for (auto& [id, slot] : sessions_) slots.push_back(slot.get());
  }
  for (Slot* slot : slots) {
    std::lock_guard lock(slot->mu);
    if (slot->last_wall_us == 0 || wall_us < slot->last_wall_us) continue;
    Session& s = *slot->session;
    emit(s.advance_clock(s.clock_us() + (wall_us - slot->last_wall_us)));
  }
}

Json SessionHub::health() const {
  std::lock_guard lock(mu_);
  Json sessions = Json::array();
  SessionCounters total;
  for (const auto& [id, slot] : sessions_) {
    std::lock_guard slot_lock(slot->mu);
    const Session& s = *slot->session;
    const SessionCounters& c = s.counters();
    total.packets_applied += c.packets_applied;
    total.stale_dropped += c.stale_dropped;
    total.unbound_ignored += c.unbound_ignored;
    sessions.push_back({{"session_id", id},
                        {"mode", guidance_mode_name(s.mode())},
                        {"seq", s.seq()},
                        {"packets_applied", c.packets_applied},
                        {"stale_dropped", c.stale_dropped},
                        {"unbound_ignored", c.unbound_ignored},
                        {"poses_steered", c.poses_steered},
                        {"cue_states", c.cue_states},
                        {"tracking_lost", c.tracking_lost}});
  }
  return {{"status", "ok"},
          {"session_count", sessions_.size()},
          {"sessions", sessions},
          {"tracking",
           {{"received", packets_received_},
            {"malformed", packets_malformed_},
            {"unrouted", packets_unrouted_},
            {"stale_dropped", total.stale_dropped},
            {"unbound_ignored", total.unbound_ignored}}},
          {"messages", {{"handled", messages_handled_}, {"rejected", messages_rejected_}}}};
}

std::uint64_t wall_now_us() {
  return static_cast<std::uint64_t>(std::chrono::duration_cast<std::chrono::microseconds>(
                                        std::chrono::steady_clock::now().time_since_epoch())
                                        .count());
}

// ---------------------------------------------------------------------------

std::string format_trace(const std::vector<TrackingPacket>& packets) {
  std::string out;
  for (const TrackingPacket& p : packets) {
    const Json j = {{"timestamp_us", p.timestamp_us},
                    {"tool_id", p.tool_id},
                    {"quaternion", Json::array({p.quaternion[0], p.quaternion[1],
                                                p.quaternion[2], p.quaternion[3]})},
                    {"translation",
                     Json::array({p.translation[0], p.translation[1], p.translation[2]})},
                    {"rms_error_mm", p.rms_error},
                    {"occluded_count", p.occluded_count}};
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::vector<TrackingPacket> parse_trace(const std::string& text) {
  std::vector<TrackingPacket> out;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = "trace line " + std::to_string(line_no) + ": ";
    try {
      const Json j = Json::parse(line);
      TrackingPacket p;
      p.timestamp_us = j.at("timestamp_us").get<std::uint64_t>();
      const int id = j.at("tool_id").get<int>();
      if (id < 0 || id > 255) throw Error(ErrorCode::kConfig, "tool_id out of range");
      p.tool_id = static_cast<std::uint8_t>(id);
      const Json& q = j.at("quaternion");
      const Json& t = j.at("translation");
      if (q.size() != 4 || t.size() != 3) throw Error(ErrorCode::kConfig, "bad pose arrays");
      for (int i = 0; i < 4; ++i) p.quaternion[i] = q.at(i).get<double>();
      for (int i = 0; i < 3; ++i) p.translation[i] = t.at(i).get<double>();
      p.rms_error = j.value("rms_error_mm", 0.0f);
      p.occluded_count = j.value("occluded_count", std::uint8_t{0});
      p.pose();  // validates the quaternion
      out.push_back(p);
    } catch (const Error& e) {
      throw Error(ErrorCode::kConfig, where + e.what());
    } catch (const Json::exception& e) {
      throw Error(ErrorCode::kConfig, where + e.what());
    }
  }
  return out;
}

std::vector<TrackingPacket> synthetic_trace(double duration_s, double rate_hz,
                                            std::uint64_t seed, int probe_tool_id,
                                            int needle_tool_id) {
  if (!(duration_s > 0.0) || !(rate_hz > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "trace duration and rate must be positive");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> jitter(0.0, 0.05);
  const auto frames = static_cast<std::size_t>(std::llround(duration_s * rate_hz));
  const NeedleGeometry needle_geom;
  std::vector<TrackingPacket> out;
  out.reserve(2 * frames);
  for (std::size_t k = 0; k < frames; ++k) {
    const double t = static_cast<double>(k) / rate_hz;
    const double phase = t / duration_s;  // 0 -> 1 over the trace
    const double w = 2.0 * kPi * phase;
    const auto ts = static_cast<std::uint64_t>(std::llround(t * 1e6));

    const RigidTransform probe = RigidTransform::from_axis_angle(
        Vec3::UnitZ(), 0.05 * std::sin(w),
        Vec3(5.0 * std::sin(w) + jitter(rng), -100.0 + 3.0 * std::cos(w) + jitter(rng), 500.0));

    // Needle in probe coordinates: tip descends through the plane while the
    // shaft wobbles in and out of it.
    const Vec3 tip_local(10.0 * std::sin(2.0 * w), 40.0 + 60.0 * phase, 30.0 * (1.0 - 2.0 * phase));
    const Vec3 dir_local = Vec3(0.25 * std::sin(3.0 * w), 1.0, -0.4 + 0.15 * std::cos(w)).normalized();
    const Mat3 rot_local =
        Eigen::Quaterniond::FromTwoVectors(needle_geom.axis_local.normalized(), dir_local)
            .toRotationMatrix();
    const RigidTransform needle_local(rot_local, tip_local - needle_geom.tip_offset * dir_local);
    const RigidTransform needle = probe * needle_local;

    ToolPose pp{probe_tool_id, probe, 0.2 + std::abs(jitter(rng)), 0};
    ToolPose np{needle_tool_id, needle, 0.2 + std::abs(jitter(rng)), 0};
    out.push_back(make_tracking_packet(pp, ts));
    out.push_back(make_tracking_packet(np, ts));
  }
  return out;
}

std::vector<ServerMessage> replay_trace(const SessionConfig& config,
                                        const std::vector<TrackingPacket>& packets) {
  Session session(config);
  std::vector<ServerMessage> log;
  for (const TrackingPacket& p : packets) {
    for (ServerMessage& m : session.ingest_tracking(p)) log.push_back(std::move(m));
  }
  for (ServerMessage& m : session.flush()) log.push_back(std::move(m));
  return log;
}

std::string format_message_log(const std::vector<ServerMessage>& msgs) {
  std::string out;
  for (const ServerMessage& m : msgs) {
    out += m.dump();
    out += '\n';
  }
  return out;
}

}  // namespace usnav
