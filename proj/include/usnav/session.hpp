#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "usnav/codec.hpp"
#include "usnav/config.hpp"
#include "usnav/cues.hpp"

namespace usnav {

struct SessionConfig {
  std::string session_id;
  int probe_tool_id = 1;
  int needle_tool_id = 2;
  GuidanceMode mode = GuidanceMode::kInPlane;
  ProbeGeometry geometry;
  NeedleGeometry needle;
  CueConfig cue;
  std::uint64_t grace_us = 100000;
  std::optional<Vec3> insertion_point;  // default: needle tool origin
};

// Session settings taken from the application config. Throws kUnknownTool
// when the spec binds a tool the config does not define.
SessionConfig session_config_for(const AppConfig& config, const SessionSpec& spec);

// Wire form: one JSON object with "type", "session_id", "seq", optional
// "reply_to", plus the type-specific fields of `body` merged in.
struct ServerMessage {
  std::string type;  // cue_state | pose_update | tracking_lost | error | subscribed | session_opened
  std::string session_id;
  std::uint64_t seq = 0;
  std::optional<std::uint64_t> reply_to;
  Json body = Json::object();

  Json to_json() const;
  std::string dump() const { return to_json().dump(); }
};

struct SessionCounters {
  std::uint64_t packets_applied = 0;
  std::uint64_t stale_dropped = 0;
  std::uint64_t unbound_ignored = 0;
  std::uint64_t poses_steered = 0;
  std::uint64_t cue_states = 0;
  std::uint64_t tracking_lost = 0;
};

// One guidance session. Not thread-safe; SessionHub serializes access.
//
// Broadcast messages (cue_state, pose_update, tracking_lost) take the next
// sequence number. Replies addressed to one client (error, subscribed) carry
// the current number without consuming one.
//
// Time is the data clock: the newest timestamp applied so far. Tracking
// packets are grouped into frames by timestamp; a frame is evaluated once
// every bound tool has reported at that timestamp, or when a newer frame
// starts, or when advance_clock() moves past it.
class Session {
 public:
  explicit Session(SessionConfig config);

  const std::string& id() const { return config_.session_id; }
  const SessionConfig& config() const { return config_; }
  GuidanceMode mode() const { return config_.mode; }
  std::uint64_t seq() const { return seq_; }
  std::uint64_t clock_us() const { return clock_us_; }
  const SessionCounters& counters() const { return counters_; }
  std::optional<TrackedPose> pose(int tool_id) const;

  // set_mode | set_pose | set_cue_config. Throws Error with kMalformedMessage
  // or kUnknownTool; state is unchanged on throw.
  std::vector<ServerMessage> handle_client_message(const Json& msg);

  // Latest-wins per tool; stale and unbound packets are counted and dropped.
  std::vector<ServerMessage> ingest_tracking(const TrackingPacket& packet);

  // Liveness: evaluates a pending frame older than the frame window and emits
  // tracking_lost when a tool has gone silent past the grace window.
  std::vector<ServerMessage> advance_clock(std::uint64_t now_us);

  // Evaluates any partially received frame.
  std::vector<ServerMessage> flush();

  ServerMessage error_reply(ErrorCode code, const std::string& what,
                            std::optional<std::uint64_t> reply_to) const;
  ServerMessage subscribed_reply(std::optional<std::uint64_t> reply_to) const;

  // Pending frames older than this are evaluated by advance_clock().
  static constexpr std::uint64_t kFrameWindowUs = 20000;

 private:
  ServerMessage broadcast(const std::string& type, Json body);
  void evaluate(std::uint64_t at_us, std::vector<ServerMessage>& out);
  bool bound(int tool_id) const {
    return tool_id == config_.probe_tool_id || tool_id == config_.needle_tool_id;
  }

  SessionConfig config_;
  std::map<int, TrackedPose> poses_;
  std::uint64_t clock_us_ = 0;
  std::uint64_t seq_ = 0;
  std::optional<std::uint64_t> pending_frame_us_;
  std::optional<double> normal_sign_;
  bool lost_ = false;
  std::uint64_t lost_at_us_ = 0;
  SessionCounters counters_;
};

// Thread-safe registry of sessions shared by the transports. Broadcasts are
// handed to the sink while the session lock is held, so the sink observes
// each session's messages in sequence order.
class SessionHub {
 public:
  using Sink = std::function<void(const ServerMessage&)>;

  SessionHub(AppConfig config, Sink sink);

  // Throws kInvalidArgument for a duplicate id, kUnknownTool for unknown tools.
  void open_session(const SessionSpec& spec);
  bool has_session(const std::string& id) const;
  std::size_t session_count() const;

  // Parses one client message and returns the replies for the sender.
  // Failures become error replies; nothing throws.
  std::vector<ServerMessage> handle(const std::string& raw);

  // Routes one decoded packet to every session binding its tool.
  void ingest(const TrackingPacket& packet, std::uint64_t wall_us);
  // Decodes first; malformed datagrams are counted.
  void ingest_bytes(std::span<const std::uint8_t> bytes, std::uint64_t wall_us);

  // Advances every session's clock by the wall time elapsed since its last update.
  void tick(std::uint64_t wall_us);

  Json health() const;
  const AppConfig& config() const { return config_; }

 private:
  struct Slot {
    std::mutex mu;
    std::unique_ptr<Session> session;
    std::uint64_t last_wall_us = 0;
  };
  Slot* find(const std::string& id) const;
  void emit(const std::vector<ServerMessage>& msgs);

  AppConfig config_;
  Sink sink_;
  mutable std::mutex mu_;
  std::map<std::string, std::unique_ptr<Slot>> sessions_;
  std::uint64_t packets_received_ = 0;
  std::uint64_t packets_malformed_ = 0;
  std::uint64_t packets_unrouted_ = 0;
  std::uint64_t messages_handled_ = 0;
  std::uint64_t messages_rejected_ = 0;
};

// Monotonic wall clock used by the transports, in microseconds.
std::uint64_t wall_now_us();

// ---------------------------------------------------------------------------
// Recorded traces: JSON lines, one TrackingPacket per line:
//   {"timestamp_us": 0, "tool_id": 1, "quaternion": [w,x,y,z],
//    "translation": [x,y,z], "rms_error_mm": 0, "occluded_count": 0}

std::string format_trace(const std::vector<TrackingPacket>& packets);
std::vector<TrackingPacket> parse_trace(const std::string& text);

// Smooth probe and needle motion sampled at `rate_hz`, both tools stamped
// with the same frame timestamp. The needle sweeps through and across the
// image plane so every cue mode is exercised.
std::vector<TrackingPacket> synthetic_trace(double duration_s, double rate_hz,
                                            std::uint64_t seed,
                                            int probe_tool_id = 1, int needle_tool_id = 2);

// Feeds the packets in file order, flushes, and returns every broadcast.
std::vector<ServerMessage> replay_trace(const SessionConfig& config,
                                        const std::vector<TrackingPacket>& packets);

// One serialized message per line.
std::string format_message_log(const std::vector<ServerMessage>& msgs);

}  // namespace usnav
