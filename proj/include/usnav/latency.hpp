#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace usnav {

struct LatencyConfig {
  double fps = 60.0;
  double duration_s = 10.0;
  int frame_width = 1053;
  int frame_height = 604;
  double host_delay_ms = 0.0;  // artificial render-stage work
  std::size_t queue_capacity = 4;
  std::string host = "127.0.0.1";
  std::uint16_t host_port = 0;     // 0 = ephemeral
  std::uint16_t headset_port = 0;  // 0 = ephemeral
  std::uint64_t seed = 1;

  // Throws kConfig.
  void validate() const;
};

// All stamps are microseconds on one monotonic clock, relative to the run start.
struct LatencyRecord {
  std::uint64_t frame_id = 0;
  std::int64_t t_capture_us = 0;
  std::int64_t t_render_host_us = 0;
  std::int64_t t_headset_display_us = 0;

  std::int64_t t1_us() const { return t_render_host_us - t_capture_us; }
  std::int64_t t2_us() const { return t_headset_display_us - t_capture_us; }
};

struct LatencySummary {
  std::size_t frames_sent = 0;
  std::size_t frames_displayed = 0;
  std::vector<std::uint64_t> lost_frame_ids;
  double loss_fraction = 0.0;
  double t1_mean_ms = 0.0, t1_std_ms = 0.0, t1_median_ms = 0.0;
  double t2_mean_ms = 0.0, t2_std_ms = 0.0, t2_median_ms = 0.0;
  std::size_t encoded_frame_bytes = 0;
  std::size_t host_queue_drops = 0;
  std::size_t headset_queue_drops = 0;
  std::size_t host_queue_high_water = 0;
  std::size_t headset_queue_high_water = 0;
};

struct LatencyRun {
  std::vector<LatencyRecord> records;  // displayed frames, by frame_id
  LatencySummary summary;
};

// capture -> (TCP) -> render host -> (TCP) -> headset display, each stage on
// its own thread and joined by drop-oldest queues.
LatencyRun run_latency_probe(const LatencyConfig& config);

LatencySummary summarize_latency(const std::vector<LatencyRecord>& records,
                                 std::size_t frames_sent);

// Columns: frame_id,t_capture_us,t_render_host_us,t_headset_display_us,t1_us,t2_us
std::string format_latency_csv(const std::vector<LatencyRecord>& records);

}  // namespace usnav
