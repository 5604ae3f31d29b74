#include "usnav/latency.hpp"

#include <chrono>
#include <cmath>
#include <exception>
#include <functional>
#include <mutex>
#include <sstream>
#include <thread>

#include "usnav/bounded_queue.hpp"
#include "usnav/codec.hpp"
#include "usnav/error.hpp"
#include "usnav/net.hpp"
#include "usnav/sim.hpp"
#include "usnav/stats.hpp"

namespace usnav {

namespace {

using Clock = std::chrono::steady_clock;

// First failure wins; every other stage is torn down so joins cannot hang.
class FailureLatch {
 public:
  template <typename F>
  void run(F&& body) {
    try {
      body();
    } catch (...) {
      std::lock_guard lock(mu_);
      if (!error_) error_ = std::current_exception();
      if (on_fail_) on_fail_();
    }
  }
  void set_teardown(std::function<void()> f) { on_fail_ = std::move(f); }
  void rethrow() {
    if (error_) std::rethrow_exception(error_);
  }

 private:
  std::mutex mu_;
  std::exception_ptr error_;
  std::function<void()> on_fail_;
};

}  // namespace

void LatencyConfig::validate() const {
  if (!(fps > 0.0) || !(duration_s > 0.0)) {
    throw Error(ErrorCode::kConfig, "latency fps and duration must be positive");
  }
  if (frame_width < 8 || frame_height < 8 || frame_width > 65535 || frame_height > 65535) {
    throw Error(ErrorCode::kConfig, "latency frame size out of range");
  }
  if (!(host_delay_ms >= 0.0)) throw Error(ErrorCode::kConfig, "host delay must be >= 0");
  if (queue_capacity == 0) throw Error(ErrorCode::kConfig, "queue capacity must be >= 1");
}

LatencyRun run_latency_probe(const LatencyConfig& config) {
  config.validate();
  const auto frame_count = static_cast<std::size_t>(std::llround(config.fps * config.duration_s));

  // One packaged frame is captured over and over; only the stamps change.
  const SyntheticUltrasound us =
      synthetic_ultrasound(default_fan(config.frame_width, config.frame_height), config.seed);
  const ProbeGeometry geom = compute_probe_geometry(us.mask, ProbeKind::kConvex, 100.0, "SIM");
  const PackagedFrame packaged = package_frame(us.image, us.mask, geom);

  const Clock::time_point t0 = Clock::now();
  auto now_us = [t0] {
    return std::chrono::duration_cast<std::chrono::microseconds>(Clock::now() - t0).count();
  };

  std::mutex rec_mu;
  std::vector<LatencyRecord> records(frame_count);
  std::vector<bool> displayed(frame_count, false);
  std::size_t encoded_bytes = 0;

  net::TcpListener host_listener(config.host, config.host_port);
  net::TcpListener headset_listener(config.host, config.headset_port);
  BoundedQueue<FramePacket> host_q(config.queue_capacity);
  BoundedQueue<FramePacket> headset_q(config.queue_capacity);

  FailureLatch latch;
  latch.set_teardown([&] {
    host_listener.shutdown();
    headset_listener.shutdown();
    host_q.close();
    headset_q.close();
  });

  auto receiver = [&](net::TcpListener& listener, BoundedQueue<FramePacket>& out) {
    latch.run([&] {
      std::optional<net::TcpStream> conn = listener.accept();
      if (!conn) return;
      while (auto body = conn->read_message(64u << 20)) {
        const auto* p = reinterpret_cast<const std::uint8_t*>(body->data());
        out.push(decode_frame({p, body->size()}));
      }
    });
    out.close();
  };

  std::thread host_rx(receiver, std::ref(host_listener), std::ref(host_q));
  std::thread headset_rx(receiver, std::ref(headset_listener), std::ref(headset_q));

  std::thread render([&] {
    latch.run([&] {
      net::TcpStream to_headset = net::TcpStream::connect(config.host, headset_listener.port());
      const auto delay = std::chrono::microseconds(
          static_cast<std::int64_t>(std::llround(config.host_delay_ms * 1000.0)));
      while (auto frame = host_q.pop()) {
        if (delay.count() > 0) std::this_thread::sleep_for(delay);
        const std::int64_t t_render = now_us();
        {
          std::lock_guard lock(rec_mu);
          records[frame->frame_id].t_render_host_us = t_render;
        }
        to_headset.write_message(encode_frame(*frame));
      }
    });
    headset_listener.shutdown();  // unblocks accept if the connect never happened
  });

  std::thread display([&] {
    latch.run([&] {
      while (auto frame = headset_q.pop()) {
        const std::int64_t t_display = now_us();
        std::lock_guard lock(rec_mu);
        LatencyRecord& r = records[frame->frame_id];
        r.frame_id = frame->frame_id;
        r.t_capture_us = static_cast<std::int64_t>(frame->capture_timestamp_us);
        r.t_headset_display_us = t_display;
        displayed[frame->frame_id] = true;
      }
    });
  });

  latch.run([&] {
    net::TcpStream to_host = net::TcpStream::connect(config.host, host_listener.port());
    const auto period = std::chrono::duration<double>(1.0 / config.fps);
    const Clock::time_point start = Clock::now();
    for (std::size_t i = 0; i < frame_count; ++i) {
      std::this_thread::sleep_until(
          start + std::chrono::duration_cast<Clock::duration>(period * static_cast<double>(i)));
      // The capture stamp travels inside the packet, like a stopwatch
      // rendered into the captured image.
      const FramePacket packet =
          make_frame_packet(packaged, i, static_cast<std::uint64_t>(now_us()));
      const std::vector<std::uint8_t> bytes = encode_frame(packet);
      if (i == 0) encoded_bytes = bytes.size();
      to_host.write_message(bytes);
    }
  });
  host_listener.shutdown();

  host_rx.join();
  render.join();
  headset_rx.join();
  display.join();
  latch.rethrow();

  LatencyRun run;
  for (std::size_t i = 0; i < frame_count; ++i) {
    if (displayed[i]) run.records.push_back(records[i]);
  }
  run.summary = summarize_latency(run.records, frame_count);
  run.summary.encoded_frame_bytes = encoded_bytes;
  run.summary.host_queue_drops = host_q.drops();
  run.summary.headset_queue_drops = headset_q.drops();
  run.summary.host_queue_high_water = host_q.high_water();
  run.summary.headset_queue_high_water = headset_q.high_water();
  return run;
}

LatencySummary summarize_latency(const std::vector<LatencyRecord>& records,
                                 std::size_t frames_sent) {
  LatencySummary s;
  s.frames_sent = frames_sent;
  s.frames_displayed = records.size();
  std::vector<bool> seen(frames_sent, false);
  std::vector<double> t1, t2;
  t1.reserve(records.size());
  t2.reserve(records.size());
  for (const LatencyRecord& r : records) {
    if (r.frame_id < frames_sent) seen[r.frame_id] = true;
    t1.push_back(static_cast<double>(r.t1_us()) / 1000.0);
    t2.push_back(static_cast<double>(r.t2_us()) / 1000.0);
  }
  for (std::size_t i = 0; i < frames_sent; ++i) {
    if (!seen[i]) s.lost_frame_ids.push_back(i);
  }
  s.loss_fraction = frames_sent == 0
                        ? 0.0
                        : static_cast<double>(s.lost_frame_ids.size()) / frames_sent;
  if (!records.empty()) {
    s.t1_mean_ms = stats::mean(t1);
    s.t1_std_ms = stats::stddev(t1);
    s.t1_median_ms = stats::median(t1);
    s.t2_mean_ms = stats::mean(t2);
    s.t2_std_ms = stats::stddev(t2);
    s.t2_median_ms = stats::median(t2);
  }
  return s;
}

std::string format_latency_csv(const std::vector<LatencyRecord>& records) {
  std::ostringstream out;
  out << "frame_id,t_capture_us,t_render_host_us,t_headset_display_us,t1_us,t2_us\n";
  for (const LatencyRecord& r : records) {
    out << r.frame_id << ',' << r.t_capture_us << ',' << r.t_render_host_us << ','
        << r.t_headset_display_us << ',' << r.t1_us() << ',' << r.t2_us() << '\n';
  }
  return out.str();
}

}  // namespace usnav
