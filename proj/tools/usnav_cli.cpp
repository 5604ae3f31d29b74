// usnav command-line harness. Talks to the engine through the C API only.

#include <csignal>
#include <cstdint>
#include <cstdio>
#include <iostream>
#include <pthread.h>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "usnav/usnav.h"

namespace {

struct Globals {
  std::uint64_t seed = 1;
  std::string config;
  std::string out = "out";
};

// Prints the JSON summary (or the error) and maps the status to an exit code.
// `json` is read only after the call that fills it has returned.
int finish(usnav_status st, char* const& json) {
  if (st != USNAV_OK) {
    std::cerr << "error [" << usnav_status_name(st) << "]: " << usnav_last_error() << "\n";
    return st == USNAV_E_INTERNAL ? 70 : 2;
  }
  std::cout << json << "\n";
  usnav_string_free(json);
  return 0;
}

int serve(const Globals& g, int port, int udp_port, int http_port) {
  char* text = nullptr;
  usnav_status st = usnav_load_config(g.config.c_str(), &text);
  if (st != USNAV_OK) return finish(st, text);
  nlohmann::json cfg = nlohmann::json::parse(text);
  usnav_string_free(text);
  if (port >= 0) cfg["service"]["port"] = port;
  if (udp_port >= 0) cfg["service"]["udp_port"] = udp_port;
  if (http_port >= 0) cfg["service"]["http_port"] = http_port;

  // Block the stop signals before any service thread exists so only sigwait sees them.
  sigset_t stop_set;
  sigemptyset(&stop_set);
  sigaddset(&stop_set, SIGINT);
  sigaddset(&stop_set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &stop_set, nullptr);

  usnav_service* svc = nullptr;
  st = usnav_service_create(cfg.dump().c_str(), &svc);
  if (st == USNAV_OK) st = usnav_service_start(svc);
  if (st != USNAV_OK) {
    usnav_service_destroy(svc);
    return finish(st, text);
  }
  std::uint16_t tcp = 0, udp = 0, http = 0;
  usnav_service_ports(svc, &tcp, &udp, &http);
  std::cout << nlohmann::json{{"status", "listening"},
                              {"tcp_port", tcp},
                              {"udp_port", udp},
                              {"http_port", http}}
                   .dump()
            << std::endl;

  int sig = 0;
  sigwait(&stop_set, &sig);
  usnav_service_stop(svc);
  char* health = nullptr;
  if (usnav_service_health(svc, &health) == USNAV_OK) {
    std::cout << health << std::endl;
    usnav_string_free(health);
  }
  usnav_service_destroy(svc);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"usnav: ultrasound needle navigation engine"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "Master random seed")->capture_default_str();
  app.add_option("--config", g.config, "JSON configuration file")->check(CLI::ExistingFile);
  app.add_option("--out", g.out, "Output directory")->capture_default_str();
  app.add_flag_callback("--version", [] {
    std::cout << usnav_version() << "\n";
    std::exit(0);
  }, "Print the library version");

  auto* cal = app.add_subcommand("calibrate", "Probe mask -> ProbeGeometry JSON");
  std::string mask, image, kind = "convex", tag;
  double width = 0.0;
  cal->add_option("mask", mask, "Mask PGM (valid = 255)")->required()->check(CLI::ExistingFile);
  cal->add_option("--image", image, "Frame PGM to package and encode")->check(CLI::ExistingFile);
  cal->add_option("--kind", kind, "convex | linear")->capture_default_str();
  cal->add_option("--sensor-width", width, "Probe aperture L in mm (default: from config)");
  cal->add_option("--tag", tag, "Probe tag (<= 8 bytes)");

  auto* track = app.add_subcommand("track", "Marker observations -> tool poses");
  std::string observations;
  track->add_option("observations", observations, "JSON lines {timestamp_us, points}")
      ->required()
      ->check(CLI::ExistingFile);

  auto* acc = app.add_subcommand("accuracy", "Grid accuracy experiment");
  int frames = 0;
  acc->add_option("--frames", frames, "Frames per target (default: from config)");

  auto* lat = app.add_subcommand("latency", "Frame streaming latency probe");
  double duration = -1.0, fps = -1.0, delay = -1.0;
  lat->add_option("--duration", duration, "Seconds to stream");
  lat->add_option("--fps", fps, "Capture rate");
  lat->add_option("--host-delay-ms", delay, "Injected render-stage delay");

  auto* srv = app.add_subcommand("serve", "Run the navigation service until SIGINT");
  int port = -1, udp_port = -1, http_port = -1;
  srv->add_option("--port", port, "TCP message port (0 = ephemeral)");
  srv->add_option("--udp-port", udp_port, "UDP tracking port (0 = ephemeral)");
  srv->add_option("--http-port", http_port, "HTTP health port (0 = ephemeral)");

  auto* rep = app.add_subcommand("replay", "Tracking trace -> cue-state log");
  std::string trace, mode = "in_plane";
  rep->add_option("trace", trace, "Trace JSON lines (default: synthetic 10 s at 45 Hz)")
      ->check(CLI::ExistingFile);
  rep->add_option("--mode", mode, "in_plane | out_of_plane")->capture_default_str();

  auto* met = app.add_subcommand("metrics", "Biopsy error metrics over punctures");
  std::string punctures;
  std::size_t synthetic = 1000;
  met->add_option("punctures", punctures, "Puncture JSON lines (default: synthetic regimes)")
      ->check(CLI::ExistingFile);
  met->add_option("--count", synthetic, "Synthetic punctures per regime")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  const char* cfg = g.config.c_str();
  const char* out = g.out.c_str();
  char* json = nullptr;
  if (*cal) {
    return finish(usnav_run_calibrate(cfg, out, mask.c_str(), image.c_str(), kind.c_str(), width,
                                      tag.c_str(), &json),
                  json);
  }
  if (*track) return finish(usnav_run_track(cfg, out, observations.c_str(), &json), json);
  if (*acc) return finish(usnav_run_accuracy(cfg, g.seed, out, frames, &json), json);
  if (*lat) {
    return finish(usnav_run_latency(cfg, g.seed, out, duration, fps, delay, &json), json);
  }
  if (*srv) return serve(g, port, udp_port, http_port);
  if (*rep) {
    return finish(usnav_run_replay(cfg, g.seed, out, trace.c_str(), mode.c_str(), &json), json);
  }
  if (*met) {
    return finish(usnav_run_metrics(cfg, g.seed, out, punctures.c_str(), synthetic, &json),
                  json);
  }
  return 1;
}
