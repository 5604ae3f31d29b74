#ifndef USNAV_USNAV_H
#define USNAV_USNAV_H

/* C ABI of the usnav engine. Every function returns a usnav_status; on
 * failure usnav_last_error() describes the problem for the calling thread.
 * Strings handed out by the library are released with usnav_string_free().
 * Handles are opaque and not thread-safe unless stated otherwise. */

#include <stddef.h>
#include <stdint.h>

#if defined(USNAV_BUILDING_LIBRARY)
#define USNAV_API __attribute__((visibility("default")))
#else
#define USNAV_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum usnav_status {
  USNAV_OK = 0,
  USNAV_E_INVALID_ARGUMENT = 1,
  USNAV_E_DEGENERATE_PROJECTION = 2,
  USNAV_E_RAY_PARALLEL_TO_PLANE = 3,
  USNAV_E_SINGULAR_SYSTEM = 4,
  USNAV_E_INVALID_TOOL = 5,
  USNAV_E_INSUFFICIENT_MARKERS = 6,
  USNAV_E_DEGENERATE_CONFIGURATION = 7,
  USNAV_E_EMPTY_MASK = 8,
  USNAV_E_DEGENERATE_TOP_EDGE = 9,
  USNAV_E_DIMENSION_MISMATCH = 10,
  USNAV_E_MALFORMED_PACKET = 11,
  USNAV_E_NON_UNIT_QUATERNION = 12,
  USNAV_E_UNKNOWN_SESSION = 13,
  USNAV_E_UNKNOWN_TOOL = 14,
  USNAV_E_MALFORMED_MESSAGE = 15,
  USNAV_E_CONFIG = 16,
  USNAV_E_IO = 17,
  USNAV_E_TRANSPORT = 18,
  USNAV_E_INTERNAL = 99
} usnav_status;

USNAV_API const char* usnav_version(void);
USNAV_API const char* usnav_status_name(int status);
/* Message of the last failure on this thread ("" if none). */
USNAV_API const char* usnav_last_error(void);
USNAV_API void usnav_string_free(char* s);

/* ------------------------------------------------------------------ geometry
 * Poses are 3x4 row-major [R | t] blocks (12 doubles). */

typedef struct usnav_plane {
  double origin[3];
  double normal[3];
  double axis_x[3];
  double axis_y[3];
} usnav_plane;

typedef struct usnav_needle {
  double tip[3];
  double direction[3]; /* unit */
  double length;
} usnav_needle;

USNAV_API usnav_status usnav_plane_from_pose(const double pose[12], usnav_plane* out);

/* Shadow of the needle on the plane (origin + unit direction). */
USNAV_API usnav_status usnav_project_needle(const usnav_needle* needle, const usnav_plane* plane,
                                            double origin_out[3], double direction_out[3]);

/* exact != 0 uses the true ray/plane hit, otherwise P = O_T + d * d_T. */
USNAV_API usnav_status usnav_plane_hit(const usnav_needle* needle, const usnav_plane* plane,
                                       int exact, double* distance_out, double point_out[3]);

/* Returns (x, y, delta_length) of the wire crossing the image plane. */
USNAV_API usnav_status usnav_solve_intersection(const double image_pose[12],
                                                const usnav_needle* needle,
                                                double nominal_length, double out[3]);

USNAV_API usnav_status usnav_biopsy_error(const usnav_needle* needle, const double target[3],
                                          double* directional_out, double* depth_out);

/* --------------------------------------------------------------- calibration
 * Mask bytes are row-major, non-zero = valid. kind is "convex" or "linear".
 * The ProbeGeometry JSON is written to *json_out. */
USNAV_API usnav_status usnav_calibrate(const uint8_t* mask, int width, int height,
                                       const char* kind, double sensor_width,
                                       const char* probe_tag, char** json_out);

/* ------------------------------------------------------------------ tracking */

typedef struct usnav_tracker usnav_tracker;

/* config_json is an application config (only "tools" and
 * "match_tolerance_mm" are used); NULL or "" selects the defaults. */
USNAV_API usnav_status usnav_tracker_create(const char* config_json, usnav_tracker** out);
USNAV_API void usnav_tracker_destroy(usnav_tracker* tracker);
/* points: count x 3 doubles. Writes {"poses": [...], "budget_exceeded": [...]}. */
USNAV_API usnav_status usnav_tracker_track(const usnav_tracker* tracker, const double* points,
                                           size_t count, uint64_t timestamp_us,
                                           char** json_out);

/* --------------------------------------------------------------------- codec
 * Tracking packets travel as their 75-byte wire form; the JSON form matches
 * one line of a trace file. */
USNAV_API usnav_status usnav_tracking_encode(const char* packet_json, uint8_t out[75]);
USNAV_API usnav_status usnav_tracking_decode(const uint8_t* bytes, size_t size,
                                             char** json_out);
/* On USNAV_E_MALFORMED_PACKET, *offset_out (if given) holds the byte offset. */
USNAV_API usnav_status usnav_frame_inspect(const uint8_t* bytes, size_t size,
                                           char** json_out, size_t* offset_out);

/* ------------------------------------------------------------------- session
 * In-process session: every call returns the produced server messages as
 * JSON lines (possibly empty). */

typedef struct usnav_session usnav_session;

/* session_json: {"session_id", "probe_tool_id", "needle_tool_id", "mode"}. */
USNAV_API usnav_status usnav_session_create(const char* config_json, const char* session_json,
                                            usnav_session** out);
USNAV_API void usnav_session_destroy(usnav_session* session);
/* Failures become "error" replies; the status reports only API misuse. */
USNAV_API usnav_status usnav_session_handle(usnav_session* session, const char* message_json,
                                            char** messages_out);
USNAV_API usnav_status usnav_session_ingest(usnav_session* session, const uint8_t* packet,
                                            size_t size, char** messages_out);
USNAV_API usnav_status usnav_session_advance(usnav_session* session, uint64_t now_us,
                                             char** messages_out);
USNAV_API usnav_status usnav_session_flush(usnav_session* session, char** messages_out);

/* ------------------------------------------------------------------- service
 * Thread-safe: stop may be called from any thread while another waits. */

typedef struct usnav_service usnav_service;

USNAV_API usnav_status usnav_service_create(const char* config_json, usnav_service** out);
USNAV_API usnav_status usnav_service_start(usnav_service* service);
USNAV_API usnav_status usnav_service_ports(const usnav_service* service, uint16_t* tcp,
                                           uint16_t* udp, uint16_t* http);
USNAV_API usnav_status usnav_service_health(const usnav_service* service, char** json_out);
USNAV_API usnav_status usnav_service_wait(usnav_service* service);
USNAV_API usnav_status usnav_service_stop(usnav_service* service);
USNAV_API void usnav_service_destroy(usnav_service* service);

/* --------------------------------------------------------------- harnesses
 * config_path may be NULL/"" for defaults; out_dir may be NULL/"" to skip
 * writing files. Each writes a JSON summary to *json_out. */

USNAV_API usnav_status usnav_load_config(const char* config_path, char** json_out);

USNAV_API usnav_status usnav_run_calibrate(const char* config_path, const char* out_dir,
                                           const char* mask_path, const char* image_path,
                                           const char* kind, double sensor_width,
                                           const char* probe_tag, char** json_out);
USNAV_API usnav_status usnav_run_track(const char* config_path, const char* out_dir,
                                       const char* observations_path, char** json_out);
/* frames_per_target <= 0 keeps the configured value. */
USNAV_API usnav_status usnav_run_accuracy(const char* config_path, uint64_t seed,
                                          const char* out_dir, int frames_per_target,
                                          char** json_out);
/* Negative overrides keep the configured value. */
USNAV_API usnav_status usnav_run_latency(const char* config_path, uint64_t seed,
                                         const char* out_dir, double duration_s, double fps,
                                         double host_delay_ms, char** json_out);
USNAV_API usnav_status usnav_run_metrics(const char* config_path, uint64_t seed,
                                         const char* out_dir, const char* punctures_path,
                                         size_t synthetic_count, char** json_out);
USNAV_API usnav_status usnav_run_replay(const char* config_path, uint64_t seed,
                                        const char* out_dir, const char* trace_path,
                                        const char* mode, char** json_out);

#ifdef __cplusplus
}
#endif

#endif /* USNAV_USNAV_H */
