#pragma once

// JSON-lines gaze log. One record per line, in this order:
//   {"type":"session","version":1,"session":{...},"duration_ms":N,"cone_deg":10,"min_contact_ms":100}
//   {"type":"sample","user":"A","t":1234,"origin":[x,y,z],"dir":[x,y,z],"heads":{"P":[x,y,z]}}
//   {"type":"interval","subject":"A","target":"P","t_start":..,"t_end":..}
//   {"type":"event","users":["A","P"],"t_start":..,"t_end":..}
// Samples are the source of truth; intervals and events are derived and are
// recomputed by analyze.

#include <stdexcept>
#include <string>
#include <vector>

#include "mirrorboard/gaze.hpp"
#include "mirrorboard/session.hpp"

namespace mirrorboard::gaze {

class SchemaMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GazeLog {
  session::SessionState session;
  std::int64_t duration_ms = 0;
  double cone_deg = kDefaultConeDeg;
  std::int64_t min_contact_ms = kDefaultMinContactMs;
  std::vector<GazeSample> samples;
  std::vector<FocusInterval> intervals;
  std::vector<EyeContactEvent> events;
};

std::string gaze_log_to_jsonl(const GazeLog& log);
/// Throws SchemaMismatch on unknown record types, a missing session header
/// or malformed fields.
GazeLog gaze_log_from_jsonl(std::string_view text);

/// Recomputes metrics from the samples in `log` with the given parameters.
Metrics analyze_log(const GazeLog& log, double cone_deg, std::int64_t min_contact_ms);

}  // namespace mirrorboard::gaze
