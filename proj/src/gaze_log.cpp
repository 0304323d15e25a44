#include "mirrorboard/gaze_log.hpp"

#include "json.hpp"
#include "json_util.hpp"

namespace mirrorboard::gaze {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr int kLogVersion = 1;

ordered_json vec(const Vec3& v) { return ordered_json::array({v.x, v.y, v.z}); }

}  // namespace

std::string gaze_log_to_jsonl(const GazeLog& log) {
  std::string out;
  auto line = [&](const ordered_json& j) { out += j.dump() + "\n"; };

  ordered_json header;
  header["type"] = "session";
  header["version"] = kLogVersion;
  header["session"] = ordered_json::parse(session::session_to_json(log.session));
  header["duration_ms"] = log.duration_ms;
  header["cone_deg"] = log.cone_deg;
  header["min_contact_ms"] = log.min_contact_ms;
  line(header);

  for (const auto& s : log.samples) {
    ordered_json j;
    j["type"] = "sample";
    j["user"] = s.user;
    j["t"] = s.t_ms;
    j["origin"] = vec(s.gaze_origin);
    j["dir"] = vec(s.gaze_dir);
    j["heads"] = ordered_json::object();
    for (const auto& [name, h] : s.heads) j["heads"][name] = vec(h);
    line(j);
  }
  for (const auto& iv : log.intervals) {
    ordered_json j;
    j["type"] = "interval";
    j["subject"] = iv.subject;
    j["target"] = iv.target;
    j["t_start"] = iv.t_start;
    j["t_end"] = iv.t_end;
    line(j);
  }
  for (const auto& e : log.events) {
    ordered_json j;
    j["type"] = "event";
    j["users"] = {e.a, e.b};
    j["t_start"] = e.t_start;
    j["t_end"] = e.t_end;
    line(j);
  }
  return out;
}

GazeLog gaze_log_from_jsonl(std::string_view text) {
  GazeLog log;
  bool have_header = false;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    const auto raw = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (raw.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    const std::string where = "gaze log line " + std::to_string(line_no) + ": ";
    try {
      const auto j = json::parse(raw);
      const auto type = j.at("type").get<std::string>();
      if (!have_header && type != "session") throw SchemaMismatch(where + "first record must be the session header");
      if (type == "session") {
        if (have_header) throw SchemaMismatch(where + "duplicate session header");
        if (j.at("version").get<int>() != kLogVersion) throw SchemaMismatch(where + "unsupported log version");
        log.session = session::session_from_json(j.at("session").dump());
        log.duration_ms = j.at("duration_ms").get<std::int64_t>();
        log.cone_deg = j.at("cone_deg").get<double>();
        log.min_contact_ms = j.at("min_contact_ms").get<std::int64_t>();
        have_header = true;
      } else if (type == "sample") {
        GazeSample s;
        s.user = j.at("user").get<std::string>();
        s.t_ms = j.at("t").get<std::int64_t>();
        s.gaze_origin = detail::vec3_from_json(j.at("origin"));
        s.gaze_dir = detail::vec3_from_json(j.at("dir"));
        for (const auto& [name, h] : j.at("heads").items()) s.heads[name] = detail::vec3_from_json(h);
        log.samples.push_back(std::move(s));
      } else if (type == "interval") {
        log.intervals.push_back({j.at("subject").get<std::string>(), j.at("target").get<std::string>(),
                                 j.at("t_start").get<std::int64_t>(), j.at("t_end").get<std::int64_t>()});
      } else if (type == "event") {
        const auto& users = j.at("users");
        log.events.push_back({users.at(0).get<std::string>(), users.at(1).get<std::string>(),
                              j.at("t_start").get<std::int64_t>(), j.at("t_end").get<std::int64_t>()});
      } else {
        throw SchemaMismatch(where + "unknown record type '" + type + "'");
      }
    } catch (const json::exception& e) {
      throw SchemaMismatch(where + e.what());
    } catch (const std::invalid_argument& e) {
      throw SchemaMismatch(where + e.what());
    } catch (const session::SessionError& e) {
      throw SchemaMismatch(where + e.what());
    }
  }
  if (!have_header) throw SchemaMismatch("gaze log has no session header");
  return log;
}

Metrics analyze_log(const GazeLog& log, double cone_deg, std::int64_t min_contact_ms) {
  return analyze_samples(log.samples, log.session, cone_deg, min_contact_ms, log.duration_ms);
}

}  // namespace mirrorboard::gaze
