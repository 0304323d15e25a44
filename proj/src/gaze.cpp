#include "mirrorboard/gaze.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "json.hpp"

namespace mirrorboard::gaze {

namespace {

using Span = std::pair<std::int64_t, std::int64_t>;

// Sorted, merged union; touching spans join.
std::vector<Span> merge(std::vector<Span> spans) {
  std::sort(spans.begin(), spans.end());
  std::vector<Span> out;
  for (const auto& s : spans) {
    if (!out.empty() && s.first <= out.back().second)
      out.back().second = std::max(out.back().second, s.second);
    else
      out.push_back(s);
  }
  return out;
}

std::vector<Span> intersect(const std::vector<Span>& a, const std::vector<Span>& b) {
  std::vector<Span> out;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    const auto lo = std::max(a[i].first, b[j].first);
    const auto hi = std::min(a[i].second, b[j].second);
    if (lo < hi) out.emplace_back(lo, hi);
    (a[i].second < b[j].second ? i : j)++;
  }
  return out;
}

// Emits one run [first, last] of a per-sample key sequence. `end` applies the
// next-sample / gap rule.
template <typename Key, typename Emit>
void run_length(const std::vector<const GazeSample*>& ss, const std::vector<Key>& keys, Emit&& emit) {
  const std::size_t n = ss.size();
  std::size_t start = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const bool last = i + 1 == n;
    const bool gap = !last && ss[i + 1]->t_ms - ss[i]->t_ms > kGapTimeoutMs;
    if (!last && !gap && keys[i + 1] == keys[i]) continue;
    const std::int64_t end = (last || gap) ? ss[i]->t_ms : ss[i + 1]->t_ms;
    if (end > ss[start]->t_ms) emit(keys[i], ss[start]->t_ms, end);
    start = i + 1;
  }
}

}  // namespace

std::optional<Vec3> intersect_board(const GazeSample& s, const BoardPlane& board) {
  return intersect_ray_plane(s.gaze_origin, s.gaze_dir, board);
}

std::set<std::string> classify_focus(const GazeSample& s, const std::map<std::string, Vec3>& candidates,
                                     double cone_half_angle_deg) {
  if (!(cone_half_angle_deg > 0.0 && cone_half_angle_deg < 45.0))
    throw std::invalid_argument("cone half-angle must be in (0, 45) degrees");
  const double limit = cone_half_angle_deg * std::numbers::pi / 180.0;
  std::set<std::string> out;
  for (const auto& [user, head] : candidates) {
    const Vec3 to = head - s.gaze_origin;
    if (length(to) == 0.0) continue;
    if (angle_between(s.gaze_dir, to) <= limit) out.insert(user);
  }
  return out;
}

std::vector<FocusInterval> build_intervals(const std::vector<GazeSample>& samples, const session::SessionState& session,
                                           double cone_half_angle_deg) {
  std::map<std::string, std::vector<const GazeSample*>> by_user;
  for (const auto& s : samples) by_user[s.user].push_back(&s);

  std::vector<FocusInterval> out;
  for (const auto& [user, ss] : by_user) {
    for (std::size_t i = 1; i < ss.size(); ++i)
      if (ss[i]->t_ms <= ss[i - 1]->t_ms)
        throw UnsortedSamples("samples of '" + user + "' are not strictly increasing at t=" + std::to_string(ss[i]->t_ms));

    std::optional<std::set<std::string>> visible;
    if (session.participants.contains(user)) visible = session::visible_avatars(session, user);

    std::vector<std::set<std::string>> focus;
    std::vector<bool> on_board;
    for (const auto* s : ss) {
      std::map<std::string, Vec3> candidates;
      for (const auto& [name, head] : s->heads)
        if (name != user && (!visible || visible->contains(name))) candidates.emplace(name, head);
      focus.push_back(classify_focus(*s, candidates, cone_half_angle_deg));
      on_board.push_back(intersect_board(*s, session.board).has_value());
    }

    run_length(ss, focus, [&](const std::set<std::string>& set, std::int64_t a, std::int64_t b) {
      if (set.empty()) out.push_back({user, kNone, a, b});
      for (const auto& target : set) out.push_back({user, target, a, b});
    });
    run_length(ss, on_board, [&](bool hit, std::int64_t a, std::int64_t b) {
      if (hit) out.push_back({user, kBoard, a, b});
    });
  }
  std::sort(out.begin(), out.end(), [](const FocusInterval& x, const FocusInterval& y) {
    return std::tie(x.subject, x.t_start, x.target, x.t_end) < std::tie(y.subject, y.t_start, y.target, y.t_end);
  });
  return out;
}

std::vector<EyeContactEvent> detect_eye_contact(const std::vector<FocusInterval>& intervals,
                                                std::int64_t min_duration_ms) {
  std::map<std::pair<std::string, std::string>, std::vector<Span>> directed;
  for (const auto& iv : intervals) {
    if (iv.target == kNone || iv.target == kBoard || iv.target == iv.subject) continue;
    directed[{iv.subject, iv.target}].emplace_back(iv.t_start, iv.t_end);
  }
  std::vector<EyeContactEvent> out;
  for (const auto& [key, spans] : directed) {
    const auto& [a, b] = key;
    if (!(a < b)) continue;
    auto back = directed.find({b, a});
    if (back == directed.end()) continue;
    for (const auto& [lo, hi] : intersect(merge(spans), merge(back->second)))
      if (hi - lo >= min_duration_ms) out.push_back({a, b, lo, hi});
  }
  std::sort(out.begin(), out.end(), [](const EyeContactEvent& x, const EyeContactEvent& y) {
    return std::tie(x.t_start, x.a, x.b) < std::tie(y.t_start, y.a, y.b);
  });
  return out;
}

Metrics summarize(const std::vector<FocusInterval>& intervals, const std::vector<EyeContactEvent>& events,
                  std::int64_t duration_ms) {
  Metrics m;
  m.duration_ms = duration_ms;
  m.events = events;

  std::map<std::string, std::map<std::string, std::int64_t>> focused_ms;
  // Focus runs per subject, keyed by start: the set of targets sharing that run.
  std::map<std::string, std::map<Span, std::set<std::string>>> runs;
  for (const auto& iv : intervals) {
    m.users[iv.subject];
    focused_ms[iv.subject][iv.target] += iv.t_end - iv.t_start;
    if (iv.target != kBoard) runs[iv.subject][{iv.t_start, iv.t_end}].insert(iv.target);
  }
  for (const auto& [user, targets] : focused_ms)
    for (const auto& [target, ms] : targets)
      m.users[user].focus_fraction[target] = duration_ms > 0 ? static_cast<double>(ms) / static_cast<double>(duration_ms) : 0.0;
  for (const auto& [user, rs] : runs) {
    const std::set<std::string>* prev = nullptr;
    for (const auto& [span, set] : rs) {
      if (prev && *prev != set) ++m.users[user].focus_shifts;
      prev = &set;
    }
  }
  for (const auto& e : events)
    for (const auto* u : {&e.a, &e.b}) {
      auto& um = m.users[*u];
      ++um.eye_contact_count;
      um.eye_contact_ms += e.duration();
    }
  return m;
}

Metrics analyze_samples(const std::vector<GazeSample>& samples, const session::SessionState& session, double cone_deg,
                        std::int64_t min_contact_ms, std::int64_t duration_ms) {
  const auto intervals = build_intervals(samples, session, cone_deg);
  auto m = summarize(intervals, detect_eye_contact(intervals, min_contact_ms), duration_ms);
  m.cone_deg = cone_deg;
  m.min_contact_ms = min_contact_ms;
  for (const auto& s : samples) ++m.users[s.user].samples;
  return m;
}

std::string metrics_to_json(const Metrics& m) {
  using nlohmann::ordered_json;
  ordered_json j;
  j["duration_ms"] = m.duration_ms;
  j["cone_deg"] = m.cone_deg;
  j["min_contact_ms"] = m.min_contact_ms;
  j["eye_contact_total"] = m.events.size();
  j["users"] = ordered_json::object();
  for (const auto& [user, um] : m.users) {
    ordered_json u;
    u["samples"] = um.samples;
    u["eye_contact_count"] = um.eye_contact_count;
    u["eye_contact_ms"] = um.eye_contact_ms;
    u["focus_shifts"] = um.focus_shifts;
    u["focus_fraction"] = ordered_json::object();
    for (const auto& [t, f] : um.focus_fraction) u["focus_fraction"][t] = f;
    j["users"][user] = u;
  }
  j["events"] = ordered_json::array();
  for (const auto& e : m.events) j["events"].push_back({{"users", {e.a, e.b}}, {"t_start", e.t_start}, {"t_end", e.t_end}});
  return j.dump(2) + "\n";
}

Metrics metrics_from_json(std::string_view text) {
  const auto j = nlohmann::json::parse(text);
  Metrics m;
  m.duration_ms = j.at("duration_ms").get<std::int64_t>();
  m.cone_deg = j.at("cone_deg").get<double>();
  m.min_contact_ms = j.at("min_contact_ms").get<std::int64_t>();
  for (const auto& [user, u] : j.at("users").items()) {
    auto& um = m.users[user];
    um.samples = u.at("samples").get<std::int64_t>();
    um.eye_contact_count = u.at("eye_contact_count").get<std::int64_t>();
    um.eye_contact_ms = u.at("eye_contact_ms").get<std::int64_t>();
    um.focus_shifts = u.at("focus_shifts").get<std::int64_t>();
    for (const auto& [t, f] : u.at("focus_fraction").items()) um.focus_fraction[t] = f.get<double>();
  }
  for (const auto& e : j.at("events"))
    m.events.push_back({e.at("users")[0].get<std::string>(), e.at("users")[1].get<std::string>(),
                        e.at("t_start").get<std::int64_t>(), e.at("t_end").get<std::int64_t>()});
  return m;
}

}  // namespace mirrorboard::gaze
