#pragma once

// Independent oracles for focus intervals and eye-contact events.

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "mirrorboard/gaze.hpp"

namespace mirrorboard::testing {

// Brute-force oracle: classify each sample with acos, give every sample the
// span up to the next sample (none before a gap), then merge touching spans
// with identical keys.
inline std::vector<gaze::FocusInterval> oracle_intervals(const std::vector<gaze::GazeSample>& samples, const std::string& presenter,
                                            double cone_deg) {
  std::map<std::string, std::vector<gaze::GazeSample>> by_user;
  for (const auto& s : samples) by_user[s.user].push_back(s);
  std::vector<gaze::FocusInterval> out;
  for (auto& [user, ss] : by_user) {
    struct Seg {
      std::set<std::string> key;
      std::int64_t a, b;
    };
    std::vector<Seg> segs;
    for (std::size_t i = 0; i < ss.size(); ++i) {
      std::set<std::string> key;
      for (const auto& [name, head] : ss[i].heads) {
        if ((user == presenter) == (name == presenter)) continue;  // star visibility
        const Vec3 to = head - ss[i].gaze_origin;
        const double c = dot(to, ss[i].gaze_dir) / (length(to) * length(ss[i].gaze_dir));
        if (std::acos(std::clamp(c, -1.0, 1.0)) * 180.0 / M_PI <= cone_deg) key.insert(name);
      }
      const bool has_next = i + 1 < ss.size() && ss[i + 1].t_ms - ss[i].t_ms <= 500;
      const std::int64_t b = has_next ? ss[i + 1].t_ms : ss[i].t_ms;
      if (b == ss[i].t_ms) continue;
      if (!segs.empty() && segs.back().key == key && segs.back().b == ss[i].t_ms)
        segs.back().b = b;
      else
        segs.push_back({key, ss[i].t_ms, b});
    }
    for (const auto& s : segs) {
      if (s.key.empty()) out.push_back({user, gaze::kNone, s.a, s.b});
      for (const auto& t : s.key) out.push_back({user, t, s.a, s.b});
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

// Millisecond-grid oracle: t is "mutual" when some a->b and some b->a
// interval both cover [t, t+1).
inline std::vector<gaze::EyeContactEvent> oracle_events(const std::vector<gaze::FocusInterval>& intervals, std::int64_t min_ms) {
  std::int64_t horizon = 0;
  std::set<std::string> users;
  for (const auto& iv : intervals) {
    horizon = std::max(horizon, iv.t_end);
    users.insert(iv.subject);
  }
  std::vector<gaze::EyeContactEvent> out;
  for (const auto& a : users)
    for (const auto& b : users) {
      if (!(a < b)) continue;
      std::vector<char> ab(horizon + 1, 0), ba(horizon + 1, 0);
      for (const auto& iv : intervals) {
        if (iv.subject == a && iv.target == b) std::fill(ab.begin() + iv.t_start, ab.begin() + iv.t_end, 1);
        if (iv.subject == b && iv.target == a) std::fill(ba.begin() + iv.t_start, ba.begin() + iv.t_end, 1);
      }
      std::int64_t start = -1;
      for (std::int64_t t = 0; t <= horizon; ++t) {
        const bool m = ab[t] && ba[t];
        if (m && start < 0) start = t;
        if (!m && start >= 0) {
          if (t - start >= min_ms) out.push_back({a, b, start, t});
          start = -1;
        }
      }
    }
  std::sort(out.begin(), out.end(), [](const auto& x, const auto& y) {
    return std::tie(x.t_start, x.a, x.b) < std::tie(y.t_start, y.a, y.b);
  });
  return out;
}

}  // namespace mirrorboard::testing
