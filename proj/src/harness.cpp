#include "mirrorboard/harness.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "json.hpp"
#include "json_util.hpp"
#include "mirrorboard/behavior.hpp"
#include "mirrorboard/gaze_log.hpp"
#include "mirrorboard/relay_server.hpp"

namespace mirrorboard::harness {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr std::string_view kBuiltinLesson = "builtin:matrix-lesson";

void write_file(const fs::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << content;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw MissingArtifact("missing artifact " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Uniform [0, 1) from the top 53 bits; avoids implementation-defined distributions.
double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }
double symmetric(std::mt19937_64& rng) { return 2.0 * unit(rng) - 1.0; }

std::set<std::string> star_targets(const ScenarioConfig& cfg, const ParticipantSpec& me) {
  std::set<std::string> out;
  for (const auto& p : cfg.participants)
    if (p.name != me.name && (p.role == session::Role::presenter) != (me.role == session::Role::presenter))
      out.insert(p.name);
  return out;
}

// Scripted head and gaze motion: small sideways sway, gaze held on a target
// (board point, visible participant, or away) for a random segment.
class Trajectory {
 public:
  Trajectory(std::uint64_t seed, const ScenarioConfig& cfg, const ParticipantSpec& me)
      : rng_(seed), board_(cfg.board), base_(me.position) {
    phase_ = 2.0 * std::numbers::pi * unit(rng_);
    for (const auto& p : cfg.participants)
      if (star_targets(cfg, me).contains(p.name)) heads_.push_back(reflect_point(p.position, cfg.board));
  }

  Vec3 position(std::int64_t t_ms) const {
    const double s = 0.02 * std::sin(2.0 * std::numbers::pi * static_cast<double>(t_ms) / 4000.0 + phase_);
    return base_ + s * board_.right_axis();
  }

  Vec3 gaze(std::int64_t t_ms) {
    const Vec3 pos = position(t_ms);
    if (t_ms >= segment_end_) {
      segment_end_ = t_ms + 400 + static_cast<std::int64_t>(rng_() % 2100);
      const auto pick = rng_() % 10;
      if (pick < 4 && !heads_.empty()) {
        target_ = heads_[rng_() % heads_.size()];
        away_ = false;
      } else if (pick < 9 || heads_.empty()) {
        target_ = board_.origin + 0.8 * board_.half_width * symmetric(rng_) * board_.right_axis() +
                  0.8 * board_.half_height * symmetric(rng_) * board_.up_axis();
        away_ = false;
      } else {
        away_ = true;
        away_dir_ = normalized(0.6 * board_.normal + 0.3 * board_.up_axis() + symmetric(rng_) * board_.right_axis());
      }
    }
    const Vec3 jitter{0.004 * symmetric(rng_), 0.004 * symmetric(rng_), 0.004 * symmetric(rng_)};
    const Vec3 d = away_ ? away_dir_ : normalized(target_ - pos);
    return normalized(d + jitter);
  }

 private:
  std::mt19937_64 rng_;
  BoardPlane board_;
  Vec3 base_;
  double phase_ = 0.0;
  std::vector<Vec3> heads_;
  std::int64_t segment_end_ = 0;
  Vec3 target_{};
  bool away_ = false;
  Vec3 away_dir_{};
};

session::AvatarPose make_pose(const std::string& user, std::int64_t t_ms, const Vec3& pos, const Vec3& dir) {
  session::AvatarPose p;
  p.user = user;
  p.t_ms = t_ms;
  p.position = pos;
  p.gaze_origin = pos;
  p.forward = dir;
  p.gaze_dir = dir;
  const Vec3 world_up{0, 1, 0};
  p.up = normalized(world_up - dot(world_up, dir) * dir);
  return p;
}

struct Runtime {
  ParticipantSpec spec;
  std::unique_ptr<relay::RelayClient> client;
  board::Board board;
  session::SessionState session;
  Trajectory trajectory;
  session::AvatarPose own_pose;
  std::vector<std::uint32_t> render_seqs;
  std::vector<std::size_t> visible_per_frame;
  std::vector<board::Vec3f> pan_per_frame;
  std::uint64_t board_errors = 0;
  bool star_ok = true;
  std::string star_detail;
};

session::SessionState session_for(const ScenarioConfig& cfg) {
  session::SessionState s;
  s.board = cfg.board;
  s.open_join = false;
  for (const auto& p : cfg.participants) session::add_participant(s, p.name, p.role);
  return s;
}

ordered_json vec_json(const board::Vec3f& v) { return ordered_json::array({v[0], v[1], v[2]}); }

}  // namespace

bool ScenarioResult::ok() const {
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
}

ScenarioConfig scenario_from_json(std::string_view text, const fs::path& base_dir) {
  ScenarioConfig cfg;
  try {
    const auto j = json::parse(text);
    cfg.seed = j.value("seed", std::uint64_t{42});
    cfg.time_scale = j.value("time_scale", 20.0);
    cfg.tick_hz = j.value("tick_hz", 60.0);
    cfg.script_source = j.value("script", std::string(kBuiltinLesson));
    if (j.contains("board")) cfg.board = detail::board_from_json(j["board"]);
    cfg.cone_deg = j.value("cone_deg", gaze::kDefaultConeDeg);
    cfg.min_contact_ms = j.value("min_contact_ms", gaze::kDefaultMinContactMs);
    for (const auto& pj : j.at("participants")) {
      ParticipantSpec p;
      p.name = pj.at("name").get<std::string>();
      p.role = session::role_from_string(pj.at("role").get<std::string>());
      p.view = board::view_mode_from_string(pj.value("view", std::string("MR")));
      if (pj.contains("position")) p.position = detail::vec3_from_json(pj["position"]);
      const auto transport = pj.value("transport", std::string("stream"));
      if (transport == "websocket")
        p.transport = relay::Transport::websocket;
      else if (transport != "stream")
        throw ScenarioError("unknown transport '" + transport + "'");
      cfg.participants.push_back(std::move(p));
    }
  } catch (const json::exception& e) {
    throw ScenarioError(std::string("scenario: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ScenarioError(std::string("scenario: ") + e.what());
  } catch (const session::SessionError& e) {
    throw ScenarioError(std::string("scenario: ") + e.what());
  }

  if (!(cfg.time_scale > 0) || !(cfg.tick_hz > 0)) throw ScenarioError("time_scale and tick_hz must be > 0");
  if (!(cfg.cone_deg > 0 && cfg.cone_deg < 45)) throw ScenarioError("cone_deg must be in (0, 45)");
  int presenters = 0;
  std::set<std::string> names;
  for (const auto& p : cfg.participants) {
    presenters += p.role == session::Role::presenter;
    if (p.name.empty() || p.name == "behavior" || !names.insert(p.name).second)
      throw ScenarioError("participant names must be unique, nonempty and not 'behavior'");
    if (!(cfg.board.signed_distance(p.position) > 0))
      throw ScenarioError("participant '" + p.name + "' must stand on the board's normal side");
  }
  if (presenters != 1) throw ScenarioError("a scenario needs exactly one presenter");

  if (cfg.script_source == kBuiltinLesson)
    cfg.script = lecture::generate_matrix_lesson();
  else
    cfg.script = lecture::load_script((base_dir / cfg.script_source).string());
  return cfg;
}

ScenarioConfig load_scenario(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError("cannot open scenario '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return scenario_from_json(ss.str(), path.parent_path());
}

std::string scenario_to_json(const ScenarioConfig& cfg) {
  ordered_json j;
  j["seed"] = cfg.seed;
  j["time_scale"] = cfg.time_scale;
  j["tick_hz"] = cfg.tick_hz;
  j["script"] = "lesson.json";
  j["board"] = ordered_json::parse(detail::to_json(cfg.board).dump());
  j["cone_deg"] = cfg.cone_deg;
  j["min_contact_ms"] = cfg.min_contact_ms;
  j["participants"] = ordered_json::array();
  for (const auto& p : cfg.participants) {
    ordered_json pj;
    pj["name"] = p.name;
    pj["role"] = session::to_string(p.role);
    pj["view"] = board::to_string(p.view);
    pj["position"] = {p.position.x, p.position.y, p.position.z};
    pj["transport"] = p.transport == relay::Transport::websocket ? "websocket" : "stream";
    j["participants"].push_back(pj);
  }
  return j.dump(2) + "\n";
}

ScenarioConfig default_scenario(std::uint64_t seed, double time_scale) {
  ScenarioConfig cfg;
  cfg.seed = seed;
  cfg.time_scale = time_scale;
  cfg.script = lecture::generate_matrix_lesson();
  cfg.participants = {
      {"P", session::Role::presenter, board::ViewMode::mr, {0.0, 1.6, 2.0}, relay::Transport::stream},
      {"A1", session::Role::audience, board::ViewMode::mr, {-0.6, 1.6, 2.2}, relay::Transport::stream},
      {"A2", session::Role::audience, board::ViewMode::projected, {0.6, 1.6, 2.2}, relay::Transport::websocket},
  };
  return cfg;
}

std::vector<std::string> deterministic_artifacts(const ScenarioConfig& cfg) {
  std::vector<std::string> out = {"scenario.json", "lesson.json",  "gaze.jsonl", "clients.jsonl",
                                  "deliveries.jsonl", "metrics.json", "checks.json"};
  for (const auto& p : cfg.participants) out.push_back(p.name + ".board.txt");
  return out;
}

ScenarioResult run_scenario(const ScenarioConfig& cfg, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  write_file(out_dir / "scenario.json", scenario_to_json(cfg));
  write_file(out_dir / "lesson.json", lecture::script_to_json(cfg.script) + "\n");

  relay::RelayConfig rc;
  rc.bind_address = "127.0.0.1";
  rc.tcp_port = 0;
  rc.ws_port = 0;
  rc.tick_hz = 0;  // virtual clock: the harness ticks
  rc.log_path = (out_dir / "relay_events.jsonl").string();
  auto relay_server = relay::Relay::start(rc);

  auto options_for = [&](relay::Transport t) {
    relay::ClientOptions o;
    o.transport = t;
    o.port = t == relay::Transport::websocket ? relay_server->ws_port() : relay_server->tcp_port();
    return o;
  };
  using relay::NodeRole;
  auto behavior_client = std::make_unique<relay::RelayClient>(
      options_for(relay::Transport::stream),
      relay::NodeRegistration{"behavior", {NodeRole::emitter, NodeRole::sink}, {"input.*"}});
  behavior::BehaviorEngine engine(cfg.script);

  const auto base_session = session_for(cfg);
  std::vector<Runtime> people;
  people.reserve(cfg.participants.size());
  for (std::size_t i = 0; i < cfg.participants.size(); ++i) {
    const auto& spec = cfg.participants[i];
    const std::uint64_t seed = cfg.seed * 0x9E3779B97F4A7C15ull + i + 1;
    people.push_back(Runtime{spec,
                             std::make_unique<relay::RelayClient>(
                                 options_for(spec.transport),
                                 relay::NodeRegistration{spec.name, {NodeRole::emitter, NodeRole::sink}, {"render", "pose.*"}}),
                             {}, base_session, Trajectory(seed, cfg, spec), {}, {}, {}, {}, 0, true, {}});
  }

  const auto times = behavior::frame_times(cfg.script.duration, cfg.time_scale, cfg.tick_hz);
  std::vector<std::uint32_t> emitted;
  std::vector<gaze::GazeSample> samples;
  std::string clients_log, deliveries_log;
  std::int64_t t_ms = 0;

  for (std::size_t n = 0; n < times.size(); ++n) {
    t_ms = std::llround(static_cast<double>(n) * 1000.0 / cfg.tick_hz);
    const bool pose_tick = n % 2 == 0;

    const auto cmds = engine.step(times[n]);
    std::uint32_t first_seq = 0, last_seq = 0;
    for (const auto& c : cmds) {
      last_seq = behavior_client->publish(std::string(board::kRenderLabel), wire::DeliveryClass::event,
                                          wire::Payload::bytes(board::encode_command(c)));
      if (!first_seq) first_seq = last_seq;
      emitted.push_back(last_seq);
    }
    behavior_client->sync();
    {
      ordered_json d;
      d["frame"] = n;
      d["node"] = "behavior";
      d["lesson_t"] = times[n];
      d["render"] = {first_seq, last_seq};
      d["count"] = cmds.size();
      deliveries_log += d.dump() + "\n";
    }

    for (auto& p : people) {
      if (!pose_tick) continue;
      const Vec3 dir = p.trajectory.gaze(t_ms);
      p.own_pose = make_pose(p.spec.name, t_ms, p.trajectory.position(t_ms), dir);
      p.client->publish(session::pose_label(p.spec.name), wire::DeliveryClass::state, session::pose_payload(p.own_pose));
      p.client->sync();
    }

    relay_server->tick_now();

    for (const auto& f : behavior_client->read_tick().flakes) {
      if (!f.label.starts_with("input.")) continue;
      if (const auto* b = f.payload.as_bytes()) {
        try {
          engine.input(f.origin, board::decode_command(*b));
        } catch (const board::BoardError&) {
        }
      }
    }

    for (auto& p : people) {
      ordered_json d;
      d["frame"] = n;
      d["node"] = p.spec.name;
      d["render"] = json::array();
      d["poses"] = ordered_json::object();
      for (const auto& f : p.client->read_tick().flakes) {
        if (f.label == board::kRenderLabel) {
          p.render_seqs.push_back(f.seq);
          d["render"].push_back(f.seq);
          try {
            p.board.apply(board::decode_command(*f.payload.as_bytes()));
          } catch (const board::BoardError&) {
            ++p.board_errors;
          }
        } else if (session::user_from_pose_label(f.label)) {
          d["poses"][f.origin] = f.seq;
          session::apply_pose_update_in_place(p.session, f, t_ms);
        }
      }
      deliveries_log += d.dump() + "\n";

      std::vector<std::string> avatars;
      for (const auto& name : session::visible_avatars(p.session, p.spec.name))
        if (p.session.participants.at(name).pose) avatars.push_back(name);
      const auto expected = star_targets(cfg, p.spec);
      if (p.star_ok && std::set<std::string>(avatars.begin(), avatars.end()) != expected) {
        p.star_ok = false;
        p.star_detail = p.spec.name + " frame " + std::to_string(n);
      }

      const auto& state = p.board.committed();
      const auto visible = board::visible_content(state, cfg.board, p.spec.view).size();
      p.visible_per_frame.push_back(visible);
      p.pan_per_frame.push_back(state.pan);

      ordered_json c;
      c["frame"] = n;
      c["t"] = t_ms;
      c["client"] = p.spec.name;
      c["view"] = board::to_string(p.spec.view);
      c["visible"] = visible;
      c["pan"] = vec_json(state.pan);
      c["avatars"] = avatars;
      clients_log += c.dump() + "\n";

      if (pose_tick) {
        gaze::GazeSample s;
        s.user = p.spec.name;
        s.t_ms = t_ms;
        s.gaze_origin = p.own_pose.gaze_origin;
        s.gaze_dir = p.own_pose.gaze_dir;
        for (const auto& name : avatars)
          s.heads[name] = session::mirror_pose(*p.session.participants.at(name).pose, cfg.board).gaze_origin;
        samples.push_back(std::move(s));
      }
    }
  }

  const auto stats = relay_server->stats();
  behavior_client.reset();
  for (auto& p : people) p.client.reset();
  relay_server->stop();

  ScenarioResult result;
  result.frames = times.size();
  result.render_events = emitted.size();

  // Gaze log and metrics.
  gaze::GazeLog log;
  log.session = base_session;
  log.duration_ms = t_ms;
  log.cone_deg = cfg.cone_deg;
  log.min_contact_ms = cfg.min_contact_ms;
  log.samples = samples;
  log.intervals = gaze::build_intervals(samples, base_session, cfg.cone_deg);
  log.events = gaze::detect_eye_contact(log.intervals, cfg.min_contact_ms);
  write_file(out_dir / "gaze.jsonl", gaze_log_to_jsonl(log));
  result.metrics = gaze::analyze_log(log, cfg.cone_deg, cfg.min_contact_ms);
  write_file(out_dir / "metrics.json", gaze::metrics_to_json(result.metrics));
  write_file(out_dir / "clients.jsonl", clients_log);
  write_file(out_dir / "deliveries.jsonl", deliveries_log);
  for (const auto& p : people) {
    result.snapshots[p.spec.name] = board::snapshot(p.board.committed());
    write_file(out_dir / (p.spec.name + ".board.txt"), result.snapshots[p.spec.name]);
  }

  // End-to-end invariants.
  auto check = [&](std::string name, bool pass, std::string detail) {
    result.checks.push_back({std::move(name), pass, std::move(detail)});
  };

  {
    std::string bad;
    for (const auto& p : people)
      if (p.render_seqs != emitted) bad += (bad.empty() ? "" : ", ") + p.spec.name;
    check("render_conservation", bad.empty(),
          bad.empty() ? std::to_string(emitted.size()) + " render events delivered exactly once, in order, to every participant"
                      : "mismatched command log: " + bad);
  }
  {
    std::string bad;
    for (const auto& p : people)
      if (p.board_errors) bad += p.spec.name + ":" + std::to_string(p.board_errors) + " ";
    check("render_commands_applied", bad.empty(), bad.empty() ? "no rejected render commands" : bad);
  }
  {
    std::set<std::string> distinct;
    std::size_t mr = 0;
    for (const auto& p : people)
      if (p.spec.view == board::ViewMode::mr) {
        distinct.insert(result.snapshots[p.spec.name]);
        ++mr;
      }
    check("mr_snapshots_identical", distinct.size() <= 1,
          std::to_string(mr) + " MR client(s), " + std::to_string(distinct.size()) + " distinct snapshot(s)");
    const auto direct = board::snapshot(behavior::replay_script(cfg.script, cfg.time_scale, cfg.tick_hz));
    bool all_match = true;
    for (const auto& [name, snap] : result.snapshots) all_match = all_match && snap == direct;
    check("snapshots_match_direct_replay", all_match, "network snapshots vs. replaying the script straight into a board");
  }
  {
    std::string bad;
    for (const auto& p : people)
      if (!p.star_ok) bad += p.star_detail + " ";
    check("star_visibility", bad.empty(), bad.empty() ? "every frame of every client" : "violated at " + bad);
  }
  {
    const Runtime* mr = nullptr;
    const Runtime* projected = nullptr;
    for (const auto& p : people) {
      if (p.spec.view == board::ViewMode::mr && !mr) mr = &p;
      if (p.spec.view == board::ViewMode::projected && !projected) projected = &p;
    }
    std::size_t pan_frame = 0;
    if (mr)
      for (std::size_t n = 1; n < mr->pan_per_frame.size() && !pan_frame; ++n)
        if (mr->pan_per_frame[n] != mr->pan_per_frame[n - 1]) pan_frame = n;
    if (!mr || !projected || !pan_frame) {
      check("pan_projected_vs_mr", true, "not applicable (needs a PAN plus one MR and one PROJECTED client)");
    } else {
      const auto mr_before = mr->visible_per_frame[pan_frame - 1], mr_after = mr->visible_per_frame[pan_frame];
      const auto pr_after = projected->visible_per_frame[pan_frame];
      char buf[160];
      std::snprintf(buf, sizeof buf, "frame %zu: MR %zu -> %zu, PROJECTED %zu", pan_frame, mr_before, mr_after, pr_after);
      check("pan_projected_vs_mr", mr_before == mr_after && pr_after < mr_after, buf);
    }
  }
  check("relay_clean", stats.rejected == 0 && stats.dropped == 0,
        "accepted " + std::to_string(stats.accepted) + ", rejected " + std::to_string(stats.rejected) + ", dropped " +
            std::to_string(stats.dropped));

  ordered_json cj = ordered_json::array();
  for (const auto& c : result.checks) cj.push_back({{"name", c.name}, {"pass", c.pass}, {"detail", c.detail}});
  write_file(out_dir / "checks.json", cj.dump(2) + "\n");
  return result;
}

ReplayResult replay(const fs::path& dir) {
  const auto log = gaze::gaze_log_from_jsonl(read_file(dir / "gaze.jsonl"));
  const auto original = read_file(dir / "metrics.json");
  ReplayResult r;
  r.recomputed = gaze::analyze_log(log, log.cone_deg, log.min_contact_ms);
  r.matches = gaze::metrics_to_json(r.recomputed) == original;
  return r;
}

}  // namespace mirrorboard::harness
