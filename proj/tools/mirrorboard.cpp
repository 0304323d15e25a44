// mirrorboard command line: relay server, behavior node, gaze analysis,
// scenario runs and replays.
//
// Exit codes: 0 success, 1 an invariant or check failed, 2 bad input or
// environment (unreadable file, port in use, relay unreachable).

#include <atomic>
#include <csignal>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "mirrorboard/behavior.hpp"
#include "mirrorboard/gaze_log.hpp"
#include "mirrorboard/harness.hpp"
#include "mirrorboard/relay_server.hpp"

using namespace mirrorboard;

namespace {

std::atomic<bool> g_stop{false};
extern "C" void on_signal(int) { g_stop = true; }

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// "host:port", ":port" or "port".
relay::ClientOptions parse_addr(const std::string& addr) {
  relay::ClientOptions o;
  const auto colon = addr.rfind(':');
  const std::string host = colon == std::string::npos ? "" : addr.substr(0, colon);
  const std::string port = colon == std::string::npos ? addr : addr.substr(colon + 1);
  if (!host.empty()) o.host = host;
  int p = 0;
  try {
    p = std::stoi(port);
  } catch (const std::exception&) {
    throw std::invalid_argument("bad relay address '" + addr + "'");
  }
  if (p <= 0 || p > 65535) throw std::invalid_argument("bad relay port in '" + addr + "'");
  o.port = static_cast<std::uint16_t>(p);
  return o;
}

int cmd_relay(const relay::RelayConfig& rc) {
  auto server = relay::Relay::start(rc);
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::printf("relay listening: stream %u, websocket %u (path /ws), %.6g Hz\n", server->tcp_port(), server->ws_port(),
              rc.tick_hz);
  std::fflush(stdout);
  while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(50));
  const auto s = server->stats();
  server->stop();
  std::printf("relay stopped: frames %llu, accepted %llu, rejected %llu, dropped %llu\n",
              static_cast<unsigned long long>(s.frames), static_cast<unsigned long long>(s.accepted),
              static_cast<unsigned long long>(s.rejected), static_cast<unsigned long long>(s.dropped));
  return 0;
}

// Drives a lecture script against a live relay in (scaled) real time and
// feeds participants' input.* strokes back into the engine.
int cmd_behave(const std::string& script_path, const std::string& addr, double time_scale, double tick_hz,
               const std::string& transport) {
  const auto script = script_path == "builtin:matrix-lesson" ? lecture::generate_matrix_lesson()
                                                             : lecture::load_script(script_path);
  auto opts = parse_addr(addr);
  if (transport == "websocket") opts.transport = relay::Transport::websocket;
  relay::RelayClient client(opts, {"behavior", {relay::NodeRole::emitter, relay::NodeRole::sink}, {"input.*"}});
  behavior::BehaviorEngine engine(script);
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);

  const auto times = behavior::frame_times(script.duration, time_scale, tick_hz);
  const auto start = std::chrono::steady_clock::now();
  const auto period = std::chrono::duration<double>(1.0 / tick_hz);
  std::uint64_t published = 0, inputs = 0, rejected_inputs = 0;
  for (std::size_t n = 0; n < times.size() && !g_stop; ++n) {
    for (const auto& c : engine.step(times[n])) {
      client.publish(std::string(board::kRenderLabel), wire::DeliveryClass::event,
                     wire::Payload::bytes(board::encode_command(c)));
      ++published;
    }
    const auto next = start + std::chrono::duration_cast<std::chrono::steady_clock::duration>(period * (n + 1));
    for (;;) {
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(next - std::chrono::steady_clock::now());
      if (left.count() <= 0) break;
      const auto f = client.poll(left);
      if (!f) break;
      if (!f->label.starts_with("input.")) continue;
      const auto* b = f->payload.as_bytes();
      try {
        if (!b) throw board::BoardError(board::BoardErrc::malformed_command, "input payload is not BYTES");
        engine.input(f->origin, board::decode_command(*b));
        ++inputs;
      } catch (const board::BoardError& e) {
        ++rejected_inputs;
        std::fprintf(stderr, "input from %s rejected: %s\n", f->origin.c_str(), e.what());
      }
    }
    if (client.closed()) {
      std::fprintf(stderr, "relay closed the connection\n");
      return 2;
    }
  }
  client.sync();
  for (const auto& e : client.take_errors())
    std::fprintf(stderr, "relay rejected %s seq %u: %s\n", e.label.c_str(), e.seq, e.message.c_str());
  std::printf("behave: %zu frames, %llu render commands, %llu inputs applied, %llu rejected\n", times.size(),
              static_cast<unsigned long long>(published), static_cast<unsigned long long>(inputs),
              static_cast<unsigned long long>(rejected_inputs));
  return g_stop ? 1 : 0;
}

int cmd_analyze(const std::string& log_path, double cone, std::int64_t min_contact, const std::string& out) {
  const auto log = gaze::gaze_log_from_jsonl(read_text(log_path));
  const auto m = gaze::analyze_log(log, cone, min_contact);
  const auto text = gaze::metrics_to_json(m);
  if (out.empty() || out == "-") {
    std::fputs(text.c_str(), stdout);
  } else {
    std::ofstream(out, std::ios::binary) << text;
    std::printf("%zu eye-contact event(s) over %lld ms -> %s\n", m.events.size(), static_cast<long long>(m.duration_ms),
                out.c_str());
  }
  return 0;
}

int cmd_run(const std::string& scenario, const std::string& out) {
  const auto cfg = scenario.empty() ? harness::default_scenario() : harness::load_scenario(scenario);
  const auto r = harness::run_scenario(cfg, out);
  for (const auto& c : r.checks) std::printf("%s %s: %s\n", c.pass ? "PASS" : "FAIL", c.name.c_str(), c.detail.c_str());
  std::printf("%llu frames, %llu render events, %zu eye-contact event(s); artifacts in %s\n",
              static_cast<unsigned long long>(r.frames), static_cast<unsigned long long>(r.render_events),
              r.metrics.events.size(), out.c_str());
  return r.ok() ? 0 : 1;
}

int cmd_replay(const std::string& dir) {
  const auto r = harness::replay(dir);
  std::printf("%s metrics recomputed from gaze.jsonl %s metrics.json (%zu eye-contact event(s))\n",
              r.matches ? "PASS" : "FAIL", r.matches ? "match" : "differ from", r.recomputed.events.size());
  return r.matches ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mirrorboard: mirrored shared-board presentation sync"};
  app.require_subcommand(1);

  relay::RelayConfig rc;
  auto* relay_cmd = app.add_subcommand("relay", "run the relay server");
  relay_cmd->add_option("--port", rc.tcp_port, "stream transport port")->capture_default_str();
  relay_cmd->add_option("--ws-port", rc.ws_port, "WebSocket port (path /ws)")->capture_default_str();
  relay_cmd->add_option("--bind", rc.bind_address, "bind address")->capture_default_str();
  relay_cmd->add_option("--tick", rc.tick_hz, "ticks per second")->capture_default_str()->check(CLI::PositiveNumber);
  relay_cmd->add_option("--log", rc.log_path, "JSONL event log");

  std::string script = "builtin:matrix-lesson", addr = "127.0.0.1:9090", transport = "stream";
  double time_scale = 1.0, behave_hz = 60.0;
  auto* behave_cmd = app.add_subcommand("behave", "drive a lecture script against a relay");
  behave_cmd->add_option("--script", script, "lecture script JSON or builtin:matrix-lesson")->capture_default_str();
  behave_cmd->add_option("--relay", addr, "relay address host:port")->capture_default_str();
  behave_cmd->add_option("--time-scale", time_scale, "lesson seconds per wall second")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  behave_cmd->add_option("--tick", behave_hz, "frames per wall second")->capture_default_str()->check(CLI::PositiveNumber);
  behave_cmd->add_option("--transport", transport, "stream or websocket")
      ->capture_default_str()
      ->check(CLI::IsMember({"stream", "websocket"}));

  std::string log_path, out_path;
  double cone = gaze::kDefaultConeDeg;
  std::int64_t min_contact = gaze::kDefaultMinContactMs;
  auto* analyze_cmd = app.add_subcommand("analyze", "gaze metrics from a session log");
  analyze_cmd->add_option("--log", log_path, "gaze log (JSONL)")->required();
  analyze_cmd->add_option("--cone", cone, "cone half-angle, degrees")->capture_default_str();
  analyze_cmd->add_option("--min-contact", min_contact, "minimum eye-contact duration, ms")->capture_default_str();
  analyze_cmd->add_option("--out", out_path, "metrics JSON (default stdout)");

  std::string scenario, run_out;
  auto* run_cmd = app.add_subcommand("run", "run a scenario end to end");
  run_cmd->add_option("--scenario", scenario, "scenario JSON (default: built-in three-person lesson)");
  run_cmd->add_option("--out", run_out, "artifact directory")->required();

  std::string replay_dir;
  auto* replay_cmd = app.add_subcommand("replay", "recompute metrics from a run's artifacts");
  replay_cmd->add_option("dir", replay_dir, "artifact directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (*relay_cmd) return cmd_relay(rc);
    if (*behave_cmd) return cmd_behave(script, addr, time_scale, behave_hz, transport);
    if (*analyze_cmd) return cmd_analyze(log_path, cone, min_contact, out_path);
    if (*run_cmd) return cmd_run(scenario, run_out);
    if (*replay_cmd) return cmd_replay(replay_dir);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "mirrorboard: %s\n", e.what());
    return 2;
  }
  return 2;
}
