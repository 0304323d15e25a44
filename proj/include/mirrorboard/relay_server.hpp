#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "mirrorboard/relay.hpp"

namespace mirrorboard::relay {

struct RelayConfig {
  std::string bind_address = "0.0.0.0";
  /// 0 binds an ephemeral port; query the actual one from the handle.
  std::uint16_t tcp_port = 9090;
  std::uint16_t ws_port = 9091;
  /// Ticks per second. 0 disables the timer; ticks then only happen through tick_now().
  double tick_hz = 60.0;
  std::size_t outbox_cap = kDefaultOutboxCap;
  /// Optional JSON-lines event log (registrations, rejections, drops).
  std::string log_path;
};

struct RelayStats {
  std::uint64_t frames = 0;
  std::uint64_t accepted = 0;
  std::uint64_t rejected = 0;
  std::uint64_t dropped = 0;
  std::size_t nodes = 0;
};

/// A running relay: one framed-stream listener, one WebSocket listener at
/// path /ws, and the tick loop, all serviced by a single I/O thread that
/// owns the Router.
class Relay {
 public:
  /// Throws RelayError(single_relay_violation) if this process already runs
  /// a relay on one of the requested ports, RelayError(address_in_use) if
  /// the OS refuses the bind.
  static std::unique_ptr<Relay> start(const RelayConfig& config);

  ~Relay();
  Relay(const Relay&) = delete;
  Relay& operator=(const Relay&) = delete;

  std::uint16_t tcp_port() const;
  std::uint16_t ws_port() const;

  /// Runs one tick on the I/O thread and waits until its deliveries are
  /// queued on the sockets. Returns the closed frame number.
  std::uint64_t tick_now();

  /// Steady-clock time of every tick so far.
  std::vector<std::chrono::steady_clock::time_point> tick_times() const;
  RelayStats stats() const;

  /// Blocks until stop() is called from another thread or a signal handler.
  void wait();
  void stop();

  class Impl;

 private:
  explicit Relay(std::unique_ptr<Impl> impl);
  std::unique_ptr<Impl> impl_;
};

}  // namespace mirrorboard::relay
