#pragma once

#include <chrono>
#include <cstdint>
#include <deque>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mirrorboard/relay.hpp"
#include "mirrorboard/wire.hpp"

namespace mirrorboard::relay {

enum class Transport { stream, websocket };

struct ClientOptions {
  std::string host = "127.0.0.1";
  std::uint16_t port = 9090;
  Transport transport = Transport::stream;
  std::string scope = "mirrorboard";
  /// How long blocking reads wait before giving up with a ProtocolError.
  std::chrono::milliseconds timeout{10000};
};

/// A rejection the relay reported back for one of this node's packets.
struct RemoteError {
  RelayErrc code = RelayErrc::protocol_error;
  std::string message;
  std::string label;
  std::uint32_t seq = 0;
};

/// Blocking relay node. Connects, registers, and then publishes flakes and
/// reads the relay's per-tick deliveries.
class RelayClient {
 public:
  /// Throws RelayError(connection_refused) if the relay is unreachable, or the
  /// registration error code the relay answered with (DuplicateName, ...).
  RelayClient(const ClientOptions& options, const NodeRegistration& registration);
  ~RelayClient();
  RelayClient(const RelayClient&) = delete;
  RelayClient& operator=(const RelayClient&) = delete;

  const std::string& name() const { return name_; }

  /// Publishes with this node as origin and the next sequence number.
  /// Returns the sequence number used.
  std::uint32_t publish(std::string label, wire::DeliveryClass cls, wire::Payload payload);
  /// Sends a caller-built flake unchanged (origin and seq included).
  void publish_raw(const wire::Flake& f);
  /// Writes arbitrary bytes (stream transport) or one binary message (websocket).
  void send_bytes(std::span<const std::uint8_t> bytes);

  /// Round trip through the relay: returns once every packet sent before it
  /// has been processed. Deliveries read meanwhile are kept for read_tick().
  void sync();

  struct Tick {
    std::uint64_t frame = 0;
    std::vector<wire::Flake> flakes;
  };
  /// Reads until the next sys.tick marker and returns what arrived before it.
  Tick read_tick();

  /// Next routed (non-system) flake, or nullopt after `timeout`.
  std::optional<wire::Flake> poll(std::chrono::milliseconds timeout);

  /// Relay-reported rejections received so far (cleared by the call).
  std::vector<RemoteError> take_errors();
  /// Waits up to `timeout` for at least one rejection.
  std::optional<RemoteError> wait_error(std::chrono::milliseconds timeout);

  /// True once the relay closed the connection.
  bool closed() const { return closed_; }

  class Channel;

 private:
  /// Reads one packet and files it. Returns false on timeout.
  bool pump_one(std::chrono::milliseconds timeout);
  void file(wire::Flake f);

  ClientOptions options_;
  std::string name_;
  std::unique_ptr<Channel> channel_;
  std::uint32_t seq_ = 0;
  std::uint64_t sync_counter_ = 0;
  std::deque<wire::Flake> inbox_;  // includes sys.tick markers, in arrival order
  std::vector<std::string> acks_;
  std::vector<RemoteError> errors_;
  bool closed_ = false;
};

}  // namespace mirrorboard::relay
