#pragma once

// Transport-independent routing core of the relay.
//
// Emitters publish flakes between ticks. STATE flakes coalesce per
// (scope, label, origin); EVENT flakes queue. Nothing is delivered until
// route_tick(), which fans the tick's flakes out to every sink whose
// subscriptions match, never back to the publisher.

#include <cstdint>
#include <deque>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "mirrorboard/wire.hpp"

namespace mirrorboard::relay {

enum class RelayErrc {
  ok = 0,
  duplicate_name,
  empty_roles,
  invalid_registration,
  unknown_node,
  role_violation,
  origin_spoof,
  stale_seq,
  reserved_label,
  address_in_use,
  single_relay_violation,
  connection_refused,
  protocol_error,
};

const char* to_string(RelayErrc e);
RelayErrc relay_errc_from_string(std::string_view s);

class RelayError : public std::runtime_error {
 public:
  RelayError(RelayErrc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  RelayErrc code() const noexcept { return code_; }

 private:
  RelayErrc code_;
};

enum class NodeRole { emitter, sink };

struct NodeRegistration {
  std::string name;
  std::set<NodeRole> roles;
  /// Exact labels, or prefixes ending in '*' ("pose.*").
  std::vector<std::string> subscriptions;

  bool operator==(const NodeRegistration&) const = default;
};

/// JSON shape: {"name": "P", "roles": ["EMITTER", "SINK"], "subscriptions": ["render", "pose.*"]}
std::string registration_to_json(const NodeRegistration& reg);
/// Throws RelayError(invalid_registration) on malformed JSON or unknown role names.
NodeRegistration registration_from_json(std::string_view json);

bool label_matches(std::string_view pattern, std::string_view label);

// Reserved labels exchanged between relay and nodes.
inline constexpr std::string_view kRegisterLabel = "sys.register";
inline constexpr std::string_view kRegisteredLabel = "sys.registered";
inline constexpr std::string_view kErrorLabel = "sys.error";
inline constexpr std::string_view kSyncLabel = "sys.sync";
inline constexpr std::string_view kAckLabel = "sys.ack";
inline constexpr std::string_view kTickLabel = "sys.tick";
inline constexpr std::string_view kRelayOrigin = "relay";
inline constexpr std::string_view kRelayScope = "sys";

inline constexpr std::size_t kDefaultOutboxCap = 1024;

struct TickState {
  using SlotKey = std::tuple<std::string, std::string, std::string>;  // scope, label, origin

  std::uint64_t frame_no = 0;
  std::map<SlotKey, wire::Flake> coalesced;
  std::vector<wire::Flake> event_queue;  // arrival order
};

using Deliveries = std::map<std::string, std::vector<wire::Flake>>;

class Router {
 public:
  explicit Router(std::size_t outbox_cap = kDefaultOutboxCap) : outbox_cap_(outbox_cap) {}

  /// Throws RelayError(duplicate_name | empty_roles | invalid_registration).
  void register_node(const NodeRegistration& reg);
  void unregister_node(const std::string& name);
  bool has_node(const std::string& name) const { return nodes_.contains(name); }
  const NodeRegistration& node(const std::string& name) const;
  std::vector<std::string> node_names() const;

  /// Accepts a flake into the pending tick. Returns ok or the rejection reason;
  /// a rejected flake has no effect on routing state.
  RelayErrc publish(const std::string& node, const wire::Flake& f);

  /// Computes per-sink delivery lists for the pending tick and clears it.
  /// Order per sink: EVENTs by seq (arrival breaks ties), then STATEs by
  /// (label, scope, origin).
  Deliveries route_tick();

  /// route_tick() followed by enqueueing each sink's deliveries and a
  /// sys.tick marker for every node. Returns the frame number just closed.
  std::uint64_t tick();

  /// Appends to a node's outbound queue, enforcing the cap: overflow drops
  /// the oldest STATE flake; EVENTs are never dropped.
  void enqueue(const std::string& node, wire::Flake f);
  /// Removes and returns everything queued for a node.
  std::vector<wire::Flake> take_outbox(const std::string& node);
  std::size_t outbox_size(const std::string& node) const;
  std::uint64_t dropped(const std::string& node) const;

  /// Builds a relay-originated flake with the relay's own sequence counter.
  wire::Flake make_system_flake(std::string_view label, std::string text);

  const TickState& pending() const { return pending_; }
  std::uint64_t frame_no() const { return pending_.frame_no; }

 private:
  struct NodeState {
    NodeRegistration reg;
    bool has_seq = false;
    std::uint32_t last_seq = 0;
    std::deque<wire::Flake> outbox;
    std::uint64_t dropped = 0;
  };

  std::size_t outbox_cap_;
  std::map<std::string, NodeState> nodes_;
  TickState pending_;
  std::uint32_t relay_seq_ = 0;
};

}  // namespace mirrorboard::relay
