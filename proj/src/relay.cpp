#include "mirrorboard/relay.hpp"

#include <algorithm>

#include "json.hpp"

namespace mirrorboard::relay {

using wire::DeliveryClass;
using wire::Flake;

namespace {

constexpr std::pair<RelayErrc, const char*> kErrcNames[] = {
    {RelayErrc::ok, "Ok"},
    {RelayErrc::duplicate_name, "DuplicateName"},
    {RelayErrc::empty_roles, "EmptyRoles"},
    {RelayErrc::invalid_registration, "InvalidRegistration"},
    {RelayErrc::unknown_node, "UnknownNode"},
    {RelayErrc::role_violation, "RoleViolation"},
    {RelayErrc::origin_spoof, "OriginSpoof"},
    {RelayErrc::stale_seq, "StaleSeq"},
    {RelayErrc::reserved_label, "ReservedLabel"},
    {RelayErrc::address_in_use, "AddressInUse"},
    {RelayErrc::single_relay_violation, "SingleRelayViolation"},
    {RelayErrc::connection_refused, "ConnectionRefused"},
    {RelayErrc::protocol_error, "ProtocolError"},
};

bool is_reserved(std::string_view label) { return label.starts_with("sys."); }

}  // namespace

const char* to_string(RelayErrc e) {
  for (const auto& [code, name] : kErrcNames)
    if (code == e) return name;
  return "Unknown";
}

RelayErrc relay_errc_from_string(std::string_view s) {
  for (const auto& [code, name] : kErrcNames)
    if (s == name) return code;
  return RelayErrc::protocol_error;
}

std::string registration_to_json(const NodeRegistration& reg) {
  nlohmann::json j;
  j["name"] = reg.name;
  j["roles"] = nlohmann::json::array();
  if (reg.roles.contains(NodeRole::emitter)) j["roles"].push_back("EMITTER");
  if (reg.roles.contains(NodeRole::sink)) j["roles"].push_back("SINK");
  j["subscriptions"] = reg.subscriptions;
  return j.dump();
}

NodeRegistration registration_from_json(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    NodeRegistration reg;
    reg.name = j.at("name").get<std::string>();
    for (const auto& r : j.at("roles")) {
      const auto s = r.get<std::string>();
      if (s == "EMITTER") {
        reg.roles.insert(NodeRole::emitter);
      } else if (s == "SINK") {
        reg.roles.insert(NodeRole::sink);
      } else {
        throw RelayError(RelayErrc::invalid_registration, "unknown role '" + s + "'");
      }
    }
    if (j.contains("subscriptions")) reg.subscriptions = j["subscriptions"].get<std::vector<std::string>>();
    return reg;
  } catch (const nlohmann::json::exception& e) {
    throw RelayError(RelayErrc::invalid_registration, std::string("bad registration record: ") + e.what());
  }
}

bool label_matches(std::string_view pattern, std::string_view label) {
  if (!pattern.empty() && pattern.back() == '*') return label.starts_with(pattern.substr(0, pattern.size() - 1));
  return pattern == label;
}

void Router::register_node(const NodeRegistration& reg) {
  if (reg.name.empty() || reg.name == kRelayOrigin)
    throw RelayError(RelayErrc::invalid_registration, "node name must be nonempty and not '" +
                                                          std::string(kRelayOrigin) + "'");
  if (reg.roles.empty()) throw RelayError(RelayErrc::empty_roles, "node '" + reg.name + "' has no roles");
  if (nodes_.contains(reg.name)) throw RelayError(RelayErrc::duplicate_name, "name '" + reg.name + "' in use");
  nodes_[reg.name].reg = reg;
}

void Router::unregister_node(const std::string& name) {
  nodes_.erase(name);
  // Drop what the departed node published but was never delivered.
  std::erase_if(pending_.coalesced, [&](const auto& kv) { return std::get<2>(kv.first) == name; });
  std::erase_if(pending_.event_queue, [&](const Flake& f) { return f.origin == name; });
}

const NodeRegistration& Router::node(const std::string& name) const {
  auto it = nodes_.find(name);
  if (it == nodes_.end()) throw RelayError(RelayErrc::unknown_node, "unknown node '" + name + "'");
  return it->second.reg;
}

std::vector<std::string> Router::node_names() const {
  std::vector<std::string> names;
  for (const auto& [name, _] : nodes_) names.push_back(name);
  return names;
}

RelayErrc Router::publish(const std::string& node, const Flake& f) {
  auto it = nodes_.find(node);
  if (it == nodes_.end()) return RelayErrc::unknown_node;
  NodeState& st = it->second;
  if (!st.reg.roles.contains(NodeRole::emitter)) return RelayErrc::role_violation;
  if (f.origin != node) return RelayErrc::origin_spoof;
  if (is_reserved(f.label)) return RelayErrc::reserved_label;
  if (st.has_seq && f.seq <= st.last_seq) return RelayErrc::stale_seq;
  st.has_seq = true;
  st.last_seq = f.seq;

  if (f.cls == DeliveryClass::state) {
    pending_.coalesced[{f.scope, f.label, f.origin}] = f;
  } else {
    pending_.event_queue.push_back(f);
  }
  return RelayErrc::ok;
}

Deliveries Router::route_tick() {
  std::vector<Flake> events = std::move(pending_.event_queue);
  std::stable_sort(events.begin(), events.end(), [](const Flake& a, const Flake& b) { return a.seq < b.seq; });

  std::vector<const Flake*> states;
  for (const auto& [key, f] : pending_.coalesced) states.push_back(&f);
  std::sort(states.begin(), states.end(), [](const Flake* a, const Flake* b) {
    return std::tie(a->label, a->scope, a->origin) < std::tie(b->label, b->scope, b->origin);
  });

  Deliveries out;
  for (const auto& [name, st] : nodes_) {
    if (!st.reg.roles.contains(NodeRole::sink)) continue;
    auto wants = [&](const Flake& f) {
      if (f.origin == name) return false;
      return std::any_of(st.reg.subscriptions.begin(), st.reg.subscriptions.end(),
                         [&](const std::string& p) { return label_matches(p, f.label); });
    };
    auto& list = out[name];
    for (const auto& f : events)
      if (wants(f)) list.push_back(f);
    for (const Flake* f : states)
      if (wants(*f)) list.push_back(*f);
  }

  pending_.coalesced.clear();
  pending_.event_queue.clear();
  ++pending_.frame_no;
  return out;
}

std::uint64_t Router::tick() {
  auto deliveries = route_tick();
  const std::uint64_t frame = pending_.frame_no;
  for (auto& [name, flakes] : deliveries)
    for (auto& f : flakes) enqueue(name, std::move(f));
  for (const auto& [name, _] : nodes_) enqueue(name, make_system_flake(kTickLabel, std::to_string(frame)));
  return frame;
}

void Router::enqueue(const std::string& node, Flake f) {
  auto it = nodes_.find(node);
  if (it == nodes_.end()) return;
  NodeState& st = it->second;
  st.outbox.push_back(std::move(f));
  if (st.outbox.size() <= outbox_cap_) return;
  auto victim = std::find_if(st.outbox.begin(), st.outbox.end(),
                             [](const Flake& q) { return q.cls == DeliveryClass::state; });
  if (victim != st.outbox.end()) {
    st.outbox.erase(victim);
    ++st.dropped;
  }
}

std::vector<Flake> Router::take_outbox(const std::string& node) {
  auto it = nodes_.find(node);
  if (it == nodes_.end()) return {};
  std::vector<Flake> out(std::make_move_iterator(it->second.outbox.begin()),
                         std::make_move_iterator(it->second.outbox.end()));
  it->second.outbox.clear();
  return out;
}

std::size_t Router::outbox_size(const std::string& node) const {
  auto it = nodes_.find(node);
  return it == nodes_.end() ? 0 : it->second.outbox.size();
}

std::uint64_t Router::dropped(const std::string& node) const {
  auto it = nodes_.find(node);
  return it == nodes_.end() ? 0 : it->second.dropped;
}

Flake Router::make_system_flake(std::string_view label, std::string text) {
  Flake f;
  f.scope = std::string(kRelayScope);
  f.label = std::string(label);
  f.origin = std::string(kRelayOrigin);
  f.cls = DeliveryClass::event;
  f.seq = ++relay_seq_;
  f.payload = wire::Payload::text(std::move(text));
  return f;
}

}  // namespace mirrorboard::relay
