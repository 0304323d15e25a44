#include "mirrorboard/relay_server.hpp"

#include <gtest/gtest.h>

#include <boost/asio.hpp>

#include <numeric>
#include <thread>

#include "mirrorboard/client.hpp"

using namespace mirrorboard::relay;
using mirrorboard::wire::DeliveryClass;
using mirrorboard::wire::Flake;
using mirrorboard::wire::Payload;
using namespace std::chrono_literals;

namespace {

const std::set<NodeRole> kBoth = {NodeRole::emitter, NodeRole::sink};

RelayConfig manual_config() {
  RelayConfig c;
  c.bind_address = "127.0.0.1";
  c.tcp_port = 0;
  c.ws_port = 0;
  c.tick_hz = 0;
  return c;
}

ClientOptions opts(const Relay& relay, Transport t = Transport::stream) {
  ClientOptions o;
  o.port = t == Transport::stream ? relay.tcp_port() : relay.ws_port();
  o.transport = t;
  o.timeout = 5s;
  return o;
}

std::unique_ptr<RelayClient> connect(const Relay& relay, std::string name, std::set<NodeRole> roles,
                                     std::vector<std::string> subs, Transport t = Transport::stream) {
  return std::make_unique<RelayClient>(opts(relay, t), NodeRegistration{std::move(name), std::move(roles), std::move(subs)});
}

}  // namespace

TEST(RelayServer, StartsOnFreePortAndAcceptsClients) {
  auto relay = Relay::start(manual_config());
  EXPECT_NE(relay->tcp_port(), 0);
  EXPECT_NE(relay->ws_port(), 0);
  auto c = connect(*relay, "P", kBoth, {"render", "pose.*"});
  EXPECT_EQ(relay->stats().nodes, 1u);
}

TEST(RelayServer, SecondRelayOnSamePortRejected) {
  auto relay = Relay::start(manual_config());
  auto cfg = manual_config();
  cfg.tcp_port = relay->tcp_port();
  try {
    Relay::start(cfg);
    FAIL() << "second relay started";
  } catch (const RelayError& e) {
    EXPECT_EQ(e.code(), RelayErrc::single_relay_violation);
  }
}

TEST(RelayServer, ForeignListenerIsAddressInUse) {
  boost::asio::io_context io;
  boost::asio::ip::tcp::acceptor other(io, {boost::asio::ip::make_address("127.0.0.1"), 0});
  auto cfg = manual_config();
  cfg.tcp_port = other.local_endpoint().port();
  try {
    Relay::start(cfg);
    FAIL();
  } catch (const RelayError& e) {
    EXPECT_EQ(e.code(), RelayErrc::address_in_use);
  }
}

TEST(RelayServer, PortReusableAfterStop) {
  std::uint16_t port;
  {
    auto relay = Relay::start(manual_config());
    port = relay->tcp_port();
  }
  auto cfg = manual_config();
  cfg.tcp_port = port;
  EXPECT_NO_THROW(Relay::start(cfg));
}

TEST(RelayServer, DuplicateNameRejected) {
  auto relay = Relay::start(manual_config());
  auto a = connect(*relay, "P", kBoth, {});
  try {
    connect(*relay, "P", kBoth, {});
    FAIL();
  } catch (const RelayError& e) {
    EXPECT_EQ(e.code(), RelayErrc::duplicate_name);
  }
}

TEST(RelayServer, EmptyRolesRejected) {
  auto relay = Relay::start(manual_config());
  try {
    connect(*relay, "Q", {}, {});
    FAIL();
  } catch (const RelayError& e) {
    EXPECT_EQ(e.code(), RelayErrc::empty_roles);
  }
}

TEST(RelayServer, NameFreedOnDisconnect) {
  auto relay = Relay::start(manual_config());
  auto a = connect(*relay, "P", kBoth, {});
  a.reset();
  for (int i = 0; i < 100 && relay->stats().nodes != 0; ++i) std::this_thread::sleep_for(10ms);
  EXPECT_NO_THROW(connect(*relay, "P", kBoth, {}));
}

TEST(RelayServer, SinkOnlyPublishGetsRoleViolation) {
  auto relay = Relay::start(manual_config());
  auto s = connect(*relay, "S", {NodeRole::sink}, {"render"});
  s->publish("render", DeliveryClass::event, Payload::bytes({1}));
  auto err = s->wait_error(5s);
  ASSERT_TRUE(err);
  EXPECT_EQ(err->code, RelayErrc::role_violation);
}

TEST(RelayServer, OriginSpoofReported) {
  auto relay = Relay::start(manual_config());
  auto y = connect(*relay, "Y", kBoth, {});
  Flake f;
  f.scope = "demo";
  f.label = "render";
  f.origin = "X";
  f.cls = DeliveryClass::event;
  f.seq = 100;
  f.payload = Payload::bytes({});
  y->publish_raw(f);
  auto err = y->wait_error(5s);
  ASSERT_TRUE(err);
  EXPECT_EQ(err->code, RelayErrc::origin_spoof);
  EXPECT_EQ(err->seq, 100u);
}

TEST(RelayServer, CoalescesStateAndKeepsEventsAcrossSockets) {
  auto relay = Relay::start(manual_config());
  auto e = connect(*relay, "E", kBoth, {"render"});
  auto s = connect(*relay, "S", kBoth, {"pose.*", "render"});
  e->publish("pose.E", DeliveryClass::state, Payload::ints({1}));
  e->publish("pose.E", DeliveryClass::state, Payload::ints({2}));
  e->publish("render", DeliveryClass::event, Payload::ints({10}));
  e->publish("render", DeliveryClass::event, Payload::ints({11}));
  e->sync();
  relay->tick_now();
  auto tick = s->read_tick();
  ASSERT_EQ(tick.flakes.size(), 3u);
  EXPECT_EQ(tick.flakes[0].payload, Payload::ints({10}));
  EXPECT_EQ(tick.flakes[1].payload, Payload::ints({11}));
  EXPECT_EQ(tick.flakes[2].payload, Payload::ints({2}));
  // E subscribed to render but must not receive its own flakes.
  auto etick = e->read_tick();
  EXPECT_TRUE(etick.flakes.empty());
  EXPECT_EQ(etick.frame, tick.frame);
}

TEST(RelayServer, WebSocketEndpointCarriesSamePackets) {
  auto relay = Relay::start(manual_config());
  auto tcp_node = connect(*relay, "T", kBoth, {"render"});
  auto ws_node = connect(*relay, "W", kBoth, {"render"}, Transport::websocket);
  ws_node->publish("render", DeliveryClass::event, Payload::text("from-ws"));
  ws_node->sync();
  tcp_node->publish("render", DeliveryClass::event, Payload::text("from-tcp"));
  tcp_node->sync();
  relay->tick_now();
  auto t = tcp_node->read_tick();
  auto w = ws_node->read_tick();
  ASSERT_EQ(t.flakes.size(), 1u);
  ASSERT_EQ(w.flakes.size(), 1u);
  EXPECT_EQ(*t.flakes[0].payload.as_text(), "from-ws");
  EXPECT_EQ(*w.flakes[0].payload.as_text(), "from-tcp");
}

TEST(RelayServer, WebSocketRejectsOtherPaths) {
  auto relay = Relay::start(manual_config());
  boost::asio::io_context io;
  boost::asio::ip::tcp::socket sock(io);
  sock.connect({boost::asio::ip::make_address("127.0.0.1"), relay->ws_port()});
  const std::string req =
      "GET /other HTTP/1.1\r\nHost: x\r\nUpgrade: websocket\r\nConnection: Upgrade\r\n"
      "Sec-WebSocket-Key: dGhlIHNhbXBsZSBub25jZQ==\r\nSec-WebSocket-Version: 13\r\n\r\n";
  boost::asio::write(sock, boost::asio::buffer(req));
  std::array<char, 256> buf;
  boost::system::error_code ec;
  const auto n = sock.read_some(boost::asio::buffer(buf), ec);
  EXPECT_TRUE(ec || std::string(buf.data(), n).find("101") == std::string::npos);
}

TEST(RelayServer, FirstPacketMustBeRegistration) {
  auto relay = Relay::start(manual_config());
  boost::asio::io_context io;
  boost::asio::ip::tcp::socket sock(io);
  sock.connect({boost::asio::ip::make_address("127.0.0.1"), relay->tcp_port()});
  Flake f;
  f.scope = "demo";
  f.label = "render";
  f.origin = "Z";
  f.cls = DeliveryClass::event;
  f.seq = 1;
  boost::asio::write(sock, boost::asio::buffer(mirrorboard::wire::encode_flake(f)));
  std::vector<std::uint8_t> got;
  std::array<std::uint8_t, 512> buf;
  boost::system::error_code ec;
  while (!ec) {
    const auto n = sock.read_some(boost::asio::buffer(buf), ec);
    got.insert(got.end(), buf.begin(), buf.begin() + n);
  }
  // Relay answered with one sys.error and closed the connection.
  auto split = mirrorboard::wire::split_stream(got);
  ASSERT_EQ(split.packets.size(), 1u);
  EXPECT_EQ(mirrorboard::wire::decode_flake(split.packets[0]).label, kErrorLabel);
}

TEST(RelayServer, CorruptPacketReportedConnectionKept) {
  auto relay = Relay::start(manual_config());
  auto e = connect(*relay, "E", kBoth, {});
  Flake f;
  f.scope = "demo";
  f.label = "render";
  f.origin = "E";
  f.cls = DeliveryClass::event;
  f.seq = 50;
  auto bytes = mirrorboard::wire::encode_flake(f);
  bytes[10] ^= 0xFF;
  e->send_bytes(bytes);
  auto err = e->wait_error(5s);
  ASSERT_TRUE(err);
  EXPECT_EQ(err->code, RelayErrc::protocol_error);
  EXPECT_NO_THROW(e->sync());
}

TEST(RelayServer, DesyncDropsConnection) {
  auto relay = Relay::start(manual_config());
  auto e = connect(*relay, "E", kBoth, {});
  const std::uint8_t junk[] = {0x00, 0x01, 0x02, 0x03};
  e->send_bytes(junk);
  EXPECT_FALSE(e->poll(2s));
  EXPECT_TRUE(e->closed());
}

TEST(RelayServer, TickRateSixtyHz) {
  auto cfg = manual_config();
  cfg.tick_hz = 60;
  auto relay = Relay::start(cfg);
  std::this_thread::sleep_for(5s);
  auto times = relay->tick_times();
  relay->stop();
  ASSERT_GT(times.size(), 250u);
  const double span_ms = std::chrono::duration<double, std::milli>(times.back() - times.front()).count();
  const double mean = span_ms / static_cast<double>(times.size() - 1);
  EXPECT_NEAR(mean, 1000.0 / 60.0, 0.5);
  EXPECT_NEAR(static_cast<double>(times.size()), 300.0, 6.0);
}

TEST(RelayServer, TimerDrivenDeliveryReachesSinks) {
  auto cfg = manual_config();
  cfg.tick_hz = 60;
  auto relay = Relay::start(cfg);
  auto e = connect(*relay, "E", kBoth, {});
  auto s = connect(*relay, "S", kBoth, {"render"});
  e->publish("render", DeliveryClass::event, Payload::text("hi"));
  auto got = s->poll(2s);
  ASSERT_TRUE(got);
  EXPECT_EQ(*got->payload.as_text(), "hi");
}
