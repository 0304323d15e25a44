#include "mirrorboard/client.hpp"

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include "json.hpp"

namespace mirrorboard::relay {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;
using wire::Bytes;
using wire::DeliveryClass;
using wire::Flake;

// Packet channel over either transport. Reads run the private io_context for
// at most the caller's timeout.
class RelayClient::Channel {
 public:
  enum class ReadStatus { packet, timeout, closed };

  virtual ~Channel() = default;
  virtual void send(std::span<const std::uint8_t> bytes) = 0;
  virtual ReadStatus receive(Bytes& out, std::chrono::milliseconds timeout) = 0;

 protected:
  template <typename Op>
  bool run_with_timeout(Op&& start, std::chrono::milliseconds timeout, boost::system::error_code& ec,
                        const std::function<void()>& cancel) {
    bool done = false;
    start([&](boost::system::error_code e, std::size_t n) {
      ec = e;
      last_n_ = n;
      done = true;
    });
    io_.restart();
    io_.run_for(timeout);
    if (!done) {
      cancel();
      io_.restart();
      io_.run();
      return false;
    }
    return true;
  }

  asio::io_context io_;
  std::size_t last_n_ = 0;
};

namespace {

tcp::endpoint resolve(asio::io_context& io, const ClientOptions& o) {
  tcp::resolver resolver(io);
  boost::system::error_code ec;
  auto results = resolver.resolve(o.host, std::to_string(o.port), ec);
  if (ec || results.empty()) throw RelayError(RelayErrc::connection_refused, "cannot resolve " + o.host);
  return *results.begin();
}

class StreamChannel : public RelayClient::Channel {
 public:
  explicit StreamChannel(const ClientOptions& o) : socket_(io_) {
    boost::system::error_code ec;
    socket_.connect(resolve(io_, o), ec);
    if (ec) throw RelayError(RelayErrc::connection_refused, "connect " + o.host + ":" + std::to_string(o.port) + ": " + ec.message());
    socket_.set_option(tcp::no_delay(true), ec);
  }

  void send(std::span<const std::uint8_t> bytes) override {
    boost::system::error_code ec;
    asio::write(socket_, asio::buffer(bytes.data(), bytes.size()), ec);
    if (ec) throw RelayError(RelayErrc::protocol_error, "write failed: " + ec.message());
  }

  ReadStatus receive(Bytes& out, std::chrono::milliseconds timeout) override {
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    while (ready_.empty()) {
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
      if (left.count() <= 0) return ReadStatus::timeout;
      boost::system::error_code ec;
      const bool done = run_with_timeout(
          [&](auto handler) { socket_.async_read_some(asio::buffer(buf_), handler); }, left, ec,
          [&] { socket_.cancel(); });
      if (!done) return ReadStatus::timeout;
      if (ec) return ReadStatus::closed;
      for (auto& p : decoder_.feed(std::span(buf_.data(), last_n_))) ready_.push_back(std::move(p));
    }
    out = std::move(ready_.front());
    ready_.pop_front();
    return ReadStatus::packet;
  }

 private:
  tcp::socket socket_;
  std::array<std::uint8_t, 16384> buf_{};
  wire::StreamDecoder decoder_;
  std::deque<Bytes> ready_;
};

class WebSocketChannel : public RelayClient::Channel {
 public:
  explicit WebSocketChannel(const ClientOptions& o) : ws_(io_) {
    boost::system::error_code ec;
    beast::get_lowest_layer(ws_).connect(resolve(io_, o), ec);
    if (ec) throw RelayError(RelayErrc::connection_refused, "connect " + o.host + ":" + std::to_string(o.port) + ": " + ec.message());
    beast::get_lowest_layer(ws_).set_option(tcp::no_delay(true), ec);
    ws_.handshake(o.host + ":" + std::to_string(o.port), "/ws", ec);
    if (ec) throw RelayError(RelayErrc::connection_refused, "websocket handshake: " + ec.message());
    ws_.binary(true);
  }

  void send(std::span<const std::uint8_t> bytes) override {
    boost::system::error_code ec;
    ws_.write(asio::buffer(bytes.data(), bytes.size()), ec);
    if (ec) throw RelayError(RelayErrc::protocol_error, "write failed: " + ec.message());
  }

  ReadStatus receive(Bytes& out, std::chrono::milliseconds timeout) override {
    boost::system::error_code ec;
    const bool done = run_with_timeout([&](auto handler) { ws_.async_read(in_, handler); }, timeout, ec,
                                       [&] { beast::get_lowest_layer(ws_).cancel(); });
    if (!done) return ReadStatus::timeout;
    if (ec) return ReadStatus::closed;
    const auto data = in_.cdata();
    out.assign(static_cast<const std::uint8_t*>(data.data()), static_cast<const std::uint8_t*>(data.data()) + data.size());
    in_.consume(in_.size());
    return ReadStatus::packet;
  }

 private:
  websocket::stream<tcp::socket> ws_;
  beast::flat_buffer in_;
};

RemoteError parse_remote_error(const Flake& f) {
  RemoteError e;
  if (const auto* t = f.payload.as_text()) {
    try {
      const auto j = nlohmann::json::parse(*t);
      e.code = relay_errc_from_string(j.value("code", ""));
      e.message = j.value("message", "");
      e.label = j.value("label", "");
      e.seq = j.value("seq", 0u);
    } catch (const nlohmann::json::exception&) {
      e.message = *t;
    }
  }
  return e;
}

}  // namespace

RelayClient::RelayClient(const ClientOptions& options, const NodeRegistration& registration)
    : options_(options), name_(registration.name) {
  if (options.transport == Transport::stream) {
    channel_ = std::make_unique<StreamChannel>(options);
  } else {
    channel_ = std::make_unique<WebSocketChannel>(options);
  }
  Flake reg;
  reg.scope = options_.scope;
  reg.label = std::string(kRegisterLabel);
  reg.origin = name_.empty() ? std::string("?") : name_;
  reg.cls = DeliveryClass::event;
  reg.seq = ++seq_;
  reg.payload = wire::Payload::text(registration_to_json(registration));
  publish_raw(reg);

  // The relay answers with sys.registered or sys.error before anything else.
  const auto deadline = std::chrono::steady_clock::now() + options_.timeout;
  for (;;) {
    Bytes packet;
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
    const auto st = channel_->receive(packet, std::max(left, std::chrono::milliseconds(1)));
    if (st != Channel::ReadStatus::packet)
      throw RelayError(RelayErrc::protocol_error, "no registration reply from relay");
    Flake f = wire::decode_flake(packet);
    if (f.label == kRegisteredLabel) return;
    if (f.label == kErrorLabel) {
      auto e = parse_remote_error(f);
      throw RelayError(e.code, e.message);
    }
    file(std::move(f));
  }
}

RelayClient::~RelayClient() = default;

std::uint32_t RelayClient::publish(std::string label, DeliveryClass cls, wire::Payload payload) {
  Flake f;
  f.scope = options_.scope;
  f.label = std::move(label);
  f.origin = name_;
  f.cls = cls;
  f.seq = ++seq_;
  f.payload = std::move(payload);
  publish_raw(f);
  return f.seq;
}

void RelayClient::publish_raw(const Flake& f) {
  const auto bytes = wire::encode_flake(f);
  channel_->send(bytes);
}

void RelayClient::send_bytes(std::span<const std::uint8_t> bytes) { channel_->send(bytes); }

void RelayClient::file(Flake f) {
  if (f.label == kErrorLabel) {
    errors_.push_back(parse_remote_error(f));
  } else if (f.label == kAckLabel) {
    acks_.push_back(f.payload.as_text() ? *f.payload.as_text() : std::string{});
  } else {
    inbox_.push_back(std::move(f));
  }
}

bool RelayClient::pump_one(std::chrono::milliseconds timeout) {
  if (closed_) return false;
  Bytes packet;
  switch (channel_->receive(packet, timeout)) {
    case Channel::ReadStatus::timeout: return false;
    case Channel::ReadStatus::closed: closed_ = true; return false;
    case Channel::ReadStatus::packet: break;
  }
  file(wire::decode_flake(packet));
  return true;
}

void RelayClient::sync() {
  const std::string token = name_ + "#" + std::to_string(++sync_counter_);
  publish(std::string(kSyncLabel), DeliveryClass::event, wire::Payload::text(token));
  for (;;) {
    auto it = std::find(acks_.begin(), acks_.end(), token);
    if (it != acks_.end()) {
      acks_.erase(it);
      return;
    }
    if (!pump_one(options_.timeout))
      throw RelayError(RelayErrc::protocol_error, closed_ ? "relay closed the connection" : "sync timed out");
  }
}

RelayClient::Tick RelayClient::read_tick() {
  Tick tick;
  for (;;) {
    while (!inbox_.empty()) {
      Flake f = std::move(inbox_.front());
      inbox_.pop_front();
      if (f.label == kTickLabel) {
        tick.frame = std::stoull(*f.payload.as_text());
        return tick;
      }
      tick.flakes.push_back(std::move(f));
    }
    if (!pump_one(options_.timeout))
      throw RelayError(RelayErrc::protocol_error, closed_ ? "relay closed the connection" : "tick timed out");
  }
}

std::optional<Flake> RelayClient::poll(std::chrono::milliseconds timeout) {
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  for (;;) {
    while (!inbox_.empty()) {
      Flake f = std::move(inbox_.front());
      inbox_.pop_front();
      if (f.label != kTickLabel) return f;
    }
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0 || !pump_one(left)) {
      if (inbox_.empty()) return std::nullopt;
    }
  }
}

std::vector<RemoteError> RelayClient::take_errors() { return std::exchange(errors_, {}); }

std::optional<RemoteError> RelayClient::wait_error(std::chrono::milliseconds timeout) {
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  while (errors_.empty()) {
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0 || !pump_one(left)) break;
  }
  if (errors_.empty()) return std::nullopt;
  auto e = errors_.front();
  errors_.erase(errors_.begin());
  return e;
}

}  // namespace mirrorboard::relay
