#include "mirrorboard/relay_server.hpp"

#include <deque>
#include <fstream>
#include <future>
#include <mutex>
#include <set>
#include <thread>

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
using wire::Flake;

namespace {

// Ports held by relays in this process. A second relay on the same port is a
// configuration error even when SO_REUSEPORT-style sharing would let it bind.
std::mutex g_ports_mutex;
std::set<std::uint16_t> g_bound_ports;

class PortClaim {
 public:
  PortClaim() = default;
  PortClaim(const PortClaim&) = delete;
  PortClaim& operator=(const PortClaim&) = delete;
  ~PortClaim() { release(); }

  void claim(std::uint16_t port) {
    std::lock_guard lock(g_ports_mutex);
    if (g_bound_ports.contains(port))
      throw RelayError(RelayErrc::single_relay_violation,
                       "a relay is already running on port " + std::to_string(port));
    g_bound_ports.insert(port);
    ports_.push_back(port);
  }
  void release() {
    std::lock_guard lock(g_ports_mutex);
    for (auto p : ports_) g_bound_ports.erase(p);
    ports_.clear();
  }

 private:
  std::vector<std::uint16_t> ports_;
};

}  // namespace

class Peer;

class Relay::Impl {
 public:
  explicit Impl(const RelayConfig& cfg)
      : config_(cfg), router_(cfg.outbox_cap), tcp_acceptor_(io_), ws_acceptor_(io_), timer_(io_) {
    if (!cfg.log_path.empty()) log_.open(cfg.log_path, std::ios::app);
  }

  void open(tcp::acceptor& acceptor, std::uint16_t port) {
    if (port != 0) claims_.claim(port);
    const tcp::endpoint ep(asio::ip::make_address(config_.bind_address), port);
    boost::system::error_code ec;
    acceptor.open(ep.protocol(), ec);
    if (!ec) acceptor.set_option(asio::socket_base::reuse_address(true), ec);
    if (!ec) acceptor.bind(ep, ec);
    if (!ec) acceptor.listen(asio::socket_base::max_listen_connections, ec);
    if (ec)
      throw RelayError(RelayErrc::address_in_use, "cannot listen on port " + std::to_string(port) + ": " + ec.message());
    if (port == 0) claims_.claim(acceptor.local_endpoint().port());
  }

  void start() {
    open(tcp_acceptor_, config_.tcp_port);
    open(ws_acceptor_, config_.ws_port);
    accept_tcp();
    accept_ws();
    if (config_.tick_hz > 0) {
      period_ = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
          std::chrono::duration<double>(1.0 / config_.tick_hz));
      next_tick_ = std::chrono::steady_clock::now() + period_;
      schedule_tick();
    }
    thread_ = std::thread([this] { io_.run(); });
  }

  void shutdown() {
    if (!thread_.joinable()) return;
    asio::post(io_, [this] {
      boost::system::error_code ec;
      tcp_acceptor_.close(ec);
      ws_acceptor_.close(ec);
      timer_.cancel();
      close_all_peers();
      io_.stop();
    });
    thread_.join();
    claims_.release();
    std::lock_guard lock(done_mutex_);
    done_ = true;
    done_cv_.notify_all();
  }

  std::uint64_t tick_now() {
    std::promise<std::uint64_t> done;
    auto fut = done.get_future();
    asio::post(io_, [&] { done.set_value(do_tick()); });
    return fut.get();
  }

  // Everything below runs on the I/O thread.

  std::uint64_t do_tick() {
    const std::uint64_t frame = router_.tick();
    {
      std::lock_guard lock(stats_mutex_);
      tick_times_.push_back(std::chrono::steady_clock::now());
      stats_.frames = frame;
    }
    flush_all();
    return frame;
  }

  void schedule_tick() {
    timer_.expires_at(next_tick_);
    timer_.async_wait([this](boost::system::error_code ec) {
      if (ec) return;
      do_tick();
      next_tick_ += period_;
      // Skip missed deadlines instead of bursting to catch up.
      const auto now = std::chrono::steady_clock::now();
      while (next_tick_ <= now) next_tick_ += period_;
      schedule_tick();
    });
  }

  void accept_tcp();
  void accept_ws();
  void flush_all();
  void close_all_peers();

  // Packet handling shared by both transports.
  void on_packet(const std::shared_ptr<Peer>& peer, std::span<const std::uint8_t> bytes);
  void on_closed(const std::shared_ptr<Peer>& peer);

  void log_event(nlohmann::json j) {
    if (!log_.is_open()) return;
    j["frame"] = router_.frame_no();
    log_ << j.dump() << '\n';
    log_.flush();
  }

  RelayConfig config_;
  asio::io_context io_;
  Router router_;
  tcp::acceptor tcp_acceptor_;
  tcp::acceptor ws_acceptor_;
  asio::steady_timer timer_;
  std::chrono::steady_clock::duration period_{};
  std::chrono::steady_clock::time_point next_tick_{};
  std::thread thread_;
  PortClaim claims_;
  std::ofstream log_;
  std::map<std::string, std::weak_ptr<Peer>> named_peers_;
  std::set<std::shared_ptr<Peer>> peers_;

  mutable std::mutex stats_mutex_;
  std::vector<std::chrono::steady_clock::time_point> tick_times_;
  RelayStats stats_;

  std::mutex done_mutex_;
  std::condition_variable done_cv_;
  bool done_ = false;
};

// One connected node. Subclasses supply the byte transport; the base class
// keeps at most one write batch in flight and pulls the next batch from the
// router outbox only when the previous one completed, so a slow reader
// accumulates flakes in the capped outbox rather than in socket buffers.
class Peer : public std::enable_shared_from_this<Peer> {
 public:
  explicit Peer(Relay::Impl& relay) : relay_(relay) {}
  virtual ~Peer() = default;

  virtual void start() = 0;
  virtual void close() = 0;

  const std::string& name() const { return name_; }
  bool registered() const { return !name_.empty(); }
  void set_name(std::string n) { name_ = std::move(n); }

  /// Queues a packet outside the router (replies to unregistered peers).
  void send_direct(const Flake& f) {
    direct_.push_back(wire::encode_flake(f));
    pump();
  }

  void close_after_flush() {
    closing_ = true;
    pump();
  }

  void pump() {
    if (writing_ || dead_) return;
    std::vector<Bytes> batch(std::make_move_iterator(direct_.begin()), std::make_move_iterator(direct_.end()));
    direct_.clear();
    if (registered())
      for (const auto& f : relay_.router_.take_outbox(name_)) batch.push_back(wire::encode_flake(f));
    if (batch.empty()) {
      if (closing_) close();
      return;
    }
    writing_ = true;
    write_batch(std::move(batch));
  }

 protected:
  virtual void write_batch(std::vector<Bytes> batch) = 0;

  void on_write_done(bool ok) {
    writing_ = false;
    if (!ok) {
      fail();
      return;
    }
    pump();
  }

  void fail() {
    if (dead_) return;
    dead_ = true;
    close();
    relay_.on_closed(shared_from_this());
  }

  Relay::Impl& relay_;
  std::string name_;
  std::deque<Bytes> direct_;
  bool writing_ = false;
  bool closing_ = false;
  bool dead_ = false;
};

class TcpPeer : public Peer {
 public:
  TcpPeer(Relay::Impl& relay, tcp::socket socket) : Peer(relay), socket_(std::move(socket)) {
    boost::system::error_code ec;
    socket_.set_option(tcp::no_delay(true), ec);
  }

  void start() override { read(); }
  void close() override {
    boost::system::error_code ec;
    socket_.shutdown(tcp::socket::shutdown_both, ec);
    socket_.close(ec);
  }

 private:
  void read() {
    socket_.async_read_some(asio::buffer(buf_), [self = shared_from_this(), this](boost::system::error_code ec,
                                                                                  std::size_t n) {
      if (ec) {
        fail();
        return;
      }
      std::vector<Bytes> packets;
      try {
        packets = decoder_.feed(std::span(buf_.data(), n));
      } catch (const wire::WireError& e) {
        relay_.log_event({{"event", "desync"}, {"node", name_}, {"error", e.what()}});
        fail();
        return;
      }
      for (const auto& p : packets) {
        if (dead_) return;
        relay_.on_packet(self, p);
      }
      if (!dead_) read();
    });
  }

  void write_batch(std::vector<Bytes> batch) override {
    out_.clear();
    for (const auto& b : batch) out_.insert(out_.end(), b.begin(), b.end());
    asio::async_write(socket_, asio::buffer(out_), [self = shared_from_this(), this](boost::system::error_code ec,
                                                                                    std::size_t) {
      on_write_done(!ec);
    });
  }

  tcp::socket socket_;
  std::array<std::uint8_t, 16384> buf_{};
  wire::StreamDecoder decoder_;
  Bytes out_;
};

class WsPeer : public Peer {
 public:
  WsPeer(Relay::Impl& relay, tcp::socket socket) : Peer(relay), ws_(std::move(socket)) {
    boost::system::error_code ec;
    ws_.next_layer().set_option(tcp::no_delay(true), ec);
  }

  void start() override { accept_upgrade(); }

  void close() override {
    boost::system::error_code ec;
    beast::get_lowest_layer(ws_).shutdown(tcp::socket::shutdown_both, ec);
    beast::get_lowest_layer(ws_).close(ec);
  }

  // Reads the HTTP upgrade request first so that paths other than /ws are refused.
  void accept_upgrade() {
    auto req = std::make_shared<beast::http::request<beast::http::string_body>>();
    auto buf = std::make_shared<beast::flat_buffer>();
    beast::http::async_read(ws_.next_layer(), *buf, *req,
                            [self = shared_from_this(), this, req, buf](boost::system::error_code ec, std::size_t) {
                              if (ec || !websocket::is_upgrade(*req) || req->target() != "/ws") {
                                fail();
                                return;
                              }
                              ws_.binary(true);
                              ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
                              ws_.async_accept(*req, [self, this](boost::system::error_code ec2) {
                                if (ec2) {
                                  fail();
                                  return;
                                }
                                read();
                              });
                            });
  }

 private:
  void read() {
    ws_.async_read(in_, [self = shared_from_this(), this](boost::system::error_code ec, std::size_t) {
      if (ec) {
        fail();
        return;
      }
      const auto data = in_.cdata();
      Bytes msg(static_cast<const std::uint8_t*>(data.data()), static_cast<const std::uint8_t*>(data.data()) + data.size());
      in_.consume(in_.size());
      relay_.on_packet(self, msg);
      if (!dead_) read();
    });
  }

  void write_batch(std::vector<Bytes> batch) override {
    queue_ = std::deque<Bytes>(std::make_move_iterator(batch.begin()), std::make_move_iterator(batch.end()));
    write_next();
  }

  void write_next() {
    if (queue_.empty()) {
      on_write_done(true);
      return;
    }
    current_ = std::move(queue_.front());
    queue_.pop_front();
    ws_.async_write(asio::buffer(current_), [self = shared_from_this(), this](boost::system::error_code ec, std::size_t) {
      if (ec) {
        on_write_done(false);
        return;
      }
      write_next();
    });
  }

  websocket::stream<tcp::socket> ws_;
  beast::flat_buffer in_;
  std::deque<Bytes> queue_;
  Bytes current_;
};

void Relay::Impl::accept_tcp() {
  tcp_acceptor_.async_accept([this](boost::system::error_code ec, tcp::socket socket) {
    if (ec) return;
    auto peer = std::make_shared<TcpPeer>(*this, std::move(socket));
    peers_.insert(peer);
    peer->start();
    accept_tcp();
  });
}

void Relay::Impl::accept_ws() {
  ws_acceptor_.async_accept([this](boost::system::error_code ec, tcp::socket socket) {
    if (ec) return;
    auto peer = std::make_shared<WsPeer>(*this, std::move(socket));
    peers_.insert(peer);
    peer->start();
    accept_ws();
  });
}

void Relay::Impl::flush_all() {
  for (const auto& p : peers_) p->pump();
}

void Relay::Impl::close_all_peers() {
  for (const auto& p : peers_) p->close();
  peers_.clear();
  named_peers_.clear();
}

void Relay::Impl::on_closed(const std::shared_ptr<Peer>& peer) {
  if (peer->registered()) {
    auto it = named_peers_.find(peer->name());
    if (it != named_peers_.end() && it->second.lock() == peer) {
      named_peers_.erase(it);
      router_.unregister_node(peer->name());
      log_event({{"event", "disconnect"}, {"node", peer->name()}});
    }
  }
  peers_.erase(peer);
}

void Relay::Impl::on_packet(const std::shared_ptr<Peer>& peer, std::span<const std::uint8_t> bytes) {
  auto reply_error = [&](RelayErrc code, const std::string& message, const Flake* about) {
    nlohmann::json j{{"code", to_string(code)}, {"message", message}};
    if (about) {
      j["label"] = about->label;
      j["seq"] = about->seq;
    }
    auto f = router_.make_system_flake(kErrorLabel, j.dump());
    if (peer->registered()) {
      router_.enqueue(peer->name(), std::move(f));
      peer->pump();
    } else {
      peer->send_direct(f);
    }
    std::lock_guard lock(stats_mutex_);
    ++stats_.rejected;
  };

  Flake f;
  if (auto e = wire::try_decode_flake(bytes, f); e != wire::WireErrc::ok) {
    log_event({{"event", "decode_error"}, {"node", peer->name()}, {"error", wire::to_string(e)}});
    reply_error(RelayErrc::protocol_error, std::string("undecodable packet: ") + wire::to_string(e), nullptr);
    return;
  }

  if (!peer->registered()) {
    if (f.label != kRegisterLabel || f.cls != wire::DeliveryClass::event || !f.payload.as_text()) {
      reply_error(RelayErrc::protocol_error, "first packet must be a sys.register EVENT with TEXT payload", &f);
      peer->close_after_flush();
      return;
    }
    try {
      auto reg = registration_from_json(*f.payload.as_text());
      router_.register_node(reg);
      peer->set_name(reg.name);
      named_peers_[reg.name] = peer;
      log_event({{"event", "register"}, {"node", reg.name}, {"registration", nlohmann::json::parse(registration_to_json(reg))}});
      router_.enqueue(reg.name, router_.make_system_flake(kRegisteredLabel, registration_to_json(reg)));
      peer->pump();
    } catch (const RelayError& e) {
      log_event({{"event", "register_rejected"}, {"error", to_string(e.code())}, {"message", e.what()}});
      reply_error(e.code(), e.what(), &f);
      peer->close_after_flush();
    }
    return;
  }

  if (f.label == kSyncLabel) {
    std::string token = f.payload.as_text() ? *f.payload.as_text() : std::string{};
    router_.enqueue(peer->name(), router_.make_system_flake(kAckLabel, std::move(token)));
    peer->pump();
    return;
  }

  const RelayErrc rc = router_.publish(peer->name(), f);
  if (rc != RelayErrc::ok) {
    log_event({{"event", "publish_rejected"}, {"node", peer->name()}, {"label", f.label}, {"seq", f.seq}, {"error", to_string(rc)}});
    reply_error(rc, std::string("publish rejected: ") + to_string(rc), &f);
    return;
  }
  std::lock_guard lock(stats_mutex_);
  ++stats_.accepted;
}

std::unique_ptr<Relay> Relay::start(const RelayConfig& config) {
  auto impl = std::make_unique<Impl>(config);
  impl->start();
  return std::unique_ptr<Relay>(new Relay(std::move(impl)));
}

Relay::Relay(std::unique_ptr<Impl> impl) : impl_(std::move(impl)) {}

Relay::~Relay() { stop(); }

std::uint16_t Relay::tcp_port() const { return impl_->tcp_acceptor_.local_endpoint().port(); }
std::uint16_t Relay::ws_port() const { return impl_->ws_acceptor_.local_endpoint().port(); }

std::uint64_t Relay::tick_now() { return impl_->tick_now(); }

std::vector<std::chrono::steady_clock::time_point> Relay::tick_times() const {
  std::lock_guard lock(impl_->stats_mutex_);
  return impl_->tick_times_;
}

RelayStats Relay::stats() const {
  if (!impl_->thread_.joinable()) {
    std::lock_guard lock(impl_->stats_mutex_);
    return impl_->stats_;
  }
  // Node count and drops live in the router; read them on the I/O thread.
  std::promise<std::pair<std::size_t, std::uint64_t>> p;
  auto fut = p.get_future();
  asio::post(impl_->io_, [&] {
    std::uint64_t dropped = 0;
    const auto names = impl_->router_.node_names();
    for (const auto& n : names) dropped += impl_->router_.dropped(n);
    p.set_value({names.size(), dropped});
  });
  const auto [nodes, dropped] = fut.get();
  std::lock_guard lock(impl_->stats_mutex_);
  RelayStats s = impl_->stats_;
  s.nodes = nodes;
  s.dropped = dropped;
  return s;
}

void Relay::wait() {
  std::unique_lock lock(impl_->done_mutex_);
  impl_->done_cv_.wait(lock, [&] { return impl_->done_; });
}

void Relay::stop() { impl_->shutdown(); }

}  // namespace mirrorboard::relay
