#pragma once

// WebSocket transport for live sessions (Boost.Beast).
//
// One Session per connection. Reads, ticks and writes for a connection all
// run on that connection's strand; outbound frames are queued and written
// strictly in order. Plain HTTP GETs are answered from an optional static
// directory so the operator console can be served from the same port.

#include <atomic>
#include <chrono>
#include <deque>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <csignal>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include "occlusim/session.hpp"
#include "occlusim/store.hpp"

namespace occlusim::net {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;

inline constexpr unsigned short kDefaultPort = 8765;
inline constexpr const char* kPortEnvVar = "OCCLUSIM_PORT";

/// Port from the environment, or the compiled-in default.
inline unsigned short default_port() {
  if (const char* env = std::getenv(kPortEnvVar)) {
    try {
      const int value = std::stoi(env);
      if (value > 0 && value < 65536) return static_cast<unsigned short>(value);
    } catch (const std::exception&) {
    }
  }
  return kDefaultPort;
}

struct ServerOptions {
  std::string address = "0.0.0.0";
  unsigned short port = kDefaultPort;  // 0 picks an ephemeral port
  SessionConfig session;
  std::optional<std::filesystem::path> record_dir;  // persist each detached session here
  std::optional<std::filesystem::path> static_dir;
  double tick_hz = 40.0;
  int threads = 2;
  std::function<void(const std::string&)> log = [](const std::string&) {};
};

namespace detail {

inline std::string mime_type(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".html" || ext == ".htm") return "text/html";
  if (ext == ".js" || ext == ".mjs") return "application/javascript";
  if (ext == ".css") return "text/css";
  if (ext == ".json") return "application/json";
  if (ext == ".svg") return "image/svg+xml";
  if (ext == ".png") return "image/png";
  return "application/octet-stream";
}

class WsConnection : public std::enable_shared_from_this<WsConnection> {
 public:
  WsConnection(tcp::socket&& socket, SessionConfig cfg, const ServerOptions& opts)
      : ws_(std::move(socket)),
        timer_(ws_.get_executor()),
        session_(std::move(cfg)),
        opts_(opts),
        period_(std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(1.0 / opts.tick_hz))) {}

  void start(http::request<http::string_body> req) {
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.text(true);
    ws_.async_accept(req, beast::bind_front_handler(&WsConnection::on_accept, shared_from_this()));
  }

 private:
  using Clock = std::chrono::steady_clock;

  void on_accept(beast::error_code ec) {
    if (ec) return opts_.log("websocket accept: " + ec.message());
    next_tick_ = Clock::now() + period_;
    schedule_tick();
    do_read();
  }

  void do_read() {
    ws_.async_read(buffer_, beast::bind_front_handler(&WsConnection::on_read, shared_from_this()));
  }

  void on_read(beast::error_code ec, std::size_t) {
    if (ec) {
      stopped_ = true;
      timer_.cancel();
      return;
    }
    const std::string text = beast::buffers_to_string(buffer_.data());
    buffer_.consume(buffer_.size());
    deliver(session_.handle_message(text));
    do_read();
  }

  void schedule_tick() {
    timer_.expires_at(next_tick_);
    timer_.async_wait(beast::bind_front_handler(&WsConnection::on_tick, shared_from_this()));
  }

  void on_tick(beast::error_code ec) {
    if (ec || stopped_) return;
    deliver(session_.tick());
    next_tick_ += period_;
    // Skip missed deadlines instead of bursting to catch up.
    if (const auto now = Clock::now(); next_tick_ < now - period_) next_tick_ = now + period_;
    schedule_tick();
  }

  void deliver(const Session::Messages& messages) {
    for (const auto& m : messages) outbox_.push_back(protocol::encode(m).dump());
    if (session_.closed() && !persisted_ && opts_.record_dir) persist();
    if (!session_.closed()) persisted_ = false;
    if (!writing_ && !outbox_.empty()) do_write();
  }

  void persist() {
    persisted_ = true;
    try {
      write_record(session_.record(), *opts_.record_dir, /*overwrite=*/true);
    } catch (const std::exception& err) {
      opts_.log(std::string("persist failed: ") + err.what());
    }
  }

  void do_write() {
    writing_ = true;
    ws_.async_write(asio::buffer(outbox_.front()),
                    beast::bind_front_handler(&WsConnection::on_write, shared_from_this()));
  }

  void on_write(beast::error_code ec, std::size_t) {
    if (ec) {
      stopped_ = true;
      timer_.cancel();
      return;
    }
    outbox_.pop_front();
    writing_ = false;
    if (!outbox_.empty()) do_write();
  }

  websocket::stream<beast::tcp_stream> ws_;
  asio::steady_timer timer_;
  beast::flat_buffer buffer_;
  Session session_;
  const ServerOptions& opts_;
  Clock::duration period_;
  Clock::time_point next_tick_{};
  std::deque<std::string> outbox_;
  bool writing_ = false;
  bool stopped_ = false;
  bool persisted_ = false;
};

class HttpConnection : public std::enable_shared_from_this<HttpConnection> {
 public:
  HttpConnection(tcp::socket&& socket, const ServerOptions& opts, std::function<SessionConfig()> next_cfg)
      : stream_(std::move(socket)), opts_(opts), next_cfg_(std::move(next_cfg)) {}

  void start() {
    stream_.expires_after(std::chrono::seconds(30));
    http::async_read(stream_, buffer_, req_, beast::bind_front_handler(&HttpConnection::on_read, shared_from_this()));
  }

 private:
  void on_read(beast::error_code ec, std::size_t) {
    if (ec) return;
    if (websocket::is_upgrade(req_)) {
      stream_.expires_never();
      std::make_shared<WsConnection>(stream_.release_socket(), next_cfg_(), opts_)->start(std::move(req_));
      return;
    }
    respond();
  }

  void respond() {
    auto res = std::make_shared<http::response<http::string_body>>();
    res->version(req_.version());
    res->keep_alive(false);
    res->set(http::field::server, "occlusim");
    const std::string target(req_.target());
    std::optional<std::filesystem::path> file;
    if (opts_.static_dir && req_.method() == http::verb::get && target.find("..") == std::string::npos) {
      auto rel = target.substr(0, target.find('?'));
      if (rel.empty() || rel == "/") rel = "/index.html";
      auto candidate = *opts_.static_dir / rel.substr(1);
      if (std::filesystem::is_regular_file(candidate)) file = candidate;
    }
    if (file) {
      std::ifstream in(*file, std::ios::binary);
      std::ostringstream body;
      body << in.rdbuf();
      res->result(http::status::ok);
      res->set(http::field::content_type, mime_type(*file));
      res->body() = body.str();
    } else {
      res->result(http::status::not_found);
      res->set(http::field::content_type, "text/plain");
      res->body() = "not found\n";
    }
    res->prepare_payload();
    http::async_write(stream_, *res, [self = shared_from_this(), res](beast::error_code, std::size_t) {
      beast::error_code ignored;
      self->stream_.socket().shutdown(tcp::socket::shutdown_send, ignored);
    });
  }

  beast::tcp_stream stream_;
  beast::flat_buffer buffer_;
  http::request<http::string_body> req_;
  const ServerOptions& opts_;
  std::function<SessionConfig()> next_cfg_;
};

}  // namespace detail

/// Accepts connections and runs sessions until `stop()`.
class Server {
 public:
  explicit Server(ServerOptions opts)
      : opts_(std::move(opts)), ioc_(std::max(1, opts_.threads)), acceptor_(asio::make_strand(ioc_)) {
    if (!(opts_.tick_hz > 0.0)) throw Error(ErrorCode::InvalidConfig, "tick rate must be > 0");
    const tcp::endpoint endpoint(asio::ip::make_address(opts_.address), opts_.port);
    acceptor_.open(endpoint.protocol());
    acceptor_.set_option(asio::socket_base::reuse_address(true));
    acceptor_.bind(endpoint);
    acceptor_.listen(asio::socket_base::max_listen_connections);
    port_ = acceptor_.local_endpoint().port();
  }

  ~Server() { stop(); }

  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  unsigned short port() const { return port_; }

  /// Starts worker threads and returns immediately.
  void start() {
    do_accept();
    for (int i = 0; i < std::max(1, opts_.threads); ++i) workers_.emplace_back([this] { ioc_.run(); });
  }

  /// Serves on the calling thread (plus extra workers) until stopped.
  void run() {
    do_accept();
    for (int i = 1; i < std::max(1, opts_.threads); ++i) workers_.emplace_back([this] { ioc_.run(); });
    ioc_.run();
  }

  /// Stops the server on SIGINT/SIGTERM.
  void stop_on_signals() {
    signals_.emplace(ioc_, SIGINT, SIGTERM);
    signals_->async_wait([this](beast::error_code ec, int) {
      if (!ec) ioc_.stop();
    });
  }

  void stop() {
    ioc_.stop();
    for (auto& w : workers_)
      if (w.joinable()) w.join();
    workers_.clear();
  }

 private:
  void do_accept() {
    acceptor_.async_accept(asio::make_strand(ioc_), [this](beast::error_code ec, tcp::socket socket) {
      if (!ec) {
        std::make_shared<detail::HttpConnection>(std::move(socket), opts_, [this] { return next_session_config(); })
            ->start();
      }
      do_accept();
    });
  }

  // Each connection gets its own seed and trial id so sessions never share a stream.
  SessionConfig next_session_config() {
    const auto index = connections_.fetch_add(1);
    SessionConfig cfg = opts_.session;
    cfg.seed = opts_.session.seed + index;
    cfg.trial_prefix = opts_.session.trial_prefix + "-" + std::to_string(index);
    return cfg;
  }

  ServerOptions opts_;
  asio::io_context ioc_;
  tcp::acceptor acceptor_;
  unsigned short port_ = 0;
  std::vector<std::thread> workers_;
  std::atomic<std::uint64_t> connections_{0};
  std::optional<asio::signal_set> signals_;
};

}  // namespace occlusim::net
