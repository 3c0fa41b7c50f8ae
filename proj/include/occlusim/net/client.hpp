#pragma once

// Blocking WebSocket client for scripted (headless) operators.

#include <optional>
#include <string>

#include <boost/asio/connect.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include "occlusim/protocol.hpp"

namespace occlusim::net {

class HeadlessClient {
 public:
  HeadlessClient(const std::string& host, unsigned short port) : resolver_(ioc_), ws_(ioc_) {
    const auto results = resolver_.resolve(host, std::to_string(port));
    boost::asio::connect(ws_.next_layer(), results.begin(), results.end());
    ws_.handshake(host + ":" + std::to_string(port), "/");
    ws_.text(true);
  }

  ~HeadlessClient() {
    boost::beast::error_code ignored;
    ws_.close(boost::beast::websocket::close_code::normal, ignored);
  }

  void send(const protocol::ClientCommand& cmd) { send_text(protocol::encode(cmd).dump()); }

  void send_text(const std::string& text) { ws_.write(boost::asio::buffer(text)); }

  protocol::ServerMessage receive() {
    boost::beast::flat_buffer buffer;
    ws_.read(buffer);
    return protocol::decode_server(nlohmann::json::parse(boost::beast::buffers_to_string(buffer.data())));
  }

 private:
  boost::asio::io_context ioc_;
  boost::asio::ip::tcp::resolver resolver_;
  boost::beast::websocket::stream<boost::asio::ip::tcp::socket> ws_;
};

}  // namespace occlusim::net
