#include "playenv/server.hpp"

#include <list>
#include <mutex>

#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>
#include <spdlog/spdlog.h>

namespace playenv {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;

struct WebSocketServer::Impl {
  ProtocolHandler& handler;
  asio::io_context ioc;
  tcp::acceptor acceptor;
  std::atomic<bool> stopping{false};
  std::thread accept_thread;
  std::mutex mutex;
  std::list<std::thread> workers;
  std::list<std::weak_ptr<tcp::socket>> sockets;

  Impl(ProtocolHandler& h, const std::string& address, std::uint16_t port)
      : handler(h), acceptor(ioc, tcp::endpoint(asio::ip::make_address(address), port)) {}

  void serve(std::shared_ptr<tcp::socket> socket) {
    Connection connection;
    try {
      websocket::stream<tcp::socket&> ws(*socket);
      ws.accept();
      ws.text(true);
      beast::flat_buffer buffer;
      for (;;) {
        ws.read(buffer);
        const auto text = beast::buffers_to_string(buffer.data());
        buffer.consume(buffer.size());
        for (const auto& reply : handler.handle_text(text, connection)) {
          ws.write(asio::buffer(reply.dump()));
          if (reply.value("type", "") == "closed") {
            ws.close(websocket::close_code::normal);
            return;
          }
        }
      }
    } catch (const beast::system_error& e) {
      if (e.code() != websocket::error::closed) spdlog::debug("connection ended: {}", e.what());
    } catch (const std::exception& e) {
      spdlog::warn("connection failed: {}", e.what());
    }
    handler.disconnect(connection);
  }

  void accept_loop() {
    while (!stopping) {
      auto socket = std::make_shared<tcp::socket>(ioc);
      beast::error_code ec;
      acceptor.accept(*socket, ec);
      if (ec || stopping) {
        if (stopping) break;
        spdlog::warn("accept failed: {}", ec.message());
        continue;
      }
      std::lock_guard lock(mutex);
      sockets.push_back(socket);
      workers.emplace_back([this, socket] { serve(socket); });
    }
  }

  void stop() {
    if (stopping.exchange(true)) return;
    beast::error_code ec;
    // a blocking accept() is not reliably woken by close(); poke it with a connection
    {
      tcp::socket poke(ioc);
      const auto ep = acceptor.local_endpoint(ec);
      if (!ec) {
        const auto addr = ep.address().is_unspecified() ? asio::ip::address(asio::ip::address_v4::loopback())
                                                        : ep.address();
        poke.connect(tcp::endpoint(addr, ep.port()), ec);
      }
    }
    if (accept_thread.joinable()) accept_thread.join();
    acceptor.close(ec);
    std::list<std::thread> pending;
    {
      std::lock_guard lock(mutex);
      for (auto& weak : sockets)
        if (auto s = weak.lock()) s->shutdown(tcp::socket::shutdown_both, ec);
      pending.swap(workers);
    }
    for (auto& t : pending) t.join();
  }
};

WebSocketServer::WebSocketServer(ProtocolHandler& handler, const std::string& address,
                                 std::uint16_t port)
    : impl_(std::make_unique<Impl>(handler, address, port)) {}

WebSocketServer::~WebSocketServer() { stop(); }

std::uint16_t WebSocketServer::port() const { return impl_->acceptor.local_endpoint().port(); }

void WebSocketServer::start() {
  impl_->accept_thread = std::thread([this] { impl_->accept_loop(); });
}

void WebSocketServer::run() { impl_->accept_loop(); }

void WebSocketServer::stop() { impl_->stop(); }

}  // namespace playenv
