// SPDX-License-Identifier: Apache-2.0
#include <atomic>
#include <condition_variable>
#include <deque>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include "v3dg/error.hpp"
#include "v3dg/viewer.hpp"

namespace v3dg {

namespace {

namespace net = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;

// State shared between a connection's reader and its render worker.
struct SessionCell {
  std::mutex mutex;
  std::condition_variable wake;
  SessionState state;
  std::uint64_t version = 0;
  bool pending = false;
  bool closing = false;
  std::uint64_t next_frame_id = 0;
};

class WsSession : public std::enable_shared_from_this<WsSession> {
 public:
  WsSession(tcp::socket&& socket, std::shared_ptr<const LoadedScene> scene)
      : ws_(std::move(socket)), scene_(std::move(scene)), cell_(std::make_shared<SessionCell>()) {
    cell_->state = default_session(*scene_);
  }

  ~WsSession() {
    {
      std::lock_guard lock(cell_->mutex);
      cell_->closing = true;
    }
    cell_->wake.notify_all();
    // The worker may hold the last reference for a moment.
    if (worker_.get_id() == std::this_thread::get_id()) {
      worker_.detach();
    } else if (worker_.joinable()) {
      worker_.join();
    }
  }

  void run(http::request<http::string_body> req) {
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.async_accept(req, beast::bind_front_handler(&WsSession::on_accept, shared_from_this()));
  }

 private:
  void on_accept(beast::error_code ec) {
    if (ec) return;
    start_worker();
    do_read();
  }

  void start_worker() {
    std::weak_ptr<WsSession> weak = weak_from_this();
    auto exec = ws_.get_executor();
    worker_ = std::thread([cell = cell_, scene = scene_, weak, exec] {
      // Hands a message to the connection without ever owning it here.
      auto send = [&](std::string msg) {
        if (auto self = weak.lock()) {
          net::post(exec, [self = std::move(self), msg = std::move(msg)]() mutable { self->queue(std::move(msg)); });
        }
      };
      for (;;) {
        SessionState snapshot;
        std::uint64_t version = 0;
        {
          std::unique_lock lock(cell->mutex);
          cell->wake.wait(lock, [&] { return cell->pending || cell->closing; });
          if (cell->closing) return;
          cell->pending = false;
          snapshot = cell->state;
          version = cell->version;
        }
        std::string msg;
        try {
          Frame frame = render_frame(*scene, snapshot, 0);
          std::lock_guard lock(cell->mutex);
          // A newer state supersedes this frame; the loop renders again.
          if (cell->version != version && cell->pending) continue;
          frame.frame_id = ++cell->next_frame_id;
          msg = frame_message(frame);
        } catch (const std::exception& e) {
          msg = error_message(std::string("render failed: ") + e.what());
        }
        send(std::move(msg));
      }
    });
  }

  void do_read() {
    ws_.async_read(buffer_, beast::bind_front_handler(&WsSession::on_read, shared_from_this()));
  }

  void on_read(beast::error_code ec, std::size_t) {
    if (ec) return;  // closed or failed; the session ends with its last handler
    const std::string text = beast::buffers_to_string(buffer_.data());
    buffer_.consume(buffer_.size());
    MessageOutcome outcome;
    {
      std::lock_guard lock(cell_->mutex);
      SessionState state = cell_->state;
      outcome = handle_message(state, text);
      if (outcome.ok && outcome.state_changed) {
        cell_->state = state;
        ++cell_->version;
        cell_->pending = true;
      }
      if (outcome.ok && outcome.frame_requested) cell_->pending = true;
    }
    if (outcome.ok) {
      cell_->wake.notify_one();
    } else {
      queue(error_message(outcome.error));
    }
    do_read();
  }

  void queue(std::string msg) {
    outbox_.push_back(std::move(msg));
    if (!writing_) do_write();
  }

  void do_write() {
    writing_ = true;
    ws_.text(true);
    ws_.async_write(net::buffer(outbox_.front()), beast::bind_front_handler(&WsSession::on_write, shared_from_this()));
  }

  void on_write(beast::error_code ec, std::size_t) {
    if (ec) {
      outbox_.clear();
      writing_ = false;
      return;
    }
    outbox_.pop_front();
    if (outbox_.empty()) {
      writing_ = false;
    } else {
      do_write();
    }
  }

  websocket::stream<beast::tcp_stream> ws_;
  beast::flat_buffer buffer_;
  std::shared_ptr<const LoadedScene> scene_;
  std::shared_ptr<SessionCell> cell_;
  std::thread worker_;
  std::deque<std::string> outbox_;
  bool writing_ = false;
};

std::string content_type(const std::string& path) {
  auto ends = [&](const char* ext) {
    const std::string e(ext);
    return path.size() >= e.size() && path.compare(path.size() - e.size(), e.size(), e) == 0;
  };
  if (ends(".html")) return "text/html";
  if (ends(".js")) return "application/javascript";
  if (ends(".css")) return "text/css";
  if (ends(".json")) return "application/json";
  if (ends(".png")) return "image/png";
  return "application/octet-stream";
}

class HttpConnection : public std::enable_shared_from_this<HttpConnection> {
 public:
  HttpConnection(tcp::socket&& socket, std::shared_ptr<const LoadedScene> scene, std::string metadata,
                 std::string static_dir)
      : stream_(std::move(socket)),
        scene_(std::move(scene)),
        metadata_(std::move(metadata)),
        static_dir_(std::move(static_dir)) {}

  void run() { do_read(); }

 private:
  void do_read() {
    req_ = {};
    stream_.expires_after(std::chrono::seconds(30));
    http::async_read(stream_, buffer_, req_, beast::bind_front_handler(&HttpConnection::on_read, shared_from_this()));
  }

  void on_read(beast::error_code ec, std::size_t) {
    if (ec) return;
    if (websocket::is_upgrade(req_)) {
      stream_.expires_never();
      std::make_shared<WsSession>(stream_.release_socket(), scene_)->run(std::move(req_));
      return;
    }
    auto res = std::make_shared<http::response<http::string_body>>(respond());
    http::async_write(stream_, *res, [self = shared_from_this(), res](beast::error_code ec, std::size_t) {
      if (ec || !res->keep_alive()) {
        beast::error_code ignored;
        self->stream_.socket().shutdown(tcp::socket::shutdown_send, ignored);
        return;
      }
      self->do_read();
    });
  }

  http::response<http::string_body> respond() {
    http::response<http::string_body> res;
    res.version(req_.version());
    res.keep_alive(req_.keep_alive());
    res.set(http::field::server, "v3dg-viewer");
    res.set(http::field::access_control_allow_origin, "*");
    const std::string target(req_.target());
    if (req_.method() != http::verb::get) {
      res.result(http::status::method_not_allowed);
      res.body() = "only GET is supported\n";
    } else if (target == "/scene") {
      res.result(http::status::ok);
      res.set(http::field::content_type, "application/json");
      res.body() = metadata_;
    } else if (!static_dir_.empty() && target.find("..") == std::string::npos) {
      const std::string path = static_dir_ + (target == "/" ? "/index.html" : target);
      std::ifstream in(path, std::ios::binary);
      if (in) {
        std::ostringstream body;
        body << in.rdbuf();
        res.result(http::status::ok);
        res.set(http::field::content_type, content_type(path));
        res.body() = body.str();
      } else {
        res.result(http::status::not_found);
        res.body() = "not found\n";
      }
    } else {
      res.result(http::status::not_found);
      res.body() = "not found\n";
    }
    res.prepare_payload();
    return res;
  }

  beast::tcp_stream stream_;
  beast::flat_buffer buffer_;
  http::request<http::string_body> req_;
  std::shared_ptr<const LoadedScene> scene_;
  std::string metadata_;
  std::string static_dir_;
};

}  // namespace

struct ViewerServer::Impl {
  std::shared_ptr<const LoadedScene> scene;
  ViewerOptions opts;
  std::string metadata;
  net::io_context ioc{1};
  tcp::acceptor acceptor{ioc};
  unsigned short port = 0;
  std::thread thread;

  void do_accept() {
    acceptor.async_accept(net::make_strand(ioc), [this](beast::error_code ec, tcp::socket socket) {
      if (ec) return;  // acceptor closed
      std::make_shared<HttpConnection>(std::move(socket), scene, metadata, opts.static_dir)->run();
      do_accept();
    });
  }
};

ViewerServer::ViewerServer(std::shared_ptr<const LoadedScene> scene, ViewerOptions opts)
    : impl_(std::make_unique<Impl>()) {
  impl_->scene = std::move(scene);
  impl_->opts = std::move(opts);
  impl_->metadata = scene_metadata(*impl_->scene);
  beast::error_code ec;
  const auto address = net::ip::make_address(impl_->opts.address, ec);
  if (ec) raise(ErrorKind::kArgument, "invalid listen address '" + impl_->opts.address + "'");
  const tcp::endpoint endpoint(address, impl_->opts.port);
  auto& acc = impl_->acceptor;
  acc.open(endpoint.protocol(), ec);
  if (!ec) acc.set_option(net::socket_base::reuse_address(true), ec);
  if (!ec) acc.bind(endpoint, ec);
  if (!ec) acc.listen(net::socket_base::max_listen_connections, ec);
  if (ec) {
    raise(ErrorKind::kIo, "cannot listen on " + impl_->opts.address + ":" + std::to_string(impl_->opts.port) + ": " +
                              ec.message());
  }
  impl_->port = acc.local_endpoint().port();
  impl_->do_accept();
}

ViewerServer::~ViewerServer() { stop(); }

unsigned short ViewerServer::port() const noexcept { return impl_->port; }

void ViewerServer::run() { impl_->ioc.run(); }

void ViewerServer::start() {
  impl_->thread = std::thread([this] { impl_->ioc.run(); });
}

void ViewerServer::stop() {
  if (!impl_) return;
  net::post(impl_->ioc, [this] {
    beast::error_code ignored;
    impl_->acceptor.close(ignored);
  });
  impl_->ioc.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace v3dg
