#include "vrsm/real/real_env.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <array>
#include <cerrno>
#include <cstdio>
#include <deque>
#include <fstream>
#include <iterator>
#include <stdexcept>
#include <system_error>

#include <boost/asio/connect.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/asio/post.hpp>
#include <boost/asio/read.hpp>
#include <boost/asio/steady_timer.hpp>
#include <boost/asio/write.hpp>

#include "vrsm/runtime/sync.hpp"

namespace vrsm::real {
namespace asio = boost::asio;
using tcp = asio::ip::tcp;

namespace {

constexpr uint32_t kMaxFrame = 64u << 20;
// Frames queued on one socket beyond this are dropped, like a lossy network.
constexpr size_t kMaxQueued = 4096;

Bytes framed(const Bytes& msg) {
  Bytes out;
  out.reserve(4 + msg.size());
  auto n = static_cast<uint32_t>(msg.size());
  for (int i = 0; i < 4; i++) out.push_back(static_cast<char>((n >> (8 * i)) & 0xff));
  out += msg;
  return out;
}

void throw_errno(const std::string& what) { throw std::system_error(errno, std::generic_category(), what); }

void write_all(int fd, const Bytes& data, const std::string& path) {
  size_t off = 0;
  while (off < data.size()) {
    ssize_t n = ::write(fd, data.data() + off, data.size() - off);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw_errno("write " + path);
    }
    off += static_cast<size_t>(n);
  }
}

void fsync_path(const std::filesystem::path& p, int flags) {
  int fd = ::open(p.c_str(), flags);
  if (fd < 0) throw_errno("open " + p.string());
  int rc = ::fsync(fd);
  ::close(fd);
  if (rc != 0) throw_errno("fsync " + p.string());
}

// One TCP socket carrying length-prefixed frames in both directions.
class Stream : public std::enable_shared_from_this<Stream> {
 public:
  explicit Stream(tcp::socket s) : sock_(std::move(s)) {}

  std::function<void(Bytes)> on_frame;
  std::function<void()> on_down;

  void start() {
    boost::system::error_code ig;
    sock_.set_option(tcp::no_delay(true), ig);
    read_header();
  }

  void write(const Bytes& msg) {
    if (dead_ || out_.size() >= kMaxQueued) return;
    out_.push_back(framed(msg));
    if (!writing_) do_write();
  }

  void close() {
    if (dead_) return;
    dead_ = true;
    boost::system::error_code ig;
    sock_.close(ig);
    out_.clear();
    on_frame = nullptr;
    auto down = std::move(on_down);
    on_down = nullptr;
    if (down) down();
  }

  bool dead() const { return dead_; }
  tcp::socket& socket() { return sock_; }

 private:
  void read_header() {
    asio::async_read(sock_, asio::buffer(hdr_), [self = shared_from_this()](boost::system::error_code ec, size_t) {
      if (ec || self->dead_) return self->close();
      uint32_t len = 0;
      for (int i = 0; i < 4; i++) len |= static_cast<uint32_t>(self->hdr_[i]) << (8 * i);
      if (len > kMaxFrame) return self->close();
      self->body_.assign(len, '\0');
      self->read_body();
    });
  }

  void read_body() {
    asio::async_read(sock_, asio::buffer(body_), [self = shared_from_this()](boost::system::error_code ec, size_t) {
      if (ec || self->dead_) return self->close();
      if (self->on_frame) self->on_frame(std::move(self->body_));
      if (self->dead_) return;
      self->read_header();
    });
  }

  void do_write() {
    writing_ = true;
    asio::async_write(sock_, asio::buffer(out_.front()), [self = shared_from_this()](boost::system::error_code ec, size_t) {
      if (ec || self->dead_) return self->close();
      self->out_.pop_front();
      if (self->out_.empty()) {
        self->writing_ = false;
      } else {
        self->do_write();
      }
    });
  }

  tcp::socket sock_;
  std::array<unsigned char, 4> hdr_{};
  Bytes body_;
  std::deque<Bytes> out_;
  bool writing_ = false;
  bool dead_ = false;
};

// Client side: connects lazily and reconnects on the next send after a failure.
// Messages sent while disconnected wait for the connection attempt and are
// dropped if it fails.
class TcpConnection final : public Connection, public std::enable_shared_from_this<TcpConnection> {
 public:
  TcpConnection(RealEnv& env, Address peer)
      : env_(env), peer_(std::move(peer)), resolver_(env.io()), inbox_(env) {}

  void send(Bytes msg) override {
    if (closed_) return;
    if (stream_ && !stream_->dead()) {
      stream_->write(msg);
      return;
    }
    if (pending_.size() < kMaxQueued) pending_.push_back(std::move(msg));
    if (!connecting_) start_connect();
  }

  Task<std::optional<Bytes>> receive() override { return inbox_.pop(); }

  void close() override {
    if (closed_) return;
    closed_ = true;
    pending_.clear();
    resolver_.cancel();
    if (attempt_) attempt_->close();
    if (stream_) stream_->close();
    inbox_.close();
  }

  const Address& peer() const override { return peer_; }

 private:
  void start_connect() {
    std::pair<std::string, uint16_t> hp;
    try {
      hp = split_host_port(peer_.str());
    } catch (const std::invalid_argument&) {
      pending_.clear();
      return;
    }
    connecting_ = true;
    std::weak_ptr<TcpConnection> weak = weak_from_this();
    resolver_.async_resolve(hp.first, std::to_string(hp.second),
                            [weak](boost::system::error_code ec, tcp::resolver::results_type results) {
                              auto self = weak.lock();
                              if (!self || self->closed_) return;
                              if (ec) return self->connect_failed();
                              self->attempt_ = std::make_shared<Stream>(tcp::socket(self->env_.io()));
                              auto s = self->attempt_;
                              asio::async_connect(s->socket(), results, [weak, s](boost::system::error_code ec2, const tcp::endpoint&) {
                                auto self2 = weak.lock();
                                if (!self2 || self2->closed_ || s->dead()) return;
                                self2->attempt_.reset();
                                if (ec2) {
                                  s->close();
                                  return self2->connect_failed();
                                }
                                self2->connected(s);
                              });
                            });
  }

  void connect_failed() {
    connecting_ = false;
    pending_.clear();
  }

  void connected(std::shared_ptr<Stream> s) {
    connecting_ = false;
    stream_ = s;
    std::weak_ptr<TcpConnection> weak = weak_from_this();
    s->on_frame = [weak](Bytes b) {
      if (auto self = weak.lock()) self->inbox_.push(std::move(b));
    };
    s->on_down = [weak, raw = s.get()] {
      auto self = weak.lock();
      if (self && self->stream_.get() == raw) self->stream_.reset();
    };
    s->start();
    for (auto& m : pending_) s->write(m);
    pending_.clear();
  }

  RealEnv& env_;
  Address peer_;
  tcp::resolver resolver_;
  AsyncQueue<Bytes> inbox_;
  std::shared_ptr<Stream> stream_;
  std::shared_ptr<Stream> attempt_;
  std::deque<Bytes> pending_;
  bool connecting_ = false;
  bool closed_ = false;
};

// Server side of an accepted socket: replies go back on the same socket.
class ReplyConnection final : public Connection {
 public:
  ReplyConnection(std::weak_ptr<Stream> s, Address peer) : stream_(std::move(s)), peer_(std::move(peer)) {}

  void send(Bytes msg) override {
    if (auto s = stream_.lock()) s->write(msg);
  }
  Task<std::optional<Bytes>> receive() override { co_return std::nullopt; }
  void close() override {
    if (auto s = stream_.lock()) s->close();
  }
  const Address& peer() const override { return peer_; }

 private:
  std::weak_ptr<Stream> stream_;
  Address peer_;
};

class TcpListener final : public Listener, public std::enable_shared_from_this<TcpListener> {
 public:
  TcpListener(RealEnv& env, const Address& addr) : acceptor_(env.io()), inbox_(env) {
    auto [host, port] = split_host_port(addr.str());
    tcp::endpoint ep(asio::ip::make_address(host == "localhost" ? "127.0.0.1" : host), port);
    acceptor_.open(ep.protocol());
    acceptor_.set_option(tcp::acceptor::reuse_address(true));
    acceptor_.bind(ep);
    acceptor_.listen();
  }

  void start() { accept_next(); }

  Task<std::optional<Incoming>> receive() override { return inbox_.pop(); }

  void close() override {
    if (closed_) return;
    closed_ = true;
    boost::system::error_code ig;
    acceptor_.close(ig);
    for (auto& w : sessions_) {
      if (auto s = w.lock()) s->close();
    }
    sessions_.clear();
    inbox_.close();
  }

 private:
  void accept_next() {
    std::weak_ptr<TcpListener> weak = weak_from_this();
    acceptor_.async_accept([weak](boost::system::error_code ec, tcp::socket sock) {
      auto self = weak.lock();
      if (!self || self->closed_) return;
      if (!ec) self->adopt(std::move(sock));
      self->accept_next();
    });
  }

  void adopt(tcp::socket sock) {
    boost::system::error_code ig;
    auto ep = sock.remote_endpoint(ig);
    auto s = std::make_shared<Stream>(std::move(sock));
    auto reply = std::make_shared<ReplyConnection>(s, Address(ep.address().to_string() + ":" + std::to_string(ep.port())));
    std::weak_ptr<TcpListener> weak = weak_from_this();
    s->on_frame = [weak, reply](Bytes b) {
      auto self = weak.lock();
      if (self && !self->closed_) self->inbox_.push(Incoming{std::move(b), reply});
    };
    std::erase_if(sessions_, [](const std::weak_ptr<Stream>& w) { return w.expired(); });
    sessions_.push_back(s);
    s->start();
  }

  tcp::acceptor acceptor_;
  AsyncQueue<Incoming> inbox_;
  std::vector<std::weak_ptr<Stream>> sessions_;
  bool closed_ = false;
};

}  // namespace

std::pair<std::string, uint16_t> split_host_port(const std::string& addr) {
  auto colon = addr.rfind(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 == addr.size()) {
    throw std::invalid_argument("address must be host:port: " + addr);
  }
  unsigned long port = 0;
  try {
    size_t used = 0;
    port = std::stoul(addr.substr(colon + 1), &used);
    if (used != addr.size() - colon - 1) throw std::invalid_argument("port");
  } catch (const std::exception&) {
    throw std::invalid_argument("bad port in address: " + addr);
  }
  if (port > 65535) throw std::invalid_argument("bad port in address: " + addr);
  return {addr.substr(0, colon), static_cast<uint16_t>(port)};
}

FileStore::FileStore(std::filesystem::path dir) : dir_(std::move(dir)) { std::filesystem::create_directories(dir_); }

std::filesystem::path FileStore::path_of(const std::string& name) const {
  if (name.empty() || name.find('/') != std::string::npos || name == "." || name == "..") {
    throw std::invalid_argument("bad store file name: " + name);
  }
  return dir_ / name;
}

Task<std::optional<Bytes>> FileStore::read(std::string name) {
  auto p = path_of(name);
  std::ifstream in(p, std::ios::binary);
  if (!in) co_return std::nullopt;
  Bytes data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  co_return std::optional<Bytes>(std::move(data));
}

Task<void> FileStore::append(std::string name, Bytes data) {
  auto p = path_of(name);
  bool existed = std::filesystem::exists(p);
  int fd = ::open(p.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
  if (fd < 0) throw_errno("open " + p.string());
  try {
    write_all(fd, data, p.string());
  } catch (...) {
    ::close(fd);
    throw;
  }
  int rc = ::fsync(fd);
  ::close(fd);
  if (rc != 0) throw_errno("fsync " + p.string());
  if (!existed) fsync_path(dir_, O_RDONLY | O_DIRECTORY);
  co_return;
}

Task<void> FileStore::write_atomic(std::string name, Bytes data) {
  auto p = path_of(name);
  auto tmp = p;
  tmp += ".tmp";
  int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
  if (fd < 0) throw_errno("open " + tmp.string());
  try {
    write_all(fd, data, tmp.string());
  } catch (...) {
    ::close(fd);
    throw;
  }
  int rc = ::fsync(fd);
  ::close(fd);
  if (rc != 0) throw_errno("fsync " + tmp.string());
  if (::rename(tmp.c_str(), p.c_str()) != 0) throw_errno("rename " + tmp.string());
  fsync_path(dir_, O_RDONLY | O_DIRECTORY);
  co_return;
}

RealEnv::RealEnv(asio::io_context& io, RealEnvOptions opts)
    : io_(io), opts_(std::move(opts)), clock_(opts_.epsilon), store_(opts_.data_dir) {
  rng_.seed(opts_.seed != 0 ? opts_.seed : (static_cast<uint64_t>(std::random_device()()) << 32) ^ std::random_device()());
}

RealEnv::~RealEnv() { shutdown(); }

TimeNs RealEnv::monotonic_now() {
  auto t = std::chrono::steady_clock::now().time_since_epoch();
  return static_cast<TimeNs>(std::chrono::duration_cast<Nanos>(t).count());
}

void RealEnv::post(std::coroutine_handle<> h) {
  asio::post(io_, [alive = alive_, h] {
    if (*alive) h.resume();
  });
}

void RealEnv::call_after(Nanos delay, std::function<void()> fn) {
  auto timer = std::make_shared<asio::steady_timer>(io_, delay);
  timer->async_wait([timer, alive = alive_, fn = std::move(fn)](boost::system::error_code ec) {
    if (!ec && *alive) fn();
  });
}

std::shared_ptr<Connection> RealEnv::connect(const Address& addr) {
  auto c = std::make_shared<TcpConnection>(*this, addr);
  std::erase_if(connections_, [](const std::weak_ptr<Connection>& w) { return w.expired(); });
  connections_.push_back(c);
  if (!*alive_) c->close();
  return c;
}

std::shared_ptr<Listener> RealEnv::listen(const Address& addr) {
  auto l = std::make_shared<TcpListener>(*this, addr);
  l->start();
  listeners_.push_back(l);
  return l;
}

void RealEnv::shutdown() {
  if (!*alive_) return;
  *alive_ = false;
  for (auto& w : listeners_) {
    if (auto l = w.lock()) l->close();
  }
  for (auto& w : connections_) {
    if (auto c = w.lock()) c->close();
  }
  destroy_all_tasks();
  listeners_.clear();
  connections_.clear();
}

void RealEnv::report_failure(std::exception_ptr e) {
  std::string msg = "unknown exception";
  try {
    std::rethrow_exception(e);
  } catch (const std::exception& ex) {
    msg = ex.what();
  } catch (...) {
  }
  std::fprintf(stderr, "%s: task failed: %s\n", opts_.name.c_str(), msg.c_str());
  failures_.push_back(std::move(msg));
}

}  // namespace vrsm::real
