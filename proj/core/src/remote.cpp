#include "streamgauge/remote.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <utility>

namespace streamgauge {

namespace {

void set_nodelay(int fd) {
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
}

std::pair<std::string, std::string> split_address(const std::string& address) {
  const auto colon = address.rfind(':');
  if (colon == std::string::npos || colon + 1 >= address.size()) {
    throw std::runtime_error("bad address (want host:port): " + address);
  }
  return {address.substr(0, colon), address.substr(colon + 1)};
}

}  // namespace

TcpSocket::~TcpSocket() { shutdown_close(); }

TcpSocket& TcpSocket::operator=(TcpSocket&& other) noexcept {
  if (this != &other) {
    shutdown_close();
    fd_ = other.fd_;
    other.fd_ = -1;
  }
  return *this;
}

TcpSocket TcpSocket::connect_to(const std::string& address) {
  const auto [host, port] = split_address(address);
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (::getaddrinfo(host.c_str(), port.c_str(), &hints, &res) != 0 || res == nullptr) {
    throw std::runtime_error("cannot resolve " + address);
  }
  int fd = -1;
  int err = 0;
  for (addrinfo* ai = res; ai != nullptr; ai = ai->ai_next) {
    fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
    err = errno;
    ::close(fd);
    fd = -1;
  }
  ::freeaddrinfo(res);
  if (fd < 0) {
    if (err == ECONNREFUSED) throw ConnectionRefusedError(address);
    throw std::runtime_error("connect to " + address + " failed: " + std::strerror(err));
  }
  set_nodelay(fd);
  return TcpSocket(fd);
}

TcpSocket TcpSocket::listen_on(std::uint16_t port) {
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) throw std::runtime_error("socket() failed");
  int one = 1;
  ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = htons(port);
  if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
    ::close(fd);
    throw std::runtime_error("bind to port " + std::to_string(port) + " failed");
  }
  if (::listen(fd, 1) != 0) {
    ::close(fd);
    throw std::runtime_error("listen failed");
  }
  return TcpSocket(fd);
}

TcpSocket TcpSocket::accept_one(DurationNs timeout) {
  pollfd pfd{fd_, POLLIN, 0};
  const int r = ::poll(&pfd, 1, static_cast<int>(timeout / kNanosPerMilli));
  if (r <= 0) throw std::runtime_error("accept timed out");
  const int conn = ::accept(fd_, nullptr, nullptr);
  if (conn < 0) throw std::runtime_error("accept failed");
  set_nodelay(conn);
  return TcpSocket(conn);
}

std::uint16_t TcpSocket::port() const {
  sockaddr_in addr{};
  socklen_t len = sizeof(addr);
  if (::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len) != 0) return 0;
  return ntohs(addr.sin_port);
}

bool TcpSocket::send_all(std::span<const std::uint8_t> data) {
  std::size_t sent = 0;
  while (sent < data.size()) {
    const ssize_t n = ::send(fd_, data.data() + sent, data.size() - sent, MSG_NOSIGNAL);
    if (n <= 0) {
      if (n < 0 && (errno == EINTR)) continue;
      return false;
    }
    sent += static_cast<std::size_t>(n);
  }
  return true;
}

int TcpSocket::wait_readable(DurationNs timeout) {
  pollfd pfd{fd_, POLLIN, 0};
  const int r = ::poll(&pfd, 1, static_cast<int>(timeout / kNanosPerMilli));
  if (r < 0) return errno == EINTR ? 0 : -1;
  if (r == 0) return 0;
  if ((pfd.revents & (POLLERR | POLLNVAL)) != 0) return -1;
  return 1;
}

bool TcpSocket::recv_exact(std::uint8_t* out, std::size_t n) {
  std::size_t got = 0;
  while (got < n) {
    const ssize_t r = ::recv(fd_, out + got, n - got, 0);
    if (r <= 0) {
      if (r < 0 && errno == EINTR) continue;
      return false;
    }
    got += static_cast<std::size_t>(r);
  }
  return true;
}

bool TcpSocket::recv_frame(wire::FrameType& type, std::vector<std::uint8_t>& body) {
  std::uint8_t header[4];
  if (!recv_exact(header, 4)) return false;
  std::uint32_t len = 0;
  for (int i = 0; i < 4; ++i) len |= static_cast<std::uint32_t>(header[i]) << (8 * i);
  if (len == 0 || len > wire::kMaxFrameBytes) return false;
  std::uint8_t type_byte = 0;
  if (!recv_exact(&type_byte, 1)) return false;
  type = static_cast<wire::FrameType>(type_byte);
  body.resize(len - 1);
  if (len > 1 && !recv_exact(body.data(), len - 1)) return false;
  return true;
}

void TcpSocket::shutdown_close() {
  if (fd_ >= 0) {
    ::shutdown(fd_, SHUT_RDWR);
    ::close(fd_);
    fd_ = -1;
  }
}

RemoteSession::RemoteSession(SutDescriptor desc, std::vector<DriverQueue*> queues,
                             OutputSink& sink, DurationNs linger_after_eos)
    : desc_(std::move(desc)), queues_(std::move(queues)), sink_(&sink),
      linger_(linger_after_eos) {}

RemoteSession::~RemoteSession() {
  stop();
  if (thread_.joinable()) thread_.join();
}

void RemoteSession::connect() {
  sock_ = TcpSocket::connect_to(desc_.address);
  std::vector<std::uint8_t> buf;
  wire::append_hello(buf, {wire::kProtocolVersion,
                           static_cast<std::uint16_t>(queues_.size())});
  if (!sock_.send_all(buf)) throw std::runtime_error("handshake send failed");
  if (sock_.wait_readable(5 * kNanosPerSecond) != 1) {
    throw wire::ProtocolError("no HELLO reply from SUT");
  }
  wire::FrameType type{};
  std::vector<std::uint8_t> body;
  if (!sock_.recv_frame(type, body) || type != wire::FrameType::hello) {
    throw wire::ProtocolError("expected HELLO reply");
  }
  const wire::HelloFrame hello = wire::parse_hello(body);
  if (hello.version != wire::kProtocolVersion) {
    buf.clear();
    wire::append_empty(buf, wire::FrameType::bye);
    sock_.send_all(buf);
    throw wire::HandshakeVersionMismatch(hello.version, wire::kProtocolVersion);
  }
  if (hello.n_sources != queues_.size()) {
    throw wire::ProtocolError("SUT source count " + std::to_string(hello.n_sources) +
                              " != queue count " + std::to_string(queues_.size()));
  }
}

void RemoteSession::start() {
  state_.store(SessionState::running, std::memory_order_release);
  thread_ = std::thread([this] { serve(); });
}

void RemoteSession::drop_queues() {
  for (DriverQueue* q : queues_) q->mark_dropped();
  state_.store(SessionState::connection_drop, std::memory_order_release);
}

void RemoteSession::serve() {
  std::vector<Event> batch(8192);
  std::vector<std::uint8_t> out;
  std::vector<std::uint8_t> body;
  bool eos_sent = false;
  TimeNs eos_deadline = 0;

  while (!stop_requested_.load(std::memory_order_acquire)) {
    if (!eos_sent) {
      bool drained = true;
      for (DriverQueue* q : queues_) {
        if (!q->exhausted()) {
          drained = false;
          break;
        }
      }
      if (drained) {
        out.clear();
        wire::append_empty(out, wire::FrameType::eos);
        if (!sock_.send_all(out)) {
          drop_queues();
          return;
        }
        eos_sent = true;
        eos_deadline = now_ns() + linger_;
      }
    }
    const int readable = sock_.wait_readable(10 * kNanosPerMilli);
    if (readable < 0) {
      drop_queues();
      return;
    }
    if (readable == 0) {
      if (eos_sent && now_ns() > eos_deadline) {
        drop_queues();
        return;
      }
      continue;
    }
    wire::FrameType type{};
    if (!sock_.recv_frame(type, body)) {
      // Peer closed. Clean only if it said BYE first, which returns earlier.
      drop_queues();
      return;
    }
    try {
      switch (type) {
        case wire::FrameType::pull: {
          const wire::PullFrame pull = wire::parse_pull(body);
          if (pull.source_id >= queues_.size()) throw wire::ProtocolError("bad source id");
          const std::size_t n = queues_[pull.source_id]->take_batch(
              batch.data(), std::min<std::size_t>(pull.max_n, batch.size()));
          out.clear();
          wire::append_events(out, pull.source_id, std::span<const Event>(batch.data(), n));
          if (!sock_.send_all(out)) {
            drop_queues();
            return;
          }
          break;
        }
        case wire::FrameType::output:
          sink_->emit(wire::parse_output(body));
          break;
        case wire::FrameType::bye:
          state_.store(SessionState::finished, std::memory_order_release);
          return;
        default:
          throw wire::ProtocolError("unexpected frame type");
      }
    } catch (const wire::ProtocolError&) {
      drop_queues();
      state_.store(SessionState::protocol_error, std::memory_order_release);
      return;
    }
  }
  state_.store(SessionState::stopped, std::memory_order_release);
}

SessionState RemoteSession::join() {
  if (thread_.joinable()) thread_.join();
  return state();
}

void RemoteSession::stop() {
  stop_requested_.store(true, std::memory_order_release);
  sock_.shutdown_close();
}

RemoteSutEndpoint::RemoteSutEndpoint(std::uint16_t port, std::uint16_t n_sources,
                                     std::uint16_t version)
    : n_sources_(n_sources), version_(version), listener_(TcpSocket::listen_on(port)) {
  for (std::uint16_t i = 0; i < n_sources_; ++i) {
    mailboxes_.push_back(std::make_unique<Mailbox>());
  }
}

RemoteSutEndpoint::~RemoteSutEndpoint() {
  closed_.store(true, std::memory_order_release);
  conn_.shutdown_close();
  listener_.shutdown_close();
  if (reader_.joinable()) reader_.join();
  for (auto& mb : mailboxes_) mb->cv.notify_all();
}

void RemoteSutEndpoint::accept(DurationNs timeout) {
  conn_ = listener_.accept_one(timeout);
  wire::FrameType type{};
  std::vector<std::uint8_t> body;
  if (conn_.wait_readable(timeout) != 1 || !conn_.recv_frame(type, body) ||
      type != wire::FrameType::hello) {
    throw wire::ProtocolError("expected HELLO from driver");
  }
  const wire::HelloFrame hello = wire::parse_hello(body);
  std::vector<std::uint8_t> reply;
  wire::append_hello(reply, {version_, n_sources_});
  if (!conn_.send_all(reply)) throw std::runtime_error("handshake reply failed");
  if (hello.n_sources != n_sources_) {
    throw wire::ProtocolError("driver announces " + std::to_string(hello.n_sources) +
                              " sources, SUT configured for " + std::to_string(n_sources_));
  }
  reader_ = std::thread([this] { reader_loop(); });
}

void RemoteSutEndpoint::reset() {
  conn_.shutdown_close();
  if (reader_.joinable()) reader_.join();
  for (auto& mb : mailboxes_) {
    std::lock_guard<std::mutex> lk(mb->mu);
    mb->reply.reset();
  }
  eos_.store(false, std::memory_order_release);
  closed_.store(false, std::memory_order_release);
}

void RemoteSutEndpoint::reader_loop() {
  wire::FrameType type{};
  std::vector<std::uint8_t> body;
  while (conn_.recv_frame(type, body)) {
    try {
      switch (type) {
        case wire::FrameType::events: {
          wire::EventsFrame frame = wire::parse_events(body);
          if (frame.source_id >= n_sources_) throw wire::ProtocolError("bad source id");
          Mailbox& mb = *mailboxes_[frame.source_id];
          {
            std::lock_guard<std::mutex> lk(mb.mu);
            mb.reply = std::move(frame.events);
          }
          mb.cv.notify_one();
          break;
        }
        case wire::FrameType::eos:
          eos_.store(true, std::memory_order_release);
          break;
        case wire::FrameType::bye:
          closed_.store(true, std::memory_order_release);
          for (auto& mb : mailboxes_) mb->cv.notify_all();
          return;
        default:
          throw wire::ProtocolError("unexpected frame type on SUT side");
      }
    } catch (const wire::ProtocolError&) {
      break;
    }
  }
  closed_.store(true, std::memory_order_release);
  for (auto& mb : mailboxes_) mb->cv.notify_all();
}

std::size_t RemoteSutEndpoint::pull(std::uint16_t source_id, std::uint32_t max_n,
                                    std::vector<Event>& out) {
  if (closed_.load(std::memory_order_acquire)) return 0;
  Mailbox& mb = *mailboxes_[source_id];
  {
    std::lock_guard<std::mutex> lk(write_mu_);
    std::vector<std::uint8_t> buf;
    wire::append_pull(buf, {source_id, max_n});
    if (!conn_.send_all(buf)) {
      closed_.store(true, std::memory_order_release);
      return 0;
    }
  }
  std::unique_lock<std::mutex> lk(mb.mu);
  mb.cv.wait(lk, [&] {
    return mb.reply.has_value() || closed_.load(std::memory_order_acquire);
  });
  if (!mb.reply.has_value()) return 0;
  std::vector<Event> events = std::move(*mb.reply);
  mb.reply.reset();
  lk.unlock();
  out.insert(out.end(), events.begin(), events.end());
  return events.size();
}

void RemoteSutEndpoint::emit(const OutputRecord& rec) {
  std::lock_guard<std::mutex> lk(write_mu_);
  std::vector<std::uint8_t> buf;
  wire::append_output(buf, rec);
  if (!conn_.send_all(buf)) closed_.store(true, std::memory_order_release);
}

void RemoteSutEndpoint::bye() {
  std::lock_guard<std::mutex> lk(write_mu_);
  std::vector<std::uint8_t> buf;
  wire::append_empty(buf, wire::FrameType::bye);
  conn_.send_all(buf);
}

std::size_t RemoteSource::take_batch(Event* out, std::size_t max_n) {
  if (exhausted_) return 0;
  buf_.clear();
  const std::size_t n = endpoint_.pull(
      source_id_, static_cast<std::uint32_t>(std::min<std::size_t>(max_n, pull_max_)), buf_);
  if (n == 0) {
    if (endpoint_.eos_seen() || !endpoint_.connection_ok()) exhausted_ = true;
    return 0;
  }
  std::copy(buf_.begin(), buf_.end(), out);
  return n;
}

}  // namespace streamgauge
