#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "streamgauge/queue.hpp"
#include "streamgauge/sut.hpp"
#include "streamgauge/wire.hpp"

namespace streamgauge {

struct ConnectionRefusedError : std::runtime_error {
  explicit ConnectionRefusedError(const std::string& address)
      : std::runtime_error("connection refused: " + address) {}
};

/// Thin RAII TCP wrapper; framed send/recv on top of wire::*.
class TcpSocket {
 public:
  TcpSocket() = default;
  explicit TcpSocket(int fd) : fd_(fd) {}
  ~TcpSocket();
  TcpSocket(TcpSocket&& other) noexcept : fd_(other.fd_) { other.fd_ = -1; }
  TcpSocket& operator=(TcpSocket&& other) noexcept;
  TcpSocket(const TcpSocket&) = delete;
  TcpSocket& operator=(const TcpSocket&) = delete;

  /// address is "host:port". Throws ConnectionRefusedError when nobody
  /// listens, std::runtime_error for other failures.
  static TcpSocket connect_to(const std::string& address);
  /// port 0 binds an ephemeral port; see port().
  static TcpSocket listen_on(std::uint16_t port);

  TcpSocket accept_one(DurationNs timeout);
  std::uint16_t port() const;

  bool valid() const { return fd_ >= 0; }
  bool send_all(std::span<const std::uint8_t> data);
  /// 1 readable, 0 timeout, -1 error/closed.
  int wait_readable(DurationNs timeout);
  /// Reads exactly one frame. False on orderly close or error.
  bool recv_frame(wire::FrameType& type, std::vector<std::uint8_t>& body);
  void shutdown_close();

 private:
  bool recv_exact(std::uint8_t* out, std::size_t n);
  int fd_ = -1;
};

enum class SessionState : std::uint8_t {
  idle = 0,
  running,
  finished,         // SUT sent BYE after EOS
  connection_drop,  // peer vanished mid-run
  protocol_error,
  stopped,  // driver-initiated shutdown
};

/// Driver-side session for a remote SUT: connects, handshakes, then serves
/// PULL requests from the queues and forwards OUTPUT frames to the sink.
/// Any connection loss transitions every queue to dropped.
class RemoteSession {
 public:
  RemoteSession(SutDescriptor desc, std::vector<DriverQueue*> queues, OutputSink& sink,
                DurationNs linger_after_eos = 30 * kNanosPerSecond);
  ~RemoteSession();

  /// Throws ConnectionRefusedError, wire::HandshakeVersionMismatch or
  /// wire::ProtocolError.
  void connect();
  void start();
  SessionState join();
  /// Idempotent.
  void stop();

  SessionState state() const { return state_.load(std::memory_order_acquire); }

 private:
  void serve();
  void drop_queues();

  SutDescriptor desc_;
  std::vector<DriverQueue*> queues_;
  OutputSink* sink_;
  DurationNs linger_;
  TcpSocket sock_;
  std::thread thread_;
  std::atomic<bool> stop_requested_{false};
  std::atomic<SessionState> state_{SessionState::idle};
};

/// SUT-side endpoint: listens for the driver, answers its HELLO, then lets
/// engine workers pull events and emit outputs over the shared connection.
/// A reader thread demultiplexes EVENTS replies into per-source mailboxes.
class RemoteSutEndpoint {
 public:
  RemoteSutEndpoint(std::uint16_t port, std::uint16_t n_sources,
                    std::uint16_t version = wire::kProtocolVersion);
  ~RemoteSutEndpoint();

  std::uint16_t port() const { return listener_.port(); }

  /// Blocks until the driver connects and completes the handshake.
  void accept(DurationNs timeout = 30 * kNanosPerSecond);

  /// Tears down the current connection and returns to the accept state; the
  /// listener stays bound so the driver can reconnect for the next run.
  void reset();

  /// Request/response pull for one source. Returns the number of events
  /// appended to out; 0 after EOS or on a lost connection.
  std::size_t pull(std::uint16_t source_id, std::uint32_t max_n, std::vector<Event>& out);

  void emit(const OutputRecord& rec);
  void bye();

  bool eos_seen() const { return eos_.load(std::memory_order_acquire); }
  bool connection_ok() const { return !closed_.load(std::memory_order_acquire); }

 private:
  void reader_loop();

  struct Mailbox {
    std::mutex mu;
    std::condition_variable cv;
    std::optional<std::vector<Event>> reply;
  };

  std::uint16_t n_sources_;
  std::uint16_t version_;
  TcpSocket listener_;
  TcpSocket conn_;
  std::vector<std::unique_ptr<Mailbox>> mailboxes_;
  std::thread reader_;
  std::mutex write_mu_;
  std::atomic<bool> eos_{false};
  std::atomic<bool> closed_{false};
};

/// EventSource adapter over a pulled remote connection, one per source id.
class RemoteSource final : public EventSource {
 public:
  RemoteSource(RemoteSutEndpoint& endpoint, std::uint16_t source_id,
               std::uint32_t pull_max = 4096)
      : endpoint_(endpoint), source_id_(source_id), pull_max_(pull_max) {}

  std::size_t take_batch(Event* out, std::size_t max_n) override;
  bool exhausted() const override { return exhausted_; }

 private:
  RemoteSutEndpoint& endpoint_;
  std::uint16_t source_id_;
  std::uint32_t pull_max_;
  std::vector<Event> buf_;
  bool exhausted_ = false;
};

}  // namespace streamgauge
