#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace usnav::net {

// Owning POSIX file descriptor.
class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  ~Socket() { close(); }
  Socket(Socket&& other) noexcept : fd_(other.release()) {}
  Socket& operator=(Socket&& other) noexcept;
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;

  int fd() const { return fd_; }
  bool valid() const { return fd_ >= 0; }
  int release() {
    const int fd = fd_;
    fd_ = -1;
    return fd;
  }
  void close();
  // Wakes up any thread blocked on this socket.
  void shutdown();

 private:
  int fd_ = -1;
};

class TcpStream {
 public:
  TcpStream() = default;
  explicit TcpStream(Socket s);
  static TcpStream connect(const std::string& host, std::uint16_t port);

  // All-or-throw; kTransport on failure.
  void write_all(std::span<const std::uint8_t> data);
  // Returns false on clean EOF before the first byte; throws on short read.
  bool read_exact(std::span<std::uint8_t> out);

  // u32 little-endian length prefix + body.
  void write_message(std::span<const std::uint8_t> body);
  void write_message(const std::string& body) {
    write_message({reinterpret_cast<const std::uint8_t*>(body.data()), body.size()});
  }
  std::optional<std::string> read_message(std::size_t max_size = 16u << 20);

  void shutdown() { sock_.shutdown(); }
  bool valid() const { return sock_.valid(); }

 private:
  Socket sock_;
};

class TcpListener {
 public:
  // port 0 picks an ephemeral port.
  TcpListener(const std::string& host, std::uint16_t port);
  std::uint16_t port() const { return port_; }
  // Returns nullopt once the listener is shut down.
  std::optional<TcpStream> accept();
  void shutdown() { sock_.shutdown(); }

 private:
  Socket sock_;
  std::uint16_t port_ = 0;
};

class UdpSocket {
 public:
  UdpSocket(const std::string& host, std::uint16_t port);
  std::uint16_t port() const { return port_; }
  void send_to(const std::string& host, std::uint16_t port,
               std::span<const std::uint8_t> data);
  // Returns nullopt after a 100 ms receive timeout or once shut down.
  std::optional<std::vector<std::uint8_t>> receive(std::size_t max_size = 2048);
  void shutdown() { sock_.shutdown(); }

 private:
  Socket sock_;
  std::uint16_t port_ = 0;
};

}  // namespace usnav::net
