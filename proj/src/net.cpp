#include "usnav/net.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <sys/time.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "usnav/error.hpp"

namespace usnav::net {

namespace {

[[noreturn]] void fail(const std::string& what) {
  throw Error(ErrorCode::kTransport, what + ": " + std::strerror(errno));
}

sockaddr_in make_addr(const std::string& host, std::uint16_t port) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  const std::string h = host == "localhost" ? "127.0.0.1" : host;
  if (::inet_pton(AF_INET, h.c_str(), &addr.sin_addr) != 1) {
    throw Error(ErrorCode::kTransport, "invalid IPv4 address '" + host + "'");
  }
  return addr;
}

std::uint16_t bound_port(int fd) {
  sockaddr_in addr{};
  socklen_t len = sizeof(addr);
  if (::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len) != 0) fail("getsockname");
  return ntohs(addr.sin_port);
}

}  // namespace

Socket& Socket::operator=(Socket&& other) noexcept {
  if (this != &other) {
    close();
    fd_ = other.release();
  }
  return *this;
}

void Socket::close() {
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
}

void Socket::shutdown() {
  if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
}

TcpStream::TcpStream(Socket s) : sock_(std::move(s)) {
  const int one = 1;
  ::setsockopt(sock_.fd(), IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
}

TcpStream TcpStream::connect(const std::string& host, std::uint16_t port) {
  Socket s(::socket(AF_INET, SOCK_STREAM, 0));
  if (!s.valid()) fail("socket");
  const sockaddr_in addr = make_addr(host, port);
  if (::connect(s.fd(), reinterpret_cast<const sockaddr*>(&addr), sizeof(addr)) != 0) {
    fail("connect");
  }
  return TcpStream(std::move(s));
}

void TcpStream::write_all(std::span<const std::uint8_t> data) {
  std::size_t sent = 0;
  while (sent < data.size()) {
    const ssize_t n = ::send(sock_.fd(), data.data() + sent, data.size() - sent, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      fail("send");
    }
    sent += static_cast<std::size_t>(n);
  }
}

bool TcpStream::read_exact(std::span<std::uint8_t> out) {
  std::size_t got = 0;
  while (got < out.size()) {
    const ssize_t n = ::recv(sock_.fd(), out.data() + got, out.size() - got, 0);
    if (n < 0) {
      if (errno == EINTR) continue;
      fail("recv");
    }
    if (n == 0) {
      if (got == 0) return false;
      throw Error(ErrorCode::kTransport, "connection closed mid-message");
    }
    got += static_cast<std::size_t>(n);
  }
  return true;
}

void TcpStream::write_message(std::span<const std::uint8_t> body) {
  std::uint8_t hdr[4];
  const auto len = static_cast<std::uint32_t>(body.size());
  for (int i = 0; i < 4; ++i) hdr[i] = static_cast<std::uint8_t>(len >> (8 * i));
  write_all(hdr);
  write_all(body);
}

std::optional<std::string> TcpStream::read_message(std::size_t max_size) {
  std::uint8_t hdr[4];
  if (!read_exact(hdr)) return std::nullopt;
  const std::uint32_t len = static_cast<std::uint32_t>(hdr[0]) |
                            static_cast<std::uint32_t>(hdr[1]) << 8 |
                            static_cast<std::uint32_t>(hdr[2]) << 16 |
                            static_cast<std::uint32_t>(hdr[3]) << 24;
  if (len > max_size) throw Error(ErrorCode::kTransport, "message too large");
  std::string body(len, '\0');
  if (len > 0 &&
      !read_exact({reinterpret_cast<std::uint8_t*>(body.data()), body.size()})) {
    throw Error(ErrorCode::kTransport, "connection closed mid-message");
  }
  return body;
}

TcpListener::TcpListener(const std::string& host, std::uint16_t port) {
  sock_ = Socket(::socket(AF_INET, SOCK_STREAM, 0));
  if (!sock_.valid()) fail("socket");
  const int one = 1;
  ::setsockopt(sock_.fd(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  const sockaddr_in addr = make_addr(host, port);
  if (::bind(sock_.fd(), reinterpret_cast<const sockaddr*>(&addr), sizeof(addr)) != 0) {
    fail("bind");
  }
  if (::listen(sock_.fd(), 16) != 0) fail("listen");
  port_ = bound_port(sock_.fd());
}

std::optional<TcpStream> TcpListener::accept() {
  for (;;) {
    const int fd = ::accept(sock_.fd(), nullptr, nullptr);
    if (fd >= 0) return TcpStream(Socket(fd));
    if (errno == EINTR) continue;
    return std::nullopt;
  }
}

UdpSocket::UdpSocket(const std::string& host, std::uint16_t port) {
  sock_ = Socket(::socket(AF_INET, SOCK_DGRAM, 0));
  if (!sock_.valid()) fail("socket");
  const sockaddr_in addr = make_addr(host, port);
  if (::bind(sock_.fd(), reinterpret_cast<const sockaddr*>(&addr), sizeof(addr)) != 0) {
    fail("bind");
  }
  port_ = bound_port(sock_.fd());
  timeval tv{0, 100000};
  ::setsockopt(sock_.fd(), SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof(tv));
}

void UdpSocket::send_to(const std::string& host, std::uint16_t port,
                        std::span<const std::uint8_t> data) {
  const sockaddr_in addr = make_addr(host, port);
  if (::sendto(sock_.fd(), data.data(), data.size(), 0,
               reinterpret_cast<const sockaddr*>(&addr), sizeof(addr)) < 0) {
    fail("sendto");
  }
}

std::optional<std::vector<std::uint8_t>> UdpSocket::receive(std::size_t max_size) {
  std::vector<std::uint8_t> buf(max_size);
  for (;;) {
    const ssize_t n = ::recv(sock_.fd(), buf.data(), buf.size(), 0);
    if (n > 0) {
      buf.resize(static_cast<std::size_t>(n));
      return buf;
    }
    if (n < 0 && errno == EINTR) continue;
    return std::nullopt;  // timeout, shutdown or error
  }
}

}  // namespace usnav::net
