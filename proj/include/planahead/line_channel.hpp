#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>

namespace planahead {

// Newline-delimited byte stream. write_line appends the '\n'.
class LineChannel {
 public:
  virtual ~LineChannel() = default;
  // nullopt once the peer has closed the stream.
  virtual std::optional<std::string> read_line() = 0;
  virtual void write_line(std::string_view line) = 0;
};

// Channel over POSIX file descriptors (a socket, or a pipe pair). Owns and
// closes them. I/O failures throw ProtocolError "transport".
class FdLineChannel final : public LineChannel {
 public:
  FdLineChannel(int read_fd, int write_fd);
  ~FdLineChannel() override;
  FdLineChannel(const FdLineChannel&) = delete;
  FdLineChannel& operator=(const FdLineChannel&) = delete;

  std::optional<std::string> read_line() override;
  void write_line(std::string_view line) override;
  void shutdown_write();

 private:
  int read_fd_;
  int write_fd_;
  std::string buffer_;
};

std::pair<std::unique_ptr<FdLineChannel>, std::unique_ptr<FdLineChannel>> make_socket_pair();

std::unique_ptr<FdLineChannel> connect_tcp(const std::string& host, std::uint16_t port);

class TcpListener {
 public:
  // Port 0 picks an ephemeral port.
  TcpListener(const std::string& host, std::uint16_t port);
  ~TcpListener();
  TcpListener(const TcpListener&) = delete;
  TcpListener& operator=(const TcpListener&) = delete;

  std::uint16_t port() const { return port_; }
  std::unique_ptr<FdLineChannel> accept();

 private:
  int fd_ = -1;
  std::uint16_t port_ = 0;
};

}  // namespace planahead
