#include "secmax/transport.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

namespace secmax {

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= std::uint32_t{p[i]} << (8 * i);
  return v;
}

[[noreturn]] void throw_errno(const std::string& what) {
  throw ProtocolError(what + ": " + std::strerror(errno));
}

}  // namespace

std::string to_string(MessageTag tag) {
  switch (tag) {
    case MessageTag::kStateShare: return "STATE_SHARE";
    case MessageTag::kTripleShare: return "TRIPLE_SHARE";
    case MessageTag::kBeaverOpen: return "BEAVER_OPEN";
    case MessageTag::kGarbledCircuit: return "GARBLED_CIRCUIT";
    case MessageTag::kGarblerInputLabels: return "GARBLER_INPUT_LABELS";
    case MessageTag::kOtRequest: return "OT_REQUEST";
    case MessageTag::kOtResponse: return "OT_RESPONSE";
    case MessageTag::kOutputDecode: return "OUTPUT_DECODE";
    case MessageTag::kMaskedResult: return "MASKED_RESULT";
  }
  return "UNKNOWN";
}

MessageTag parse_message_tag(std::uint8_t raw) {
  if (raw < 1 || raw > kMessageTagCount) throw ProtocolError("unknown message tag " + std::to_string(raw));
  return static_cast<MessageTag>(raw);
}

std::vector<std::uint8_t> encode_frame(const Frame& f) {
  if (f.payload.size() > kMaxFramePayload) throw ContractError("frame payload too large");
  std::vector<std::uint8_t> out;
  out.reserve(kFrameHeaderBytes + f.payload.size());
  put_u32(out, static_cast<std::uint32_t>(kFrameHeaderBytes - 4 + f.payload.size()));
  out.push_back(static_cast<std::uint8_t>(f.tag));
  put_u32(out, f.session);
  put_u32(out, f.step);
  out.insert(out.end(), f.payload.begin(), f.payload.end());
  return out;
}

Frame decode_frame(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kFrameHeaderBytes) throw ProtocolError("truncated frame header");
  const std::uint32_t length = get_u32(bytes.data());
  if (length != bytes.size() - 4) throw ProtocolError("frame length field does not match the frame size");
  Frame f;
  f.tag = parse_message_tag(bytes[4]);
  f.session = get_u32(bytes.data() + 5);
  f.step = get_u32(bytes.data() + 9);
  f.payload.assign(bytes.begin() + kFrameHeaderBytes, bytes.end());
  return f;
}

void MemoryChannel::write(std::span<const std::uint8_t> bytes) {
  {
    std::lock_guard lock(mutex_);
    buffer_.insert(buffer_.end(), bytes.begin(), bytes.end());
  }
  ready_.notify_all();
}

void MemoryChannel::read_exact(std::span<std::uint8_t> out, std::chrono::milliseconds timeout) {
  std::unique_lock lock(mutex_);
  const bool arrived =
      ready_.wait_for(lock, timeout, [&] { return aborted_ || buffer_.size() >= out.size(); });
  if (aborted_) throw ProtocolError("channel aborted");
  if (!arrived) {
    if (timeout.count() == 0) throw ProtocolError("schedule violation: read from a channel with no pending frame");
    throw TimeoutError("no message within " + std::to_string(timeout.count()) + " ms");
  }
  std::copy_n(buffer_.begin(), out.size(), out.begin());
  buffer_.erase(buffer_.begin(), buffer_.begin() + static_cast<std::ptrdiff_t>(out.size()));
}

void MemoryChannel::abort() {
  {
    std::lock_guard lock(mutex_);
    aborted_ = true;
  }
  ready_.notify_all();
}

void MemoryChannel::reset() {
  std::lock_guard lock(mutex_);
  aborted_ = false;
  buffer_.clear();
}

SocketChannel::SocketChannel(int write_fd, int read_fd) : write_fd_(write_fd), read_fd_(read_fd) {}

SocketChannel::~SocketChannel() {
  ::close(write_fd_);
  ::close(read_fd_);
}

void SocketChannel::write(std::span<const std::uint8_t> bytes) {
  std::size_t sent = 0;
  while (sent < bytes.size()) {
    const ssize_t n = ::send(write_fd_, bytes.data() + sent, bytes.size() - sent, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw_errno("socket send failed");
    }
    sent += static_cast<std::size_t>(n);
  }
}

void SocketChannel::read_exact(std::span<std::uint8_t> out, std::chrono::milliseconds timeout) {
  using Clock = std::chrono::steady_clock;
  const auto deadline = Clock::now() + timeout;
  std::size_t got = 0;
  while (got < out.size()) {
    if (aborted_) throw ProtocolError("channel aborted");
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now());
    if (left.count() <= 0 && timeout.count() > 0)
      throw TimeoutError("no message within " + std::to_string(timeout.count()) + " ms");
    pollfd pfd{read_fd_, POLLIN, 0};
    // Short slices so that abort() is noticed promptly.
    const int slice = static_cast<int>(std::min<long long>(std::max<long long>(left.count(), 0), 50));
    const int r = ::poll(&pfd, 1, slice);
    if (r < 0) {
      if (errno == EINTR) continue;
      throw_errno("poll failed");
    }
    if (r == 0) {
      if (timeout.count() == 0) throw ProtocolError("schedule violation: read from a channel with no pending frame");
      continue;
    }
    const ssize_t n = ::recv(read_fd_, out.data() + got, out.size() - got, 0);
    if (n == 0) throw ProtocolError("peer closed the connection");
    if (n < 0) {
      if (errno == EINTR || errno == EAGAIN) continue;
      throw_errno("socket receive failed");
    }
    got += static_cast<std::size_t>(n);
  }
}

void SocketChannel::abort() { aborted_ = true; }

void SocketChannel::reset() {
  aborted_ = false;
  std::array<std::uint8_t, 4096> sink{};
  for (;;) {
    pollfd pfd{read_fd_, POLLIN, 0};
    if (::poll(&pfd, 1, 0) <= 0) break;
    if (::recv(read_fd_, sink.data(), sink.size(), 0) <= 0) break;
  }
}

std::unique_ptr<ByteChannel> make_loopback_socket_channel() {
  const int listener = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listener < 0) throw_errno("socket");
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = 0;
  socklen_t len = sizeof addr;
  if (::bind(listener, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 || ::listen(listener, 1) != 0 ||
      ::getsockname(listener, reinterpret_cast<sockaddr*>(&addr), &len) != 0) {
    ::close(listener);
    throw_errno("loopback listen");
  }
  const int writer = ::socket(AF_INET, SOCK_STREAM, 0);
  if (writer < 0 || ::connect(writer, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
    ::close(listener);
    throw_errno("loopback connect");
  }
  const int reader = ::accept(listener, nullptr, nullptr);
  ::close(listener);
  if (reader < 0) {
    ::close(writer);
    throw_errno("loopback accept");
  }
  const int one = 1;
  ::setsockopt(writer, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  return std::make_unique<SocketChannel>(writer, reader);
}

void write_frame(ByteChannel& ch, const Frame& f) { ch.write(encode_frame(f)); }

Frame read_frame(ByteChannel& ch, std::chrono::milliseconds timeout) {
  std::array<std::uint8_t, 4> len_bytes{};
  ch.read_exact(len_bytes, timeout);
  const std::uint32_t length = get_u32(len_bytes.data());
  if (length < kFrameHeaderBytes - 4 || length - (kFrameHeaderBytes - 4) > kMaxFramePayload)
    throw ProtocolError("frame length " + std::to_string(length) + " out of range");
  std::vector<std::uint8_t> bytes(4 + length);
  std::copy(len_bytes.begin(), len_bytes.end(), bytes.begin());
  ch.read_exact(std::span(bytes).subspan(4), timeout);
  return decode_frame(bytes);
}

}  // namespace secmax
