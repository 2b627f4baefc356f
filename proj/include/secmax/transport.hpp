#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "secmax/errors.hpp"

namespace secmax {

enum class MessageTag : std::uint8_t {
  kStateShare = 1,
  kTripleShare = 2,
  kBeaverOpen = 3,
  kGarbledCircuit = 4,
  kGarblerInputLabels = 5,
  kOtRequest = 6,
  kOtResponse = 7,
  kOutputDecode = 8,
  kMaskedResult = 9,
};

inline constexpr std::size_t kMessageTagCount = 9;

[[nodiscard]] std::string to_string(MessageTag tag);
/// Throws ProtocolError for bytes outside 1..9.
[[nodiscard]] MessageTag parse_message_tag(std::uint8_t raw);

/// Wire frame: u32 LE length of everything after the length field, u8 tag,
/// u32 LE session id, u32 LE time step, payload.
struct Frame {
  MessageTag tag = MessageTag::kStateShare;
  std::uint32_t session = 0;
  std::uint32_t step = 0;
  std::vector<std::uint8_t> payload;

  friend bool operator==(const Frame&, const Frame&) = default;
};

inline constexpr std::size_t kFrameHeaderBytes = 4 + 1 + 4 + 4;
inline constexpr std::uint32_t kMaxFramePayload = 64u << 20;

std::vector<std::uint8_t> encode_frame(const Frame& f);
/// Decodes exactly one frame occupying all of `bytes`.
Frame decode_frame(std::span<const std::uint8_t> bytes);

/// Ordered, reliable, one-directional byte stream.
class ByteChannel {
 public:
  virtual ~ByteChannel() = default;

  virtual void write(std::span<const std::uint8_t> bytes) = 0;
  /// Fills `out` completely. Throws TimeoutError when `timeout` passes first
  /// and ProtocolError once the channel is aborted.
  virtual void read_exact(std::span<std::uint8_t> out, std::chrono::milliseconds timeout) = 0;
  /// Wakes blocked readers with an error until reset().
  virtual void abort() = 0;
  /// Clears the abort flag and discards unread bytes.
  virtual void reset() = 0;
};

/// In-process channel. With a zero timeout a read of missing bytes fails at
/// once, which is how a single-threaded schedule detects an ordering bug.
class MemoryChannel final : public ByteChannel {
 public:
  void write(std::span<const std::uint8_t> bytes) override;
  void read_exact(std::span<std::uint8_t> out, std::chrono::milliseconds timeout) override;
  void abort() override;
  void reset() override;

 private:
  std::mutex mutex_;
  std::condition_variable ready_;
  std::deque<std::uint8_t> buffer_;
  bool aborted_ = false;
};

/// One direction of a connected TCP stream.
class SocketChannel final : public ByteChannel {
 public:
  SocketChannel(int write_fd, int read_fd);
  ~SocketChannel() override;
  SocketChannel(const SocketChannel&) = delete;
  SocketChannel& operator=(const SocketChannel&) = delete;

  void write(std::span<const std::uint8_t> bytes) override;
  void read_exact(std::span<std::uint8_t> out, std::chrono::milliseconds timeout) override;
  void abort() override;
  void reset() override;

 private:
  int write_fd_;
  int read_fd_;
  std::atomic<bool> aborted_{false};
};

/// Connects a fresh TCP stream over 127.0.0.1 and wraps it as a channel.
std::unique_ptr<ByteChannel> make_loopback_socket_channel();

void write_frame(ByteChannel& ch, const Frame& f);
Frame read_frame(ByteChannel& ch, std::chrono::milliseconds timeout);

}  // namespace secmax
