#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string_view>

namespace secmax {

/// Deterministic ChaCha20 keystream generator.
///
/// Every source of protocol randomness (shares, triples, labels, OT scalars,
/// masks) draws from one of these, so a session seed replays a run exactly.
/// Satisfies UniformRandomBitGenerator.
class Prng {
 public:
  using result_type = std::uint64_t;

  /// Keys the stream with SHA-256(seed || domain).
  explicit Prng(std::uint64_t seed, std::string_view domain = "secmax");

  /// Independent child stream, keyed from this stream's key and `domain`.
  [[nodiscard]] Prng derive(std::string_view domain) const;

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()();

  /// Uniform value in [0, 2^bits).
  std::uint64_t bits(unsigned bits);

  void fill(std::span<std::uint8_t> out);

 private:
  explicit Prng(const std::array<std::uint8_t, 32>& key);
  void refill();

  std::array<std::uint8_t, 32> key_{};
  std::array<std::uint8_t, 1024> buffer_{};
  std::size_t offset_ = buffer_.size();
  std::uint32_t block_counter_ = 0;
};

}  // namespace secmax
