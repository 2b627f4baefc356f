#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string_view>

#include <sodium.h>

namespace secmax {

using Digest = std::array<std::uint8_t, 32>;

/// Incremental SHA-256 (libsodium backed).
class Sha256 {
 public:
  Sha256();
  Sha256& update(std::span<const std::uint8_t> data);
  Sha256& update(std::string_view text);
  Digest finish();

 private:
  crypto_hash_sha256_state state_;
};

Digest sha256(std::span<const std::uint8_t> data);
Digest sha256(std::string_view text);

}  // namespace secmax
