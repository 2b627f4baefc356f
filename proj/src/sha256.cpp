#include "secmax/sha256.hpp"

namespace secmax {

Sha256::Sha256() { crypto_hash_sha256_init(&state_); }

Sha256& Sha256::update(std::span<const std::uint8_t> data) {
  crypto_hash_sha256_update(&state_, data.data(), data.size());
  return *this;
}

Sha256& Sha256::update(std::string_view text) {
  crypto_hash_sha256_update(&state_, reinterpret_cast<const unsigned char*>(text.data()), text.size());
  return *this;
}

Digest Sha256::finish() {
  Digest out{};
  crypto_hash_sha256_final(&state_, out.data());
  return out;
}

Digest sha256(std::span<const std::uint8_t> data) { return Sha256().update(data).finish(); }

Digest sha256(std::string_view text) { return Sha256().update(text).finish(); }

}  // namespace secmax
