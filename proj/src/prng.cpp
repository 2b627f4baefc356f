#include "secmax/prng.hpp"

#include <cstring>

#include <sodium.h>

#include "secmax/sha256.hpp"

namespace secmax {

namespace {

std::array<std::uint8_t, 32> derive_key(std::span<const std::uint8_t> material, std::string_view domain) {
  Sha256 h;
  h.update(material);
  h.update("|");
  h.update(domain);
  return h.finish();
}

}  // namespace

Prng::Prng(std::uint64_t seed, std::string_view domain) {
  std::array<std::uint8_t, 8> le{};
  for (int i = 0; i < 8; ++i) le[i] = static_cast<std::uint8_t>(seed >> (8 * i));
  key_ = derive_key(le, domain);
}

Prng::Prng(const std::array<std::uint8_t, 32>& key) : key_(key) {}

Prng Prng::derive(std::string_view domain) const { return Prng(derive_key(key_, domain)); }

void Prng::refill() {
  static const std::array<std::uint8_t, crypto_stream_chacha20_ietf_NONCEBYTES> nonce{};
  // 1024 bytes = 16 ChaCha20 blocks per refill.
  std::memset(buffer_.data(), 0, buffer_.size());
  crypto_stream_chacha20_ietf_xor_ic(buffer_.data(), buffer_.data(), buffer_.size(), nonce.data(),
                                     block_counter_, key_.data());
  block_counter_ += static_cast<std::uint32_t>(buffer_.size() / 64);
  offset_ = 0;
}

void Prng::fill(std::span<std::uint8_t> out) {
  std::size_t done = 0;
  while (done < out.size()) {
    if (offset_ == buffer_.size()) refill();
    const std::size_t take = std::min(out.size() - done, buffer_.size() - offset_);
    std::memcpy(out.data() + done, buffer_.data() + offset_, take);
    offset_ += take;
    done += take;
  }
}

Prng::result_type Prng::operator()() {
  std::array<std::uint8_t, 8> raw{};
  fill(raw);
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | raw[i];
  return v;
}

std::uint64_t Prng::bits(unsigned bits) {
  const std::uint64_t v = (*this)();
  return bits >= 64 ? v : (v & ((std::uint64_t{1} << bits) - 1));
}

}  // namespace secmax
