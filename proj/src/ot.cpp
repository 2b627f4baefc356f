#include "secmax/ot.hpp"

#include <algorithm>
#include <cstring>

#include <sodium.h>

#include "secmax/sha256.hpp"

namespace secmax {

namespace {

void ensure_sodium() {
  static const bool ready = [] {
    if (sodium_init() < 0) throw Error("libsodium failed to initialize");
    return true;
  }();
  (void)ready;
}

class Ristretto255 final : public OtGroup {
 public:
  Ristretto255() { ensure_sodium(); }

  std::string name() const override { return "ristretto255"; }
  std::size_t element_bytes() const override { return crypto_core_ristretto255_BYTES; }
  bool is_secure() const override { return true; }

  Scalar random_scalar(Prng& rng) const override {
    Scalar s(crypto_core_ristretto255_SCALARBYTES);
    std::array<std::uint8_t, crypto_core_ristretto255_NONREDUCEDSCALARBYTES> wide{};
    do {
      rng.fill(wide);
      crypto_core_ristretto255_scalar_reduce(s.data(), wide.data());
    } while (sodium_is_zero(s.data(), s.size()));
    return s;
  }

  Element base_mul(const Scalar& s) const override {
    Element out(crypto_core_ristretto255_BYTES);
    if (crypto_scalarmult_ristretto255_base(out.data(), s.data()) != 0) throw ProtocolError("degenerate OT scalar");
    return out;
  }

  Element mul(const Element& x, const Scalar& s) const override {
    check(x);
    Element out(crypto_core_ristretto255_BYTES);
    if (crypto_scalarmult_ristretto255(out.data(), s.data(), x.data()) != 0)
      throw ProtocolError("OT scalar multiplication produced the identity");
    return out;
  }

  Element sub(const Element& x, const Element& y) const override {
    check(x);
    check(y);
    Element out(crypto_core_ristretto255_BYTES);
    if (crypto_core_ristretto255_sub(out.data(), x.data(), y.data()) != 0) throw ProtocolError("invalid OT element");
    return out;
  }

  bool is_valid(const Element& x) const override {
    return x.size() == crypto_core_ristretto255_BYTES && crypto_core_ristretto255_is_valid_point(x.data()) == 1;
  }

  Element hash_to_element(std::string_view domain) const override {
    std::array<std::uint8_t, crypto_hash_sha512_BYTES> h{};
    crypto_hash_sha512(h.data(), reinterpret_cast<const unsigned char*>(domain.data()), domain.size());
    Element out(crypto_core_ristretto255_BYTES);
    crypto_core_ristretto255_from_hash(out.data(), h.data());
    return out;
  }

 private:
  void check(const Element& x) const {
    if (!is_valid(x)) throw ProtocolError("malformed ristretto255 element");
  }
};

/// Subgroup of quadratic residues modulo a 62-bit safe prime.
class SafePrimeTestGroup final : public OtGroup {
 public:
  static constexpr std::uint64_t kPrime = 4611686018427377339ULL;
  static constexpr std::uint64_t kOrder = (kPrime - 1) / 2;
  static constexpr std::uint64_t kGenerator = 4;

  std::string name() const override { return "insecure-test-61"; }
  std::size_t element_bytes() const override { return 8; }
  bool is_secure() const override { return false; }

  Scalar random_scalar(Prng& rng) const override {
    std::uint64_t s = 0;
    while (s == 0) s = rng() % kOrder;
    return encode(s);
  }

  Element base_mul(const Scalar& s) const override { return encode(pow(kGenerator, decode(s))); }

  Element mul(const Element& x, const Scalar& s) const override {
    if (!is_valid(x)) throw ProtocolError("malformed test-group element");
    return encode(pow(decode(x), decode(s)));
  }

  Element sub(const Element& x, const Element& y) const override {
    if (!is_valid(x) || !is_valid(y)) throw ProtocolError("malformed test-group element");
    return encode(mulmod(decode(x), pow(decode(y), kPrime - 2)));
  }

  bool is_valid(const Element& x) const override {
    if (x.size() != 8) return false;
    const std::uint64_t v = decode(x);
    return v >= 1 && v < kPrime && pow(v, kOrder) == 1;
  }

  Element hash_to_element(std::string_view domain) const override {
    for (std::uint32_t counter = 0;; ++counter) {
      Sha256 h;
      h.update(domain);
      const std::array<std::uint8_t, 4> c{static_cast<std::uint8_t>(counter), 0, 0, 0};
      h.update(c);
      const Digest d = h.finish();
      std::uint64_t v = 0;
      for (int i = 0; i < 8; ++i) v = (v << 8) | d[i];
      v %= kPrime;
      const std::uint64_t sq = mulmod(v, v);
      if (sq > 1) return encode(sq);
    }
  }

 private:
  static std::uint64_t mulmod(std::uint64_t a, std::uint64_t b) {
    return static_cast<std::uint64_t>(static_cast<unsigned __int128>(a) * b % kPrime);
  }
  static std::uint64_t pow(std::uint64_t base, std::uint64_t e) {
    std::uint64_t r = 1;
    base %= kPrime;
    while (e != 0) {
      if (e & 1U) r = mulmod(r, base);
      base = mulmod(base, base);
      e >>= 1;
    }
    return r;
  }
  static Element encode(std::uint64_t v) {
    Element out(8);
    for (int i = 7; i >= 0; --i) {
      out[i] = static_cast<std::uint8_t>(v);
      v >>= 8;
    }
    return out;
  }
  static std::uint64_t decode(const std::vector<std::uint8_t>& x) {
    std::uint64_t v = 0;
    for (std::uint8_t b : x) v = (v << 8) | b;
    return v;
  }
};

constexpr std::string_view kSetupDomain = "secmax-ot-setup-v1";

Digest slot_pad(std::size_t index, int slot, const OtGroup::Element& shared) {
  Sha256 h;
  h.update("secmax-ot-key");
  const std::array<std::uint8_t, 5> meta{static_cast<std::uint8_t>(index >> 24), static_cast<std::uint8_t>(index >> 16),
                                         static_cast<std::uint8_t>(index >> 8), static_cast<std::uint8_t>(index),
                                         static_cast<std::uint8_t>(slot)};
  h.update(meta);
  h.update(shared);
  return h.finish();
}

OtSlot wrap(const Label& m, const Digest& pad) {
  OtSlot s;
  for (std::size_t i = 0; i < 16; ++i) {
    s.wrapped[i] = m.bytes[i] ^ pad[i];
    s.tag[i] = pad[16 + i];
  }
  return s;
}

}  // namespace

std::shared_ptr<const OtGroup> ristretto255_group() {
  static const auto group = std::make_shared<const Ristretto255>();
  return group;
}

std::shared_ptr<const OtGroup> insecure_test_group() {
  static const auto group = std::make_shared<const SafePrimeTestGroup>();
  return group;
}

OtParams OtParams::standard() {
  auto g = ristretto255_group();
  return {g, g->hash_to_element(kSetupDomain)};
}

OtParams OtParams::insecure_test() {
  auto g = insecure_test_group();
  return {g, g->hash_to_element(kSetupDomain)};
}

OtParams OtParams::by_name(const std::string& name) {
  if (name == "ristretto255") return standard();
  if (name == "insecure-test-61" || name == "test") return insecure_test();
  throw ContractError("unknown OT group '" + name + "'");
}

std::pair<OtRequest, OtReceiverState> ot_receive_phase1(const OtParams& params, const std::vector<bool>& choices,
                                                        Prng& rng) {
  const OtGroup& g = *params.group;
  OtRequest req;
  OtReceiverState state;
  state.choices = choices;
  req.keys.reserve(choices.size());
  state.secrets.reserve(choices.size());
  for (bool choice : choices) {
    OtGroup::Scalar k = g.random_scalar(rng);
    OtGroup::Element pk = g.base_mul(k);
    // The chosen slot's key is k*G; the request always carries PK0.
    req.keys.push_back(choice ? g.sub(params.setup, pk) : std::move(pk));
    state.secrets.push_back(std::move(k));
  }
  return {std::move(req), std::move(state)};
}

OtResponse ot_send(const OtParams& params, const OtRequest& request, std::span<const std::array<Label, 2>> messages,
                   Prng& rng) {
  const OtGroup& g = *params.group;
  if (request.keys.size() != messages.size())
    throw ProtocolError("OT request has " + std::to_string(request.keys.size()) + " keys for " +
                        std::to_string(messages.size()) + " message pairs");
  OtResponse resp;
  resp.ephemeral.reserve(messages.size());
  resp.slots.reserve(messages.size());
  for (std::size_t i = 0; i < messages.size(); ++i) {
    const OtGroup::Element& pk0 = request.keys[i];
    if (!g.is_valid(pk0)) throw ProtocolError("OT request element " + std::to_string(i) + " is not a group member");
    const OtGroup::Element pk1 = g.sub(params.setup, pk0);
    const OtGroup::Scalar r = g.random_scalar(rng);
    resp.ephemeral.push_back(g.base_mul(r));
    resp.slots.push_back({wrap(messages[i][0], slot_pad(i, 0, g.mul(pk0, r))),
                          wrap(messages[i][1], slot_pad(i, 1, g.mul(pk1, r)))});
  }
  return resp;
}

std::optional<Label> ot_try_unwrap(const OtParams& params, const OtResponse& response, const OtReceiverState& state,
                                   std::size_t index, int slot) {
  if (index >= response.slots.size() || index >= state.secrets.size())
    throw ProtocolError("OT response index out of range");
  const OtGroup::Element shared = params.group->mul(response.ephemeral[index], state.secrets[index]);
  const Digest pad = slot_pad(index, slot, shared);
  const OtSlot& s = response.slots[index][slot];
  if (!std::equal(s.tag.begin(), s.tag.end(), pad.begin() + 16)) return std::nullopt;
  Label out;
  for (std::size_t i = 0; i < 16; ++i) out.bytes[i] = s.wrapped[i] ^ pad[i];
  return out;
}

std::vector<Label> ot_receive_phase2(const OtParams& params, const OtResponse& response,
                                     const OtReceiverState& state) {
  if (response.slots.size() != state.choices.size() || response.ephemeral.size() != state.choices.size())
    throw ProtocolError("OT response size does not match the request");
  std::vector<Label> out;
  out.reserve(state.choices.size());
  for (std::size_t i = 0; i < state.choices.size(); ++i) {
    auto label = ot_try_unwrap(params, response, state, i, state.choices[i] ? 1 : 0);
    if (!label) throw ProtocolError("OT integrity failure at bit " + std::to_string(i));
    out.push_back(*label);
  }
  return out;
}

std::vector<std::uint8_t> serialize_ot_request(const OtParams& params, const OtRequest& r) {
  std::vector<std::uint8_t> out;
  out.reserve(r.keys.size() * params.group->element_bytes());
  for (const auto& k : r.keys) {
    if (k.size() != params.group->element_bytes()) throw ContractError("OT element has the wrong width");
    out.insert(out.end(), k.begin(), k.end());
  }
  return out;
}

OtRequest deserialize_ot_request(const OtParams& params, std::span<const std::uint8_t> in) {
  const std::size_t w = params.group->element_bytes();
  if (in.size() % w != 0) throw ProtocolError("OT request size is not a multiple of the element width");
  OtRequest r;
  for (std::size_t off = 0; off < in.size(); off += w) r.keys.emplace_back(in.begin() + off, in.begin() + off + w);
  return r;
}

std::vector<std::uint8_t> serialize_ot_response(const OtParams& params, const OtResponse& r) {
  std::vector<std::uint8_t> out;
  for (std::size_t i = 0; i < r.slots.size(); ++i) {
    if (r.ephemeral[i].size() != params.group->element_bytes()) throw ContractError("OT element has the wrong width");
    out.insert(out.end(), r.ephemeral[i].begin(), r.ephemeral[i].end());
    for (const OtSlot& s : r.slots[i]) {
      out.insert(out.end(), s.wrapped.begin(), s.wrapped.end());
      out.insert(out.end(), s.tag.begin(), s.tag.end());
    }
  }
  return out;
}

OtResponse deserialize_ot_response(const OtParams& params, std::span<const std::uint8_t> in) {
  const std::size_t w = params.group->element_bytes();
  const std::size_t stride = w + 2 * 32;
  if (in.size() % stride != 0) throw ProtocolError("OT response size mismatch");
  OtResponse r;
  for (std::size_t off = 0; off < in.size(); off += stride) {
    r.ephemeral.emplace_back(in.begin() + off, in.begin() + off + w);
    std::array<OtSlot, 2> slots;
    for (int s = 0; s < 2; ++s) {
      const std::uint8_t* p = in.data() + off + w + 32 * s;
      std::memcpy(slots[s].wrapped.data(), p, 16);
      std::memcpy(slots[s].tag.data(), p + 16, 16);
    }
    r.slots.push_back(slots);
  }
  return r;
}

}  // namespace secmax
