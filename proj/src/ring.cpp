#include "secmax/ring.hpp"

namespace secmax {

namespace {

const Ring& common_ring(const RingElement& a, const RingElement& b) {
  if (a.bit_width() != b.bit_width()) throw ContractError("ring elements of different bit widths");
  return a.ring();
}

}  // namespace

RingElement mod_add(const RingElement& a, const RingElement& b) {
  const Ring& r = common_ring(a, b);
  return {r.reduce(a.value() + b.value()), r};
}

RingElement mod_sub(const RingElement& a, const RingElement& b) {
  const Ring& r = common_ring(a, b);
  return {r.reduce(a.value() - b.value()), r};
}

RingElement mod_mul(const RingElement& a, const RingElement& b) {
  const Ring& r = common_ring(a, b);
  return {r.reduce(a.value() * b.value()), r};
}

SignedValue mu(const RingElement& a) { return {a.ring().mu(a.value()), a.bit_width()}; }

RingElement lift(const SignedValue& s) {
  const Ring r(s.bit_width());
  return {r.lift(s.value()), r};
}

BitVector to_bits(const RingElement& a) {
  std::vector<bool> bits(a.bit_width());
  for (unsigned j = 0; j < a.bit_width(); ++j) bits[j] = ((a.value() >> j) & 1U) != 0;
  return BitVector(std::move(bits));
}

RingElement from_bits(const BitVector& v) {
  if (v.size() == 0 || v.size() > kMaxBitWidth) throw ContractError("bit vector width must lie in [1, 64]");
  std::uint64_t value = 0;
  for (std::size_t j = 0; j < v.size(); ++j)
    if (v[j]) value |= std::uint64_t{1} << j;
  return {value, static_cast<unsigned>(v.size())};
}

void append_le(std::vector<std::uint8_t>& out, std::uint64_t residue, unsigned bit_width) {
  for (std::size_t i = 0; i < ring_bytes(bit_width); ++i) out.push_back(static_cast<std::uint8_t>(residue >> (8 * i)));
}

std::uint64_t read_le(std::span<const std::uint8_t>& in, unsigned bit_width) {
  const std::size_t n = ring_bytes(bit_width);
  if (in.size() < n) throw ContractError("truncated ring element");
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < n; ++i) v |= std::uint64_t{in[i]} << (8 * i);
  in = in.subspan(n);
  if (v != Ring(bit_width).reduce(v)) throw ContractError("ring element has bits above the bit width");
  return v;
}

}  // namespace secmax
