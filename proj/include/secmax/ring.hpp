#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "secmax/errors.hpp"

namespace secmax {

inline constexpr unsigned kMaxBitWidth = 64;

using RingMatrix = Eigen::Matrix<std::uint64_t, Eigen::Dynamic, Eigen::Dynamic>;
using RingVector = Eigen::Matrix<std::uint64_t, Eigen::Dynamic, 1>;
using IntMatrix = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;
using IntVector = Eigen::Matrix<std::int64_t, Eigen::Dynamic, 1>;

/// The ring Z_q with q = 2^l.
///
/// Residues are stored in the low l bits of a uint64; unsigned wrap-around
/// of the machine word is reduction mod 2^64, so masking after any sum or
/// product gives the residue mod 2^l.
class Ring {
 public:
  explicit Ring(unsigned bit_width) : bits_(bit_width) {
    if (bit_width == 0 || bit_width > kMaxBitWidth) throw ContractError("ring bit width must lie in [1, 64]");
  }

  [[nodiscard]] unsigned bit_width() const { return bits_; }
  [[nodiscard]] std::uint64_t mask() const {
    return bits_ == 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << bits_) - 1;
  }
  /// Smallest and largest member of Z_q = {-2^(l-1), ..., 2^(l-1) - 1}.
  [[nodiscard]] std::int64_t signed_min() const {
    return bits_ == 64 ? INT64_MIN : -(std::int64_t{1} << (bits_ - 1));
  }
  [[nodiscard]] std::int64_t signed_max() const {
    return bits_ == 64 ? INT64_MAX : (std::int64_t{1} << (bits_ - 1)) - 1;
  }
  [[nodiscard]] bool contains_signed(std::int64_t v) const { return v >= signed_min() && v <= signed_max(); }

  [[nodiscard]] std::uint64_t reduce(std::uint64_t v) const { return v & mask(); }
  /// Residue of an arbitrary integer (no range check).
  [[nodiscard]] std::uint64_t embed(std::int64_t v) const { return static_cast<std::uint64_t>(v) & mask(); }

  /// Two's-complement reinterpretation: v - q if v >= q/2, else v.
  [[nodiscard]] std::int64_t mu(std::uint64_t v) const {
    v = reduce(v);
    if (bits_ == 64) return static_cast<std::int64_t>(v);
    const std::uint64_t half = std::uint64_t{1} << (bits_ - 1);
    return v >= half ? static_cast<std::int64_t>(v) - static_cast<std::int64_t>(half << 1)
                     : static_cast<std::int64_t>(v);
  }

  /// Inverse of mu on Z_q.
  [[nodiscard]] std::uint64_t lift(std::int64_t v) const {
    if (!contains_signed(v)) throw RangeError("value " + std::to_string(v) + " outside Z_q");
    return embed(v);
  }

  friend bool operator==(const Ring&, const Ring&) = default;

 private:
  unsigned bits_;
};

/// Elementwise residue mod 2^l of a uint64 expression.
template <typename Derived>
auto reduce(const Eigen::MatrixBase<Derived>& m, const Ring& ring) {
  const std::uint64_t mask = ring.mask();
  return m.unaryExpr([mask](std::uint64_t v) { return v & mask; });
}

/// Elementwise mu of residues.
template <typename Derived>
auto mu(const Eigen::MatrixBase<Derived>& m, const Ring& ring) {
  return m.unaryExpr([ring](std::uint64_t v) { return ring.mu(v); });
}

/// Elementwise residue of signed integers, with no range check.
template <typename Derived>
auto embed(const Eigen::MatrixBase<Derived>& m, const Ring& ring) {
  return m.unaryExpr([ring](std::int64_t v) { return ring.embed(v); });
}

/// Elementwise lift of signed integers; throws RangeError if any entry lies outside Z_q.
template <typename Derived>
RingMatrix lift(const Eigen::MatrixBase<Derived>& m, const Ring& ring) {
  RingMatrix out(m.rows(), m.cols());
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) out(i, j) = ring.lift(static_cast<std::int64_t>(m(i, j)));
  return out;
}

/// A residue in N_q = {0, ..., 2^l - 1}.
class RingElement {
 public:
  RingElement(std::uint64_t value, unsigned bit_width) : value_(value), ring_(bit_width) {
    if (value != ring_.reduce(value)) throw ContractError("residue does not fit the bit width");
  }
  RingElement(std::uint64_t value, const Ring& ring) : RingElement(value, ring.bit_width()) {}

  [[nodiscard]] std::uint64_t value() const { return value_; }
  [[nodiscard]] unsigned bit_width() const { return ring_.bit_width(); }
  [[nodiscard]] const Ring& ring() const { return ring_; }

  friend bool operator==(const RingElement&, const RingElement&) = default;

 private:
  std::uint64_t value_;
  Ring ring_;
};

/// A member of Z_q = {-2^(l-1), ..., 2^(l-1) - 1}.
class SignedValue {
 public:
  SignedValue(std::int64_t value, unsigned bit_width) : value_(value), ring_(bit_width) {
    if (!ring_.contains_signed(value)) throw RangeError("value " + std::to_string(value) + " outside Z_q");
  }

  [[nodiscard]] std::int64_t value() const { return value_; }
  [[nodiscard]] unsigned bit_width() const { return ring_.bit_width(); }

  friend bool operator==(const SignedValue&, const SignedValue&) = default;

 private:
  std::int64_t value_;
  Ring ring_;
};

/// Fixed-width bit string, index 0 least significant.
class BitVector {
 public:
  explicit BitVector(std::vector<bool> bits) : bits_(std::move(bits)) {}

  [[nodiscard]] std::size_t size() const { return bits_.size(); }
  [[nodiscard]] bool operator[](std::size_t i) const { return bits_[i]; }
  [[nodiscard]] const std::vector<bool>& bits() const { return bits_; }

  friend bool operator==(const BitVector&, const BitVector&) = default;

 private:
  std::vector<bool> bits_;
};

RingElement mod_add(const RingElement& a, const RingElement& b);
RingElement mod_sub(const RingElement& a, const RingElement& b);
RingElement mod_mul(const RingElement& a, const RingElement& b);

SignedValue mu(const RingElement& a);
RingElement lift(const SignedValue& s);

BitVector to_bits(const RingElement& a);
RingElement from_bits(const BitVector& v);

/// Bytes used to serialize one residue: ceil(l / 8).
[[nodiscard]] inline std::size_t ring_bytes(unsigned bit_width) { return (bit_width + 7) / 8; }

/// Little-endian, unsigned, ceil(l / 8) bytes.
void append_le(std::vector<std::uint8_t>& out, std::uint64_t residue, unsigned bit_width);
/// Reads one residue and advances `in`; throws ContractError on short input or stray high bits.
std::uint64_t read_le(std::span<const std::uint8_t>& in, unsigned bit_width);

}  // namespace secmax
