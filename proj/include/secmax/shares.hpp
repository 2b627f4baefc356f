#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "secmax/prng.hpp"
#include "secmax/ring.hpp"

namespace secmax {

enum class Party : std::uint8_t { kOne = 1, kTwo = 2 };

/// One party's additive share of a ring-valued vector or matrix.
/// The secret is z = z(1) + z(2) mod 2^l.
template <typename Storage>
struct Share {
  Party party = Party::kOne;
  unsigned bit_width = 16;
  Storage values;

  [[nodiscard]] Ring ring() const { return Ring(bit_width); }
};

using ShareMatrix = Share<RingMatrix>;
using ShareVector = Share<RingVector>;

template <typename Storage>
using SharePair = std::pair<Share<Storage>, Share<Storage>>;

/// Splits residues into two shares; the first is uniform on N_q.
template <typename Derived>
SharePair<Eigen::Matrix<std::uint64_t, Derived::RowsAtCompileTime, Derived::ColsAtCompileTime>> share(
    const Eigen::MatrixBase<Derived>& secret, const Ring& ring, Prng& rng) {
  using Storage = Eigen::Matrix<std::uint64_t, Derived::RowsAtCompileTime, Derived::ColsAtCompileTime>;
  Storage first(secret.rows(), secret.cols());
  for (Eigen::Index j = 0; j < first.cols(); ++j)
    for (Eigen::Index i = 0; i < first.rows(); ++i) first(i, j) = rng.bits(ring.bit_width());
  Storage second = reduce(secret.derived() - first, ring);
  return {Share<Storage>{Party::kOne, ring.bit_width(), std::move(first)},
          Share<Storage>{Party::kTwo, ring.bit_width(), std::move(second)}};
}

/// Scalar sharing; returns (z(1), z(2)).
std::pair<RingElement, RingElement> share(const RingElement& z, Prng& rng);
std::pair<RingElement, RingElement> share(const SignedValue& z, Prng& rng);

/// mu(a + b mod q).
SignedValue reconstruct(const RingElement& a, const RingElement& b);

template <typename Storage>
IntMatrix reconstruct(const Share<Storage>& a, const Share<Storage>& b) {
  if (a.bit_width != b.bit_width || a.values.rows() != b.values.rows() || a.values.cols() != b.values.cols())
    throw ContractError("shares of different shape or width");
  if (a.party == b.party) throw ContractError("reconstruction needs one share of each party");
  const Ring ring = a.ring();
  return mu(reduce(a.values + b.values, ring), ring);
}

/// Residues a + b mod q, without reinterpretation.
template <typename Storage>
RingMatrix recombine(const Share<Storage>& a, const Share<Storage>& b) {
  if (a.bit_width != b.bit_width || a.values.rows() != b.values.rows() || a.values.cols() != b.values.cols())
    throw ContractError("shares of different shape or width");
  return reduce(a.values + b.values, a.ring());
}

template <typename Storage>
Share<Storage> add_shares(const Share<Storage>& x, const Share<Storage>& y) {
  if (x.party != y.party || x.bit_width != y.bit_width || x.values.rows() != y.values.rows() ||
      x.values.cols() != y.values.cols())
    throw ContractError("add_shares needs same-party shares of equal shape");
  return {x.party, x.bit_width, reduce(x.values + y.values, x.ring())};
}

/// [a z + b]: both parties scale by a; only party one adds b.
template <typename Storage>
Share<Storage> affine_public(const Share<Storage>& x, std::int64_t a, std::int64_t b) {
  const Ring ring = x.ring();
  const std::uint64_t ra = ring.embed(a);
  const std::uint64_t rb = x.party == Party::kOne ? ring.embed(b) : 0;
  Storage out = x.values.unaryExpr([&](std::uint64_t v) { return ring.reduce(ra * v + rb); });
  return {x.party, x.bit_width, std::move(out)};
}

/// One party's share of a matrix-valued Beaver triple A o B = C (Hadamard).
///
/// A triple is single use: beaver_open marks it consumed and a second
/// opening throws ProtocolError.
class BeaverTripleMatrix {
 public:
  BeaverTripleMatrix(std::uint64_t id, ShareMatrix a, ShareMatrix b, ShareMatrix c);

  [[nodiscard]] std::uint64_t id() const { return id_; }
  [[nodiscard]] const ShareMatrix& a() const { return a_; }
  [[nodiscard]] const ShareMatrix& b() const { return b_; }
  [[nodiscard]] const ShareMatrix& c() const { return c_; }
  [[nodiscard]] bool consumed() const { return consumed_; }
  void mark_consumed();

 private:
  std::uint64_t id_;
  ShareMatrix a_;
  ShareMatrix b_;
  ShareMatrix c_;
  bool consumed_ = false;
};

/// This party's contributions [D] = [K] - [A] and [E] = [Xi] - [B].
struct BeaverOpening {
  std::uint64_t triple_id = 0;
  ShareMatrix d;
  ShareMatrix e;
};

/// The public values D = K - A and E = Xi - B after both contributions are exchanged.
struct OpenedValue {
  RingMatrix d;
  RingMatrix e;
};

/// Rows of the returned share all equal the state share: [Xi] = 1 [xi]^T.
ShareMatrix replicate_rows(const ShareVector& xi, Eigen::Index rows);

BeaverOpening beaver_open(const ShareMatrix& my_k, const ShareMatrix& my_xi_rows, BeaverTripleMatrix& triple);

OpenedValue combine_openings(const BeaverOpening& mine, const BeaverOpening& theirs);

/// [v] = ([C] + D o [B] + E o [A] + D o E) 1 + [beta]; D o E is added by party one only.
ShareVector preactivation_shares(const OpenedValue& opened, const BeaverTripleMatrix& triple,
                                 const ShareVector& my_beta);

/// Trusted-dealer triples for a rows x cols Hadamard product.
struct DealtTriples {
  std::vector<BeaverTripleMatrix> party_one;
  std::vector<BeaverTripleMatrix> party_two;
};

DealtTriples deal_triples(Eigen::Index rows, Eigen::Index cols, std::size_t count, const Ring& ring, Prng& rng,
                          std::uint64_t first_id = 0);

/// Share file: magic "SMXS", u16 version, u8 l, u32 rows, u32 cols, u8 party,
/// then rows*cols residues row-major, each ceil(l/8) bytes little-endian.
std::vector<std::uint8_t> serialize_share(const ShareMatrix& share);
ShareMatrix deserialize_share(std::span<const std::uint8_t>& in);

}  // namespace secmax
