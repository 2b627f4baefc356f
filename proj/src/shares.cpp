#include "secmax/shares.hpp"

#include <array>
#include <string>

namespace secmax {

namespace {

constexpr std::array<std::uint8_t, 4> kShareMagic{'S', 'M', 'X', 'S'};
constexpr std::uint16_t kShareVersion = 1;

void require_same(const ShareMatrix& x, const ShareMatrix& y, const char* what) {
  if (x.party != y.party || x.bit_width != y.bit_width || x.values.rows() != y.values.rows() ||
      x.values.cols() != y.values.cols())
    throw ContractError(std::string(what) + ": operands differ in party, width, or shape");
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(std::span<const std::uint8_t>& in) {
  if (in.size() < 4) throw ContractError("truncated share header");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= std::uint32_t{in[i]} << (8 * i);
  in = in.subspan(4);
  return v;
}

}  // namespace

std::pair<RingElement, RingElement> share(const RingElement& z, Prng& rng) {
  const Ring& ring = z.ring();
  const std::uint64_t first = rng.bits(ring.bit_width());
  return {RingElement(first, ring), RingElement(ring.reduce(z.value() - first), ring)};
}

std::pair<RingElement, RingElement> share(const SignedValue& z, Prng& rng) { return share(lift(z), rng); }

SignedValue reconstruct(const RingElement& a, const RingElement& b) { return mu(mod_add(a, b)); }

BeaverTripleMatrix::BeaverTripleMatrix(std::uint64_t id, ShareMatrix a, ShareMatrix b, ShareMatrix c)
    : id_(id), a_(std::move(a)), b_(std::move(b)), c_(std::move(c)) {
  require_same(a_, b_, "beaver triple");
  require_same(a_, c_, "beaver triple");
}

void BeaverTripleMatrix::mark_consumed() {
  if (consumed_) throw ProtocolError("beaver triple " + std::to_string(id_) + " was already consumed");
  consumed_ = true;
}

ShareMatrix replicate_rows(const ShareVector& xi, Eigen::Index rows) {
  return {xi.party, xi.bit_width, xi.values.transpose().replicate(rows, 1)};
}

BeaverOpening beaver_open(const ShareMatrix& my_k, const ShareMatrix& my_xi_rows, BeaverTripleMatrix& triple) {
  require_same(my_k, triple.a(), "beaver_open");
  require_same(my_xi_rows, triple.b(), "beaver_open");
  triple.mark_consumed();
  const Ring ring = my_k.ring();
  return {triple.id(),
          {my_k.party, my_k.bit_width, reduce(my_k.values - triple.a().values, ring)},
          {my_k.party, my_k.bit_width, reduce(my_xi_rows.values - triple.b().values, ring)}};
}

OpenedValue combine_openings(const BeaverOpening& mine, const BeaverOpening& theirs) {
  if (mine.triple_id != theirs.triple_id) throw ProtocolError("beaver openings refer to different triples");
  if (mine.d.party == theirs.d.party) throw ProtocolError("beaver opening received from the same party");
  return {recombine(mine.d, theirs.d), recombine(mine.e, theirs.e)};
}

ShareVector preactivation_shares(const OpenedValue& opened, const BeaverTripleMatrix& triple,
                                 const ShareVector& my_beta) {
  const ShareMatrix& a = triple.a();
  if (opened.d.rows() != a.values.rows() || opened.d.cols() != a.values.cols() ||
      opened.e.rows() != a.values.rows() || opened.e.cols() != a.values.cols())
    throw ContractError("opened values do not match the triple shape");
  if (my_beta.values.size() != a.values.rows() || my_beta.party != a.party || my_beta.bit_width != a.bit_width)
    throw ContractError("offset share does not match the triple");
  const Ring ring = a.ring();
  RingMatrix hadamard = triple.c().values + opened.d.cwiseProduct(triple.b().values) +
                        opened.e.cwiseProduct(a.values);
  if (a.party == Party::kOne) hadamard += opened.d.cwiseProduct(opened.e);
  RingVector v = reduce(hadamard.rowwise().sum() + my_beta.values, ring);
  return {a.party, a.bit_width, std::move(v)};
}

DealtTriples deal_triples(Eigen::Index rows, Eigen::Index cols, std::size_t count, const Ring& ring, Prng& rng,
                          std::uint64_t first_id) {
  DealtTriples out;
  out.party_one.reserve(count);
  out.party_two.reserve(count);
  auto uniform = [&] {
    RingMatrix m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
      for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = rng.bits(ring.bit_width());
    return m;
  };
  for (std::size_t t = 0; t < count; ++t) {
    const RingMatrix a = uniform();
    const RingMatrix b = uniform();
    const RingMatrix c = reduce(a.cwiseProduct(b), ring);
    auto [a1, a2] = share(a, ring, rng);
    auto [b1, b2] = share(b, ring, rng);
    auto [c1, c2] = share(c, ring, rng);
    const std::uint64_t id = first_id + t;
    out.party_one.emplace_back(id, std::move(a1), std::move(b1), std::move(c1));
    out.party_two.emplace_back(id, std::move(a2), std::move(b2), std::move(c2));
  }
  return out;
}

std::vector<std::uint8_t> serialize_share(const ShareMatrix& share) {
  std::vector<std::uint8_t> out(kShareMagic.begin(), kShareMagic.end());
  out.push_back(static_cast<std::uint8_t>(kShareVersion));
  out.push_back(static_cast<std::uint8_t>(kShareVersion >> 8));
  out.push_back(static_cast<std::uint8_t>(share.bit_width));
  put_u32(out, static_cast<std::uint32_t>(share.values.rows()));
  put_u32(out, static_cast<std::uint32_t>(share.values.cols()));
  out.push_back(static_cast<std::uint8_t>(share.party));
  for (Eigen::Index i = 0; i < share.values.rows(); ++i)
    for (Eigen::Index j = 0; j < share.values.cols(); ++j) append_le(out, share.values(i, j), share.bit_width);
  return out;
}

ShareMatrix deserialize_share(std::span<const std::uint8_t>& in) {
  if (in.size() < 7 || !std::equal(kShareMagic.begin(), kShareMagic.end(), in.begin()))
    throw ContractError("not a share file");
  const std::uint16_t version = static_cast<std::uint16_t>(in[4] | (in[5] << 8));
  if (version != kShareVersion) throw ContractError("unsupported share file version");
  const unsigned l = in[6];
  in = in.subspan(7);
  const std::uint32_t rows = get_u32(in);
  const std::uint32_t cols = get_u32(in);
  if (in.empty()) throw ContractError("truncated share header");
  const std::uint8_t party = in[0];
  in = in.subspan(1);
  if (party != 1 && party != 2) throw ContractError("share file has an invalid party index");
  const Ring ring(l);
  ShareMatrix out{static_cast<Party>(party), l, RingMatrix(rows, cols)};
  for (std::uint32_t i = 0; i < rows; ++i)
    for (std::uint32_t j = 0; j < cols; ++j) out.values(i, j) = read_le(in, l);
  return out;
}

}  // namespace secmax
