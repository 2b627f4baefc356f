#include "secmax/garble.hpp"

#include <algorithm>
#include <cstring>

namespace secmax {

namespace {

std::array<std::uint8_t, 16> output_digest(const Label& label, std::uint32_t index) {
  Sha256 h;
  h.update("secmax-output");
  h.update(label.bytes);
  const std::array<std::uint8_t, 4> idx{static_cast<std::uint8_t>(index >> 24), static_cast<std::uint8_t>(index >> 16),
                                        static_cast<std::uint8_t>(index >> 8), static_cast<std::uint8_t>(index)};
  h.update(idx);
  const Digest d = h.finish();
  std::array<std::uint8_t, 16> out{};
  std::copy_n(d.begin(), out.size(), out.begin());
  return out;
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> in, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= std::uint32_t{in[at + i]} << (8 * i);
  return v;
}

}  // namespace

Label Label::random(Prng& rng) {
  Label l;
  rng.fill(l.bytes);
  return l;
}

std::vector<Label> InputEncoding::encode_garbler(const std::vector<bool>& bits) const {
  if (bits.size() != garbler_zero_.size()) throw ContractError("garbler input width mismatch");
  std::vector<Label> out(bits.size());
  for (std::size_t i = 0; i < bits.size(); ++i) out[i] = bits[i] ? garbler_zero_[i] ^ offset_ : garbler_zero_[i];
  return out;
}

std::vector<Label> InputEncoding::encode_evaluator(const std::vector<bool>& bits) const {
  if (bits.size() != evaluator_zero_.size()) throw ContractError("evaluator input width mismatch");
  std::vector<Label> out(bits.size());
  for (std::size_t i = 0; i < bits.size(); ++i) out[i] = bits[i] ? evaluator_zero_[i] ^ offset_ : evaluator_zero_[i];
  return out;
}

std::vector<std::array<Label, 2>> InputEncoding::evaluator_pairs() const {
  std::vector<std::array<Label, 2>> out(evaluator_zero_.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = {evaluator_zero_[i], evaluator_zero_[i] ^ offset_};
  return out;
}

Digest circuit_digest(const Circuit& c) { return sha256(export_netlist(c)); }

Label garble_kdf(const Label& a, const Label& b, std::uint32_t gate_id) {
  std::array<std::uint8_t, 36> buf{};
  std::copy(a.bytes.begin(), a.bytes.end(), buf.begin());
  std::copy(b.bytes.begin(), b.bytes.end(), buf.begin() + 16);
  buf[32] = static_cast<std::uint8_t>(gate_id >> 24);
  buf[33] = static_cast<std::uint8_t>(gate_id >> 16);
  buf[34] = static_cast<std::uint8_t>(gate_id >> 8);
  buf[35] = static_cast<std::uint8_t>(gate_id);
  const Digest d = sha256(buf);
  Label out;
  std::copy_n(d.begin(), out.bytes.size(), out.bytes.begin());
  return out;
}

GarbleResult garble(const Circuit& c, Prng& rng, const GarbleOptions& options) {
  Label offset = Label::random(rng);
  offset.bytes[15] |= 1U;

  std::vector<Label> zero(c.wire_count());
  std::vector<Label> garbler_zero;
  std::vector<Label> evaluator_zero;
  for (const auto& in : c.garbler_inputs()) garbler_zero.push_back(zero[in.wire] = Label::random(rng));
  for (const auto& in : c.evaluator_inputs()) evaluator_zero.push_back(zero[in.wire] = Label::random(rng));

  GarbledCircuit g;
  g.circuit_hash = options.circuit_hash ? *options.circuit_hash : circuit_digest(c);
  g.and_count = static_cast<std::uint32_t>(c.and_count());
  g.l = static_cast<std::uint32_t>(c.outputs().size());
  g.p = options.p;
  g.tables.reserve(4 * c.and_count());

  for (std::uint32_t gid = 0; gid < c.gates().size(); ++gid) {
    const Gate& gate = c.gates()[gid];
    switch (gate.kind) {
      case GateKind::kXor: zero[gate.out] = zero[gate.a] ^ zero[gate.b]; break;
      case GateKind::kNot: zero[gate.out] = zero[gate.a] ^ offset; break;
      case GateKind::kAnd: {
        const Label out0 = Label::random(rng);
        zero[gate.out] = out0;
        const bool pa = zero[gate.a].permute_bit();
        const bool pb = zero[gate.b].permute_bit();
        std::array<Label, 4> rows;
        for (int va = 0; va < 2; ++va) {
          for (int vb = 0; vb < 2; ++vb) {
            const Label la = va ? zero[gate.a] ^ offset : zero[gate.a];
            const Label lb = vb ? zero[gate.b] ^ offset : zero[gate.b];
            const Label lo = (va & vb) ? out0 ^ offset : out0;
            const int row = 2 * (va ^ static_cast<int>(pa)) + (vb ^ static_cast<int>(pb));
            rows[row] = lo ^ garble_kdf(la, lb, gid ^ options.kdf_tweak);
          }
        }
        g.tables.insert(g.tables.end(), rows.begin(), rows.end());
        break;
      }
    }
  }

  DecodeMap decode;
  decode.reserve(c.outputs().size());
  for (std::uint32_t i = 0; i < c.outputs().size(); ++i) {
    const Label& l0 = zero[c.outputs()[i].wire];
    decode.push_back({l0.permute_bit(), output_digest(l0, i), output_digest(l0 ^ offset, i)});
  }
  return {std::move(g), InputEncoding(offset, std::move(garbler_zero), std::move(evaluator_zero)), std::move(decode)};
}

std::vector<Label> evaluate_garbled(const Circuit& c, const GarbledCircuit& g, std::span<const Label> garbler_labels,
                                    std::span<const Label> evaluator_labels) {
  if (g.and_count != c.and_count() || g.tables.size() != 4 * c.and_count())
    throw EvaluationError("garbled tables do not match the circuit");
  if (garbler_labels.size() != c.garbler_inputs().size() || evaluator_labels.size() != c.evaluator_inputs().size())
    throw EvaluationError("wrong number of active input labels");
  std::vector<Label> active(c.wire_count());
  for (std::size_t i = 0; i < garbler_labels.size(); ++i) active[c.garbler_inputs()[i].wire] = garbler_labels[i];
  for (std::size_t i = 0; i < evaluator_labels.size(); ++i)
    active[c.evaluator_inputs()[i].wire] = evaluator_labels[i];
  std::size_t table = 0;
  for (std::uint32_t gid = 0; gid < c.gates().size(); ++gid) {
    const Gate& gate = c.gates()[gid];
    switch (gate.kind) {
      case GateKind::kXor: active[gate.out] = active[gate.a] ^ active[gate.b]; break;
      case GateKind::kNot: active[gate.out] = active[gate.a]; break;
      case GateKind::kAnd: {
        const Label& la = active[gate.a];
        const Label& lb = active[gate.b];
        const int row = 2 * static_cast<int>(la.permute_bit()) + static_cast<int>(lb.permute_bit());
        active[gate.out] = g.tables[4 * table + row] ^ garble_kdf(la, lb, gid);
        ++table;
        break;
      }
    }
  }
  std::vector<Label> out;
  out.reserve(c.outputs().size());
  for (const auto& o : c.outputs()) out.push_back(active[o.wire]);
  return out;
}

std::vector<bool> decode_outputs(std::span<const Label> active, const DecodeMap& decode) {
  if (active.size() != decode.size()) throw EvaluationError("output label count differs from the decode map");
  std::vector<bool> bits(active.size());
  for (std::uint32_t i = 0; i < active.size(); ++i) {
    const bool bit = active[i].permute_bit() != decode[i].zero_permute_bit;
    const auto expected = bit ? decode[i].digest_one : decode[i].digest_zero;
    if (output_digest(active[i], i) != expected)
      throw EvaluationError("garbled evaluation integrity failure at output " + std::to_string(i));
    bits[i] = bit;
  }
  return bits;
}

std::vector<std::uint8_t> serialize_garbled(const GarbledCircuit& g) {
  std::vector<std::uint8_t> out(g.circuit_hash.begin(), g.circuit_hash.end());
  out.reserve(g.size_bytes());
  put_u32(out, g.and_count);
  put_u32(out, g.l);
  put_u32(out, g.p);
  for (const Label& t : g.tables) out.insert(out.end(), t.bytes.begin(), t.bytes.end());
  return out;
}

GarbledCircuit deserialize_garbled(std::span<const std::uint8_t> in) {
  if (in.size() < kGarbledHeaderBytes) throw ProtocolError("garbled circuit header truncated");
  GarbledCircuit g;
  std::copy_n(in.begin(), 32, g.circuit_hash.begin());
  g.and_count = get_u32(in, 32);
  g.l = get_u32(in, 36);
  g.p = get_u32(in, 40);
  const std::size_t body = in.size() - kGarbledHeaderBytes;
  if (body != std::size_t{g.and_count} * kGarbledBytesPerAnd) throw ProtocolError("garbled table size mismatch");
  g.tables.resize(4 * std::size_t{g.and_count});
  for (std::size_t i = 0; i < g.tables.size(); ++i)
    std::memcpy(g.tables[i].bytes.data(), in.data() + kGarbledHeaderBytes + 16 * i, 16);
  return g;
}

std::vector<std::uint8_t> serialize_decode_map(const DecodeMap& d) {
  std::vector<std::uint8_t> out;
  out.reserve(d.size() * kDecodeBytesPerOutput);
  for (const auto& e : d) {
    out.push_back(e.zero_permute_bit ? 1 : 0);
    out.insert(out.end(), e.digest_zero.begin(), e.digest_zero.end());
    out.insert(out.end(), e.digest_one.begin(), e.digest_one.end());
  }
  return out;
}

DecodeMap deserialize_decode_map(std::span<const std::uint8_t> in) {
  if (in.size() % kDecodeBytesPerOutput != 0) throw ProtocolError("decode map size mismatch");
  DecodeMap d(in.size() / kDecodeBytesPerOutput);
  for (std::size_t i = 0; i < d.size(); ++i) {
    const std::uint8_t* e = in.data() + i * kDecodeBytesPerOutput;
    if (e[0] > 1) throw ProtocolError("decode map permute bit must be 0 or 1");
    d[i].zero_permute_bit = e[0] == 1;
    std::memcpy(d[i].digest_zero.data(), e + 1, 16);
    std::memcpy(d[i].digest_one.data(), e + 17, 16);
  }
  return d;
}

std::vector<std::uint8_t> serialize_labels(std::span<const Label> labels) {
  std::vector<std::uint8_t> out;
  out.reserve(labels.size() * 16);
  for (const Label& l : labels) out.insert(out.end(), l.bytes.begin(), l.bytes.end());
  return out;
}

std::vector<Label> deserialize_labels(std::span<const std::uint8_t> in) {
  if (in.size() % 16 != 0) throw ProtocolError("label payload is not a multiple of 16 bytes");
  std::vector<Label> out(in.size() / 16);
  for (std::size_t i = 0; i < out.size(); ++i) std::memcpy(out[i].bytes.data(), in.data() + 16 * i, 16);
  return out;
}

}  // namespace secmax
