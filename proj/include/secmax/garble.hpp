#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "secmax/circuit.hpp"
#include "secmax/prng.hpp"
#include "secmax/sha256.hpp"

namespace secmax {

/// 128-bit wire label. The low bit of the last byte is the permute bit.
struct Label {
  std::array<std::uint8_t, 16> bytes{};

  [[nodiscard]] bool permute_bit() const { return (bytes[15] & 1U) != 0; }

  Label& operator^=(const Label& o) {
    for (std::size_t i = 0; i < bytes.size(); ++i) bytes[i] ^= o.bytes[i];
    return *this;
  }
  friend Label operator^(Label a, const Label& b) { return a ^= b; }
  friend bool operator==(const Label&, const Label&) = default;

  static Label random(Prng& rng);
};

/// Per-output-wire reveal data: the permute bit of label(0), plus digests of
/// both labels so that a corrupted evaluation is detected instead of decoded.
struct OutputDecodeEntry {
  bool zero_permute_bit = false;
  std::array<std::uint8_t, 16> digest_zero{};
  std::array<std::uint8_t, 16> digest_one{};
};

using DecodeMap = std::vector<OutputDecodeEntry>;

inline constexpr std::size_t kGarbledHeaderBytes = 32 + 4 + 4 + 4;
inline constexpr std::size_t kGarbledBytesPerAnd = 4 * 16;
inline constexpr std::size_t kDecodeBytesPerOutput = 1 + 16 + 16;

/// The garbled tables of one circuit: four ciphertexts per AND gate,
/// ordered by the permute bits of the two input labels.
struct GarbledCircuit {
  Digest circuit_hash{};  ///< SHA-256 of the plaintext netlist
  std::uint32_t and_count = 0;
  std::uint32_t l = 0;
  std::uint32_t p = 0;
  std::vector<Label> tables;

  [[nodiscard]] std::size_t size_bytes() const { return kGarbledHeaderBytes + tables.size() * 16; }
};

/// Garbler-side label material for the circuit inputs.
class InputEncoding {
 public:
  InputEncoding(Label offset, std::vector<Label> garbler_zero, std::vector<Label> evaluator_zero)
      : offset_(offset), garbler_zero_(std::move(garbler_zero)), evaluator_zero_(std::move(evaluator_zero)) {}

  /// Active labels for the garbler's own input bits.
  [[nodiscard]] std::vector<Label> encode_garbler(const std::vector<bool>& bits) const;
  /// Active labels for evaluator bits; only valid for tests and local oracles.
  [[nodiscard]] std::vector<Label> encode_evaluator(const std::vector<bool>& bits) const;
  /// (label(0), label(1)) pairs for the evaluator inputs, the OT sender's messages.
  [[nodiscard]] std::vector<std::array<Label, 2>> evaluator_pairs() const;

  [[nodiscard]] std::size_t garbler_size() const { return garbler_zero_.size(); }
  [[nodiscard]] std::size_t evaluator_size() const { return evaluator_zero_.size(); }

 private:
  Label offset_;
  std::vector<Label> garbler_zero_;
  std::vector<Label> evaluator_zero_;
};

struct GarbleOptions {
  std::uint32_t p = 0;                ///< recorded in the header
  std::optional<Digest> circuit_hash;  ///< computed from the netlist when absent
  std::uint32_t kdf_tweak = 0;        ///< fault injection only; must be 0 in real runs
};

struct GarbleResult {
  GarbledCircuit garbled;
  InputEncoding encoding;
  DecodeMap decode;
};

/// SHA-256 of export_netlist(c).
Digest circuit_digest(const Circuit& c);

/// First 16 bytes of SHA-256(a || b || gate_id as 4-byte big-endian).
Label garble_kdf(const Label& a, const Label& b, std::uint32_t gate_id);

/// Free-XOR, free-NOT, point-and-permute garbling.
GarbleResult garble(const Circuit& c, Prng& rng, const GarbleOptions& options = {});

/// One active label per output wire.
std::vector<Label> evaluate_garbled(const Circuit& c, const GarbledCircuit& g, std::span<const Label> garbler_labels,
                                    std::span<const Label> evaluator_labels);

/// bit = permute(active) ^ permute(label(0)); throws EvaluationError if the
/// active label matches neither output label.
std::vector<bool> decode_outputs(std::span<const Label> active, const DecodeMap& decode);

std::vector<std::uint8_t> serialize_garbled(const GarbledCircuit& g);
GarbledCircuit deserialize_garbled(std::span<const std::uint8_t> in);
std::vector<std::uint8_t> serialize_decode_map(const DecodeMap& d);
DecodeMap deserialize_decode_map(std::span<const std::uint8_t> in);
std::vector<std::uint8_t> serialize_labels(std::span<const Label> labels);
std::vector<Label> deserialize_labels(std::span<const std::uint8_t> in);

}  // namespace secmax
