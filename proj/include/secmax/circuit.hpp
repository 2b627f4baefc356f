#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "secmax/errors.hpp"
#include "secmax/ring.hpp"

namespace secmax {

using WireId = std::uint32_t;

enum class GateKind : std::uint8_t { kAnd, kXor, kNot };

/// `b` is unused for NOT gates.
struct Gate {
  GateKind kind;
  WireId a;
  WireId b;
  WireId out;
};

struct LabeledWire {
  WireId wire;
  std::string label;
};

/// Boolean netlist over AND, XOR and NOT gates in topological order.
class Circuit {
 public:
  Circuit(std::uint32_t wire_count, std::vector<Gate> gates, std::vector<LabeledWire> garbler_inputs,
          std::vector<LabeledWire> evaluator_inputs, std::vector<LabeledWire> outputs);

  [[nodiscard]] std::uint32_t wire_count() const { return wire_count_; }
  [[nodiscard]] const std::vector<Gate>& gates() const { return gates_; }
  [[nodiscard]] const std::vector<LabeledWire>& garbler_inputs() const { return garbler_inputs_; }
  [[nodiscard]] const std::vector<LabeledWire>& evaluator_inputs() const { return evaluator_inputs_; }
  [[nodiscard]] const std::vector<LabeledWire>& outputs() const { return outputs_; }

  [[nodiscard]] std::size_t and_count() const { return count(GateKind::kAnd); }
  [[nodiscard]] std::size_t xor_count() const { return count(GateKind::kXor); }
  [[nodiscard]] std::size_t not_count() const { return count(GateKind::kNot); }

 private:
  [[nodiscard]] std::size_t count(GateKind kind) const;

  std::uint32_t wire_count_;
  std::vector<Gate> gates_;
  std::vector<LabeledWire> garbler_inputs_;
  std::vector<LabeledWire> evaluator_inputs_;
  std::vector<LabeledWire> outputs_;
};

/// A circuit wire or a Boolean constant. Gates with constant operands are
/// folded away by the builder.
class Wire {
 public:
  static Wire constant(bool value) { return Wire(value ? kOne : kZero); }
  static Wire of(WireId id) { return Wire(id); }

  [[nodiscard]] bool is_constant() const { return id_ >= kZero; }
  [[nodiscard]] bool constant_value() const { return id_ == kOne; }
  [[nodiscard]] WireId id() const { return id_; }

  friend bool operator==(const Wire&, const Wire&) = default;

 private:
  static constexpr WireId kZero = 0xFFFFFFFEu;
  static constexpr WireId kOne = 0xFFFFFFFFu;
  explicit Wire(WireId id) : id_(id) {}
  WireId id_;
};

class CircuitBuilder {
 public:
  Wire add_garbler_input(std::string label);
  Wire add_evaluator_input(std::string label);

  Wire make_xor(Wire x, Wire y);
  Wire make_and(Wire x, Wire y);
  Wire make_not(Wire x);

  void add_output(Wire w, std::string label);

  [[nodiscard]] std::size_t and_count() const { return and_count_; }
  [[nodiscard]] std::size_t gate_count() const { return gates_.size(); }

  Circuit build() &&;

 private:
  WireId fresh() { return next_wire_++; }

  WireId next_wire_ = 0;
  std::size_t and_count_ = 0;
  std::vector<Gate> gates_;
  std::vector<LabeledWire> garbler_inputs_;
  std::vector<LabeledWire> evaluator_inputs_;
  std::vector<LabeledWire> outputs_;
  std::unordered_map<WireId, WireId> negation_of_;
};

/// l wires, least significant first, read as an unsigned number.
struct UnsignedWord {
  std::vector<Wire> bits;
};

/// l wires, least significant first, read in two's complement.
struct SignedWord {
  std::vector<Wire> bits;
};

/// mu in the circuit: the same wires, reinterpreted. Adds no gates.
inline SignedWord as_signed(UnsignedWord w) { return {std::move(w.bits)}; }
/// Signed to unsigned (mod q): again only a reinterpretation.
inline UnsignedWord as_unsigned(SignedWord w) { return {std::move(w.bits)}; }

struct FullAdderWires {
  Wire sum;
  Wire carry;
};

/// sum = x ^ y ^ cin, carry = ((x ^ cin) & (y ^ cin)) ^ cin; one AND gate.
FullAdderWires build_full_adder(CircuitBuilder& b, Wire x, Wire y, Wire cin);

/// Ripple-carry (x + y + cin) mod 2^l; the final carry is dropped.
std::vector<Wire> build_adder(CircuitBuilder& b, std::span<const Wire> x, std::span<const Wire> y, Wire cin);

/// x - y = x + NOT(y) + 1 mod 2^l.
std::vector<Wire> build_subtractor(CircuitBuilder& b, std::span<const Wire> x, std::span<const Wire> y);

enum class SignMode {
  kPaperExact,  ///< sign bit of the l-bit difference; correct when a - b fits Z_q
  kSafeSign,    ///< sign bit of the (l+1)-bit difference; always correct
};

[[nodiscard]] std::string to_string(SignMode mode);
[[nodiscard]] SignMode parse_sign_mode(const std::string& text);

/// max{a, b} by a sign-bit multiplexer; ties select `a`.
SignedWord build_max_of_two(CircuitBuilder& b, const SignedWord& a, const SignedWord& c,
                            SignMode mode = SignMode::kPaperExact);

struct NeuronCircuitSpec {
  std::size_t p = 2;
  unsigned l = 16;
  SignMode mode = SignMode::kPaperExact;

  void validate() const;
};

/// (max_i mu(g_i + e_i mod q) + r) mod q, for a garbler share vector g, an
/// evaluator share vector e, and a garbler mask r.
///
/// Garbler inputs: p*l share bits (entry-major, LSB first) then l mask bits.
/// Evaluator inputs: p*l share bits. Outputs: l bits, LSB first.
Circuit build_neuron_circuit(const NeuronCircuitSpec& spec);

/// AND gates of the neuron circuit: (4p - 2) l for paper_exact with p a power
/// of two, plus one per comparator in safe_sign mode.
[[nodiscard]] std::size_t neuron_and_count(const NeuronCircuitSpec& spec);

/// Garbler input bits for the neuron circuit.
std::vector<bool> neuron_garbler_bits(const RingVector& own_share, std::uint64_t mask, unsigned l);
/// Evaluator input bits for the neuron circuit.
std::vector<bool> neuron_evaluator_bits(const RingVector& peer_share, unsigned l);
/// Packs LSB-first output bits into a residue.
std::uint64_t pack_bits(std::span<const bool> bits);
std::uint64_t pack_bits(const std::vector<bool>& bits);

/// Gate-by-gate plaintext evaluation; throws EvaluationError on missing inputs.
std::vector<bool> evaluate_plaintext(const Circuit& c, const std::vector<bool>& garbler_bits,
                                     const std::vector<bool>& evaluator_bits);

/// Line-oriented netlist; identical circuits produce identical text.
std::string export_netlist(const Circuit& c);

}  // namespace secmax
