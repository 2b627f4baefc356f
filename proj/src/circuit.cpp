#include "secmax/circuit.hpp"

#include <algorithm>
#include <sstream>

namespace secmax {

Circuit::Circuit(std::uint32_t wire_count, std::vector<Gate> gates, std::vector<LabeledWire> garbler_inputs,
                 std::vector<LabeledWire> evaluator_inputs, std::vector<LabeledWire> outputs)
    : wire_count_(wire_count),
      gates_(std::move(gates)),
      garbler_inputs_(std::move(garbler_inputs)),
      evaluator_inputs_(std::move(evaluator_inputs)),
      outputs_(std::move(outputs)) {
  std::vector<bool> defined(wire_count_, false);
  auto define = [&](WireId w) {
    if (w >= wire_count_) throw BuildError("wire id out of range");
    if (defined[w]) throw BuildError("wire " + std::to_string(w) + " is driven twice");
    defined[w] = true;
  };
  for (const auto& in : garbler_inputs_) define(in.wire);
  for (const auto& in : evaluator_inputs_) define(in.wire);
  for (const Gate& g : gates_) {
    if (g.a >= wire_count_ || !defined[g.a]) throw BuildError("gate reads an undefined wire");
    if (g.kind != GateKind::kNot && (g.b >= wire_count_ || !defined[g.b]))
      throw BuildError("gate reads an undefined wire");
    define(g.out);
  }
  for (const auto& out : outputs_)
    if (out.wire >= wire_count_ || !defined[out.wire]) throw BuildError("output wire is undefined");
}

std::size_t Circuit::count(GateKind kind) const {
  return static_cast<std::size_t>(std::count_if(gates_.begin(), gates_.end(), [kind](const Gate& g) { return g.kind == kind; }));
}

Wire CircuitBuilder::add_garbler_input(std::string label) {
  const WireId id = fresh();
  garbler_inputs_.push_back({id, std::move(label)});
  return Wire::of(id);
}

Wire CircuitBuilder::add_evaluator_input(std::string label) {
  const WireId id = fresh();
  evaluator_inputs_.push_back({id, std::move(label)});
  return Wire::of(id);
}

Wire CircuitBuilder::make_xor(Wire x, Wire y) {
  if (x.is_constant() && y.is_constant()) return Wire::constant(x.constant_value() != y.constant_value());
  if (x.is_constant()) std::swap(x, y);
  if (y.is_constant()) return y.constant_value() ? make_not(x) : x;
  const WireId out = fresh();
  gates_.push_back({GateKind::kXor, x.id(), y.id(), out});
  return Wire::of(out);
}

Wire CircuitBuilder::make_and(Wire x, Wire y) {
  if (x.is_constant() && y.is_constant()) return Wire::constant(x.constant_value() && y.constant_value());
  if (x.is_constant()) std::swap(x, y);
  if (y.is_constant()) return y.constant_value() ? x : Wire::constant(false);
  const WireId out = fresh();
  gates_.push_back({GateKind::kAnd, x.id(), y.id(), out});
  ++and_count_;
  return Wire::of(out);
}

Wire CircuitBuilder::make_not(Wire x) {
  if (x.is_constant()) return Wire::constant(!x.constant_value());
  if (auto it = negation_of_.find(x.id()); it != negation_of_.end()) return Wire::of(it->second);
  const WireId out = fresh();
  gates_.push_back({GateKind::kNot, x.id(), x.id(), out});
  negation_of_.emplace(out, x.id());
  negation_of_.emplace(x.id(), out);
  return Wire::of(out);
}

void CircuitBuilder::add_output(Wire w, std::string label) {
  if (w.is_constant()) {
    // A constant output still needs a driven wire: x ^ x, negated for 1.
    const LabeledWire* any = !garbler_inputs_.empty()    ? &garbler_inputs_.front()
                             : !evaluator_inputs_.empty() ? &evaluator_inputs_.front()
                                                          : nullptr;
    if (any == nullptr) throw BuildError("constant output in a circuit without inputs");
    const bool value = w.constant_value();
    const WireId zero = fresh();
    gates_.push_back({GateKind::kXor, any->wire, any->wire, zero});
    w = Wire::of(zero);
    if (value) {
      const WireId one = fresh();
      gates_.push_back({GateKind::kNot, zero, zero, one});
      w = Wire::of(one);
    }
  }
  outputs_.push_back({w.id(), std::move(label)});
}

Circuit CircuitBuilder::build() && {
  return Circuit(next_wire_, std::move(gates_), std::move(garbler_inputs_), std::move(evaluator_inputs_),
                 std::move(outputs_));
}

FullAdderWires build_full_adder(CircuitBuilder& b, Wire x, Wire y, Wire cin) {
  const Wire xc = b.make_xor(x, cin);
  const Wire yc = b.make_xor(y, cin);
  const Wire sum = b.make_xor(x, yc);
  const Wire carry = b.make_xor(b.make_and(xc, yc), cin);
  return {sum, carry};
}

std::vector<Wire> build_adder(CircuitBuilder& b, std::span<const Wire> x, std::span<const Wire> y, Wire cin) {
  if (x.size() != y.size()) throw BuildError("adder operands differ in width");
  std::vector<Wire> sum;
  sum.reserve(x.size());
  Wire carry = cin;
  for (std::size_t j = 0; j < x.size(); ++j) {
    const FullAdderWires fa = build_full_adder(b, x[j], y[j], carry);
    sum.push_back(fa.sum);
    carry = fa.carry;
  }
  return sum;
}

std::vector<Wire> build_subtractor(CircuitBuilder& b, std::span<const Wire> x, std::span<const Wire> y) {
  if (x.size() != y.size()) throw BuildError("subtractor operands differ in width");
  std::vector<Wire> not_y;
  not_y.reserve(y.size());
  for (const Wire& w : y) not_y.push_back(b.make_not(w));
  return build_adder(b, x, not_y, Wire::constant(true));
}

std::string to_string(SignMode mode) { return mode == SignMode::kPaperExact ? "paper_exact" : "safe_sign"; }

SignMode parse_sign_mode(const std::string& text) {
  if (text == "paper_exact") return SignMode::kPaperExact;
  if (text == "safe_sign") return SignMode::kSafeSign;
  throw ContractError("unknown sign mode '" + text + "'");
}

SignedWord build_max_of_two(CircuitBuilder& b, const SignedWord& a, const SignedWord& c, SignMode mode) {
  if (a.bits.size() != c.bits.size() || a.bits.empty()) throw BuildError("max-of-two operands differ in width");
  Wire sign = Wire::constant(false);
  if (mode == SignMode::kPaperExact) {
    sign = build_subtractor(b, a.bits, c.bits).back();
  } else {
    std::vector<Wire> ax = a.bits;
    std::vector<Wire> cx = c.bits;
    ax.push_back(a.bits.back());
    cx.push_back(c.bits.back());
    sign = build_subtractor(b, ax, cx).back();
  }
  const Wire keep_first = b.make_not(sign);
  SignedWord out;
  out.bits.reserve(a.bits.size());
  for (std::size_t j = 0; j < a.bits.size(); ++j)
    out.bits.push_back(b.make_xor(b.make_and(a.bits[j], keep_first), b.make_and(c.bits[j], sign)));
  return out;
}

void NeuronCircuitSpec::validate() const {
  if (p < 1) throw BuildError("neuron circuit needs p >= 1");
  if (l < 2 || l > kMaxBitWidth) throw BuildError("neuron circuit bit width must lie in [2, 64]");
  if (mode == SignMode::kPaperExact && (p & (p - 1)) != 0)
    throw BuildError("paper_exact mode requires p to be a power of two (got " + std::to_string(p) + ")");
}

Circuit build_neuron_circuit(const NeuronCircuitSpec& spec) {
  spec.validate();
  CircuitBuilder b;
  std::vector<std::vector<Wire>> own(spec.p);
  std::vector<std::vector<Wire>> peer(spec.p);
  std::vector<Wire> mask;
  for (std::size_t i = 0; i < spec.p; ++i)
    for (unsigned j = 0; j < spec.l; ++j)
      own[i].push_back(b.add_garbler_input("g.share[" + std::to_string(i) + "][" + std::to_string(j) + "]"));
  for (unsigned j = 0; j < spec.l; ++j) mask.push_back(b.add_garbler_input("g.mask[" + std::to_string(j) + "]"));
  for (std::size_t i = 0; i < spec.p; ++i)
    for (unsigned j = 0; j < spec.l; ++j)
      peer[i].push_back(b.add_evaluator_input("e.share[" + std::to_string(i) + "][" + std::to_string(j) + "]"));

  // Reconstruction: l-bit sums with the carry cut off, then mu as a reinterpretation.
  std::vector<SignedWord> entries;
  entries.reserve(spec.p);
  for (std::size_t i = 0; i < spec.p; ++i)
    entries.push_back(as_signed(UnsignedWord{build_adder(b, own[i], peer[i], Wire::constant(false))}));

  // Tournament; an odd entry out gets a bye.
  while (entries.size() > 1) {
    std::vector<SignedWord> next;
    next.reserve((entries.size() + 1) / 2);
    for (std::size_t i = 0; i + 1 < entries.size(); i += 2)
      next.push_back(build_max_of_two(b, entries[i], entries[i + 1], spec.mode));
    if (entries.size() % 2 == 1) next.push_back(std::move(entries.back()));
    entries = std::move(next);
  }

  const UnsignedWord winner = as_unsigned(std::move(entries.front()));
  const std::vector<Wire> masked = build_adder(b, winner.bits, mask, Wire::constant(false));
  for (unsigned j = 0; j < spec.l; ++j) b.add_output(masked[j], "out[" + std::to_string(j) + "]");
  return std::move(b).build();
}

std::size_t neuron_and_count(const NeuronCircuitSpec& spec) {
  spec.validate();
  const std::size_t comparators = spec.p - 1;
  const std::size_t base = spec.p * spec.l + 3 * comparators * spec.l + spec.l;
  return spec.mode == SignMode::kSafeSign ? base + comparators : base;
}

std::vector<bool> neuron_garbler_bits(const RingVector& own_share, std::uint64_t mask, unsigned l) {
  std::vector<bool> bits;
  bits.reserve(static_cast<std::size_t>(own_share.size() + 1) * l);
  for (Eigen::Index i = 0; i < own_share.size(); ++i)
    for (unsigned j = 0; j < l; ++j) bits.push_back(((own_share(i) >> j) & 1U) != 0);
  for (unsigned j = 0; j < l; ++j) bits.push_back(((mask >> j) & 1U) != 0);
  return bits;
}

std::vector<bool> neuron_evaluator_bits(const RingVector& peer_share, unsigned l) {
  std::vector<bool> bits;
  bits.reserve(static_cast<std::size_t>(peer_share.size()) * l);
  for (Eigen::Index i = 0; i < peer_share.size(); ++i)
    for (unsigned j = 0; j < l; ++j) bits.push_back(((peer_share(i) >> j) & 1U) != 0);
  return bits;
}

std::uint64_t pack_bits(std::span<const bool> bits) {
  if (bits.size() > 64) throw ContractError("more than 64 output bits");
  std::uint64_t v = 0;
  for (std::size_t j = 0; j < bits.size(); ++j)
    if (bits[j]) v |= std::uint64_t{1} << j;
  return v;
}

std::uint64_t pack_bits(const std::vector<bool>& bits) {
  if (bits.size() > 64) throw ContractError("more than 64 output bits");
  std::uint64_t v = 0;
  for (std::size_t j = 0; j < bits.size(); ++j)
    if (bits[j]) v |= std::uint64_t{1} << j;
  return v;
}

std::vector<bool> evaluate_plaintext(const Circuit& c, const std::vector<bool>& garbler_bits,
                                     const std::vector<bool>& evaluator_bits) {
  if (garbler_bits.size() != c.garbler_inputs().size())
    throw EvaluationError("expected " + std::to_string(c.garbler_inputs().size()) + " garbler input bits, got " +
                          std::to_string(garbler_bits.size()));
  if (evaluator_bits.size() != c.evaluator_inputs().size())
    throw EvaluationError("expected " + std::to_string(c.evaluator_inputs().size()) +
                          " evaluator input bits, got " + std::to_string(evaluator_bits.size()));
  std::vector<std::uint8_t> value(c.wire_count(), 0);
  for (std::size_t i = 0; i < garbler_bits.size(); ++i) value[c.garbler_inputs()[i].wire] = garbler_bits[i];
  for (std::size_t i = 0; i < evaluator_bits.size(); ++i) value[c.evaluator_inputs()[i].wire] = evaluator_bits[i];
  for (const Gate& g : c.gates()) {
    switch (g.kind) {
      case GateKind::kAnd: value[g.out] = value[g.a] & value[g.b]; break;
      case GateKind::kXor: value[g.out] = value[g.a] ^ value[g.b]; break;
      case GateKind::kNot: value[g.out] = value[g.a] ^ 1U; break;
    }
  }
  std::vector<bool> out;
  out.reserve(c.outputs().size());
  for (const auto& o : c.outputs()) out.push_back(value[o.wire] != 0);
  return out;
}

std::string export_netlist(const Circuit& c) {
  std::ostringstream out;
  out << "secmax-netlist 1\n";
  out << "wires " << c.wire_count() << " gates " << c.gates().size() << "\n";
  out << "and " << c.and_count() << " xor " << c.xor_count() << " not " << c.not_count() << "\n";
  out << "inputs garbler " << c.garbler_inputs().size() << " evaluator " << c.evaluator_inputs().size()
      << " outputs " << c.outputs().size() << "\n";
  for (const Gate& g : c.gates()) {
    switch (g.kind) {
      case GateKind::kAnd: out << "AND " << g.a << ' ' << g.b << ' ' << g.out << '\n'; break;
      case GateKind::kXor: out << "XOR " << g.a << ' ' << g.b << ' ' << g.out << '\n'; break;
      case GateKind::kNot: out << "NOT " << g.a << ' ' << g.out << '\n'; break;
    }
  }
  for (const auto& w : c.garbler_inputs()) out << "garbler " << w.wire << ' ' << w.label << '\n';
  for (const auto& w : c.evaluator_inputs()) out << "evaluator " << w.wire << ' ' << w.label << '\n';
  for (const auto& w : c.outputs()) out << "output " << w.wire << ' ' << w.label << '\n';
  return out.str();
}

}  // namespace secmax
