#include <doctest.h>

#include <algorithm>

#include "secmax/circuit.hpp"
#include "secmax/prng.hpp"
#include "secmax/ring.hpp"

using namespace secmax;

namespace {

std::vector<bool> bits_of(std::uint64_t v, std::size_t n) {
  std::vector<bool> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = ((v >> i) & 1U) != 0;
  return out;
}

std::vector<bool> concat(std::vector<bool> a, const std::vector<bool>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

/// Circuit with an l-bit garbler word x and an l-bit evaluator word y.
struct TwoWords {
  CircuitBuilder b;
  std::vector<Wire> x, y;
  explicit TwoWords(unsigned l) {
    for (unsigned i = 0; i < l; ++i) x.push_back(b.add_garbler_input("x[" + std::to_string(i) + "]"));
    for (unsigned i = 0; i < l; ++i) y.push_back(b.add_evaluator_input("y[" + std::to_string(i) + "]"));
  }
  Circuit finish(const std::vector<Wire>& out) && {
    for (std::size_t i = 0; i < out.size(); ++i) b.add_output(out[i], "o[" + std::to_string(i) + "]");
    return std::move(b).build();
  }
};

std::uint64_t run2(const Circuit& c, std::uint64_t x, std::uint64_t y, unsigned l) {
  return pack_bits(evaluate_plaintext(c, bits_of(x, l), bits_of(y, l)));
}

/// Neuron oracle: (max_i mu(g_i + e_i) + r) mod q.
std::uint64_t neuron_oracle(const std::vector<std::uint64_t>& g, const std::vector<std::uint64_t>& e, std::uint64_t r,
                            unsigned l) {
  const Ring ring(l);
  std::int64_t best = INT64_MIN;
  for (std::size_t i = 0; i < g.size(); ++i) best = std::max(best, ring.mu(g[i] + e[i]));
  return ring.reduce(static_cast<std::uint64_t>(best) + r);
}

}  // namespace

TEST_SUITE("circuit") {

TEST_CASE("full adder truth table with one AND gate") {
  CircuitBuilder b;
  const Wire x = b.add_garbler_input("x"), y = b.add_garbler_input("y"), cin = b.add_evaluator_input("cin");
  const FullAdderWires fa = build_full_adder(b, x, y, cin);
  b.add_output(fa.sum, "sum");
  b.add_output(fa.carry, "carry");
  const Circuit c = std::move(b).build();
  CHECK(c.and_count() == 1);
  for (unsigned v = 0; v < 8; ++v) {
    const bool bx = v & 1, by = (v >> 1) & 1, bc = (v >> 2) & 1;
    const auto out = evaluate_plaintext(c, {bx, by}, {bc});
    CHECK(out[0] == ((bx + by + bc) % 2 == 1));
    CHECK(out[1] == (bx + by + bc >= 2));
  }
  CHECK(evaluate_plaintext(c, {true, true}, {false}) == std::vector<bool>{false, true});
  CHECK(evaluate_plaintext(c, {true, true}, {true}) == std::vector<bool>{true, true});
}

TEST_CASE("ripple-carry adder drops the final carry") {
  TwoWords w(3);
  auto out = build_adder(w.b, w.x, w.y, Wire::constant(false));
  const Circuit c = std::move(w).finish(out);
  CHECK(c.and_count() == 3);
  CHECK(run2(c, 0b011, 0b110, 3) == 0b001);
  CHECK(run2(c, 0b101, 0b010, 3) == 0b111);
  for (std::uint64_t x = 0; x < 8; ++x)
    for (std::uint64_t y = 0; y < 8; ++y) CHECK(run2(c, x, y, 3) == ((x + y) & 7));
}

TEST_CASE("adder width mismatch is a build error") {
  CircuitBuilder b;
  std::vector<Wire> x{b.add_garbler_input("a"), b.add_garbler_input("b")};
  std::vector<Wire> y{b.add_evaluator_input("c")};
  CHECK_THROWS_AS(build_adder(b, x, y, Wire::constant(false)), BuildError);
  CHECK_THROWS_AS(build_subtractor(b, x, y), BuildError);
}

TEST_CASE("subtractor in two's complement") {
  TwoWords w(4);
  auto out = build_subtractor(w.b, w.x, w.y);
  const Circuit c = std::move(w).finish(out);
  CHECK(c.and_count() == 4);
  CHECK(run2(c, 5, 2, 4) == 3);
  CHECK(run2(c, 2, 5, 4) == 13);
  CHECK(Ring(4).mu(run2(c, 2, 5, 4)) == -3);
  for (std::uint64_t x = 0; x < 16; ++x) {
    CHECK(run2(c, x, x, 4) == 0);
    for (std::uint64_t y = 0; y < 16; ++y) CHECK(run2(c, x, y, 4) == ((x - y) & 15));
  }
}

TEST_CASE("signed reinterpretation adds no gates") {
  TwoWords w(4);
  const std::size_t before = w.b.gate_count();
  SignedWord s = as_signed(UnsignedWord{w.x});
  UnsignedWord u = as_unsigned(std::move(s));
  CHECK(w.b.gate_count() == before);
  CHECK(u.bits == w.x);
}

TEST_CASE("max of two, paper_exact") {
  TwoWords w(4);
  const SignedWord m = build_max_of_two(w.b, SignedWord{w.x}, SignedWord{w.y}, SignMode::kPaperExact);
  const Circuit c = std::move(w).finish(m.bits);
  CHECK(c.and_count() == 3 * 4);
  const Ring ring(4);
  for (std::int64_t a = -8; a < 8; ++a)
    for (std::int64_t b = -8; b < 8; ++b) {
      if (!ring.contains_signed(a - b)) continue;
      CHECK(ring.mu(run2(c, ring.embed(a), ring.embed(b), 4)) == std::max(a, b));
    }
  {
    TwoWords w3(3);
    const SignedWord m3 = build_max_of_two(w3.b, SignedWord{w3.x}, SignedWord{w3.y});
    const Circuit c3 = std::move(w3).finish(m3.bits);
    CHECK(Ring(3).mu(run2(c3, 1, Ring(3).embed(-1), 3)) == 1);
  }
}

TEST_CASE("max of two, safe_sign is correct for every pair") {
  TwoWords w(4);
  const SignedWord m = build_max_of_two(w.b, SignedWord{w.x}, SignedWord{w.y}, SignMode::kSafeSign);
  const Circuit c = std::move(w).finish(m.bits);
  CHECK(c.and_count() == 3 * 4 + 1);
  const Ring ring(4);
  for (std::int64_t a = -8; a < 8; ++a)
    for (std::int64_t b = -8; b < 8; ++b) CHECK(ring.mu(run2(c, ring.embed(a), ring.embed(b), 4)) == std::max(a, b));
}

TEST_CASE("max of a word with itself, including ties") {
  for (SignMode mode : {SignMode::kPaperExact, SignMode::kSafeSign}) {
    CircuitBuilder b;
    std::vector<Wire> x;
    for (int i = 0; i < 4; ++i) x.push_back(b.add_garbler_input("x"));
    const SignedWord m = build_max_of_two(b, SignedWord{x}, SignedWord{x}, mode);
    for (const Wire& wire : m.bits) b.add_output(wire, "o");
    const Circuit c = std::move(b).build();
    for (std::uint64_t v = 0; v < 16; ++v) CHECK(pack_bits(evaluate_plaintext(c, bits_of(v, 4), {})) == v);
  }
}

TEST_CASE("neuron AND budget") {
  for (std::size_t p : {2u, 4u, 8u, 16u})
    for (unsigned l : {3u, 16u, 32u}) {
      const Circuit c = build_neuron_circuit({p, l, SignMode::kPaperExact});
      CHECK(c.and_count() == (4 * p - 2) * l);
      CHECK(neuron_and_count({p, l, SignMode::kPaperExact}) == c.and_count());
      CHECK(build_neuron_circuit({p, l, SignMode::kSafeSign}).and_count() == (4 * p - 2) * l + (p - 1));
    }
  CHECK(build_neuron_circuit({8, 16, SignMode::kPaperExact}).and_count() == 480);
  CHECK(build_neuron_circuit({8, 32, SignMode::kPaperExact}).and_count() == 960);
  CHECK(build_neuron_circuit({16, 16, SignMode::kPaperExact}).and_count() == 992);
  CHECK(build_neuron_circuit({16, 32, SignMode::kPaperExact}).and_count() == 1984);
}

TEST_CASE("neuron circuit interface") {
  const Circuit c = build_neuron_circuit({8, 16, SignMode::kPaperExact});
  CHECK(c.garbler_inputs().size() == 8 * 16 + 16);
  CHECK(c.evaluator_inputs().size() == 8 * 16);
  CHECK(c.outputs().size() == 16);
  CHECK_THROWS_AS(build_neuron_circuit({6, 16, SignMode::kPaperExact}), BuildError);
  CHECK_THROWS_AS(build_neuron_circuit({0, 16, SignMode::kSafeSign}), BuildError);
  CHECK(build_neuron_circuit({6, 16, SignMode::kSafeSign}).and_count() > 0);
}

TEST_CASE("neuron circuit matches the oracle exhaustively at p=2, l=3") {
  for (SignMode mode : {SignMode::kSafeSign, SignMode::kPaperExact}) {
    const Circuit c = build_neuron_circuit({2, 3, mode});
    const Ring ring(3);
    std::size_t checked = 0;
    for (std::uint64_t in = 0; in < (1U << 15); ++in) {
      const std::vector<std::uint64_t> g{in & 7, (in >> 3) & 7}, e{(in >> 9) & 7, (in >> 12) & 7};
      const std::uint64_t r = (in >> 6) & 7;
      const std::int64_t d = ring.mu(g[0] + e[0]) - ring.mu(g[1] + e[1]);
      if (mode == SignMode::kPaperExact && !(ring.contains_signed(d) && ring.contains_signed(-d))) continue;
      RingVector gv(2), ev(2);
      gv << g[0], g[1];
      ev << e[0], e[1];
      const auto out = evaluate_plaintext(c, neuron_garbler_bits(gv, r, 3), neuron_evaluator_bits(ev, 3));
      REQUIRE(pack_bits(out) == neuron_oracle(g, e, r, 3));
      ++checked;
    }
    CHECK(checked == (mode == SignMode::kSafeSign ? 32768u : 22528u));
  }
}

TEST_CASE("neuron circuit with byes and large words") {
  Prng rng(9);
  for (std::size_t p : {1u, 3u, 5u, 7u, 8u}) {
    const unsigned l = 16;
    const Circuit c = build_neuron_circuit({p, l, SignMode::kSafeSign});
    for (int t = 0; t < 200; ++t) {
      RingVector g(p), e(p);
      std::vector<std::uint64_t> gs, es;
      for (std::size_t i = 0; i < p; ++i) {
        g(i) = rng.bits(l);
        e(i) = rng.bits(l);
        gs.push_back(g(i));
        es.push_back(e(i));
      }
      const std::uint64_t r = rng.bits(l);
      const auto out = evaluate_plaintext(c, neuron_garbler_bits(g, r, l), neuron_evaluator_bits(e, l));
      CHECK(pack_bits(out) == neuron_oracle(gs, es, r, l));
    }
  }
}

TEST_CASE("plaintext evaluation of single gates and missing inputs") {
  CircuitBuilder b;
  const Wire x = b.add_garbler_input("x"), y = b.add_evaluator_input("y");
  b.add_output(b.make_and(x, y), "and");
  b.add_output(b.make_xor(x, y), "xor");
  b.add_output(b.make_not(x), "not");
  const Circuit c = std::move(b).build();
  CHECK(evaluate_plaintext(c, {true}, {true}) == std::vector<bool>{true, false, false});
  CHECK(evaluate_plaintext(c, {false}, {true}) == std::vector<bool>{false, true, true});
  CHECK_THROWS_AS(evaluate_plaintext(c, {}, {true}), EvaluationError);
  CHECK_THROWS_AS(evaluate_plaintext(c, {true}, {true, false}), EvaluationError);
}

TEST_CASE("constant folding") {
  CircuitBuilder b;
  const Wire x = b.add_garbler_input("x");
  CHECK(b.make_and(x, Wire::constant(false)) == Wire::constant(false));
  CHECK(b.make_and(x, Wire::constant(true)) == x);
  CHECK(b.make_xor(x, Wire::constant(false)) == x);
  CHECK(b.make_not(b.make_not(x)) == x);
  CHECK(b.and_count() == 0);
  b.add_output(Wire::constant(true), "one");
  b.add_output(Wire::constant(false), "zero");
  const Circuit c = std::move(b).build();
  for (bool v : {false, true}) CHECK(evaluate_plaintext(c, {v}, {}) == std::vector<bool>{true, false});
}

TEST_CASE("netlist export") {
  CircuitBuilder b;
  const Wire x = b.add_garbler_input("x"), y = b.add_evaluator_input("y");
  b.add_output(b.make_and(x, y), "z");
  const Circuit c = std::move(b).build();
  CHECK(export_netlist(c) ==
        "secmax-netlist 1\n"
        "wires 3 gates 1\n"
        "and 1 xor 0 not 0\n"
        "inputs garbler 1 evaluator 1 outputs 1\n"
        "AND 0 1 2\n"
        "garbler 0 x\n"
        "evaluator 1 y\n"
        "output 2 z\n");

  const std::string a = export_netlist(build_neuron_circuit({8, 16, SignMode::kPaperExact}));
  CHECK(a == export_netlist(build_neuron_circuit({8, 16, SignMode::kPaperExact})));
  CHECK(a.find("and 480 ") != std::string::npos);
}

TEST_CASE("sign mode names") {
  CHECK(to_string(SignMode::kPaperExact) == "paper_exact");
  CHECK(parse_sign_mode("safe_sign") == SignMode::kSafeSign);
  CHECK_THROWS((void)parse_sign_mode("fast"));
}

}
