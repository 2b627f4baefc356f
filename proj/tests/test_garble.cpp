#include <doctest.h>

#include "secmax/circuit.hpp"
#include "secmax/garble.hpp"
#include "secmax/ring.hpp"

using namespace secmax;

namespace {

Circuit single_gate(GateKind kind) {
  CircuitBuilder b;
  const Wire x = b.add_garbler_input("x"), y = b.add_evaluator_input("y");
  Wire out = Wire::constant(false);
  switch (kind) {
    case GateKind::kAnd: out = b.make_and(x, y); break;
    case GateKind::kXor: out = b.make_xor(x, y); break;
    case GateKind::kNot: out = b.make_not(x); break;
  }
  b.add_output(out, "z");
  return std::move(b).build();
}

std::vector<bool> garbled_run(const Circuit& c, Prng& rng, const std::vector<bool>& gx, const std::vector<bool>& ey,
                              const GarbleOptions& options = {}) {
  const GarbleResult r = garble(c, rng, options);
  const auto active = evaluate_garbled(c, r.garbled, r.encoding.encode_garbler(gx), r.encoding.encode_evaluator(ey));
  return decode_outputs(active, r.decode);
}

}  // namespace

TEST_SUITE("garble") {

TEST_CASE("single gates decode to their truth tables") {
  Prng rng(1);
  for (GateKind kind : {GateKind::kAnd, GateKind::kXor, GateKind::kNot}) {
    const Circuit c = single_gate(kind);
    for (int v = 0; v < 4; ++v) {
      const bool x = v & 1, y = (v >> 1) & 1;
      const bool expect = kind == GateKind::kAnd ? (x && y) : kind == GateKind::kXor ? (x != y) : !x;
      CHECK(garbled_run(c, rng, {x}, {y}) == std::vector<bool>{expect});
    }
  }
}

TEST_CASE("only AND gates produce tables") {
  Prng rng(2);
  CHECK(garble(single_gate(GateKind::kXor), rng).garbled.tables.empty());
  CHECK(garble(single_gate(GateKind::kNot), rng).garbled.tables.empty());
  CHECK(garble(single_gate(GateKind::kAnd), rng).garbled.tables.size() == 4);

  const Circuit neuron = build_neuron_circuit({8, 16, SignMode::kPaperExact});
  const GarbleResult r = garble(neuron, rng, {.p = 8});
  CHECK(r.garbled.and_count == 480);
  CHECK(r.garbled.tables.size() == 4 * 480);
  CHECK(r.garbled.size_bytes() == 64 * 480 + 44);
  CHECK(serialize_garbled(r.garbled).size() == r.garbled.size_bytes());
  CHECK(r.garbled.circuit_hash == circuit_digest(neuron));
  CHECK(r.garbled.l == 16);
  CHECK(r.garbled.p == 8);
}

TEST_CASE("free-XOR offset has its permute bit set") {
  Prng rng(3);
  const Circuit c = single_gate(GateKind::kXor);
  const GarbleResult r = garble(c, rng);
  const auto zero = r.encoding.encode_evaluator({false});
  const auto one = r.encoding.encode_evaluator({true});
  CHECK(zero[0].permute_bit() != one[0].permute_bit());
  const auto pairs = r.encoding.evaluator_pairs();
  REQUIRE(pairs.size() == 1);
  CHECK(pairs[0][0] == zero[0]);
  CHECK(pairs[0][1] == one[0]);
  CHECK((pairs[0][0] ^ pairs[0][1]) == (r.encoding.encode_garbler({false})[0] ^ r.encoding.encode_garbler({true})[0]));
}

TEST_CASE("kdf is deterministic and gate-separated") {
  Prng rng(4);
  const Label a = Label::random(rng), b = Label::random(rng);
  CHECK(garble_kdf(a, b, 7) == garble_kdf(a, b, 7));
  CHECK_FALSE(garble_kdf(a, b, 7) == garble_kdf(a, b, 8));
  CHECK_FALSE(garble_kdf(a, b, 7) == garble_kdf(b, a, 7));
  Label zero;
  const Digest d = sha256(std::vector<std::uint8_t>(36, 0));
  CHECK(std::equal(d.begin(), d.begin() + 16, garble_kdf(zero, zero, 0).bytes.begin()));
}

TEST_CASE("neuron circuit garbled evaluation matches plaintext") {
  Prng rng(5);
  Prng data(6);
  for (SignMode mode : {SignMode::kPaperExact, SignMode::kSafeSign}) {
    const Circuit c = build_neuron_circuit({8, 16, mode});
    for (int t = 0; t < 500; ++t) {
      std::vector<bool> gx(c.garbler_inputs().size()), ey(c.evaluator_inputs().size());
      for (auto&& b : gx) b = data.bits(1) != 0;
      for (auto&& b : ey) b = data.bits(1) != 0;
      REQUIRE(garbled_run(c, rng, gx, ey) == evaluate_plaintext(c, gx, ey));
    }
  }
}

TEST_CASE("labels are fresh across garblings") {
  Prng rng(7);
  const Circuit c = single_gate(GateKind::kAnd);
  const GarbleResult a = garble(c, rng), b = garble(c, rng);
  CHECK_FALSE(a.encoding.encode_garbler({false})[0] == b.encoding.encode_garbler({false})[0]);
  CHECK_FALSE(a.garbled.tables == b.garbled.tables);
  CHECK_FALSE(serialize_decode_map(a.decode) == serialize_decode_map(b.decode));
}

TEST_CASE("same seed garbles identically") {
  const Circuit c = build_neuron_circuit({2, 3, SignMode::kSafeSign});
  Prng r1(8), r2(8);
  CHECK(serialize_garbled(garble(c, r1).garbled) == serialize_garbled(garble(c, r2).garbled));
}

TEST_CASE("corrupted ciphertext is detected at decode") {
  Prng rng(9);
  const Circuit c = single_gate(GateKind::kAnd);
  int detected = 0;
  for (int t = 0; t < 20; ++t) {
    GarbleResult r = garble(c, rng);
    for (auto& row : r.garbled.tables) row.bytes[3] ^= 0x40;
    const auto active = evaluate_garbled(c, r.garbled, r.encoding.encode_garbler({true}), r.encoding.encode_evaluator({true}));
    try {
      decode_outputs(active, r.decode);
    } catch (const EvaluationError&) {
      ++detected;
    }
  }
  CHECK(detected == 20);
}

TEST_CASE("label count mismatch is an evaluation error") {
  Prng rng(10);
  const Circuit c = single_gate(GateKind::kAnd);
  const GarbleResult r = garble(c, rng);
  const auto g = r.encoding.encode_garbler({true});
  CHECK_THROWS_AS(evaluate_garbled(c, r.garbled, g, {}), EvaluationError);
  CHECK_THROWS_AS(decode_outputs({}, r.decode), EvaluationError);
}

TEST_CASE("kdf tweak breaks evaluation") {
  Prng rng(11);
  const Circuit c = build_neuron_circuit({2, 3, SignMode::kSafeSign});
  const GarbleResult r = garble(c, rng, {.kdf_tweak = 0x5a5a5a5a});
  std::vector<bool> gx(c.garbler_inputs().size(), true), ey(c.evaluator_inputs().size(), false);
  const auto active = evaluate_garbled(c, r.garbled, r.encoding.encode_garbler(gx), r.encoding.encode_evaluator(ey));
  CHECK_THROWS_AS(decode_outputs(active, r.decode), EvaluationError);
}

TEST_CASE("serialization round trips") {
  Prng rng(12);
  const Circuit c = build_neuron_circuit({4, 8, SignMode::kPaperExact});
  const GarbleResult r = garble(c, rng, {.p = 4});
  const GarbledCircuit back = deserialize_garbled(serialize_garbled(r.garbled));
  CHECK(back.tables == r.garbled.tables);
  CHECK(back.circuit_hash == r.garbled.circuit_hash);
  CHECK(back.and_count == r.garbled.and_count);
  CHECK(back.l == 8);
  CHECK(back.p == 4);
  CHECK(serialize_decode_map(deserialize_decode_map(serialize_decode_map(r.decode))) == serialize_decode_map(r.decode));
  CHECK(serialize_decode_map(r.decode).size() == 8 * kDecodeBytesPerOutput);
  const auto labels = r.encoding.encode_garbler(std::vector<bool>(c.garbler_inputs().size(), true));
  CHECK(deserialize_labels(serialize_labels(labels)) == labels);

  auto bytes = serialize_garbled(r.garbled);
  bytes.pop_back();
  CHECK_THROWS_AS(deserialize_garbled(bytes), ProtocolError);
  CHECK_THROWS_AS(deserialize_labels(std::vector<std::uint8_t>(15)), ProtocolError);
}

}
