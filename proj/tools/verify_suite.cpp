#include "verify_suite.hpp"

#include <chrono>
#include <cmath>
#include <functional>
#include <ostream>
#include <sstream>
#include <vector>

#include "secmax/garble.hpp"
#include "secmax/ot.hpp"
#include "secmax/plant.hpp"
#include "secmax/protocol.hpp"

namespace secmax::cli {

namespace {

struct Outcome {
  bool ok = true;
  std::string detail;
};

std::vector<bool> bits_of(std::uint64_t v, std::size_t count) {
  std::vector<bool> out(count);
  for (std::size_t i = 0; i < count; ++i) out[i] = ((v >> i) & 1U) != 0;
  return out;
}

/// (max_i mu(g_i + e_i) + r) mod q from flat LSB-first input words.
std::uint64_t neuron_oracle(std::uint64_t g_word, std::uint64_t r, std::uint64_t e_word, std::size_t p, unsigned l) {
  const Ring ring(l);
  std::int64_t best = INT64_MIN;
  for (std::size_t i = 0; i < p; ++i) {
    const std::uint64_t g = (g_word >> (i * l)) & ring.mask();
    const std::uint64_t e = (e_word >> (i * l)) & ring.mask();
    best = std::max(best, ring.mu(g + e));
  }
  return ring.reduce(static_cast<std::uint64_t>(best) + r);
}

/// True when every pairwise difference of the reconstructed entries fits Z_q.
bool differences_fit(std::uint64_t g_word, std::uint64_t e_word, std::size_t p, unsigned l) {
  const Ring ring(l);
  std::vector<std::int64_t> vals;
  for (std::size_t i = 0; i < p; ++i)
    vals.push_back(ring.mu(((g_word >> (i * l)) + (e_word >> (i * l))) & ring.mask()));
  for (auto a : vals)
    for (auto b : vals)
      if (!ring.contains_signed(a - b)) return false;
  return true;
}

Outcome check_bit_pipeline() {
  const Ring ring(3);
  const std::array<std::int64_t, 8> expected{0, 1, 2, 3, -4, -3, -2, -1};
  for (std::uint64_t v = 0; v < 8; ++v)
    if (ring.mu(v) != expected[v]) return {false, "mu(" + std::to_string(v) + ") wrong"};
  for (auto [a, b, sum, mu_v] : {std::array<std::int64_t, 4>{3, 6, 1, 1}, std::array<std::int64_t, 4>{5, 2, 7, -1}}) {
    CircuitBuilder cb;
    std::vector<Wire> x, y;
    for (int i = 0; i < 3; ++i) x.push_back(cb.add_garbler_input("x"));
    for (int i = 0; i < 3; ++i) y.push_back(cb.add_evaluator_input("y"));
    const auto s = build_adder(cb, x, y, Wire::constant(false));
    for (const Wire& w : s) cb.add_output(w, "s");
    const Circuit c = std::move(cb).build();
    const auto out = pack_bits(evaluate_plaintext(c, bits_of(static_cast<std::uint64_t>(a), 3),
                                                  bits_of(static_cast<std::uint64_t>(b), 3)));
    if (static_cast<std::int64_t>(out) != sum || ring.mu(out) != mu_v)
      return {false, std::to_string(a) + "+" + std::to_string(b) + " gave " + std::to_string(out)};
  }
  return {true, "3+6 -> 1 -> 1, 5+2 -> 7 -> -1"};
}

Outcome check_exhaustive_plain(SignMode mode) {
  const std::size_t p = 2;
  const unsigned l = 3;
  const Circuit c = build_neuron_circuit({p, l, mode});
  std::size_t checked = 0;
  for (std::uint64_t in = 0; in < (1U << 15); ++in) {
    const std::uint64_t g = in & 0x3F, r = (in >> 6) & 7, e = in >> 9;
    if (mode == SignMode::kPaperExact && !differences_fit(g, e, p, l)) continue;
    auto gb = bits_of(g, 6);
    const auto rb = bits_of(r, 3);
    gb.insert(gb.end(), rb.begin(), rb.end());
    const auto out = pack_bits(evaluate_plaintext(c, gb, bits_of(e, 6)));
    if (out != neuron_oracle(g, r, e, p, l))
      return {false, "input " + std::to_string(in) + " gave " + std::to_string(out)};
    ++checked;
  }
  return {true, std::to_string(checked) + " inputs"};
}

Outcome check_exhaustive_garbled(std::uint32_t tweak, std::uint64_t seed) {
  const Circuit c = build_neuron_circuit({2, 3, SignMode::kSafeSign});
  Prng rng(seed, "verify-garble");
  GarbleOptions opts;
  opts.kdf_tweak = tweak;
  for (std::uint64_t in = 0; in < (1U << 15); ++in) {
    auto gb = bits_of(in & 0x1FF, 9);
    const auto eb = bits_of(in >> 9, 6);
    const GarbleResult gr = garble(c, rng, opts);
    const auto gl = gr.encoding.encode_garbler(gb);
    const auto el = gr.encoding.encode_evaluator(eb);
    std::vector<bool> got;
    try {
      got = decode_outputs(evaluate_garbled(c, gr.garbled, gl, el), gr.decode);
    } catch (const EvaluationError& e) {
      return {false, "input " + std::to_string(in) + ": " + e.what()};
    }
    if (got != evaluate_plaintext(c, gb, eb)) return {false, "input " + std::to_string(in) + " decoded differently"};
  }
  return {true, "32768 fresh garblings"};
}

Outcome check_garble_differential(std::uint32_t tweak, std::uint64_t seed, std::size_t trials) {
  const Circuit c = build_neuron_circuit({8, 16, SignMode::kSafeSign});
  Prng rng(seed, "verify-diff");
  GarbleOptions opts;
  opts.kdf_tweak = tweak;
  for (std::size_t t = 0; t < trials; ++t) {
    std::vector<bool> gb(c.garbler_inputs().size()), eb(c.evaluator_inputs().size());
    for (auto&& b : gb) b = rng.bits(1) != 0;
    for (auto&& b : eb) b = rng.bits(1) != 0;
    const GarbleResult gr = garble(c, rng, opts);
    try {
      const auto got = decode_outputs(
          evaluate_garbled(c, gr.garbled, gr.encoding.encode_garbler(gb), gr.encoding.encode_evaluator(eb)), gr.decode);
      if (got != evaluate_plaintext(c, gb, eb)) return {false, "trial " + std::to_string(t) + " decoded differently"};
    } catch (const EvaluationError& e) {
      return {false, "trial " + std::to_string(t) + ": " + e.what()};
    }
  }
  return {true, std::to_string(trials) + " random inputs at p=8, l=16"};
}

Outcome check_gate_counts(bool full) {
  std::vector<std::array<std::size_t, 3>> cases{{8, 16, 480}, {8, 32, 960}, {16, 16, 992}, {16, 32, 1984}};
  if (full) cases.push_back({2, 3, 18});
  std::ostringstream os;
  for (auto [p, l, expected] : cases) {
    const Circuit c = build_neuron_circuit({p, static_cast<unsigned>(l), SignMode::kPaperExact});
    if (c.and_count() != expected)
      return {false, "p=" + std::to_string(p) + " l=" + std::to_string(l) + " has " +
                         std::to_string(c.and_count()) + " ANDs, expected " + std::to_string(expected)};
    os << "(" << p << "," << l << ")=" << expected << " ";
  }
  return {true, os.str()};
}

Outcome check_error_bound(const MaxoutController& ctrl, unsigned l, std::size_t samples, std::uint64_t seed) {
  const StateDomain dom = double_integrator_box();
  const QuantizationConfig q = make_quantization_config(20, 100, l, ctrl.net, dom);
  const QuantizedNetwork netq = quantize_network(ctrl.net, q);
  const double bound = error_bound(q);
  double worst = 0.0;
  for (const auto& x : sample_states(dom, samples, seed)) {
    const IntVector xi = quantize_state(x, q, dom);
    const double approx = static_cast<double>(plaintext_difference(netq, xi, q.ring())) / q.s3;
    worst = std::max(worst, std::abs(ctrl.evaluate(x) - approx));
  }
  std::ostringstream os;
  os << ctrl.id << " l=" << l << " worst=" << worst << " bound=" << bound;
  return {worst <= bound, os.str()};
}

Outcome check_ot(std::uint64_t seed, std::size_t batches) {
  const OtParams params = OtParams::insecure_test();
  Prng rng(seed, "verify-ot");
  for (std::size_t t = 0; t < batches; ++t) {
    const std::size_t n = 1 + rng.bits(5);
    std::vector<bool> choices(n);
    std::vector<std::array<Label, 2>> msgs(n);
    for (std::size_t i = 0; i < n; ++i) {
      choices[i] = rng.bits(1) != 0;
      msgs[i] = {Label::random(rng), Label::random(rng)};
    }
    auto [req, state] = ot_receive_phase1(params, choices, rng);
    const OtResponse resp = ot_send(params, req, msgs, rng);
    const auto got = ot_receive_phase2(params, resp, state);
    for (std::size_t i = 0; i < n; ++i) {
      if (got[i] != msgs[i][choices[i] ? 1 : 0]) return {false, "wrong label in batch " + std::to_string(t)};
      if (ot_try_unwrap(params, resp, state, i, choices[i] ? 0 : 1))
        return {false, "non-chosen slot unwrapped in batch " + std::to_string(t)};
    }
  }
  return {true, std::to_string(batches) + " batches, test group"};
}

Outcome check_protocol(const MaxoutController& ctrl, SignMode mode, std::size_t steps, std::uint64_t seed,
                       std::uint32_t tweak, const std::string& group) {
  const StateDomain dom = double_integrator_box();
  const Provisioning prov = provision(ctrl.net, dom, 20, 100, 16, mode, seed, group);
  SessionOptions so;
  so.alpha_kdf_tweak = tweak;
  Session session(prov.one, prov.two, so);
  for (const auto& x : sample_states(dom, steps, seed)) {
    StepResult r;
    try {
      r = session.step(x);
    } catch (const ProtocolError& e) {
      return {false, e.what()};
    }
    const double ref = plaintext_control(prov.netq, prov.config, x);
    if (r.u != ref) return {false, "u=" + std::to_string(r.u) + " but plaintext gives " + std::to_string(ref)};
  }
  return {true, ctrl.id + " " + to_string(mode) + " " + std::to_string(steps) + " steps over " + group};
}

}  // namespace

int run_verify(const VerifyOptions& opts, std::ostream& out) {
  const std::uint32_t tweak = opts.inject_kdf_tamper ? 0x5a5a5a5au : 0;
  int failed = 0;
  int passed = 0;
  auto run = [&](const std::string& name, const std::function<Outcome()>& check) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out << (o.ok ? "PASS " : "FAIL ") << name << ": " << o.detail << " [" << s << " s]\n";
    (o.ok ? passed : failed)++;
  };

  const MaxoutController p8 = fixture_paper_p8();
  const MaxoutController sat = fixture_saturated_feedback(saturated_gain());
  const MaxoutController& ctrl = opts.fixture == "saturated" ? sat : p8;
  const std::size_t samples = opts.full ? 6000 : 1000;
  const std::size_t steps = opts.full ? 50 : 5;

  run("bit-pipeline-l3", check_bit_pipeline);
  run("gate-counts", [&] { return check_gate_counts(opts.full); });
  run("neuron-oracle-l3-p2-safe_sign", [] { return check_exhaustive_plain(SignMode::kSafeSign); });
  run("neuron-oracle-l3-p2-paper_exact", [] { return check_exhaustive_plain(SignMode::kPaperExact); });
  run("garbled-vs-plaintext-l3-p2", [&] { return check_exhaustive_garbled(tweak, opts.seed); });
  run("garble-differential", [&] { return check_garble_differential(tweak, opts.seed, opts.full ? 200 : 20); });
  run("ot-correctness", [&] { return check_ot(opts.seed, opts.full ? 1000 : 100); });
  for (unsigned l : opts.full ? std::vector<unsigned>{16, 32} : std::vector<unsigned>{16}) {
    run("error-bound-p8-l" + std::to_string(l), [&] { return check_error_bound(p8, l, samples, opts.seed); });
    run("error-bound-saturated-l" + std::to_string(l), [&] { return check_error_bound(sat, l, samples, opts.seed); });
  }
  const std::string group = opts.full ? "ristretto255" : "insecure-test-61";
  run("protocol-exactness", [&] {
    const StateDomain dom = double_integrator_box();
    const auto q = make_quantization_config(20, 100, 16, ctrl.net, dom);
    const auto cert = certify_no_overflow(quantize_network(ctrl.net, q), dom, q);
    return check_protocol(ctrl, resolve_sign_mode(opts.mode, cert), steps, opts.seed, tweak, group);
  });

  out << "verify " << (opts.full ? "full" : "small") << ": " << passed << " passed, " << failed << " failed\n";
  return failed;
}

}  // namespace secmax::cli
