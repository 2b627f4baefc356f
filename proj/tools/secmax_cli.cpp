#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "secmax/circuit.hpp"
#include "secmax/garble.hpp"
#include "secmax/plant.hpp"
#include "secmax/protocol.hpp"
#include "verify_suite.hpp"

namespace fs = std::filesystem;
using namespace secmax;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

/// Raised for bad flag combinations that CLI11 cannot express.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::optional<SignMode> parse_mode_flag(const std::string& text) {
  if (text == "auto") return std::nullopt;
  try {
    return parse_sign_mode(text);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
}

Eigen::VectorXd parse_vector(const std::string& text) {
  std::vector<double> vals;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      vals.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw UsageError("cannot parse number '" + item + "' in '" + text + "'");
    }
  }
  return Eigen::Map<const Eigen::VectorXd>(vals.data(), static_cast<Eigen::Index>(vals.size()));
}

MaxoutController fixture_by_name(const std::string& name) {
  if (name == "paper_p8") return fixture_paper_p8();
  if (name == "saturated") return fixture_saturated_feedback(saturated_gain());
  throw UsageError("unknown fixture '" + name + "' (expected paper_p8 or saturated)");
}

/// Seeded synthetic controller for benchmarks at arbitrary p.
MaxoutController synthetic_controller(std::size_t p, std::uint64_t seed) {
  Prng rng(seed, "synthetic");
  auto uniform = [&](double half) { return (static_cast<double>(rng() >> 11) * 0x1.0p-53 * 2.0 - 1.0) * half; };
  MaxoutController c;
  c.id = "synthetic_p" + std::to_string(p);
  const auto rows = static_cast<Eigen::Index>(p);
  c.net.K = Eigen::MatrixXd::NullaryExpr(rows, 2, [&] { return uniform(0.5); });
  c.net.L = Eigen::MatrixXd::NullaryExpr(rows, 2, [&] { return uniform(0.5); });
  c.net.b = Eigen::VectorXd::NullaryExpr(rows, [&] { return uniform(1.0); });
  c.net.c = Eigen::VectorXd::NullaryExpr(rows, [&] { return uniform(1.0); });
  return c;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ContractError("cannot write " + path.string());
  f << text;
}

void print_provisioning(std::ostream& out, const Provisioning& prov, bool mode_auto) {
  const auto& q = prov.quantization;
  out << "s1=" << q.s1 << " s2=" << q.s2 << " s3=" << q.s3 << " l=" << q.l << "\n";
  out << "s3_max=" << prov.s3_max << "\n";
  out << "eta=" << q.eta << "\n";
  out << "error_bound=" << error_bound(q) << "\n";
  out << "delta=" << half_error_bound(q) << "\n";
  out << "mode=" << to_string(prov.config.mode) << (mode_auto ? " (auto)" : "") << "\n";
  out << "certificate:\n" << prov.certificate.report();
}

struct LoadedSession {
  ProvisioningBundle one;
  ProvisioningBundle two;
  QuantizedNetwork netq;
};

/// Bundles from a directory, a session config, or fresh provisioning, checked against the fixture.
LoadedSession load_session(const MaxoutController& ctrl, const std::string& bundles, const std::string& config_path,
                           std::optional<std::uint64_t> seed, const std::string& ot_group) {
  LoadedSession s;
  if (!bundles.empty()) {
    s.one = read_bundle(fs::path(bundles) / "party1.bundle");
    s.two = read_bundle(fs::path(bundles) / "party2.bundle");
  } else if (!config_path.empty()) {
    std::ifstream f(config_path);
    if (!f) throw UsageError("cannot read " + config_path);
    std::stringstream ss;
    ss << f.rdbuf();
    SessionConfig cfg = SessionConfig::from_json(ss.str());
    if (seed) cfg.seed = *seed;
    auto [one, two] = offline_setup(quantize_network(ctrl.net, cfg.quantization()), cfg);
    s.one = std::move(one);
    s.two = std::move(two);
  } else {
    const Provisioning prov =
        provision(ctrl.net, double_integrator_box(), 20, 100, 16, std::nullopt, seed.value_or(1), ot_group);
    s.one = prov.one;
    s.two = prov.two;
  }
  if (seed) s.one.config.seed = s.two.config.seed = *seed;
  s.netq = quantize_network(ctrl.net, s.one.config.quantization());
  const QuantizedNetwork shared = recombine_bundles(s.one, s.two);
  if (shared.K != s.netq.K || shared.L != s.netq.L || shared.b != s.netq.b || shared.c != s.netq.c)
    throw ProtocolError("the bundles do not hold the quantized '" + ctrl.id + "' network");
  return s;
}

int cmd_setup(const std::string& network, double s1, double s2, unsigned l, const std::string& out_dir,
              const std::string& mode_text, std::uint64_t seed, const std::string& ot_group) {
  const auto mode = parse_mode_flag(mode_text);
  NetworkDocument doc;
  try {
    doc = load_network_json(network);
  } catch (const ContractError& e) {
    throw UsageError(e.what());
  }
  StateDomain dom;
  if (doc.domain) {
    dom = *doc.domain;
  } else if (doc.net.n() == 2) {
    dom = double_integrator_box();
  } else {
    throw UsageError("network has no domain and is not two-dimensional");
  }
  std::cout << "network: p=" << doc.net.p() << " n=" << doc.net.n() << "\n";
  Provisioning prov;
  try {
    prov = provision(doc.net, dom, s1, s2, l, mode, seed, ot_group);
  } catch (const OverflowError& e) {
    const QuantizationConfig q = make_quantization_config(s1, s2, l, doc.net, dom);
    std::cout << "s3=" << q.s3 << " s3_max=" << s3_max(doc.net, dom, l) << "\n";
    std::cout << "setup failed: " << e.what() << "\n";
    return kExitFailure;
  }
  print_provisioning(std::cout, prov, !mode.has_value());
  fs::create_directories(out_dir);
  write_bundle(fs::path(out_dir) / "party1.bundle", prov.one);
  write_bundle(fs::path(out_dir) / "party2.bundle", prov.two);
  write_text(fs::path(out_dir) / "session.json", prov.config.to_json() + "\n");
  std::cout << "wrote " << (fs::path(out_dir) / "party1.bundle").string() << ", "
            << (fs::path(out_dir) / "party2.bundle").string() << ", "
            << (fs::path(out_dir) / "session.json").string() << "\n";
  return kExitOk;
}

struct RunFlags {
  std::string bundles;
  std::string config;
  std::string fixture = "saturated";
  std::size_t steps = 40;
  std::string transport = "memory";
  std::optional<std::uint64_t> seed;
  std::string x0 = "5,0";
  std::string csv;
  std::string transcript;
  std::string ot_group = "ristretto255";
};

int cmd_run(const RunFlags& f) {
  const MaxoutController ctrl = fixture_by_name(f.fixture);
  const LoadedSession ls = load_session(ctrl, f.bundles, f.config, f.seed, f.ot_group);
  SessionOptions so;
  so.transport = parse_transport(f.transport);
  Session session(ls.one, ls.two, so);
  const SessionConfig& cfg = session.config();
  const Eigen::VectorXd x0 = parse_vector(f.x0);
  if (x0.size() != static_cast<Eigen::Index>(cfg.n)) throw UsageError("--x0 has the wrong dimension");

  const LinearSystem sys = double_integrator();
  double total_ms = 0.0;
  std::size_t held = 0;
  std::string transcript;
  SimulationTrace trace;
  try {
    trace = closed_loop(
        sys,
        [&](const Eigen::VectorXd& x) {
          const StepResult r = session.step(x);
          total_ms += r.online_ms;
          held += r.held ? 1 : 0;
          transcript += r.transcript.dump();
          return r.u;
        },
        x0, f.steps, cfg.state_domain());
  } catch (const ProtocolError& e) {
    const fs::path path = f.transcript.empty() ? fs::path("secmax-failed-transcript.txt") : fs::path(f.transcript);
    write_text(path, transcript + session.last_transcript().dump());
    std::cerr << "protocol failure: " << e.what() << "\ntranscript: " << path.string() << "\n";
    return kExitFailure;
  }
  trace.controller_id = ctrl.id;
  trace.seed = cfg.seed;
  const SimulationTrace reference = closed_loop(
      sys, [&](const Eigen::VectorXd& x) { return plaintext_control(ls.netq, cfg, x); }, x0, f.steps,
      cfg.state_domain());
  const bool identical = reference.inputs == trace.inputs;

  std::ostream& summary = f.csv.empty() ? std::cerr : std::cout;
  if (f.csv.empty())
    std::cout << trace.to_csv();
  else
    write_text(f.csv, trace.to_csv());
  if (!f.transcript.empty()) write_text(f.transcript, transcript);
  const double final_norm = trace.states.back().lpNorm<Eigen::Infinity>();
  summary << "fixture=" << ctrl.id << " mode=" << to_string(cfg.mode) << " transport=" << f.transport
          << " steps=" << trace.steps() << (trace.truncated ? " (truncated)" : "") << "\n";
  summary << "mean_step_ms=" << (trace.steps() ? total_ms / static_cast<double>(trace.steps()) : 0.0) << "\n";
  summary << "held_steps=" << held << "\n";
  summary << "final_state_inf_norm=" << final_norm << "\n";
  summary << "matches_plaintext=" << (identical ? "yes" : "no") << "\n";
  return identical && !trace.truncated ? kExitOk : kExitFailure;
}

int cmd_step(const RunFlags& f) {
  const MaxoutController ctrl = fixture_by_name(f.fixture);
  const LoadedSession ls = load_session(ctrl, f.bundles, f.config, f.seed, f.ot_group);
  SessionOptions so;
  so.transport = parse_transport(f.transport);
  Session session(ls.one, ls.two, so);
  const Eigen::VectorXd x = parse_vector(f.x0);
  if (x.size() != static_cast<Eigen::Index>(session.config().n)) throw UsageError("--x has the wrong dimension");
  StepResult r;
  try {
    r = session.step(x);
  } catch (const ProtocolError& e) {
    const fs::path path = f.transcript.empty() ? fs::path("secmax-failed-transcript.txt") : fs::path(f.transcript);
    write_text(path, session.last_transcript().dump());
    std::cerr << "protocol failure: " << e.what() << "\ntranscript: " << path.string() << "\n";
    return kExitFailure;
  }
  const double ref = plaintext_control(ls.netq, session.config(), x);
  if (!f.transcript.empty()) write_text(f.transcript, r.transcript.dump());
  std::printf("u=%.17g\nplaintext_u=%.17g\ndelta_nu=%llu\ndelta_omega=%llu\ndifference=%lld\nreal_u=%.17g\n", r.u, ref,
              static_cast<unsigned long long>(r.delta_nu), static_cast<unsigned long long>(r.delta_omega),
              static_cast<long long>(r.difference), ctrl.evaluate(x));
  std::printf("online_ms=%.3f\n", r.online_ms);
  return r.u == ref ? kExitOk : kExitFailure;
}

int cmd_bench(const std::string& fixture, std::size_t p, unsigned l, std::size_t steps, const std::string& transport,
              std::uint64_t seed, const std::string& mode_text, const std::string& ot_group) {
  const MaxoutController ctrl = p > 0 ? synthetic_controller(p, seed) : fixture_by_name(fixture);
  const StateDomain dom = double_integrator_box();
  const Provisioning prov = provision(ctrl.net, dom, 20, 100, l, parse_mode_flag(mode_text), seed, ot_group);
  SessionOptions so;
  so.transport = parse_transport(transport);
  Session session(prov.one, prov.two, so);
  const Circuit c = build_neuron_circuit(prov.config.circuit_spec());
  double total = 0.0, lo = 1e300, hi = 0.0, alpha = 0.0, beta = 0.0;
  std::size_t mismatches = 0;
  const auto states = sample_states(dom, steps, seed);
  for (const auto& x : states) {
    const StepResult r = session.step(x);
    total += r.online_ms;
    lo = std::min(lo, r.online_ms);
    hi = std::max(hi, r.online_ms);
    alpha += r.transcript.party_ms.at(Role::kAlpha);
    beta += r.transcript.party_ms.at(Role::kBeta);
    if (r.u != plaintext_control(prov.netq, prov.config, x)) ++mismatches;
  }
  const double k = static_cast<double>(std::max<std::size_t>(steps, 1));
  std::printf("controller=%s p=%lld l=%u mode=%s transport=%s ot=%s\n", ctrl.id.c_str(),
              static_cast<long long>(ctrl.net.p()), l, to_string(prov.config.mode).c_str(), transport.c_str(),
              ot_group.c_str());
  std::printf("and_gates_per_circuit=%zu garbled_bytes_per_circuit=%zu\n", c.and_count(),
              kGarbledHeaderBytes + kGarbledBytesPerAnd * c.and_count());
  std::printf("steps=%zu mean_step_ms=%.3f min_ms=%.3f max_ms=%.3f\n", steps, total / k, lo, hi);
  std::printf("mean_alpha_busy_ms=%.3f mean_beta_busy_ms=%.3f\n", alpha / k, beta / k);
  std::printf("mismatches=%zu\n", mismatches);
  return mismatches == 0 ? kExitOk : kExitFailure;
}

Circuit circuit_from_flags(std::size_t p, unsigned l, const std::string& mode_text) {
  SignMode mode;
  try {
    mode = parse_sign_mode(mode_text);
    return build_neuron_circuit({p, l, mode});
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
}

int cmd_circuit_stats(std::size_t p, unsigned l, const std::string& mode_text) {
  const Circuit c = circuit_from_flags(p, l, mode_text);
  std::printf("p=%zu l=%u mode=%s\n", p, l, mode_text.c_str());
  std::printf("AND=%zu\nXOR=%zu\nNOT=%zu\n", c.and_count(), c.xor_count(), c.not_count());
  std::printf("wires=%u\ngarbler_inputs=%zu\nevaluator_inputs=%zu\noutputs=%zu\n", c.wire_count(),
              c.garbler_inputs().size(), c.evaluator_inputs().size(), c.outputs().size());
  std::printf("garbled_bytes=%zu\n", kGarbledHeaderBytes + kGarbledBytesPerAnd * c.and_count());
  return kExitOk;
}

int cmd_export_circuit(std::size_t p, unsigned l, const std::string& mode_text, const std::string& out) {
  const Circuit c = circuit_from_flags(p, l, mode_text);
  write_text(out, export_netlist(c));
  std::printf("wrote %s (%zu gates)\n", out.c_str(), c.gates().size());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-party secure evaluation of max-out controllers"};
  app.require_subcommand(1);

  std::string network, out_dir, mode = "auto", ot_group = "ristretto255";
  double s1 = 20, s2 = 100;
  unsigned l = 16;
  std::uint64_t seed = 1;
  auto* setup = app.add_subcommand("setup", "quantize, certify, and share a network into two bundles");
  setup->add_option("--network", network, "network JSON")->required()->check(CLI::ExistingFile);
  setup->add_option("--s1", s1, "state scale")->capture_default_str();
  setup->add_option("--s2", s2, "weight scale")->capture_default_str();
  setup->add_option("--l", l, "ring bit width")->capture_default_str();
  setup->add_option("--out", out_dir, "output directory")->required();
  setup->add_option("--mode", mode, "auto | paper_exact | safe_sign")->capture_default_str();
  setup->add_option("--seed", seed, "session seed")->capture_default_str();
  setup->add_option("--ot-group", ot_group, "ristretto255 | insecure-test-61")->capture_default_str();

  RunFlags rf;
  std::uint64_t run_seed = 0;
  auto add_session_flags = [&](CLI::App* sub) {
    sub->add_option("--bundles", rf.bundles, "directory with party1.bundle and party2.bundle")
        ->check(CLI::ExistingDirectory);
    sub->add_option("--config", rf.config, "session config JSON")->check(CLI::ExistingFile);
    sub->add_option("--fixture", rf.fixture, "saturated | paper_p8")->capture_default_str();
    sub->add_option("--transport", rf.transport, "memory | socket")
        ->check(CLI::IsMember({"memory", "socket"}))
        ->capture_default_str();
    sub->add_option("--seed", run_seed, "session seed override");
    sub->add_option("--transcript", rf.transcript, "write the frame transcript here");
    sub->add_option("--ot-group", rf.ot_group, "OT group for fresh provisioning")->capture_default_str();
  };
  auto* run = app.add_subcommand("run", "closed loop with the protocol in the loop");
  add_session_flags(run);
  run->add_option("--steps", rf.steps, "time steps")->capture_default_str();
  run->add_option("--x0", rf.x0, "initial state, comma separated")->capture_default_str();
  run->add_option("--csv", rf.csv, "write the trace CSV here instead of stdout");

  auto* step = app.add_subcommand("step", "one protocol time step");
  add_session_flags(step);
  step->add_option("--x", rf.x0, "state, comma separated")->required();

  std::string bench_fixture = "paper_p8", transport = "memory";
  std::size_t bench_p = 0, bench_steps = 20;
  auto* bench = app.add_subcommand("bench", "mean online time per step");
  bench->add_option("--fixture", bench_fixture, "paper_p8 | saturated")->capture_default_str();
  bench->add_option("--p", bench_p, "synthetic controller with p pieces instead of a fixture");
  bench->add_option("--l", l, "ring bit width")->capture_default_str();
  bench->add_option("--steps", bench_steps, "time steps")->capture_default_str();
  bench->add_option("--transport", transport, "memory | socket")
      ->check(CLI::IsMember({"memory", "socket"}))
      ->capture_default_str();
  bench->add_option("--seed", seed, "session seed")->capture_default_str();
  bench->add_option("--mode", mode, "auto | paper_exact | safe_sign")->capture_default_str();
  bench->add_option("--ot-group", ot_group, "ristretto255 | insecure-test-61")->capture_default_str();

  cli::VerifyOptions vo;
  std::string suite = "small", inject;
  auto* verify = app.add_subcommand("verify", "run the invariant suites");
  verify->add_option("--suite", suite, "small | full")->check(CLI::IsMember({"small", "full"}))->capture_default_str();
  verify->add_option("--mode", mode, "auto | paper_exact | safe_sign")->capture_default_str();
  verify->add_option("--fixture", vo.fixture, "paper_p8 | saturated")
      ->check(CLI::IsMember({"paper_p8", "saturated"}))
      ->capture_default_str();
  verify->add_option("--inject", inject, "fault injection: kdf-tamper")->check(CLI::IsMember({"kdf-tamper"}));
  verify->add_option("--seed", vo.seed, "seed")->capture_default_str();

  std::size_t cp = 8;
  std::string cmode = "paper_exact", netlist_out;
  auto* stats = app.add_subcommand("circuit-stats", "gate counts and garbled size of the neuron circuit");
  stats->add_option("--p", cp, "pieces per neuron")->capture_default_str();
  stats->add_option("--l", l, "ring bit width")->capture_default_str();
  stats->add_option("--mode", cmode, "paper_exact | safe_sign")->capture_default_str();
  auto* exportc = app.add_subcommand("export-circuit", "write the neuron circuit netlist");
  exportc->add_option("--p", cp, "pieces per neuron")->capture_default_str();
  exportc->add_option("--l", l, "ring bit width")->capture_default_str();
  exportc->add_option("--mode", cmode, "paper_exact | safe_sign")->capture_default_str();
  exportc->add_option("--out", netlist_out, "netlist file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*setup) return cmd_setup(network, s1, s2, l, out_dir, mode, seed, ot_group);
    if (*run || *step) {
      if ((*run ? run->count("--seed") : step->count("--seed")) > 0) rf.seed = run_seed;
      if (!rf.bundles.empty() && !rf.config.empty()) throw UsageError("--bundles and --config are exclusive");
      return *run ? cmd_run(rf) : cmd_step(rf);
    }
    if (*bench) return cmd_bench(bench_fixture, bench_p, l, bench_steps, transport, seed, mode, ot_group);
    if (*verify) {
      vo.full = suite == "full";
      vo.mode = parse_mode_flag(mode);
      vo.inject_kdf_tamper = inject == "kdf-tamper";
      if (vo.mode == SignMode::kPaperExact) {
        const MaxoutController ctrl = fixture_by_name(vo.fixture);
        const StateDomain dom = double_integrator_box();
        const auto q = make_quantization_config(20, 100, 16, ctrl.net, dom);
        const auto cert = certify_no_overflow(quantize_network(ctrl.net, q), dom, q);
        if (!cert.differences_fit) {
          std::cout << "verify refused: paper_exact without a pairwise-difference certificate for " << ctrl.id
                    << "\n"
                    << cert.report();
          return kExitFailure;
        }
      }
      return cli::run_verify(vo, std::cout) == 0 ? kExitOk : kExitFailure;
    }
    if (*stats) return cmd_circuit_stats(cp, l, cmode);
    if (*exportc) return cmd_export_circuit(cp, l, cmode, netlist_out);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DomainError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}
