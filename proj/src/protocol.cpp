#include "secmax/protocol.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "secmax/sha256.hpp"

namespace secmax {

namespace {

using Clock = std::chrono::steady_clock;
using Millis = std::chrono::duration<double, std::milli>;

constexpr std::array<std::uint8_t, 4> kBundleMagic{'S', 'M', 'X', 'B'};
constexpr std::uint16_t kBundleVersion = 1;

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}
void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint64_t take_le(std::span<const std::uint8_t>& in, int bytes, const char* what) {
  if (in.size() < static_cast<std::size_t>(bytes)) throw ProtocolError(std::string("truncated ") + what);
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= std::uint64_t{in[i]} << (8 * i);
  in = in.subspan(bytes);
  return v;
}

ShareMatrix take_share(std::span<const std::uint8_t>& in) {
  try {
    return deserialize_share(in);
  } catch (const ContractError& e) {
    throw ProtocolError(std::string("malformed share record: ") + e.what());
  }
}

ShareVector as_vector(const ShareMatrix& m) {
  if (m.values.cols() != 1) throw ContractError("share is not a column vector");
  return {m.party, m.bit_width, m.values.col(0)};
}

ShareMatrix as_matrix(const ShareVector& v) { return {v.party, v.bit_width, RingMatrix(v.values)}; }

std::string hex(std::span<const std::uint8_t> bytes) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(bytes.size() * 2);
  for (std::uint8_t b : bytes) {
    out.push_back(kDigits[b >> 4]);
    out.push_back(kDigits[b & 15]);
  }
  return out;
}

Role cloud_role(Party p) { return p == Party::kOne ? Role::kAlpha : Role::kBeta; }

}  // namespace

std::string to_string(Role role) {
  switch (role) {
    case Role::kSensor: return "sensor";
    case Role::kDealer: return "dealer";
    case Role::kAlpha: return "alpha";
    case Role::kBeta: return "beta";
    case Role::kActuator: return "actuator";
  }
  return "unknown";
}

std::string to_string(TransportKind t) { return t == TransportKind::kMemory ? "memory" : "socket"; }

TransportKind parse_transport(const std::string& text) {
  if (text == "memory") return TransportKind::kMemory;
  if (text == "socket") return TransportKind::kSocket;
  throw ContractError("unknown transport '" + text + "' (expected memory or socket)");
}

// ---------------------------------------------------------------------------
// Session configuration and bundles

QuantizationConfig SessionConfig::quantization() const {
  QuantizationConfig q;
  q.s1 = s1;
  q.s2 = s2;
  q.s3 = s3;
  q.l = l;
  q.eta = eta;
  q.n = static_cast<Eigen::Index>(n);
  return q;
}

void SessionConfig::validate() const {
  quantization().validate();
  if (p < 1 || n < 1) throw ContractError("session needs p >= 1 and n >= 1");
  if (static_cast<std::size_t>(domain.size()) != n) throw ContractError("state domain has the wrong dimension");
  state_domain().validate();
  circuit_spec().validate();
  (void)OtParams::by_name(ot_group);
}

std::string SessionConfig::to_json() const {
  nlohmann::ordered_json j;
  j["l"] = l;
  j["p"] = p;
  j["n"] = n;
  j["s1"] = s1;
  j["s2"] = s2;
  j["s3"] = s3;
  j["eta"] = eta;
  j["mode"] = to_string(mode);
  j["domain"] = std::vector<double>(domain.data(), domain.data() + domain.size());
  j["ot_group"] = ot_group;
  j["seed"] = seed;
  j["session_id"] = session_id;
  j["timeout_ms"] = timeout_ms;
  j["zero_masks"] = zero_masks;
  j["identities"] = identities;
  j["endpoints"] = endpoints;
  return j.dump(2);
}

SessionConfig SessionConfig::from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    SessionConfig c;
    c.l = j.at("l").get<unsigned>();
    c.p = j.at("p").get<std::size_t>();
    c.n = j.at("n").get<std::size_t>();
    c.s1 = j.at("s1").get<double>();
    c.s2 = j.at("s2").get<double>();
    c.s3 = j.at("s3").get<double>();
    c.eta = j.value("eta", 0.0);
    c.mode = parse_sign_mode(j.at("mode").get<std::string>());
    const auto dom = j.at("domain").get<std::vector<double>>();
    c.domain = Eigen::Map<const Eigen::VectorXd>(dom.data(), static_cast<Eigen::Index>(dom.size()));
    c.ot_group = j.value("ot_group", std::string("ristretto255"));
    c.seed = j.value("seed", std::uint64_t{0});
    c.session_id = j.value("session_id", std::uint32_t{0});
    c.timeout_ms = j.value("timeout_ms", std::uint32_t{5000});
    c.zero_masks = j.value("zero_masks", false);
    c.identities = j.value("identities", std::map<std::string, std::string>{});
    c.endpoints = j.value("endpoints", std::map<std::string, std::string>{});
    c.validate();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ContractError(std::string("invalid session config: ") + e.what());
  }
}

SessionConfig make_session_config(const QuantizationConfig& q, std::size_t p, const StateDomain& dom, SignMode mode,
                                  std::uint64_t seed) {
  SessionConfig c;
  c.l = q.l;
  c.p = p;
  c.n = static_cast<std::size_t>(q.n);
  c.s1 = q.s1;
  c.s2 = q.s2;
  c.s3 = q.s3;
  c.eta = q.eta;
  c.mode = mode;
  c.domain = dom.half_widths;
  c.seed = seed;
  std::vector<std::uint8_t> seed_bytes;
  put_u64(seed_bytes, seed);
  const Digest d = sha256(seed_bytes);
  c.session_id = std::uint32_t{d[0]} | std::uint32_t{d[1]} << 8 | std::uint32_t{d[2]} << 16 |
                 std::uint32_t{d[3]} << 24;
  for (Role r : kAllRoles) c.identities[to_string(r)] = to_string(r);
  c.validate();
  return c;
}

std::vector<std::uint8_t> serialize_bundle(const ProvisioningBundle& b) {
  std::vector<std::uint8_t> out(kBundleMagic.begin(), kBundleMagic.end());
  put_u16(out, kBundleVersion);
  out.push_back(static_cast<std::uint8_t>(b.party));
  const std::string json = b.config.to_json();
  put_u32(out, static_cast<std::uint32_t>(json.size()));
  out.insert(out.end(), json.begin(), json.end());
  for (const ShareMatrix* s : {&b.K, &b.L, &b.beta, &b.gamma}) {
    const auto rec = serialize_share(*s);
    out.insert(out.end(), rec.begin(), rec.end());
  }
  return out;
}

ProvisioningBundle deserialize_bundle(std::span<const std::uint8_t> in) {
  if (in.size() < 4 || !std::equal(kBundleMagic.begin(), kBundleMagic.end(), in.begin()))
    throw ProtocolError("not a provisioning bundle");
  in = in.subspan(4);
  if (take_le(in, 2, "bundle header") != kBundleVersion) throw ProtocolError("unsupported bundle version");
  ProvisioningBundle b;
  const auto party = take_le(in, 1, "bundle header");
  if (party != 1 && party != 2) throw ProtocolError("bundle party must be 1 or 2");
  b.party = static_cast<Party>(party);
  const auto len = take_le(in, 4, "bundle header");
  if (in.size() < len) throw ProtocolError("truncated bundle config");
  b.config = SessionConfig::from_json(std::string(in.begin(), in.begin() + static_cast<std::ptrdiff_t>(len)));
  in = in.subspan(len);
  b.K = take_share(in);
  b.L = take_share(in);
  b.beta = take_share(in);
  b.gamma = take_share(in);
  if (!in.empty()) throw ProtocolError("trailing bytes after bundle");
  const auto p = static_cast<Eigen::Index>(b.config.p);
  const auto n = static_cast<Eigen::Index>(b.config.n);
  for (const ShareMatrix* s : {&b.K, &b.L, &b.beta, &b.gamma}) {
    if (s->party != b.party || s->bit_width != b.config.l) throw ProtocolError("bundle share metadata mismatch");
    if (s->values.rows() != p) throw ProtocolError("bundle share has the wrong row count");
  }
  if (b.K.values.cols() != n || b.L.values.cols() != n || b.beta.values.cols() != 1 || b.gamma.values.cols() != 1)
    throw ProtocolError("bundle share has the wrong column count");
  return b;
}

void write_bundle(const std::filesystem::path& path, const ProvisioningBundle& b) {
  const auto bytes = serialize_bundle(b);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ContractError("cannot write " + path.string());
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw ContractError("cannot write " + path.string());
}

ProvisioningBundle read_bundle(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ContractError("cannot read " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return deserialize_bundle(bytes);
}

std::pair<ProvisioningBundle, ProvisioningBundle> offline_setup(const QuantizedNetwork& netq,
                                                                const SessionConfig& cfg) {
  cfg.validate();
  netq.validate();
  if (static_cast<std::size_t>(netq.p()) != cfg.p || static_cast<std::size_t>(netq.n()) != cfg.n)
    throw ContractError("network shape does not match the session config");
  const OverflowCertificate cert = certify_no_overflow(netq, cfg.state_domain(), cfg.quantization());
  if (!cert.ok()) throw OverflowError("setup refused, preactivations can leave Z_q:\n" + cert.report());
  if (cfg.mode == SignMode::kPaperExact && !cert.differences_fit)
    throw OverflowError("setup refused, paper_exact needs every pairwise difference in Z_q:\n" + cert.report());

  const Ring ring = cfg.ring();
  Prng rng(cfg.seed, "offline");
  auto [k1, k2] = share(lift(netq.K, ring), ring, rng);
  auto [l1, l2] = share(lift(netq.L, ring), ring, rng);
  auto [b1, b2] = share(lift(netq.b, ring), ring, rng);
  auto [c1, c2] = share(lift(netq.c, ring), ring, rng);
  ProvisioningBundle one{cfg, Party::kOne, std::move(k1), std::move(l1), std::move(b1), std::move(c1)};
  ProvisioningBundle two{cfg, Party::kTwo, std::move(k2), std::move(l2), std::move(b2), std::move(c2)};
  return {std::move(one), std::move(two)};
}

SignMode resolve_sign_mode(std::optional<SignMode> requested, const OverflowCertificate& cert) {
  if (!requested) return cert.differences_fit ? SignMode::kPaperExact : SignMode::kSafeSign;
  if (*requested == SignMode::kPaperExact && !cert.differences_fit)
    throw OverflowError("paper_exact needs every pairwise difference in Z_q, which is not certified:\n" +
                        cert.report());
  return *requested;
}

Provisioning provision(const RealNetwork& net, const StateDomain& dom, double s1, double s2, unsigned l,
                       std::optional<SignMode> mode, std::uint64_t seed, const std::string& ot_group) {
  Provisioning out;
  out.quantization = make_quantization_config(s1, s2, l, net, dom);
  out.s3_max = s3_max(net, dom, l);
  if (out.quantization.s3 > out.s3_max)
    throw OverflowError("s3 = " + std::to_string(out.quantization.s3) + " exceeds s3_max = " +
                        std::to_string(out.s3_max));
  if (half_error_bound(out.quantization) > 1.0)
    throw OverflowError("Delta = " + std::to_string(half_error_bound(out.quantization)) +
                        " exceeds the cap of 1 assumed when sizing s3");
  out.netq = quantize_network(net, out.quantization);
  out.certificate = certify_no_overflow(out.netq, dom, out.quantization);
  if (!out.certificate.ok())
    throw OverflowError("preactivations can leave Z_q:\n" + out.certificate.report());
  const SignMode chosen = resolve_sign_mode(mode, out.certificate);
  out.config = make_session_config(out.quantization, static_cast<std::size_t>(net.p()), dom, chosen, seed);
  out.config.ot_group = ot_group;
  out.config.validate();
  auto [one, two] = offline_setup(out.netq, out.config);
  out.one = std::move(one);
  out.two = std::move(two);
  return out;
}

QuantizedNetwork recombine_bundles(const ProvisioningBundle& one, const ProvisioningBundle& two) {
  QuantizedNetwork net;
  net.K = reconstruct(one.K, two.K);
  net.L = reconstruct(one.L, two.L);
  net.b = reconstruct(one.beta, two.beta).col(0);
  net.c = reconstruct(one.gamma, two.gamma).col(0);
  return net;
}

std::pair<ShareVector, ShareVector> sensor_step(const Eigen::VectorXd& x, const SessionConfig& cfg, Prng& rng) {
  const IntVector xi = quantize_state(x, cfg.quantization(), cfg.state_domain());
  const Ring ring = cfg.ring();
  auto [a, b] = share(lift(xi, ring), ring, rng);
  return {as_vector(a), as_vector(b)};
}

double actuator_reconstruct(std::uint64_t dv, std::uint64_t dw, const Ring& ring, double s3) {
  return static_cast<double>(ring.mu(dv - dw)) / s3;
}

std::int64_t plaintext_difference(const QuantizedNetwork& netq, const IntVector& xi, const Ring& ring) {
  const std::int64_t v = (netq.K * xi + netq.b).maxCoeff();
  const std::int64_t w = (netq.L * xi + netq.c).maxCoeff();
  return ring.mu(static_cast<std::uint64_t>(v) - static_cast<std::uint64_t>(w));
}

double plaintext_control(const QuantizedNetwork& netq, const SessionConfig& cfg, const Eigen::VectorXd& x) {
  const IntVector xi = quantize_state(x, cfg.quantization(), cfg.state_domain());
  return static_cast<double>(plaintext_difference(netq, xi, cfg.ring())) / cfg.s3;
}

// ---------------------------------------------------------------------------
// Transcripts

std::size_t TimeStepTranscript::count_sent(MessageTag tag) const {
  return static_cast<std::size_t>(
      std::count_if(entries.begin(), entries.end(), [&](const TranscriptEntry& e) { return e.sent && e.tag == tag; }));
}

std::string TimeStepTranscript::dump() const {
  std::string out;
  for (const TranscriptEntry& e : entries) {
    out += std::to_string(e.step) + ' ' + to_string(e.party) + (e.sent ? " send " : " recv ") + to_string(e.peer) +
           ' ' + to_string(e.tag) + ' ' + hex(e.frame) + '\n';
  }
  return out;
}

std::map<MessageTag, std::size_t> expected_message_budget() {
  return {{MessageTag::kStateShare, 2},         {MessageTag::kTripleShare, 2},  {MessageTag::kBeaverOpen, 4},
          {MessageTag::kGarbledCircuit, 2},     {MessageTag::kGarblerInputLabels, 2},
          {MessageTag::kOtRequest, 2},          {MessageTag::kOtResponse, 2},   {MessageTag::kOutputDecode, 2},
          {MessageTag::kMaskedResult, 2}};
}

// ---------------------------------------------------------------------------
// Network: one byte channel per ordered pair of communicating roles.

class Network {
 public:
  Network(TransportKind kind, std::uint32_t session, std::optional<FrameFault> fault)
      : session_(session), fault_(fault) {
    const std::array<std::pair<Role, Role>, 8> links{{{Role::kSensor, Role::kAlpha},
                                                      {Role::kSensor, Role::kBeta},
                                                      {Role::kDealer, Role::kAlpha},
                                                      {Role::kDealer, Role::kBeta},
                                                      {Role::kAlpha, Role::kBeta},
                                                      {Role::kBeta, Role::kAlpha},
                                                      {Role::kAlpha, Role::kActuator},
                                                      {Role::kBeta, Role::kActuator}}};
    for (const auto& link : links) {
      if (kind == TransportKind::kMemory)
        links_[link] = std::make_unique<MemoryChannel>();
      else
        links_[link] = make_loopback_socket_channel();
    }
  }

  void begin_step(std::uint32_t step) {
    std::lock_guard lock(mutex_);
    step_ = step;
    started_ = Clock::now();
    for (auto& [role, log] : log_) log.clear();
  }

  void send(Role from, Role to, MessageTag tag, std::uint32_t step, std::vector<std::uint8_t> payload) {
    Frame f{tag, session_, step, std::move(payload)};
    auto bytes = encode_frame(f);
    record(from, true, to, tag, step, bytes);
    std::vector<std::uint8_t>& previous = last_sent_[{from, to, tag}];
    std::vector<std::uint8_t> honest = bytes;
    if (fault_ && fault_->from == from && fault_->to == to && fault_->tag == tag && fault_->step == step) {
      using Kind = FrameFault::Kind;
      switch (fault_->kind) {
        case Kind::kDrop:
          return;
        case Kind::kReplayPrevious:
          if (!previous.empty()) bytes = previous;
          break;
        case Kind::kWrongTag:
          f.tag = tag == MessageTag::kMaskedResult ? MessageTag::kStateShare : MessageTag::kMaskedResult;
          bytes = encode_frame(f);
          break;
        case Kind::kForeignSession:
          f.session = session_ ^ 0x5a5a5a5aU;
          bytes = encode_frame(f);
          break;
      }
    }
    previous = std::move(honest);
    channel(from, to).write(bytes);
  }

  /// Reads the next frame on from -> at and checks session, tag, and step.
  Frame receive(Role at, Role from, MessageTag expected, std::uint32_t step, std::chrono::milliseconds timeout) {
    const std::size_t position = next_position(at);
    Frame f = read_frame(channel(from, at), timeout);
    record(at, false, from, f.tag, f.step, encode_frame(f));
    const std::string where = to_string(at) + " frame #" + std::to_string(position) + " from " + to_string(from);
    if (f.session != session_)
      throw ProtocolError(where + ": session id " + std::to_string(f.session) + " does not match " +
                          std::to_string(session_));
    if (f.tag != expected)
      throw ProtocolError(where + ": protocol-order violation, expected " + to_string(expected) + ", got " +
                          to_string(f.tag));
    if (f.step != step)
      throw ProtocolError(where + ": stale time step " + std::to_string(f.step) + " while at step " +
                          std::to_string(step));
    return f;
  }

  void abort_all() {
    for (auto& [k, ch] : links_) ch->abort();
  }
  void reset_all() {
    for (auto& [k, ch] : links_) ch->reset();
  }

  TimeStepTranscript take(std::uint32_t step) {
    std::lock_guard lock(mutex_);
    TimeStepTranscript t;
    t.step = step;
    for (Role r : kAllRoles) {
      auto& log = log_[r];
      std::move(log.begin(), log.end(), std::back_inserter(t.entries));
      log.clear();
    }
    return t;
  }

 private:
  ByteChannel& channel(Role from, Role to) {
    auto it = links_.find({from, to});
    if (it == links_.end()) throw ContractError("no link " + to_string(from) + " -> " + to_string(to));
    return *it->second;
  }

  std::size_t next_position(Role at) {
    std::lock_guard lock(mutex_);
    return received_[at]++;
  }

  void record(Role party, bool sent, Role peer, MessageTag tag, std::uint32_t step, std::vector<std::uint8_t> bytes) {
    std::lock_guard lock(mutex_);
    log_[party].push_back(
        {party, sent, peer, tag, step, std::move(bytes), Millis(Clock::now() - started_).count()});
  }

  std::uint32_t session_;
  std::optional<FrameFault> fault_;
  std::map<std::tuple<Role, Role, MessageTag>, std::vector<std::uint8_t>> last_sent_;
  std::map<std::pair<Role, Role>, std::unique_ptr<ByteChannel>> links_;
  std::mutex mutex_;
  std::uint32_t step_ = 0;
  Clock::time_point started_ = Clock::now();
  std::map<Role, std::vector<TranscriptEntry>> log_;
  std::map<Role, std::size_t> received_;
};

// ---------------------------------------------------------------------------
// Parties

class SensorParty {
 public:
  SensorParty(const SessionConfig& cfg, Network& net) : cfg_(cfg), net_(net), rng_(Prng(cfg.seed, "session").derive("sensor")) {}

  void send(std::uint32_t step, const Eigen::VectorXd& x) {
    auto [a, b] = sensor_step(x, cfg_, rng_);
    net_.send(Role::kSensor, Role::kAlpha, MessageTag::kStateShare, step, serialize_share(as_matrix(a)));
    net_.send(Role::kSensor, Role::kBeta, MessageTag::kStateShare, step, serialize_share(as_matrix(b)));
  }

 private:
  const SessionConfig& cfg_;
  Network& net_;
  Prng rng_;
};

/// Trusted dealer: one fresh triple per branch (v, w) and step.
class DealerParty {
 public:
  DealerParty(const SessionConfig& cfg, Network& net)
      : cfg_(cfg), net_(net), rng_(Prng(cfg.seed, "session").derive("dealer")) {}

  void deliver(std::uint32_t step) {
    const auto p = static_cast<Eigen::Index>(cfg_.p);
    const auto n = static_cast<Eigen::Index>(cfg_.n);
    DealtTriples dealt = deal_triples(p, n, 2, cfg_.ring(), rng_, next_id_);
    next_id_ += 2;
    net_.send(Role::kDealer, Role::kAlpha, MessageTag::kTripleShare, step, encode(dealt.party_one));
    net_.send(Role::kDealer, Role::kBeta, MessageTag::kTripleShare, step, encode(dealt.party_two));
  }

 private:
  static std::vector<std::uint8_t> encode(const std::vector<BeaverTripleMatrix>& triples) {
    std::vector<std::uint8_t> out;
    for (const auto& t : triples) {
      put_u64(out, t.id());
      for (const ShareMatrix* s : {&t.a(), &t.b(), &t.c()}) {
        const auto rec = serialize_share(*s);
        out.insert(out.end(), rec.begin(), rec.end());
      }
    }
    return out;
  }

  const SessionConfig& cfg_;
  Network& net_;
  Prng rng_;
  std::uint64_t next_id_ = 0;
};

/// One of the two clouds. Alpha (party one) garbles the v-neuron and
/// evaluates the w-neuron; beta does the opposite.
class CloudParty {
 public:
  CloudParty(const ProvisioningBundle& bundle, Network& net, std::uint32_t kdf_tweak)
      : cfg_(bundle.config),
        bundle_(bundle),
        net_(net),
        self_(cloud_role(bundle.party)),
        peer_(self_ == Role::kAlpha ? Role::kBeta : Role::kAlpha),
        rng_(Prng(bundle.config.seed, "session").derive(to_string(self_))),
        ot_(OtParams::by_name(bundle.config.ot_group)),
        circuit_(build_neuron_circuit(bundle.config.circuit_spec())),
        digest_(circuit_digest(circuit_)),
        kdf_tweak_(kdf_tweak) {}

  void set_timeout(std::chrono::milliseconds t) { timeout_ = t; }
  [[nodiscard]] double busy_ms() const { return busy_ms_; }
  [[nodiscard]] const std::vector<std::uint64_t>& step_triple_ids() const { return step_triple_ids_; }
  [[nodiscard]] const Digest& step_peer_garbled_hash() const { return step_peer_hash_; }

  /// Triples and state share in, both Beaver openings out.
  void receive_and_open(std::uint32_t step) {
    const auto t0 = Clock::now();
    step_triple_ids_.clear();
    Frame tf = recv(Role::kDealer, MessageTag::kTripleShare, step);
    std::span<const std::uint8_t> in(tf.payload);
    triple_v_ = take_triple(in);
    triple_w_ = take_triple(in);
    if (!in.empty()) throw ProtocolError(where("TRIPLE_SHARE") + ": trailing bytes");

    Frame sf = recv(Role::kSensor, MessageTag::kStateShare, step);
    std::span<const std::uint8_t> sin(sf.payload);
    const ShareMatrix xi = take_share(sin);
    if (!sin.empty() || xi.party != bundle_.party || xi.bit_width != cfg_.l ||
        static_cast<std::size_t>(xi.values.rows()) != cfg_.n || xi.values.cols() != 1)
      throw ProtocolError(where("STATE_SHARE") + ": malformed state share");

    const ShareMatrix rows = replicate_rows(as_vector(xi), static_cast<Eigen::Index>(cfg_.p));
    open_v_ = beaver_open(bundle_.K, rows, *triple_v_);
    open_w_ = beaver_open(bundle_.L, rows, *triple_w_);
    for (const BeaverOpening* o : {&open_v_, &open_w_}) {
      std::vector<std::uint8_t> payload;
      put_u64(payload, o->triple_id);
      for (const ShareMatrix* s : {&o->d, &o->e}) {
        const auto rec = serialize_share(*s);
        payload.insert(payload.end(), rec.begin(), rec.end());
      }
      net_.send(self_, peer_, MessageTag::kBeaverOpen, step, std::move(payload));
    }
    busy_ms_ = Millis(Clock::now() - t0).count();
  }

  /// Openings in; garbled circuit, own input labels, decode map, and an OT
  /// request for the peer's circuit out.
  void garble_and_request(std::uint32_t step) {
    const auto t0 = Clock::now();
    const BeaverOpening peer_v = take_opening(recv(peer_, MessageTag::kBeaverOpen, step));
    const BeaverOpening peer_w = take_opening(recv(peer_, MessageTag::kBeaverOpen, step));
    ShareVector v, w;
    try {
      v = preactivation_shares(combine_openings(open_v_, peer_v), *triple_v_, as_vector(bundle_.beta));
      w = preactivation_shares(combine_openings(open_w_, peer_w), *triple_w_, as_vector(bundle_.gamma));
    } catch (const ContractError& e) {
      throw ProtocolError(where("BEAVER_OPEN") + ": " + e.what());
    }
    const bool alpha = self_ == Role::kAlpha;
    const RingVector& garbled_share = alpha ? v.values : w.values;
    const RingVector& evaluated_share = alpha ? w.values : v.values;

    mask_ = cfg_.zero_masks ? 0 : rng_.bits(cfg_.l);
    GarbleOptions opts;
    opts.p = static_cast<std::uint32_t>(cfg_.p);
    opts.circuit_hash = digest_;
    opts.kdf_tweak = kdf_tweak_;
    own_ = garble(circuit_, rng_, opts);
    const auto own_labels = own_->encoding.encode_garbler(neuron_garbler_bits(garbled_share, mask_, cfg_.l));
    net_.send(self_, peer_, MessageTag::kGarbledCircuit, step, serialize_garbled(own_->garbled));
    net_.send(self_, peer_, MessageTag::kGarblerInputLabels, step, serialize_labels(own_labels));
    net_.send(self_, peer_, MessageTag::kOutputDecode, step, serialize_decode_map(own_->decode));

    auto [request, state] = ot_receive_phase1(ot_, neuron_evaluator_bits(evaluated_share, cfg_.l), rng_);
    ot_state_ = std::move(state);
    net_.send(self_, peer_, MessageTag::kOtRequest, step, serialize_ot_request(ot_, request));
    busy_ms_ += Millis(Clock::now() - t0).count();
  }

  /// The peer's garbled material in; OT response for the peer's request out.
  void serve_ot(std::uint32_t step) {
    const auto t0 = Clock::now();
    const Frame gc = recv(peer_, MessageTag::kGarbledCircuit, step);
    step_peer_hash_ = sha256(gc.payload);
    if (!seen_garbled_.insert(step_peer_hash_).second)
      throw ProtocolError(where("GARBLED_CIRCUIT") + ": garbled circuit replayed within the session");
    try {
      peer_garbled_ = deserialize_garbled(gc.payload);
    } catch (const ProtocolError& e) {
      throw ProtocolError(where("GARBLED_CIRCUIT") + ": " + e.what());
    }
    if (peer_garbled_.circuit_hash != digest_ || peer_garbled_.and_count != circuit_.and_count() ||
        peer_garbled_.l != cfg_.l || peer_garbled_.p != cfg_.p)
      throw ProtocolError(where("GARBLED_CIRCUIT") + ": garbled circuit does not match the agreed neuron circuit");
    peer_labels_ = deserialize_labels(recv(peer_, MessageTag::kGarblerInputLabels, step).payload);
    if (peer_labels_.size() != circuit_.garbler_inputs().size())
      throw ProtocolError(where("GARBLER_INPUT_LABELS") + ": wrong label count");
    peer_decode_ = deserialize_decode_map(recv(peer_, MessageTag::kOutputDecode, step).payload);
    if (peer_decode_.size() != circuit_.outputs().size())
      throw ProtocolError(where("OUTPUT_DECODE") + ": wrong output count");
    const OtRequest request = deserialize_ot_request(ot_, recv(peer_, MessageTag::kOtRequest, step).payload);
    const auto pairs = own_->encoding.evaluator_pairs();
    const OtResponse response = ot_send(ot_, request, pairs, rng_);
    net_.send(self_, peer_, MessageTag::kOtResponse, step, serialize_ot_response(ot_, response));
    busy_ms_ += Millis(Clock::now() - t0).count();
  }

  /// OT response in; evaluate, decode, re-mask, and send to the actuator.
  void evaluate_and_reveal(std::uint32_t step) {
    const auto t0 = Clock::now();
    const OtResponse response = deserialize_ot_response(ot_, recv(peer_, MessageTag::kOtResponse, step).payload);
    const std::vector<Label> mine = ot_receive_phase2(ot_, response, ot_state_);
    std::uint64_t value = 0;
    try {
      const auto active = evaluate_garbled(circuit_, peer_garbled_, peer_labels_, mine);
      value = pack_bits(decode_outputs(active, peer_decode_));
    } catch (const EvaluationError& e) {
      throw ProtocolError(to_string(self_) + " at step " + std::to_string(step) +
                          ": garbled evaluation failed: " + e.what());
    }
    std::vector<std::uint8_t> payload;
    append_le(payload, cfg_.ring().reduce(value + mask_), cfg_.l);
    net_.send(self_, Role::kActuator, MessageTag::kMaskedResult, step, std::move(payload));
    own_.reset();
    triple_v_.reset();
    triple_w_.reset();
    busy_ms_ += Millis(Clock::now() - t0).count();
  }

 private:
  Frame recv(Role from, MessageTag tag, std::uint32_t step) { return net_.receive(self_, from, tag, step, timeout_); }

  std::string where(const char* what) const { return to_string(self_) + " " + what; }

  std::optional<BeaverTripleMatrix> take_triple(std::span<const std::uint8_t>& in) {
    const std::uint64_t id = take_le(in, 8, "TRIPLE_SHARE");
    ShareMatrix a = take_share(in);
    ShareMatrix b = take_share(in);
    ShareMatrix c = take_share(in);
    const auto p = static_cast<Eigen::Index>(cfg_.p);
    const auto n = static_cast<Eigen::Index>(cfg_.n);
    for (const ShareMatrix* s : {&a, &b, &c})
      if (s->party != bundle_.party || s->bit_width != cfg_.l || s->values.rows() != p || s->values.cols() != n)
        throw ProtocolError(where("TRIPLE_SHARE") + ": triple share has the wrong shape");
    if (!seen_triples_.insert(id).second)
      throw ProtocolError(where("TRIPLE_SHARE") + ": triple " + std::to_string(id) + " reused within the session");
    step_triple_ids_.push_back(id);
    return BeaverTripleMatrix(id, std::move(a), std::move(b), std::move(c));
  }

  BeaverOpening take_opening(const Frame& f) {
    std::span<const std::uint8_t> in(f.payload);
    BeaverOpening o;
    o.triple_id = take_le(in, 8, "BEAVER_OPEN");
    o.d = take_share(in);
    o.e = take_share(in);
    if (!in.empty()) throw ProtocolError(where("BEAVER_OPEN") + ": trailing bytes");
    return o;
  }

  const SessionConfig& cfg_;
  const ProvisioningBundle& bundle_;
  Network& net_;
  Role self_;
  Role peer_;
  Prng rng_;
  OtParams ot_;
  Circuit circuit_;
  Digest digest_;
  std::uint32_t kdf_tweak_;
  std::chrono::milliseconds timeout_{0};

  std::set<std::uint64_t> seen_triples_;
  std::set<Digest> seen_garbled_;
  std::vector<std::uint64_t> step_triple_ids_;
  Digest step_peer_hash_{};
  double busy_ms_ = 0.0;

  std::optional<BeaverTripleMatrix> triple_v_;
  std::optional<BeaverTripleMatrix> triple_w_;
  BeaverOpening open_v_;
  BeaverOpening open_w_;
  std::uint64_t mask_ = 0;
  std::optional<GarbleResult> own_;
  OtReceiverState ot_state_;
  GarbledCircuit peer_garbled_;
  std::vector<Label> peer_labels_;
  DecodeMap peer_decode_;
};

class ActuatorParty {
 public:
  ActuatorParty(const SessionConfig& cfg, Network& net) : cfg_(cfg), net_(net) {}
  void set_timeout(std::chrono::milliseconds t) { timeout_ = t; }

  StepResult finish(std::uint32_t step) {
    StepResult r;
    r.delta_nu = read(Role::kBeta, step);
    r.delta_omega = read(Role::kAlpha, step);
    const Ring ring = cfg_.ring();
    r.difference = ring.mu(r.delta_nu - r.delta_omega);
    r.u = actuator_reconstruct(r.delta_nu, r.delta_omega, ring, cfg_.s3);
    return r;
  }

 private:
  std::uint64_t read(Role from, std::uint32_t step) {
    const Frame f = net_.receive(Role::kActuator, from, MessageTag::kMaskedResult, step, timeout_);
    std::span<const std::uint8_t> in(f.payload);
    try {
      const std::uint64_t v = read_le(in, cfg_.l);
      if (!in.empty()) throw ProtocolError("actuator MASKED_RESULT: trailing bytes");
      return v;
    } catch (const ContractError& e) {
      throw ProtocolError(std::string("actuator MASKED_RESULT: ") + e.what());
    }
  }

  const SessionConfig& cfg_;
  Network& net_;
  std::chrono::milliseconds timeout_{0};
};

// ---------------------------------------------------------------------------
// Session

Session::Session(const ProvisioningBundle& one, const ProvisioningBundle& two, SessionOptions options)
    : config_(one.config), options_(options) {
  if (one.party != Party::kOne || two.party != Party::kTwo)
    throw ContractError("session needs the party-one and party-two bundles, in that order");
  if (!(one.config == two.config)) throw ContractError("bundles carry different public parameters");
  config_.validate();
  if (options_.transport == TransportKind::kSocket) options_.concurrent = true;
  network_ = std::make_unique<Network>(options_.transport, config_.session_id, options_.fault);
  sensor_ = std::make_unique<SensorParty>(config_, *network_);
  dealer_ = std::make_unique<DealerParty>(config_, *network_);
  alpha_ = std::make_unique<CloudParty>(one, *network_, options_.alpha_kdf_tweak);
  beta_ = std::make_unique<CloudParty>(two, *network_, 0);
  actuator_ = std::make_unique<ActuatorParty>(config_, *network_);
  if (options_.concurrent) {
    const std::chrono::milliseconds t(config_.timeout_ms);
    alpha_->set_timeout(t);
    beta_->set_timeout(t);
    actuator_->set_timeout(t);
  }
}

Session::~Session() = default;

const std::vector<Digest>& Session::garbled_hashes() const { return garbled_hashes_; }
const std::vector<std::uint64_t>& Session::triple_ids() const { return triple_ids_; }

StepResult Session::step(const Eigen::VectorXd& x) {
  if (!config_.state_domain().contains(x)) throw DomainError("state outside the declared domain");
  const std::uint32_t t = step_++;
  network_->begin_step(t);
  dealer_->deliver(t);

  StepResult result;
  std::exception_ptr failure;
  const auto start = Clock::now();
  if (!options_.concurrent) {
    try {
      sensor_->send(t, x);
      alpha_->receive_and_open(t);
      beta_->receive_and_open(t);
      alpha_->garble_and_request(t);
      beta_->garble_and_request(t);
      alpha_->serve_ot(t);
      beta_->serve_ot(t);
      alpha_->evaluate_and_reveal(t);
      beta_->evaluate_and_reveal(t);
      result = actuator_->finish(t);
    } catch (...) {
      failure = std::current_exception();
    }
  } else {
    std::mutex m;
    auto guard = [&](auto&& body) {
      return [&, body] {
        try {
          body();
        } catch (...) {
          {
            std::lock_guard lock(m);
            if (!failure) failure = std::current_exception();
          }
          network_->abort_all();
        }
      };
    };
    std::vector<std::thread> threads;
    threads.emplace_back(guard([&] { sensor_->send(t, x); }));
    for (CloudParty* c : {alpha_.get(), beta_.get()}) {
      threads.emplace_back(guard([&, c] {
        c->receive_and_open(t);
        c->garble_and_request(t);
        c->serve_ot(t);
        c->evaluate_and_reveal(t);
      }));
    }
    threads.emplace_back(guard([&] { result = actuator_->finish(t); }));
    for (auto& th : threads) th.join();
  }
  const double online_ms = Millis(Clock::now() - start).count();

  TimeStepTranscript transcript = network_->take(t);
  transcript.online_ms = online_ms;
  transcript.party_ms[Role::kAlpha] = alpha_->busy_ms();
  transcript.party_ms[Role::kBeta] = beta_->busy_ms();

  if (failure) {
    network_->reset_all();
    last_transcript_ = transcript;
    try {
      std::rethrow_exception(failure);
    } catch (const TimeoutError& e) {
      StepResult held;
      held.u = held_u_;
      held.held = true;
      held.error = e.what();
      held.transcript = std::move(transcript);
      held.online_ms = online_ms;
      return held;
    }
  }

  garbled_hashes_.push_back(alpha_->step_peer_garbled_hash());
  garbled_hashes_.push_back(beta_->step_peer_garbled_hash());
  for (std::uint64_t id : alpha_->step_triple_ids()) triple_ids_.push_back(id);
  held_u_ = result.u;
  result.online_ms = online_ms;
  result.transcript = std::move(transcript);
  last_transcript_ = result.transcript;
  return result;
}

}  // namespace secmax
