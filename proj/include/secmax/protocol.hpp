#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include <Eigen/Core>

#include "secmax/circuit.hpp"
#include "secmax/garble.hpp"
#include "secmax/ot.hpp"
#include "secmax/quantize.hpp"
#include "secmax/shares.hpp"
#include "secmax/transport.hpp"

namespace secmax {

enum class Role : std::uint8_t { kSensor, kDealer, kAlpha, kBeta, kActuator };

inline constexpr std::array<Role, 5> kAllRoles{Role::kSensor, Role::kDealer, Role::kAlpha, Role::kBeta,
                                               Role::kActuator};

[[nodiscard]] std::string to_string(Role role);

/// Public parameters shared by every party of a session.
struct SessionConfig {
  unsigned l = 16;
  std::size_t p = 8;
  std::size_t n = 2;
  double s1 = 20.0;
  double s2 = 100.0;
  double s3 = 2000.0;
  double eta = 0.0;
  SignMode mode = SignMode::kSafeSign;
  Eigen::VectorXd domain;  ///< state box half widths
  std::string ot_group = "ristretto255";
  std::uint64_t seed = 0;
  std::uint32_t session_id = 0;
  std::uint32_t timeout_ms = 5000;
  bool zero_masks = false;  ///< test mode: r1 = r2 = 0
  std::map<std::string, std::string> identities;
  std::map<std::string, std::string> endpoints;

  [[nodiscard]] Ring ring() const { return Ring(l); }
  [[nodiscard]] QuantizationConfig quantization() const;
  [[nodiscard]] StateDomain state_domain() const { return {domain}; }
  [[nodiscard]] NeuronCircuitSpec circuit_spec() const { return {p, l, mode}; }
  void validate() const;

  [[nodiscard]] std::string to_json() const;
  static SessionConfig from_json(const std::string& text);
  friend bool operator==(const SessionConfig&, const SessionConfig&) = default;
};

/// Builds a session config from a quantization config. s3 = s1 * s2.
SessionConfig make_session_config(const QuantizationConfig& q, std::size_t p, const StateDomain& dom, SignMode mode,
                                  std::uint64_t seed);

/// What one cloud receives in the offline phase.
struct ProvisioningBundle {
  SessionConfig config;
  Party party = Party::kOne;
  ShareMatrix K;
  ShareMatrix L;
  ShareMatrix beta;   ///< p x 1
  ShareMatrix gamma;  ///< p x 1
};

/// Bundle file: magic "SMXB", u16 version, u8 party, u32 config length,
/// config JSON, then the K, L, beta, gamma share records.
std::vector<std::uint8_t> serialize_bundle(const ProvisioningBundle& b);
ProvisioningBundle deserialize_bundle(std::span<const std::uint8_t> in);
void write_bundle(const std::filesystem::path& path, const ProvisioningBundle& b);
ProvisioningBundle read_bundle(const std::filesystem::path& path);

/// Shares the quantized network for the two clouds. Throws OverflowError when
/// certify_no_overflow fails, or when paper_exact mode is requested and the
/// pairwise differences are not certified.
std::pair<ProvisioningBundle, ProvisioningBundle> offline_setup(const QuantizedNetwork& netq,
                                                                const SessionConfig& cfg);

/// Auto mode (nullopt) picks paper_exact when every pairwise difference is
/// certified and safe_sign otherwise. An explicit paper_exact request without
/// that certificate throws OverflowError.
SignMode resolve_sign_mode(std::optional<SignMode> requested, const OverflowCertificate& cert);

/// Everything the offline phase derives from a real network.
struct Provisioning {
  QuantizationConfig quantization;
  QuantizedNetwork netq;
  OverflowCertificate certificate;
  double s3_max = 0.0;
  SessionConfig config;
  ProvisioningBundle one;
  ProvisioningBundle two;
};

/// Quantizes, certifies, picks the sign mode, and shares the network.
/// Throws OverflowError when s1 * s2 exceeds s3_max, when Delta exceeds the
/// cap of 1 used for s3_max, or when certification fails.
Provisioning provision(const RealNetwork& net, const StateDomain& dom, double s1, double s2, unsigned l,
                       std::optional<SignMode> mode, std::uint64_t seed, const std::string& ot_group = "ristretto255");

/// Recombines both bundles' shares into the network mod q (read through mu).
QuantizedNetwork recombine_bundles(const ProvisioningBundle& one, const ProvisioningBundle& two);

/// Shares of xi = round(s1 x), one per cloud. Throws DomainError outside the box.
std::pair<ShareVector, ShareVector> sensor_step(const Eigen::VectorXd& x, const SessionConfig& cfg, Prng& rng);

/// u = mu((dv - dw) mod q) / s3.
double actuator_reconstruct(std::uint64_t dv, std::uint64_t dw, const Ring& ring, double s3);

/// mu((max(K xi + beta) - max(L xi + gamma)) mod q), computed in plain integers.
std::int64_t plaintext_difference(const QuantizedNetwork& netq, const IntVector& xi, const Ring& ring);
/// The integer pipeline's control input for a real state.
double plaintext_control(const QuantizedNetwork& netq, const SessionConfig& cfg, const Eigen::VectorXd& x);

struct TranscriptEntry {
  Role party = Role::kSensor;
  bool sent = true;
  Role peer = Role::kSensor;
  MessageTag tag = MessageTag::kStateShare;
  std::uint32_t step = 0;
  std::vector<std::uint8_t> frame;  ///< encoded bytes
  double at_ms = 0.0;               ///< since the step started; not part of dump()
};

/// Every frame one time step moved, per party in send/receive order.
struct TimeStepTranscript {
  std::uint32_t step = 0;
  std::vector<TranscriptEntry> entries;
  std::map<Role, double> party_ms;  ///< busy time per party
  double online_ms = 0.0;

  /// Frames sent with `tag`.
  [[nodiscard]] std::size_t count_sent(MessageTag tag) const;
  /// One line per frame: step, party, send|recv, peer, tag, hex frame bytes.
  /// Identical seeds and states give identical dumps.
  [[nodiscard]] std::string dump() const;
};

/// Frames sent per step, per tag, for any (p, l).
[[nodiscard]] std::map<MessageTag, std::size_t> expected_message_budget();

enum class TransportKind { kMemory, kSocket };

[[nodiscard]] std::string to_string(TransportKind t);
[[nodiscard]] TransportKind parse_transport(const std::string& text);

/// Tampers with one frame in transit, to exercise the receivers' checks.
struct FrameFault {
  enum class Kind {
    kDrop,            ///< never delivered; exercises the timeout policy
    kReplayPrevious,  ///< replaced by the same link's frame of step - 1
    kWrongTag,        ///< delivered with a different message tag
    kForeignSession,  ///< delivered with a different session id
  };
  Role from;
  Role to;
  MessageTag tag;
  std::uint32_t step;
  Kind kind = Kind::kDrop;
};

struct SessionOptions {
  TransportKind transport = TransportKind::kMemory;
  /// Runs each party on its own thread. Always on for sockets.
  bool concurrent = false;
  std::optional<FrameFault> fault;
  /// Garbling fault injection for cloud alpha; 0 in real runs.
  std::uint32_t alpha_kdf_tweak = 0;
};

struct StepResult {
  double u = 0.0;
  std::int64_t difference = 0;  ///< mu(dv - dw)
  std::uint64_t delta_nu = 0;
  std::uint64_t delta_omega = 0;
  bool held = false;  ///< the step was aborted and u is the previous input
  std::string error;
  TimeStepTranscript transcript;
  double online_ms = 0.0;  ///< wall time from sensor to actuator, dealer excluded
};

class Network;
class SensorParty;
class DealerParty;
class CloudParty;
class ActuatorParty;

/// A running session: sensor, dealer, both clouds, and the actuator wired
/// together over one transport.
class Session {
 public:
  Session(const ProvisioningBundle& one, const ProvisioningBundle& two, SessionOptions options = {});
  ~Session();
  Session(const Session&) = delete;
  Session& operator=(const Session&) = delete;

  /// One online time step. Protocol errors other than timeouts propagate with
  /// the partial transcript in last_transcript().
  StepResult step(const Eigen::VectorXd& x);

  [[nodiscard]] const SessionConfig& config() const { return config_; }
  [[nodiscard]] std::uint32_t next_step() const { return step_; }
  [[nodiscard]] const TimeStepTranscript& last_transcript() const { return last_transcript_; }
  /// Every garbled-circuit payload hash and triple id seen so far.
  [[nodiscard]] const std::vector<Digest>& garbled_hashes() const;
  [[nodiscard]] const std::vector<std::uint64_t>& triple_ids() const;

 private:
  SessionConfig config_;
  SessionOptions options_;
  std::unique_ptr<Network> network_;
  std::unique_ptr<SensorParty> sensor_;
  std::unique_ptr<DealerParty> dealer_;
  std::unique_ptr<CloudParty> alpha_;
  std::unique_ptr<CloudParty> beta_;
  std::unique_ptr<ActuatorParty> actuator_;
  std::uint32_t step_ = 0;
  double held_u_ = 0.0;
  TimeStepTranscript last_transcript_;
  std::vector<Digest> garbled_hashes_;
  std::vector<std::uint64_t> triple_ids_;
};

}  // namespace secmax
