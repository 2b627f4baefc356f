#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "secmax/garble.hpp"
#include "secmax/prng.hpp"

namespace secmax {

/// A prime-order group with fixed-width element encodings.
class OtGroup {
 public:
  using Element = std::vector<std::uint8_t>;
  using Scalar = std::vector<std::uint8_t>;

  virtual ~OtGroup() = default;

  [[nodiscard]] virtual std::string name() const = 0;
  [[nodiscard]] virtual std::size_t element_bytes() const = 0;
  /// False for groups that exist only to make exhaustive tests fast.
  [[nodiscard]] virtual bool is_secure() const = 0;

  [[nodiscard]] virtual Scalar random_scalar(Prng& rng) const = 0;
  [[nodiscard]] virtual Element base_mul(const Scalar& s) const = 0;
  /// s * X; throws ProtocolError for an invalid element.
  [[nodiscard]] virtual Element mul(const Element& x, const Scalar& s) const = 0;
  /// X - Y in additive notation; throws ProtocolError for invalid elements.
  [[nodiscard]] virtual Element sub(const Element& x, const Element& y) const = 0;
  [[nodiscard]] virtual bool is_valid(const Element& x) const = 0;
  /// An element nobody knows the discrete logarithm of.
  [[nodiscard]] virtual Element hash_to_element(std::string_view domain) const = 0;
};

/// ristretto255 (prime order ~2^252), 32-byte canonical encodings.
std::shared_ptr<const OtGroup> ristretto255_group();
/// Quadratic residues mod the safe prime 4611686018427377339 (order ~2^61),
/// 8-byte big-endian encodings. INSECURE: for tests only.
std::shared_ptr<const OtGroup> insecure_test_group();

/// Public OT parameters: the group and the setup element C.
struct OtParams {
  std::shared_ptr<const OtGroup> group;
  OtGroup::Element setup;

  static OtParams standard();
  static OtParams insecure_test();
  static OtParams by_name(const std::string& name);
};

/// One public key PK0 per choice bit; PK1 = C - PK0 is implied.
struct OtRequest {
  std::vector<OtGroup::Element> keys;
};

struct OtReceiverState {
  std::vector<bool> choices;
  std::vector<OtGroup::Scalar> secrets;
};

struct OtSlot {
  std::array<std::uint8_t, 16> wrapped{};
  std::array<std::uint8_t, 16> tag{};
};

struct OtResponse {
  std::vector<OtGroup::Element> ephemeral;     ///< r * G per bit
  std::vector<std::array<OtSlot, 2>> slots;  ///< m0, m1 wrapped per bit
};

std::pair<OtRequest, OtReceiverState> ot_receive_phase1(const OtParams& params, const std::vector<bool>& choices,
                                                        Prng& rng);

OtResponse ot_send(const OtParams& params, const OtRequest& request, std::span<const std::array<Label, 2>> messages,
                   Prng& rng);

/// Exactly one label per choice bit; throws ProtocolError on integrity failure.
std::vector<Label> ot_receive_phase2(const OtParams& params, const OtResponse& response,
                                     const OtReceiverState& state);

/// Tries to unwrap `slot` of bit `index` with the receiver's secret; empty if
/// the tag does not verify.
std::optional<Label> ot_try_unwrap(const OtParams& params, const OtResponse& response, const OtReceiverState& state,
                                   std::size_t index, int slot);

std::vector<std::uint8_t> serialize_ot_request(const OtParams& params, const OtRequest& r);
OtRequest deserialize_ot_request(const OtParams& params, std::span<const std::uint8_t> in);
std::vector<std::uint8_t> serialize_ot_response(const OtParams& params, const OtResponse& r);
OtResponse deserialize_ot_response(const OtParams& params, std::span<const std::uint8_t> in);

}  // namespace secmax
