#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "secmax/errors.hpp"
#include "secmax/ring.hpp"

namespace secmax {

/// Two max-out neurons pooling p affine preactivations each:
/// g(x) = max{K x + b} - max{L x + c}.
///
/// Instantiated with `double` for the trained controller and with
/// `std::int64_t` for its quantized counterpart.
template <typename Scalar>
struct MaxoutNetwork {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Matrix K;
  Matrix L;
  Vector b;
  Vector c;

  [[nodiscard]] Eigen::Index p() const { return K.rows(); }
  [[nodiscard]] Eigen::Index n() const { return K.cols(); }

  void validate() const {
    if (K.rows() < 1 || K.cols() < 1) throw ContractError("network needs p >= 1 and n >= 1");
    if (L.rows() != K.rows() || L.cols() != K.cols()) throw ContractError("K and L must have the same shape");
    if (b.size() != K.rows() || c.size() != K.rows()) throw ContractError("b and c must have length p");
  }
};

using RealNetwork = MaxoutNetwork<double>;
using QuantizedNetwork = MaxoutNetwork<std::int64_t>;

template <typename Scalar, typename Derived>
Scalar maxout_eval(const MaxoutNetwork<Scalar>& net, const Eigen::MatrixBase<Derived>& x) {
  return (net.K * x + net.b).maxCoeff() - (net.L * x + net.c).maxCoeff();
}

/// Symmetric state box |x_i| <= half_widths_i.
struct StateDomain {
  Eigen::VectorXd half_widths;

  void validate() const;
  template <typename Derived>
  [[nodiscard]] bool contains(const Eigen::MatrixBase<Derived>& x) const {
    return x.size() == half_widths.size() && (x.cwiseAbs().array() <= half_widths.array()).all();
  }
};

/// The benchmark constraint box {|x1| <= 25, |x2| <= 5}.
StateDomain double_integrator_box();

struct QuantizationConfig {
  double s1 = 1.0;  ///< state scale
  double s2 = 1.0;  ///< weight scale
  double s3 = 1.0;  ///< offset scale, s1 * s2
  unsigned l = 16;
  double eta = 0.0;
  Eigen::Index n = 1;

  [[nodiscard]] Ring ring() const { return Ring(l); }
  void validate() const;
};

/// Builds a config with s3 = s1 * s2 and the smallest eta for which
/// ||x||_inf <= eta / (2 s1) on the box and ||K||_max, ||L||_max <= eta / (2 s2).
QuantizationConfig make_quantization_config(double s1, double s2, unsigned l, const RealNetwork& net,
                                            const StateDomain& dom);

/// Round to nearest, ties away from zero.
std::int64_t round_nearest(double v);

/// K -> round(s2 K), L -> round(s2 L), b -> round(s3 b), c -> round(s3 c).
/// Throws OverflowError if any result leaves Z_q.
QuantizedNetwork quantize_network(const RealNetwork& net, const QuantizationConfig& cfg);

/// xi = round(s1 x). Throws DomainError outside `dom`.
IntVector quantize_state(const Eigen::VectorXd& x, const QuantizationConfig& cfg, const StateDomain& dom);

/// Upper bound on |g(x) - (max v - max w) / s3|: (n eta + n/2 + 1) / s3.
double error_bound(const QuantizationConfig& cfg);
/// Per-neuron half of error_bound, the Delta used when sizing s3.
double half_error_bound(const QuantizationConfig& cfg);

/// max over the box and both neurons of ||K x + b||_inf, ||L x + c||_inf (closed form).
double box_preactivation_bound(const RealNetwork& net, const StateDomain& dom);

/// Largest admissible s3: 2^(l-1) / (M + delta_cap).
double s3_max(const RealNetwork& net, const StateDomain& dom, unsigned l, double delta_cap = 1.0);

enum class Neuron { kV, kW };

struct OverflowViolation {
  enum class Kind { kPreactivation, kPairwiseDifference };
  Kind kind = Kind::kPreactivation;
  Neuron neuron = Neuron::kV;
  Eigen::Index row = 0;
  Eigen::Index other_row = -1;  ///< second row for pairwise differences
  double attained = 0.0;        ///< worst-case magnitude over the box
  std::int64_t limit = 0;
};

/// Result of checking that every quantized preactivation (and every pairwise
/// difference within a neuron) stays inside Z_q over the whole state box.
struct OverflowCertificate {
  bool preactivations_fit = true;
  bool differences_fit = true;
  double max_preactivation = 0.0;
  double max_difference = 0.0;
  double max_output_difference = 0.0;  ///< bound on |max v - max w|
  std::int64_t limit = 0;              ///< 2^(l-1) - 1
  std::vector<OverflowViolation> violations;

  [[nodiscard]] bool ok() const { return preactivations_fit; }
  [[nodiscard]] double margin() const { return static_cast<double>(limit) - max_preactivation; }
  [[nodiscard]] std::string report() const;
};

OverflowCertificate certify_no_overflow(const QuantizedNetwork& netq, const StateDomain& dom,
                                        const QuantizationConfig& cfg);

}  // namespace secmax
