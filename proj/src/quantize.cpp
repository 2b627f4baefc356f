#include "secmax/quantize.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace secmax {

namespace {

using Wide = __int128;

Wide wide_abs(Wide v) { return v < 0 ? -v : v; }

Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic> scale_round(const Eigen::MatrixXd& m, double s,
                                                                        const Ring& ring, const char* what) {
  Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic> out(m.rows(), m.cols());
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      const double scaled = s * m(i, j);
      if (!std::isfinite(scaled) || std::fabs(scaled) >= 0x1p62)
        throw OverflowError(std::string(what) + " entry is not representable");
      const std::int64_t q = round_nearest(scaled);
      if (!ring.contains_signed(q)) {
        std::ostringstream msg;
        msg << what << "(" << i << "," << j << ") scaled to " << q << " which lies outside Z_q for l="
            << ring.bit_width();
        throw OverflowError(msg.str());
      }
      out(i, j) = q;
    }
  }
  return out;
}

}  // namespace

void StateDomain::validate() const {
  if (half_widths.size() < 1) throw ContractError("state domain needs at least one dimension");
  if ((half_widths.array() <= 0.0).any() || !half_widths.allFinite())
    throw ContractError("state domain half-widths must be positive and finite");
}

StateDomain double_integrator_box() { return StateDomain{Eigen::Vector2d(25.0, 5.0)}; }

void QuantizationConfig::validate() const {
  if (!(s1 > 0.0) || !(s2 > 0.0) || !(s3 > 0.0)) throw ContractError("scaling factors must be positive");
  if (s3 != s1 * s2) throw ContractError("s3 must equal s1 * s2");
  if (l < 2 || l > kMaxBitWidth) throw ContractError("bit width must lie in [2, 64]");
  if (!(eta >= 0.0)) throw ContractError("eta must be non-negative");
  if (n < 1) throw ContractError("state dimension must be positive");
}

QuantizationConfig make_quantization_config(double s1, double s2, unsigned l, const RealNetwork& net,
                                            const StateDomain& dom) {
  net.validate();
  dom.validate();
  if (dom.half_widths.size() != net.n()) throw ContractError("state domain dimension differs from network n");
  QuantizationConfig cfg;
  cfg.s1 = s1;
  cfg.s2 = s2;
  cfg.s3 = s1 * s2;
  cfg.l = l;
  cfg.n = net.n();
  const double weight_max = std::max(net.K.cwiseAbs().maxCoeff(), net.L.cwiseAbs().maxCoeff());
  cfg.eta = std::max(2.0 * s1 * dom.half_widths.maxCoeff(), 2.0 * s2 * weight_max);
  cfg.validate();
  return cfg;
}

std::int64_t round_nearest(double v) { return static_cast<std::int64_t>(std::round(v)); }

QuantizedNetwork quantize_network(const RealNetwork& net, const QuantizationConfig& cfg) {
  net.validate();
  cfg.validate();
  const Ring ring = cfg.ring();
  QuantizedNetwork q;
  q.K = scale_round(net.K, cfg.s2, ring, "K");
  q.L = scale_round(net.L, cfg.s2, ring, "L");
  q.b = scale_round(net.b, cfg.s3, ring, "b");
  q.c = scale_round(net.c, cfg.s3, ring, "c");
  return q;
}

IntVector quantize_state(const Eigen::VectorXd& x, const QuantizationConfig& cfg, const StateDomain& dom) {
  if (x.size() != dom.half_widths.size()) throw ContractError("state dimension differs from domain");
  if (!dom.contains(x)) throw DomainError("state outside the certified domain");
  IntVector xi(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) xi(i) = round_nearest(cfg.s1 * x(i));
  return xi;
}

double error_bound(const QuantizationConfig& cfg) {
  const double n = static_cast<double>(cfg.n);
  return (n * cfg.eta + n / 2.0 + 1.0) / cfg.s3;
}

double half_error_bound(const QuantizationConfig& cfg) { return error_bound(cfg) / 2.0; }

double box_preactivation_bound(const RealNetwork& net, const StateDomain& dom) {
  net.validate();
  dom.validate();
  if (dom.half_widths.size() != net.n()) throw ContractError("state domain dimension differs from network n");
  const Eigen::VectorXd kv = net.K.cwiseAbs() * dom.half_widths + net.b.cwiseAbs();
  const Eigen::VectorXd lw = net.L.cwiseAbs() * dom.half_widths + net.c.cwiseAbs();
  return std::max(kv.maxCoeff(), lw.maxCoeff());
}

double s3_max(const RealNetwork& net, const StateDomain& dom, unsigned l, double delta_cap) {
  if (!(delta_cap > 0.0)) throw ContractError("delta cap must be positive");
  if (l < 2 || l > kMaxBitWidth) throw ContractError("bit width must lie in [2, 64]");
  return std::ldexp(1.0, static_cast<int>(l) - 1) / (box_preactivation_bound(net, dom) + delta_cap);
}

OverflowCertificate certify_no_overflow(const QuantizedNetwork& netq, const StateDomain& dom,
                                        const QuantizationConfig& cfg) {
  netq.validate();
  dom.validate();
  cfg.validate();
  if (dom.half_widths.size() != netq.n()) throw ContractError("state domain dimension differs from network n");

  const Ring ring = cfg.ring();
  OverflowCertificate cert;
  cert.limit = ring.signed_max();
  const Wide limit = cert.limit;

  // Quantized states satisfy |xi_j| <= round(s1 r_j) because rounding is monotone.
  std::vector<Wide> radius(static_cast<std::size_t>(netq.n()));
  for (Eigen::Index j = 0; j < netq.n(); ++j) radius[j] = round_nearest(cfg.s1 * dom.half_widths(j));

  auto row_bound = [&](const auto& W, const auto& off, Eigen::Index i) {
    Wide acc = wide_abs(off(i));
    for (Eigen::Index j = 0; j < W.cols(); ++j) acc += wide_abs(W(i, j)) * radius[j];
    return acc;
  };
  auto diff_bound = [&](const auto& W, const auto& off, Eigen::Index i, Eigen::Index k) {
    Wide acc = wide_abs(static_cast<Wide>(off(i)) - off(k));
    for (Eigen::Index j = 0; j < W.cols(); ++j) acc += wide_abs(static_cast<Wide>(W(i, j)) - W(k, j)) * radius[j];
    return acc;
  };

  Wide neuron_max[2] = {0, 0};
  auto check = [&](Neuron which, const auto& W, const auto& off) {
    for (Eigen::Index i = 0; i < W.rows(); ++i) {
      const Wide m = row_bound(W, off, i);
      neuron_max[which == Neuron::kV ? 0 : 1] = std::max(neuron_max[which == Neuron::kV ? 0 : 1], m);
      cert.max_preactivation = std::max(cert.max_preactivation, static_cast<double>(m));
      if (m > limit) {
        cert.preactivations_fit = false;
        cert.violations.push_back({OverflowViolation::Kind::kPreactivation, which, i, -1, static_cast<double>(m),
                                   cert.limit});
      }
      for (Eigen::Index k = i + 1; k < W.rows(); ++k) {
        const Wide d = diff_bound(W, off, i, k);
        cert.max_difference = std::max(cert.max_difference, static_cast<double>(d));
        if (d > limit) {
          cert.differences_fit = false;
          cert.violations.push_back({OverflowViolation::Kind::kPairwiseDifference, which, i, k,
                                     static_cast<double>(d), cert.limit});
        }
      }
    }
  };
  check(Neuron::kV, netq.K, netq.b);
  check(Neuron::kW, netq.L, netq.c);
  cert.max_output_difference = static_cast<double>(neuron_max[0] + neuron_max[1]);
  return cert;
}

std::string OverflowCertificate::report() const {
  std::ostringstream out;
  out << "preactivations_fit=" << (preactivations_fit ? "yes" : "no")
      << " max_preactivation=" << static_cast<long long>(max_preactivation) << " limit=" << limit
      << " margin=" << static_cast<long long>(margin()) << "\n";
  out << "pairwise_differences_fit=" << (differences_fit ? "yes" : "no")
      << " max_difference=" << static_cast<long long>(max_difference) << "\n";
  for (const auto& v : violations) {
    out << "  violation: " << (v.kind == OverflowViolation::Kind::kPreactivation ? "preactivation" : "difference")
        << " neuron=" << (v.neuron == Neuron::kV ? "v" : "w") << " row=" << v.row;
    if (v.other_row >= 0) out << " vs row=" << v.other_row;
    out << " bound=" << static_cast<long long>(v.attained) << " > " << v.limit << "\n";
  }
  return out.str();
}

}  // namespace secmax
