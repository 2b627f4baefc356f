#include <doctest.h>

#include <cmath>

#include "secmax/plant.hpp"
#include "secmax/quantize.hpp"

using namespace secmax;

namespace {

QuantizationConfig benchmark_config(unsigned l = 16) {
  return make_quantization_config(20, 100, l, fixture_paper_p8().net, double_integrator_box());
}

/// Brute-force max of |K x + b| over the box corners (exact for a box).
double corner_bound(const RealNetwork& net, const StateDomain& dom) {
  double best = 0.0;
  const auto n = dom.half_widths.size();
  for (unsigned mask = 0; mask < (1U << n); ++mask) {
    Eigen::VectorXd x(n);
    for (Eigen::Index j = 0; j < n; ++j) x(j) = ((mask >> j) & 1U) ? dom.half_widths(j) : -dom.half_widths(j);
    best = std::max(best, (net.K * x + net.b).cwiseAbs().maxCoeff());
    best = std::max(best, (net.L * x + net.c).cwiseAbs().maxCoeff());
  }
  return best;
}

}  // namespace

TEST_SUITE("quantize") {

TEST_CASE("rounding is half away from zero") {
  CHECK(round_nearest(2.5) == 3);
  CHECK(round_nearest(-2.5) == -3);
  CHECK(round_nearest(0.49999) == 0);
  CHECK(round_nearest(-0.5) == -1);
}

TEST_CASE("quantize_network on the benchmark weights") {
  const QuantizationConfig cfg = benchmark_config();
  CHECK(cfg.s3 == 2000.0);
  CHECK(cfg.eta == 1000.0);
  const QuantizedNetwork q = quantize_network(fixture_paper_p8().net, cfg);
  CHECK(q.K(0, 0) == -7);
  CHECK(q.b(1) == 9200);
  CHECK(q.L(0, 1) == 68);
  CHECK(q.c(3) == -9220);

  RealNetwork zero{Eigen::MatrixXd::Zero(3, 2), Eigen::MatrixXd::Zero(3, 2), Eigen::VectorXd::Zero(3),
                   Eigen::VectorXd::Zero(3)};
  const QuantizedNetwork z = quantize_network(zero, cfg);
  CHECK(z.K.isZero());
  CHECK(z.c.isZero());
}

TEST_CASE("quantize_network overflow") {
  RealNetwork net{Eigen::MatrixXd::Constant(1, 1, 400.0), Eigen::MatrixXd::Zero(1, 1), Eigen::VectorXd::Zero(1),
                  Eigen::VectorXd::Zero(1)};
  const QuantizationConfig cfg = make_quantization_config(1, 100, 16, net, StateDomain{Eigen::VectorXd::Ones(1)});
  CHECK_THROWS_AS(quantize_network(net, cfg), OverflowError);
}

TEST_CASE("quantize_state examples and domain errors") {
  const QuantizationConfig cfg = benchmark_config();
  const StateDomain dom = double_integrator_box();
  CHECK(quantize_state(Eigen::Vector2d(0, 0), cfg, dom) == IntVector::Zero(2));
  CHECK(quantize_state(Eigen::Vector2d(1.26, -0.07), cfg, dom) == (IntVector(2) << 25, -1).finished());
  CHECK(quantize_state(Eigen::Vector2d(25, 5), cfg, dom) == (IntVector(2) << 500, 100).finished());
  CHECK_THROWS_AS(quantize_state(Eigen::Vector2d(25.01, 0), cfg, dom), DomainError);
  CHECK_THROWS_AS(quantize_state(Eigen::Vector2d(0, -5.5), cfg, dom), DomainError);
}

TEST_CASE("error bound formula") {
  QuantizationConfig cfg;
  cfg.n = 2;
  cfg.eta = 0;
  CHECK(error_bound(cfg) == doctest::Approx(2.0));
  const QuantizationConfig bench = benchmark_config();
  CHECK(error_bound(bench) == doctest::Approx((2 * 1000.0 + 1 + 1) / 2000.0));
  CHECK(half_error_bound(bench) == doctest::Approx(error_bound(bench) / 2));
  QuantizationConfig doubled = bench;
  doubled.s2 *= 2;
  doubled.s3 *= 2;
  CHECK(error_bound(doubled) == doctest::Approx(error_bound(bench) / 2));
}

TEST_CASE("s3_max closed form") {
  RealNetwork net{Eigen::MatrixXd(1, 2), Eigen::MatrixXd(1, 2), Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(1)};
  net.K << 1, 0;
  net.L = net.K;
  CHECK(s3_max(net, StateDomain{Eigen::Vector2d(1, 1)}, 4, 1.0) == doctest::Approx(4.0));

  const RealNetwork p8 = fixture_paper_p8().net;
  const StateDomain dom = double_integrator_box();
  CHECK(box_preactivation_bound(p8, dom) == doctest::Approx(corner_bound(p8, dom)));
  const double s16 = s3_max(p8, dom, 16);
  CHECK(s16 <= 2.23e3 * 1.05);
  CHECK(s16 >= 2.23e3 / 3);
  CHECK(s3_max(p8, dom, 32) / s16 == 65536.0);
  CHECK(s3_max(p8, dom, 16, 0.5) > s16);
  CHECK(s3_max(p8, dom, 17) > s16);
  CHECK_THROWS_AS(s3_max(p8, dom, 16, 0.0), ContractError);
}

TEST_CASE("certify_no_overflow") {
  const StateDomain dom = double_integrator_box();
  const QuantizationConfig cfg = benchmark_config();
  const QuantizedNetwork q = quantize_network(fixture_paper_p8().net, cfg);
  const OverflowCertificate cert = certify_no_overflow(q, dom, cfg);
  CHECK(cert.ok());
  CHECK(cert.margin() > 0);
  CHECK(cert.max_preactivation == 28320.0);
  CHECK_FALSE(cert.differences_fit);
  CHECK(cert.max_difference == 46220.0);

  // s3 above s3_max: s1 = 40 doubles every preactivation bound.
  const QuantizationConfig big = make_quantization_config(40, 100, 16, fixture_paper_p8().net, dom);
  CHECK(big.s3 > s3_max(fixture_paper_p8().net, dom, 16));
  const OverflowCertificate bad = certify_no_overflow(quantize_network(fixture_paper_p8().net, big), dom, big);
  CHECK_FALSE(bad.ok());
  REQUIRE_FALSE(bad.violations.empty());
  CHECK(bad.violations.front().attained > bad.limit);
  CHECK(bad.report().find("violation: preactivation") != std::string::npos);

  QuantizedNetwork zero{IntMatrix::Zero(2, 2), IntMatrix::Zero(2, 2), IntVector::Zero(2), IntVector::Zero(2)};
  const OverflowCertificate zc = certify_no_overflow(zero, dom, cfg);
  CHECK(zc.ok());
  CHECK(zc.differences_fit);
}

TEST_CASE("certificate bounds dominate the quantized corners") {
  const StateDomain dom = double_integrator_box();
  const QuantizationConfig cfg = benchmark_config();
  const QuantizedNetwork q = quantize_network(fixture_paper_p8().net, cfg);
  const OverflowCertificate cert = certify_no_overflow(q, dom, cfg);
  std::int64_t attained = 0;
  for (int sx : {-1, 1})
    for (int sy : {-1, 1}) {
      const IntVector xi = quantize_state(Eigen::Vector2d(25.0 * sx, 5.0 * sy), cfg, dom);
      attained = std::max({attained, (q.K * xi + q.b).cwiseAbs().maxCoeff(), (q.L * xi + q.c).cwiseAbs().maxCoeff()});
    }
  CHECK(static_cast<double>(attained) == cert.max_preactivation);
}

TEST_CASE("error bound holds pointwise and rounding residuals are bounded") {
  const StateDomain dom = double_integrator_box();
  for (const MaxoutController& ctrl : {fixture_paper_p8(), fixture_saturated_feedback(saturated_gain())}) {
    for (unsigned l : {16u, 32u}) {
      const QuantizationConfig cfg = make_quantization_config(20, 100, l, ctrl.net, dom);
      const QuantizedNetwork q = quantize_network(ctrl.net, cfg);
      const double bound = error_bound(cfg);
      for (const auto& x : sample_states(dom, 1000, 17)) {
        const IntVector xi = quantize_state(x, cfg, dom);
        CHECK((x - xi.cast<double>() / cfg.s1).cwiseAbs().maxCoeff() <= 1.0 / (2 * cfg.s1) + 1e-12);
        const double integer = static_cast<double>((q.K * xi + q.b).maxCoeff() - (q.L * xi + q.c).maxCoeff());
        CHECK(std::abs(ctrl.evaluate(x) - integer / cfg.s3) <= bound);
      }
      CHECK((ctrl.net.K * cfg.s2 - q.K.cast<double>()).cwiseAbs().maxCoeff() <= 0.5 + 1e-9);
    }
  }
}

TEST_CASE("config validation") {
  QuantizationConfig cfg = benchmark_config();
  cfg.s3 = 1999;
  CHECK_THROWS_AS(cfg.validate(), ContractError);
  cfg = benchmark_config();
  cfg.l = 1;
  CHECK_THROWS_AS(cfg.validate(), ContractError);
  CHECK_THROWS_AS(StateDomain{Eigen::Vector2d(1, 0)}.validate(), ContractError);
  RealNetwork bad{Eigen::MatrixXd::Zero(2, 2), Eigen::MatrixXd::Zero(3, 2), Eigen::VectorXd::Zero(2),
                  Eigen::VectorXd::Zero(2)};
  CHECK_THROWS_AS(bad.validate(), ContractError);
}

}
