#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "secmax/plant.hpp"

using namespace secmax;

TEST_SUITE("plant") {

TEST_CASE("double integrator") {
  const LinearSystem sys = double_integrator();
  CHECK(sys.next(Eigen::Vector2d(1, 2), 0.5).isApprox(Eigen::Vector2d(3.25, 2.5)));
}

TEST_CASE("saturated fixture is a clamped linear gain") {
  const MaxoutController ctrl = fixture_saturated_feedback(saturated_gain());
  CHECK(ctrl.net.p() == 2);
  for (const Eigen::VectorXd& x : sample_states(double_integrator_box(), 500, 1)) {
    const double lin = saturated_gain().dot(x);
    CHECK(ctrl.evaluate(x) == doctest::Approx(std::clamp(lin, -1.0, 1.0)));
  }
}

TEST_CASE("benchmark controller") {
  const MaxoutController ctrl = fixture_paper_p8();
  CHECK(ctrl.id == "paper_p8");
  CHECK(ctrl.net.p() == 8);
  CHECK(ctrl.net.n() == 2);
  CHECK(ctrl.evaluate(Eigen::Vector2d::Zero()) == doctest::Approx(4.2));
}

TEST_CASE("zero input leaves the double integrator drifting") {
  const auto trace = closed_loop(double_integrator(), [](const Eigen::VectorXd&) { return 0.0; },
                                 Eigen::Vector2d(0, 1), 5);
  CHECK(trace.steps() == 5);
  CHECK(trace.states.size() == 6);
  CHECK(trace.states.back().isApprox(Eigen::Vector2d(5, 1)));
  CHECK_FALSE(trace.truncated);
}

TEST_CASE("saturated loop converges") {
  const MaxoutController ctrl = fixture_saturated_feedback(saturated_gain());
  const auto trace = closed_loop(double_integrator(), [&](const Eigen::VectorXd& x) { return ctrl.evaluate(x); },
                                 Eigen::Vector2d(5, 0), 60, double_integrator_box());
  CHECK_FALSE(trace.truncated);
  CHECK(trace.states.back().lpNorm<Eigen::Infinity>() < 1e-3);
}

TEST_CASE("guard truncates and rejects") {
  const auto push = [](const Eigen::VectorXd&) { return 1.0; };
  const auto trace = closed_loop(double_integrator(), push, Eigen::Vector2d(0, 0), 50, double_integrator_box());
  CHECK(trace.truncated);
  CHECK(trace.steps() < 50);
  CHECK_FALSE(double_integrator_box().contains(trace.states.back()));
  CHECK_THROWS_AS(closed_loop(double_integrator(), push, Eigen::Vector2d(30, 0), 5, double_integrator_box()),
                  DomainError);
}

TEST_CASE("csv") {
  SimulationTrace t;
  t.states = {Eigen::Vector2d(1, 0.5), Eigen::Vector2d(1.25, 1.5)};
  t.inputs = {1.0};
  CHECK(t.to_csv() == "k,x1,x2,u\n0,1,0.5,1\n1,1.25,1.5,\n");
}

TEST_CASE("state sampling") {
  const auto a = sample_states(double_integrator_box(), 1000, 5);
  const auto b = sample_states(double_integrator_box(), 1000, 5);
  const auto c = sample_states(double_integrator_box(), 1000, 6);
  CHECK(a.size() == 1000);
  CHECK(a == b);
  CHECK_FALSE(a == c);
  Eigen::Vector2d lo = a[0], hi = a[0];
  for (const auto& x : a) {
    CHECK(double_integrator_box().contains(x));
    lo = lo.cwiseMin(x);
    hi = hi.cwiseMax(x);
  }
  CHECK(lo(0) < -23);
  CHECK(hi(0) > 23);
  CHECK(hi(1) > 4.5);
}

TEST_CASE("network json") {
  NetworkDocument doc{fixture_paper_p8().net, double_integrator_box(), 20.0, 100.0, 16u};
  const NetworkDocument back = parse_network_json(network_to_json(doc));
  CHECK(back.net.K == doc.net.K);
  CHECK(back.net.c == doc.net.c);
  CHECK(back.domain->half_widths == doc.domain->half_widths);
  CHECK(back.l == 16u);

  const std::string nested = R"({"p": 1, "n": 2, "K": [[1, 2]], "L": [[0, 1]], "b": [0], "c": [1]})";
  const NetworkDocument n = parse_network_json(nested);
  CHECK(n.net.p() == 1);
  CHECK(n.net.K(0, 1) == 2.0);
  CHECK_FALSE(n.domain.has_value());
  CHECK_THROWS_AS(parse_network_json(R"({"p": 1, "n": 2, "K": [[1, 2]], "L": [[0]], "b": [0], "c": [1]})"), ContractError);
  CHECK_THROWS_AS(parse_network_json("[1,"), ContractError);

  const auto dir = std::filesystem::path(SECMAX_SOURCE_DIR) / "assets" / "fixtures";
  const NetworkDocument file = load_network_json(dir / "paper_p8.json");
  CHECK(file.net.K == fixture_paper_p8().net.K);
  CHECK(file.s1 == 20.0);
}

}
