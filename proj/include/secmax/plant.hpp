#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "secmax/quantize.hpp"

namespace secmax {

/// x+ = A x + B u with a scalar input.
struct LinearSystem {
  Eigen::MatrixXd A;
  Eigen::VectorXd B;

  void validate() const;
  [[nodiscard]] Eigen::VectorXd next(const Eigen::VectorXd& x, double u) const { return A * x + B * u; }
};

/// A = [[1, 1], [0, 1]], B = [0.5, 1].
LinearSystem double_integrator();

struct MaxoutController {
  std::string id;
  RealNetwork net;
  double u_bound = std::numeric_limits<double>::infinity();  ///< |u| limit of the input set

  void validate() const;
  [[nodiscard]] double evaluate(const Eigen::VectorXd& x) const { return maxout_eval(net, x); }
};

/// The eight-piece trained controller of the double-integrator benchmark,
/// weights rounded to two digits.
MaxoutController fixture_paper_p8();

/// p = 2 network with K = [k^T; 0], b = (0, -1), L = [k^T; 0], c = (-1, 0),
/// which evaluates to clamp(k^T x, -1, 1) exactly.
MaxoutController fixture_saturated_feedback(const Eigen::Vector2d& k);

/// The gain used by the closed-loop tests: (-0.3, -0.8). A - B k^T has
/// spectral radius 0.5916.
Eigen::Vector2d saturated_gain();

struct SimulationTrace {
  std::string controller_id;
  std::uint64_t seed = 0;
  std::vector<Eigen::VectorXd> states;  ///< x(0), ..., x(N)
  std::vector<double> inputs;           ///< u(0), ..., u(N-1)
  bool truncated = false;               ///< the state left the guard box

  [[nodiscard]] std::size_t steps() const { return inputs.size(); }
  /// Header "k,x1,x2,u", then one row per step; the last row has no input.
  [[nodiscard]] std::string to_csv() const;
};

using ControlCallback = std::function<double(const Eigen::VectorXd&)>;

/// Iterates x+ = A x + B u for `steps` steps. Stops early, flagging the trace,
/// once a state leaves `guard`. Throws DomainError if x0 is outside `guard`.
SimulationTrace closed_loop(const LinearSystem& sys, const ControlCallback& control, const Eigen::VectorXd& x0,
                            std::size_t steps, const std::optional<StateDomain>& guard = std::nullopt);

/// Uniform samples from the box, deterministic per seed.
std::vector<Eigen::VectorXd> sample_states(const StateDomain& dom, std::size_t count, std::uint64_t seed);

/// A network document: weights plus optional domain and quantization fields.
struct NetworkDocument {
  RealNetwork net;
  std::optional<StateDomain> domain;
  std::optional<double> s1;
  std::optional<double> s2;
  std::optional<unsigned> l;
};

/// Fields p, n, K and L (row-major flat arrays, or arrays of rows), b, c;
/// optional domain, s1, s2, l. Throws ContractError on malformed input.
NetworkDocument parse_network_json(const std::string& text);
NetworkDocument load_network_json(const std::filesystem::path& path);
std::string network_to_json(const NetworkDocument& doc);

}  // namespace secmax
