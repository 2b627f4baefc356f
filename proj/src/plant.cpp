#include "secmax/plant.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "secmax/prng.hpp"

namespace secmax {

void LinearSystem::validate() const {
  if (A.rows() != A.cols() || A.rows() == 0) throw ContractError("A must be square and non-empty");
  if (B.size() != A.rows()) throw ContractError("B must have n entries");
}

LinearSystem double_integrator() {
  LinearSystem s;
  s.A.resize(2, 2);
  s.A << 1, 1, 0, 1;
  s.B.resize(2);
  s.B << 0.5, 1;
  return s;
}

void MaxoutController::validate() const {
  net.validate();
  if (!net.K.allFinite() || !net.L.allFinite() || !net.b.allFinite() || !net.c.allFinite())
    throw ContractError("controller weights must be finite");
}

MaxoutController fixture_paper_p8() {
  MaxoutController c;
  c.id = "paper_p8";
  c.u_bound = 1.0;
  c.net.K.resize(8, 2);
  c.net.K << -0.07, -0.52,  //
      0.31, -0.32,          //
      0.01, -0.30,          //
      -0.01, -0.40,         //
      0.31, 0.68,           //
      0.01, 0.52,           //
      0.07, -0.41,          //
      -0.31, -0.64;
  c.net.L.resize(8, 2);
  c.net.L << 0.31, 0.68,  //
      0.12, -0.03,        //
      -0.07, -0.52,       //
      -0.31, 0.36,        //
      -0.31, -0.64,       //
      -0.08, 0.48,        //
      0.01, 0.52,         //
      0.08, 0.01;
  c.net.b.resize(8);
  c.net.b << 0.37, 4.60, 0.50, 0.54, 0.60, 1.67, -1.14, 0.39;
  c.net.c.resize(8);
  c.net.c << 0.40, -0.88, -1.37, -4.61, -0.61, -1.39, -0.67, 0.40;
  return c;
}

MaxoutController fixture_saturated_feedback(const Eigen::Vector2d& k) {
  MaxoutController c;
  c.id = "saturated";
  c.u_bound = 1.0;
  c.net.K = Eigen::MatrixXd::Zero(2, 2);
  c.net.K.row(0) = k.transpose();
  c.net.L = c.net.K;
  c.net.b.resize(2);
  c.net.b << 0.0, -1.0;
  c.net.c.resize(2);
  c.net.c << -1.0, 0.0;
  return c;
}

Eigen::Vector2d saturated_gain() { return {-0.3, -0.8}; }

std::string SimulationTrace::to_csv() const {
  std::string out = "k,x1,x2,u\n";
  char buf[128];
  for (std::size_t k = 0; k < states.size(); ++k) {
    out += std::to_string(k);
    for (Eigen::Index i = 0; i < states[k].size(); ++i) {
      std::snprintf(buf, sizeof buf, ",%.17g", states[k](i));
      out += buf;
    }
    if (k < inputs.size()) {
      std::snprintf(buf, sizeof buf, ",%.17g", inputs[k]);
      out += buf;
    } else {
      out += ',';
    }
    out += '\n';
  }
  return out;
}

SimulationTrace closed_loop(const LinearSystem& sys, const ControlCallback& control, const Eigen::VectorXd& x0,
                            std::size_t steps, const std::optional<StateDomain>& guard) {
  sys.validate();
  if (x0.size() != sys.A.rows()) throw ContractError("x0 has the wrong dimension");
  if (guard && !guard->contains(x0)) throw DomainError("x0 lies outside the guard box");
  SimulationTrace trace;
  trace.states.push_back(x0);
  for (std::size_t k = 0; k < steps; ++k) {
    const Eigen::VectorXd& x = trace.states.back();
    const double u = control(x);
    trace.inputs.push_back(u);
    Eigen::VectorXd next = sys.next(x, u);
    const bool inside = !guard || guard->contains(next);
    trace.states.push_back(std::move(next));
    if (!inside) {
      trace.truncated = true;
      break;
    }
  }
  return trace;
}

std::vector<Eigen::VectorXd> sample_states(const StateDomain& dom, std::size_t count, std::uint64_t seed) {
  dom.validate();
  Prng rng(seed, "sample_states");
  std::vector<Eigen::VectorXd> out;
  out.reserve(count);
  for (std::size_t s = 0; s < count; ++s) {
    Eigen::VectorXd x(dom.half_widths.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const double unit = static_cast<double>(rng() >> 11) * 0x1.0p-53;  // [0, 1)
      x(i) = (2.0 * unit - 1.0) * dom.half_widths(i);
    }
    out.push_back(std::move(x));
  }
  return out;
}

namespace {

using nlohmann::json;

Eigen::MatrixXd read_matrix(const json& j, const char* name, std::size_t rows, std::size_t cols) {
  const json& v = j.at(name);
  if (!v.is_array()) throw ContractError(std::string(name) + " must be an array");
  std::vector<double> flat;
  if (!v.empty() && v.front().is_array()) {
    if (v.size() != rows) throw ContractError(std::string(name) + " must have p rows");
    for (const auto& row : v) {
      if (!row.is_array() || row.size() != cols) throw ContractError(std::string(name) + " rows must have n entries");
      for (const auto& e : row) flat.push_back(e.get<double>());
    }
  } else {
    flat = v.get<std::vector<double>>();
  }
  if (flat.size() != rows * cols)
    throw ContractError(std::string(name) + " must have " + std::to_string(rows * cols) + " entries");
  Eigen::MatrixXd m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t k = 0; k < cols; ++k) m(i, k) = flat[i * cols + k];
  return m;
}

Eigen::VectorXd read_vector(const json& j, const char* name, std::size_t size) {
  const auto v = j.at(name).get<std::vector<double>>();
  if (v.size() != size) throw ContractError(std::string(name) + " must have " + std::to_string(size) + " entries");
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

NetworkDocument parse_network_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    const auto p = j.at("p").get<std::size_t>();
    const auto n = j.at("n").get<std::size_t>();
    if (p == 0 || n == 0) throw ContractError("p and n must be positive");
    NetworkDocument doc;
    doc.net.K = read_matrix(j, "K", p, n);
    doc.net.L = read_matrix(j, "L", p, n);
    doc.net.b = read_vector(j, "b", p);
    doc.net.c = read_vector(j, "c", p);
    if (j.contains("domain")) doc.domain = StateDomain{read_vector(j, "domain", n)};
    if (j.contains("s1")) doc.s1 = j.at("s1").get<double>();
    if (j.contains("s2")) doc.s2 = j.at("s2").get<double>();
    if (j.contains("l")) doc.l = j.at("l").get<unsigned>();
    doc.net.validate();
    return doc;
  } catch (const json::exception& e) {
    throw ContractError(std::string("invalid network document: ") + e.what());
  }
}

NetworkDocument load_network_json(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ContractError("cannot read network file " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_network_json(ss.str());
}

std::string network_to_json(const NetworkDocument& doc) {
  nlohmann::ordered_json j;
  const auto& net = doc.net;
  j["p"] = net.p();
  j["n"] = net.n();
  auto flat = [](const Eigen::MatrixXd& m) {
    std::vector<double> out;
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index k = 0; k < m.cols(); ++k) out.push_back(m(i, k));
    return out;
  };
  j["K"] = flat(net.K);
  j["L"] = flat(net.L);
  j["b"] = std::vector<double>(net.b.data(), net.b.data() + net.b.size());
  j["c"] = std::vector<double>(net.c.data(), net.c.data() + net.c.size());
  if (doc.domain)
    j["domain"] = std::vector<double>(doc.domain->half_widths.data(),
                                      doc.domain->half_widths.data() + doc.domain->half_widths.size());
  if (doc.s1) j["s1"] = *doc.s1;
  if (doc.s2) j["s2"] = *doc.s2;
  if (doc.l) j["l"] = *doc.l;
  return j.dump(2) + "\n";
}

}  // namespace secmax
