#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

#include "secmax/circuit.hpp"

namespace secmax::cli {

struct VerifyOptions {
  bool full = false;
  std::optional<SignMode> mode;  ///< nullopt = auto
  std::string fixture = "paper_p8";
  bool inject_kdf_tamper = false;
  std::uint64_t seed = 1;
};

/// Runs the named invariant checks and prints one PASS/FAIL line each.
/// Returns the number of failed checks.
int run_verify(const VerifyOptions& opts, std::ostream& out);

}  // namespace secmax::cli
