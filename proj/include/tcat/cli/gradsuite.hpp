#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tcat/network/config.hpp"

namespace tcat::cli {

struct GroupResult {
  std::string kind;  // "op", "module" or "model"
  std::string name;
  double max_rel_err = 0.0;
  double tol = 0.0;
  bool passed = false;
  std::string detail;  // worst parameter entry or a non-finite diagnostic
};

struct SuiteReport {
  std::vector<GroupResult> groups;
  bool passed() const;
  std::vector<std::string> failures() const;
};

inline constexpr double kGradEps = 1e-5;

/// One finite-difference check per primitive op, each on small seeded inputs
/// with a random linear readout.
SuiteReport run_op_suite(double tol, std::uint64_t seed = 1);

/// Attention, superpoint and loss building blocks checked in isolation.
SuiteReport run_module_suite(double tol, std::uint64_t seed = 2);

/// 64 points, two encoder levels, small widths.
net::ModelConfig reduced_grad_config();

/// Total training loss of a seeded synthetic arch, checked per parameter group.
SuiteReport run_model_suite(const net::ModelConfig& cfg, double tol);

/// `kind name max_rel_err=<e> tol=<t> PASS|FAIL` per group.
std::string format_suite(const SuiteReport& report);

}  // namespace tcat::cli
