#pragma once

// Golden fixtures: fixtures/<name>/expected.json holds an input (token stream or
// program) and a list of checks compared with per-type tolerances: exact for
// tokens, 1e-9 for costs, 1e-6 for geometry.

#include <filesystem>
#include <string>
#include <vector>

namespace cadsig {

inline constexpr double kCostTolerance = 1e-9;
inline constexpr double kGeometryTolerance = 1e-6;

struct FixtureResult {
  std::string name;
  std::string provenance;  // trivial | derived | published
  bool passed = false;
  std::vector<std::string> failures;  // one line per failed check, with a diff
};

/// Fixture names under `root` (folders holding expected.json), sorted.
std::vector<std::string> list_fixtures(const std::filesystem::path& root);

/// Throws IoError for an unknown fixture and ValidationError for a malformed one.
FixtureResult run_fixture(const std::filesystem::path& root, const std::string& name);

}  // namespace cadsig
