#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "cadsig/corpus.hpp"
#include "cadsig/errors.hpp"
#include "cadsig/program_io.hpp"

using namespace cadsig;
namespace fs = std::filesystem;

namespace {

const fs::path kFixtures = "fixtures";

fs::path copy_fixture(const std::string& name, const std::string& as) {
  const fs::path dir = fs::temp_directory_path() / "cadsig_corpus";
  fs::create_directories(dir);
  fs::remove_all(dir / as);
  fs::copy(kFixtures / name, dir / as, fs::copy_options::recursive);
  return dir;
}

}  // namespace

TEST_CASE("every golden fixture passes") {
  const auto names = list_fixtures(kFixtures);
  CHECK(names.size() >= 6);
  for (const std::string& n : names) {
    CAPTURE(n);
    const FixtureResult r = run_fixture(kFixtures, n);
    for (const auto& f : r.failures) MESSAGE(n << ": " << f);
    CHECK(r.passed);
    CHECK(r.failures.empty());
    CHECK((r.provenance == "trivial" || r.provenance == "derived" || r.provenance == "published"));
  }
  for (const char* required : {"unit_cube", "cube_cut", "degenerate_line", "single_cut_sequence"}) {
    CHECK(std::find(names.begin(), names.end(), required) != names.end());
  }
}

TEST_CASE("fixture errors") {
  CHECK_THROWS_AS(run_fixture(kFixtures, "no_such_fixture"), IoError);

  const fs::path dir = copy_fixture("unit_cube", "broken");
  write_file(dir / "broken" / "expected.json", R"({"name": "broken", "checks": 3})");
  CHECK_THROWS_AS(run_fixture(dir, "broken"), ValidationError);
  fs::remove_all(dir);
}

TEST_CASE("a wrong expectation fails with a diff") {
  const fs::path dir = copy_fixture("unit_cube", "tampered");
  auto j = nlohmann::json::parse(read_file(dir / "tampered" / "expected.json"));
  for (auto& c : j["checks"]) {
    if (c["type"] == "stream") c["expected"][1][0] = 265;
    if (c["type"] == "validity") c["valid"] = false;
  }
  write_file(dir / "tampered" / "expected.json", j.dump());
  const FixtureResult r = run_fixture(dir, "tampered");
  CHECK_FALSE(r.passed);
  CHECK(r.failures.size() == 2);
  for (const auto& f : r.failures) MESSAGE(f);
  fs::remove_all(dir);
}
