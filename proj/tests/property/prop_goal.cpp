#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "property_suites.hpp"

TEST_CASE("goal language properties hold over 1000 random formulas") {
  auto result = testsupport::goal_property_suite(20240817);
  CHECK(result.cases >= 1000);
  for (const auto& f : result.failures) FAIL_CHECK(f);
  CHECK(result.ok());
}
