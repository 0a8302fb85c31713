#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "property_suites.hpp"

TEST_CASE("compile/solve invariants and oracle agreement over 1000 random tasks") {
  auto result = testsupport::planner_property_suite(16180);
  CHECK(result.cases >= 1000);
  for (const auto& f : result.failures) FAIL_CHECK(f);
  CHECK(result.ok());
}
