#include "epitask/digest.hpp"

#include <cstdio>

#include "epitask/errors.hpp"

namespace epitask {

std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t hash = 14695981039346656037ull;
  for (unsigned char c : text) {
    hash ^= c;
    hash *= 1099511628211ull;
  }
  return hash;
}

std::string digest8(std::string_view text) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(text)));
  return std::string(buf, 8);
}

FactId fact_digest(const Predicate& fact) {
  for (const auto& arg : fact.args) {
    if (!arg.id.empty() && arg.id.front() == '?') {
      throw non_ground_fact("argument \"" + arg.id + "\" of " + fact.name + " is a variable");
    }
  }
  FactId id;
  id.canonical = fact.canonical();
  id.digest = digest8(id.canonical);
  return id;
}

}  // namespace epitask
