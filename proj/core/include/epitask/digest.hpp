#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "epitask/goal.hpp"

namespace epitask {

// FNV-1a, 64 bit. Stable across runs and platforms.
std::uint64_t fnv1a64(std::string_view text);

// First 8 hex characters of fnv1a64(text).
std::string digest8(std::string_view text);

struct FactId {
  std::string canonical;  // "(name arg1 arg2 ...)" with single spaces
  std::string digest;     // 8 hex chars

  bool operator==(const FactId&) const = default;
};

// Throws non_ground_fact when an argument looks like a PDDL variable.
FactId fact_digest(const Predicate& fact);

}  // namespace epitask
