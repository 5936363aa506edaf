#pragma once

#include <stdexcept>
#include <string>

namespace mergesim {

// A scenario that cannot be run: parse failures, schema violations,
// inconsistent geometry, or a merge plan that violates its bounds.
class ScenarioError : public std::runtime_error {
 public:
  explicit ScenarioError(const std::string& what) : std::runtime_error(what) {}
};

// A simulation that entered a state it cannot recover from, e.g. a vehicle
// leaving every segment's active region.
class SimError : public std::runtime_error {
 public:
  explicit SimError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace mergesim
