#pragma once

#include <stdexcept>
#include <string>

namespace nscb {

// Caller-supplied values that are invalid on their face (bad ranges, malformed
// JSON, mismatched dimensions).
struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Structurally valid arguments that violate a precondition on current state
// (interval outside the recorded history, diagnostic premise not met).
struct StateError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A stored record failed an internal consistency check.
struct CorruptRecordError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// The feasibility solver exhausted its iteration budget or returned an
// infeasible point; carries a human-readable account of the worst constraint.
struct SolverFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace nscb
