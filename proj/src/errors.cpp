#include "bilevel/errors.hpp"

#include <utility>

namespace bilevel {

NumericalFailure::NumericalFailure(const std::string& what, Vec last_iterate)
    : Error(what), last_(std::move(last_iterate)) {}

NonConvergence::NonConvergence(const std::string& what, Vec best_iterate)
    : Error(what), best_(std::move(best_iterate)) {}

ParseError::ParseError(const std::string& what, long line)
    : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}

Deadline Deadline::in_seconds(double seconds) {
  Deadline d;
  d.at = std::chrono::steady_clock::now() +
         std::chrono::duration_cast<std::chrono::steady_clock::duration>(
             std::chrono::duration<double>(seconds));
  return d;
}

void require_finite(const Vec& v, const char* name) {
  if (!v.allFinite()) throw InputError(std::string(name) + " contains non-finite entries");
}

void require_size(const Vec& v, Index expected, const char* name) {
  if (v.size() != expected)
    throw InputError(std::string(name) + " has dimension " + std::to_string(v.size()) +
                     ", expected " + std::to_string(expected));
}

}  // namespace bilevel
