// Error taxonomy shared by the library and the command-line tool.  The CLI
// maps these to its documented exit codes: config/schema problems -> 2,
// violated model assumptions -> 3, solver self-check failures -> 4, and
// numerical breakdown (non-finite values, singular factorizations) -> 5.
// Plain std::invalid_argument from the library is treated like a schema
// problem (exit 2).
#pragma once

#include <stdexcept>
#include <string>

namespace fredholm {

struct schema_error : std::runtime_error {
  explicit schema_error(const std::string& msg) : std::runtime_error(msg) {}
};

struct assumption_error : std::runtime_error {
  explicit assumption_error(const std::string& msg) : std::runtime_error(msg) {}
};

struct solver_error : std::runtime_error {
  explicit solver_error(const std::string& msg) : std::runtime_error(msg) {}
};

struct numeric_error : std::runtime_error {
  explicit numeric_error(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace fredholm
