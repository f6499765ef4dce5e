#ifndef PECL_ERROR_HPP
#define PECL_ERROR_HPP

#include <stdexcept>
#include <string>

namespace pecl {

// Shape/value errors are programming or input-data mistakes; config errors
// cover user-facing configuration (CLI exit code 2); non-finite errors cover
// numerical blowups at runtime (CLI exit code 3).
struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ValueError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NonFiniteError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace pecl

#endif  // PECL_ERROR_HPP
