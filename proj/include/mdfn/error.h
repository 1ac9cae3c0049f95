#ifndef MDFN_ERROR_H_
#define MDFN_ERROR_H_

#include <stdexcept>
#include <string>

namespace mdfn {

// Shape or argument violations in numeric code.
struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Malformed files, malformed records, missing inputs. CLI exit code 2.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Non-finite values, failed convergence checks. CLI exit code 3.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace mdfn

#endif  // MDFN_ERROR_H_
