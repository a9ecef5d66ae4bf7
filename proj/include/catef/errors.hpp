#pragma once

#include <stdexcept>
#include <string>

namespace catef {

// Bad user-supplied data or configuration (missing columns, malformed cells,
// invalid flag combinations).
class InputError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Estimation failed on otherwise valid input: singular designs, separation,
// degenerate kernel neighborhoods, no root for the band level equation.
class NumericError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

} // namespace catef
