#pragma once

#include <stdexcept>
#include <string>

namespace lwsat {

// Base class for everything this library throws on purpose.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

} // namespace lwsat
