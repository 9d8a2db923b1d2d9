#pragma once

#include <stdexcept>
#include <string>

namespace pulserec {

/// Thrown on precondition violations and unrecoverable numeric failures.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace pulserec
