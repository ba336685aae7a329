#pragma once

#include <stdexcept>

namespace splinestroke {

/// Base for every error the library reports.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace splinestroke
