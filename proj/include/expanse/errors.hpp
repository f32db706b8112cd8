#pragma once

#include <stdexcept>
#include <string>

namespace expanse {

/// Invalid arguments: bad parameter ranges, mismatched flow families.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A construction whose mathematical precondition does not hold
/// (e.g. a block violating the slope bound in regularize).
class ConstructionError : public std::runtime_error {
 public:
  explicit ConstructionError(const std::string& what, long block = -1)
      : std::runtime_error(what), block_(block) {}
  long block() const noexcept { return block_; }

 private:
  long block_;
};

}  // namespace expanse
