#include "funkan/errors.hpp"

namespace funkan {

int exit_code_for(const std::exception& e) noexcept {
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const ShapeError*>(&e)) return 2;
  if (dynamic_cast<const DataError*>(&e)) return 3;
  if (dynamic_cast<const NumericError*>(&e)) return 4;
  return 1;
}

}  // namespace funkan
