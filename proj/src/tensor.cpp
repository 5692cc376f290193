#include "scnn/tensor.hpp"

namespace scnn {

std::string to_string(const Shape& s) {
  return std::to_string(s.height) + "x" + std::to_string(s.width) + "x" + std::to_string(s.channels);
}

}  // namespace scnn
