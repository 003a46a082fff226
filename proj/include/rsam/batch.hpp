#pragma once

#include <cstddef>
#include <vector>

#include "rsam/linalg.hpp"

namespace rsam {

/// One minibatch. `pairing` is empty for ordinary batches; for multiview
/// batches it maps each row to the other view of the same source sample.
struct Batch {
  Matrix x;
  std::vector<int> y;
  std::vector<std::size_t> pairing;

  std::size_t size() const noexcept { return y.size(); }
};

}  // namespace rsam
