#pragma once

#include <string>
#include <vector>

namespace gentoc {

/// One attribute bound to the product-name words expressing its value.
/// `value_indices` are strictly increasing word positions; they need not be
/// contiguous.
struct AVPair {
  std::string attribute;
  std::vector<int> value_indices;

  friend bool operator==(const AVPair&, const AVPair&) = default;
};

using PairList = std::vector<AVPair>;

}  // namespace gentoc
