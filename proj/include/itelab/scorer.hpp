#pragma once

#include <span>
#include <vector>

namespace itelab {

/// Anything that maps a token context to a next-token distribution. Must be
/// safe for concurrent read-only calls.
class NextTokenScorer {
 public:
  virtual ~NextTokenScorer() = default;
  virtual std::vector<double> next_token_distribution(std::span<const int> context) const = 0;
};

}  // namespace itelab
