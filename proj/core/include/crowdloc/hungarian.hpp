#pragma once

#include <optional>
#include <vector>

#include "crowdloc/matrix.hpp"

namespace crowdloc {

struct MatchedPair {
  int row = 0;
  int col = 0;

  friend bool operator==(const MatchedPair&, const MatchedPair&) = default;
};

// One-to-one partial assignment between the rows and columns of a cost
// matrix. Pairs are kept sorted by row.
struct Matching {
  std::vector<MatchedPair> pairs;
  double cost = 0.0;  // sum of matched entries, accumulated in row order

  std::size_t size() const noexcept { return pairs.size(); }
  bool empty() const noexcept { return pairs.empty(); }
  std::optional<int> col_of(int row) const;
  std::optional<int> row_of(int col) const;

  friend bool operator==(const Matching&, const Matching&) = default;
};

// Minimum-cost matching of size min(n, m) (shortest augmenting paths with
// dual potentials, O(min^2 * max)). Throws NumericError on non-finite costs.
Matching hungarian(const Matrix& cost);

// Exhaustive search over all injections of the smaller side into the larger.
// Ties resolve to the lexicographically first assignment. Requires
// min(n, m) <= 8.
Matching brute_force_match(const Matrix& cost);

// Sum of cost(row, col) over `pairs` in the order given.
double matching_cost(const Matrix& cost, const std::vector<MatchedPair>& pairs);

}  // namespace crowdloc
