#include "crowdloc/hungarian.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "crowdloc/error.hpp"

namespace crowdloc {

std::optional<int> Matching::col_of(int row) const {
  for (const auto& p : pairs)
    if (p.row == row) return p.col;
  return std::nullopt;
}

std::optional<int> Matching::row_of(int col) const {
  for (const auto& p : pairs)
    if (p.col == col) return p.row;
  return std::nullopt;
}

double matching_cost(const Matrix& cost, const std::vector<MatchedPair>& pairs) {
  double sum = 0.0;
  for (const auto& p : pairs)
    sum += cost(static_cast<std::size_t>(p.row), static_cast<std::size_t>(p.col));
  return sum;
}

namespace {

void check_finite(const Matrix& cost) {
  for (std::size_t i = 0; i < cost.size(); ++i)
    if (!std::isfinite(cost.values()[i]))
      throw NumericError("cost matrix entry (" + std::to_string(i / cost.cols()) +
                         "," + std::to_string(i % cost.cols()) + ") is not finite");
}

// Rows <= cols. Returns the column assigned to each row.
std::vector<int> solve_wide(const Matrix& a) {
  const std::size_t n = a.rows();
  const std::size_t m = a.cols();
  constexpr double kInf = std::numeric_limits<double>::infinity();
  // 1-based potentials; column 0 is the virtual source.
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<std::size_t> owner(m + 1, 0), way(m + 1, 0);

  for (std::size_t i = 1; i <= n; ++i) {
    owner[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(m + 1, kInf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = owner[j0];
      double delta = kInf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = a(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= m; ++j) {
        if (used[j]) {
          u[owner[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (owner[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      owner[j0] = owner[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  std::vector<int> col_of_row(n, -1);
  for (std::size_t j = 1; j <= m; ++j)
    if (owner[j] != 0) col_of_row[owner[j] - 1] = static_cast<int>(j - 1);
  return col_of_row;
}

}  // namespace

Matching hungarian(const Matrix& cost) {
  check_finite(cost);
  Matching out;
  if (cost.rows() == 0 || cost.cols() == 0) return out;

  if (cost.rows() <= cost.cols()) {
    const auto cols = solve_wide(cost);
    for (std::size_t r = 0; r < cols.size(); ++r)
      out.pairs.push_back({static_cast<int>(r), cols[r]});
  } else {
    const auto rows = solve_wide(cost.transposed());
    for (std::size_t c = 0; c < rows.size(); ++c)
      out.pairs.push_back({rows[c], static_cast<int>(c)});
    std::ranges::sort(out.pairs, {}, &MatchedPair::row);
  }
  out.cost = matching_cost(cost, out.pairs);
  return out;
}

Matching brute_force_match(const Matrix& cost) {
  check_finite(cost);
  const std::size_t n = cost.rows();
  const std::size_t m = cost.cols();
  if (std::min(n, m) > 8)
    throw ValidationError("brute-force matching is limited to min(n, m) <= 8");
  Matching best;
  if (n == 0 || m == 0) return best;

  const bool wide = n <= m;
  const std::size_t small = wide ? n : m;
  const std::size_t large = wide ? m : n;

  // choice[k]: index on the large side for the k-th element of the small side.
  std::vector<std::size_t> choice(small);
  std::vector<char> used(large, 0);
  std::vector<std::size_t> best_choice;
  double best_cost = std::numeric_limits<double>::infinity();

  auto entry = [&](std::size_t k, std::size_t l) {
    return wide ? cost(k, l) : cost(l, k);
  };

  // Depth-first enumeration in lexicographic order of `choice`.
  auto recurse = [&](auto&& self, std::size_t k) -> void {
    if (k == small) {
      // Sum in row order so totals are comparable with hungarian().
      double total = 0.0;
      if (wide) {
        for (std::size_t r = 0; r < small; ++r) total += entry(r, choice[r]);
      } else {
        std::vector<std::pair<std::size_t, std::size_t>> rc;
        for (std::size_t c = 0; c < small; ++c) rc.emplace_back(choice[c], c);
        std::ranges::sort(rc);
        for (const auto& [r, c] : rc) total += cost(r, c);
      }
      if (total < best_cost) {
        best_cost = total;
        best_choice = choice;
      }
      return;
    }
    for (std::size_t l = 0; l < large; ++l) {
      if (used[l]) continue;
      used[l] = 1;
      choice[k] = l;
      self(self, k + 1);
      used[l] = 0;
    }
  };
  recurse(recurse, 0);

  for (std::size_t k = 0; k < small; ++k) {
    if (wide)
      best.pairs.push_back({static_cast<int>(k), static_cast<int>(best_choice[k])});
    else
      best.pairs.push_back({static_cast<int>(best_choice[k]), static_cast<int>(k)});
  }
  std::ranges::sort(best.pairs, {}, &MatchedPair::row);
  best.cost = matching_cost(cost, best.pairs);
  return best;
}

}  // namespace crowdloc
