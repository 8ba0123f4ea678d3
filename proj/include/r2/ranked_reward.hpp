#pragma once

// Ranked rewards: terminal MDP rewards are compared against a percentile of
// recent rewards and reshaped to z in {-1, +1}.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <random>
#include <string>
#include <vector>

#include "r2/error.hpp"

namespace r2 {

inline constexpr std::size_t default_buffer_capacity = 250;

class Percentile {
 public:
  explicit Percentile(double alpha) : m_alpha(alpha) {
    if (!(alpha > 0.0 && alpha < 100.0)) {
      throw ContractError("percentile must lie in (0, 100), got " + std::to_string(alpha));
    }
  }
  [[nodiscard]] auto value() const noexcept -> double { return m_alpha; }

 private:
  double m_alpha;
};

// Fixed-capacity FIFO of recent terminal rewards in (0, 1].
class RewardBuffer {
 public:
  explicit RewardBuffer(std::size_t capacity = default_buffer_capacity) : m_capacity(capacity) {
    if (capacity == 0) throw ContractError("reward buffer capacity must be positive");
  }

  void push(double r) {
    if (!(r > 0.0 && r <= 1.0)) throw ContractError("terminal reward outside (0, 1]: " + std::to_string(r));
    m_entries.push_back(r);
    if (m_entries.size() > m_capacity) m_entries.pop_front();
  }

  // Nearest-rank percentile: the ceil(alpha/100 * n)-th smallest entry
  // (1-based, clamped to [1, n]). Always an element of the buffer.
  [[nodiscard]] auto threshold(Percentile alpha) const -> double {
    if (m_entries.empty()) throw ContractError("threshold of an empty reward buffer");
    std::vector<double> sorted(m_entries.begin(), m_entries.end());
    const auto n = sorted.size();
    auto rank = static_cast<std::size_t>(std::ceil(alpha.value() / 100.0 * static_cast<double>(n)));
    rank = std::clamp<std::size_t>(rank, 1, n);
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(rank - 1), sorted.end());
    return sorted[rank - 1];
  }

  [[nodiscard]] auto size() const noexcept -> std::size_t { return m_entries.size(); }
  [[nodiscard]] auto capacity() const noexcept -> std::size_t { return m_capacity; }
  [[nodiscard]] auto empty() const noexcept -> bool { return m_entries.empty(); }
  [[nodiscard]] auto entries() const -> std::vector<double> { return {m_entries.begin(), m_entries.end()}; }

  friend auto operator==(const RewardBuffer&, const RewardBuffer&) -> bool = default;

 private:
  std::size_t m_capacity;
  std::deque<double> m_entries;
};

struct RankOptions {
  // |r - 1| <= tolerance counts as optimal. Callers holding the exact
  // integer optimality check should pass it via `optimal` instead.
  double one_tolerance = 0.0;
};

// z = +1 if r > r_alpha or r is optimal, -1 if r < r_alpha, fair coin on a
// tie below 1.
template <class Rng>
[[nodiscard]] auto rank(double r, double r_alpha, Rng& rng, bool optimal, RankOptions opt = {}) -> int {
  if (optimal || std::abs(r - 1.0) <= opt.one_tolerance) return 1;
  if (r > r_alpha) return 1;
  if (r < r_alpha) return -1;
  return std::bernoulli_distribution(0.5)(rng) ? 1 : -1;
}

template <class Rng>
[[nodiscard]] auto rank(double r, double r_alpha, Rng& rng) -> int {
  return rank(r, r_alpha, rng, r == 1.0);
}

}  // namespace r2
