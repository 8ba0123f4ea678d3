#pragma once

#include <cstdint>
#include <initializer_list>

namespace r2 {

[[nodiscard]] constexpr auto splitmix64(std::uint64_t x) noexcept -> std::uint64_t {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Independent stream seed for a (master, tag, index...) tuple.
[[nodiscard]] constexpr auto derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> path) noexcept
    -> std::uint64_t {
  std::uint64_t s = splitmix64(master);
  for (auto p : path) s = splitmix64(s ^ splitmix64(p + 0x632be59bd9b4e019ULL));
  return s;
}

// Stream tags.
namespace stream {
inline constexpr std::uint64_t instance = 1;
inline constexpr std::uint64_t episode = 2;
inline constexpr std::uint64_t minibatch = 3;
inline constexpr std::uint64_t init = 4;
inline constexpr std::uint64_t eval = 5;
}  // namespace stream

}  // namespace r2
