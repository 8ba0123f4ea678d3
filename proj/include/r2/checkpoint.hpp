#pragma once

// Checkpoint files (`*.r2`), little-endian binary:
//
//   char[8]  magic "R2CKPT01"
//   u32      format version
//   u32      feature width F
//   u32      hidden width H
//   u32      value target (0 = ranked, 1 = raw MDP reward)
//   f64      percentile alpha
//   i64      iteration index (-1 when not written by the trainer)
//   i64      Adam step counter
//   u64      parameter count P
//   f64[P]   parameters, then Adam first moments, then Adam second moments
//   u64      reward buffer capacity
//   u64      reward buffer length K
//   f64[K]   reward buffer entries, oldest first
//   u32      CRC-32 of every preceding byte
//
// Parameter order is the flat layout documented in net.hpp.

#include <zlib.h>

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <optional>
#include <string>
#include <vector>

#include "r2/error.hpp"
#include "r2/net.hpp"
#include "r2/ranked_reward.hpp"

namespace r2 {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

inline constexpr std::uint32_t checkpoint_version = 1;
inline constexpr char checkpoint_magic[8] = {'R', '2', 'C', 'K', 'P', 'T', '0', '1'};

enum class ValueTarget : std::uint32_t { ranked = 0, raw = 1 };

struct Checkpoint {
  NetParams net;
  ValueTarget value_target = ValueTarget::ranked;
  double alpha = 75.0;
  std::int64_t iteration = -1;
  RewardBuffer buffer{default_buffer_capacity};
};

class CheckpointError : public ParseError {
 public:
  using ParseError::ParseError;
};

namespace detail {

class ByteWriter {
 public:
  template <class T>
  void put(const T& v) {
    const auto* p = reinterpret_cast<const unsigned char*>(&v);
    bytes.insert(bytes.end(), p, p + sizeof(T));
  }
  void put_doubles(const double* d, std::size_t n) {
    const auto* p = reinterpret_cast<const unsigned char*>(d);
    bytes.insert(bytes.end(), p, p + n * sizeof(double));
  }
  std::vector<unsigned char> bytes;
};

class ByteReader {
 public:
  ByteReader(const unsigned char* data, std::size_t size) : m_data(data), m_size(size) {}

  template <class T>
  auto get(const char* what) -> T {
    need(sizeof(T), what);
    T v;
    std::memcpy(&v, m_data + m_pos, sizeof(T));
    m_pos += sizeof(T);
    return v;
  }
  void get_doubles(double* out, std::size_t n, const char* what) {
    need(n * sizeof(double), what);
    std::memcpy(out, m_data + m_pos, n * sizeof(double));
    m_pos += n * sizeof(double);
  }
  [[nodiscard]] auto remaining() const -> std::size_t { return m_size - m_pos; }

 private:
  void need(std::size_t n, const char* what) const {
    if (m_size - m_pos < n) throw CheckpointError(std::string("checkpoint truncated while reading ") + what);
  }
  const unsigned char* m_data;
  std::size_t m_size;
  std::size_t m_pos = 0;
};

[[nodiscard]] inline auto crc(const unsigned char* data, std::size_t n) -> std::uint32_t {
  return static_cast<std::uint32_t>(::crc32(::crc32(0L, Z_NULL, 0), data, static_cast<uInt>(n)));
}

}  // namespace detail

[[nodiscard]] inline auto encode_checkpoint(const Checkpoint& c) -> std::vector<unsigned char> {
  detail::ByteWriter w;
  for (char ch : checkpoint_magic) w.put(ch);
  w.put(checkpoint_version);
  w.put(static_cast<std::uint32_t>(c.net.arch.feature_width));
  w.put(static_cast<std::uint32_t>(c.net.arch.hidden));
  w.put(static_cast<std::uint32_t>(c.value_target));
  w.put(c.alpha);
  w.put(c.iteration);
  w.put(c.net.step);
  const auto count = static_cast<std::uint64_t>(c.net.theta.size());
  w.put(count);
  w.put_doubles(c.net.theta.data(), count);
  w.put_doubles(c.net.adam_m.data(), count);
  w.put_doubles(c.net.adam_v.data(), count);
  const auto entries = c.buffer.entries();
  w.put(static_cast<std::uint64_t>(c.buffer.capacity()));
  w.put(static_cast<std::uint64_t>(entries.size()));
  w.put_doubles(entries.data(), entries.size());
  w.put(detail::crc(w.bytes.data(), w.bytes.size()));
  return std::move(w.bytes);
}

// `expected_feature_width`, when set, rejects checkpoints built for a
// different feature layout (e.g. a 3D net loaded for 2D play).
[[nodiscard]] inline auto decode_checkpoint(const std::vector<unsigned char>& bytes,
                                            std::optional<int> expected_feature_width = std::nullopt)
    -> Checkpoint {
  if (bytes.size() < sizeof(checkpoint_magic) + sizeof(std::uint32_t)) throw CheckpointError("checkpoint truncated");
  if (std::memcmp(bytes.data(), checkpoint_magic, sizeof(checkpoint_magic)) != 0) {
    throw CheckpointError("not a checkpoint file (bad magic)");
  }
  const std::size_t body = bytes.size() - sizeof(std::uint32_t);
  std::uint32_t stored = 0;
  std::memcpy(&stored, bytes.data() + body, sizeof(stored));

  detail::ByteReader r(bytes.data(), body);
  for (std::size_t i = 0; i < sizeof(checkpoint_magic); ++i) (void)r.get<char>("magic");
  const auto version = r.get<std::uint32_t>("version");
  if (version != checkpoint_version) {
    throw CheckpointError("checkpoint version " + std::to_string(version) + " unsupported (expected " +
                          std::to_string(checkpoint_version) + ")");
  }
  Checkpoint c;
  c.net.arch.feature_width = static_cast<int>(r.get<std::uint32_t>("feature width"));
  c.net.arch.hidden = static_cast<int>(r.get<std::uint32_t>("hidden width"));
  if (expected_feature_width && *expected_feature_width != c.net.arch.feature_width) {
    throw CheckpointError("checkpoint feature width " + std::to_string(c.net.arch.feature_width) +
                          " incompatible with expected width " + std::to_string(*expected_feature_width));
  }
  const auto target = r.get<std::uint32_t>("value target");
  if (target > 1) throw CheckpointError("unknown value target " + std::to_string(target));
  c.value_target = static_cast<ValueTarget>(target);
  c.alpha = r.get<double>("alpha");
  c.iteration = r.get<std::int64_t>("iteration");
  c.net.step = r.get<std::int64_t>("step");
  const auto count = r.get<std::uint64_t>("parameter count");
  if (c.net.arch.feature_width < 1 || c.net.arch.hidden < 1 ||
      count != static_cast<std::uint64_t>(c.net.arch.param_count())) {
    throw CheckpointError("parameter count does not match the recorded layer sizes");
  }
  if (count * 3 * sizeof(double) > r.remaining()) throw CheckpointError("checkpoint truncated in parameter arrays");
  const auto n = static_cast<Eigen::Index>(count);
  c.net.theta.resize(n);
  c.net.adam_m.resize(n);
  c.net.adam_v.resize(n);
  r.get_doubles(c.net.theta.data(), count, "parameters");
  r.get_doubles(c.net.adam_m.data(), count, "Adam first moments");
  r.get_doubles(c.net.adam_v.data(), count, "Adam second moments");
  const auto cap = r.get<std::uint64_t>("buffer capacity");
  const auto len = r.get<std::uint64_t>("buffer length");
  if (cap == 0 || len > cap) throw CheckpointError("inconsistent reward buffer header");
  if (len * sizeof(double) > r.remaining()) throw CheckpointError("checkpoint truncated in reward buffer");
  std::vector<double> entries(len);
  r.get_doubles(entries.data(), len, "reward buffer");
  if (r.remaining() != 0) throw CheckpointError("trailing bytes before checksum");
  if (detail::crc(bytes.data(), body) != stored) throw CheckpointError("checkpoint content hash mismatch");
  c.buffer = RewardBuffer(cap);
  for (double e : entries) c.buffer.push(e);
  return c;
}

inline void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path) {
  const auto bytes = encode_checkpoint(c);
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("write failed: " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

[[nodiscard]] inline auto load_checkpoint(const std::filesystem::path& path,
                                          std::optional<int> expected_feature_width = std::nullopt) -> Checkpoint {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes, expected_feature_width);
}

}  // namespace r2
