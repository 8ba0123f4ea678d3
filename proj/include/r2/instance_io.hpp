#pragma once

// Instance files:
//
//   version = 1
//   dim = 2
//   seed = 7
//   bin = [10,10,1]
//   items = [[4,10,1],[6,10,1]]
//   optimal_layout = [[0,0,0,0,0],[1,4,0,0,0]]
//
// Field order is fixed and every number is an integer. Layout rows are
// [item_id, x, y, z, orientation]; an empty layout is written as [].

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "r2/env.hpp"
#include "r2/text_format.hpp"

namespace r2 {

inline constexpr int instance_format_version = 1;

[[nodiscard]] inline auto format_instance(const Instance& inst) -> std::string {
  std::ostringstream o;
  o << "version = " << instance_format_version << "\n";
  o << "dim = " << inst.dim << "\n";
  o << "seed = " << inst.seed << "\n";
  o << "bin = [" << inst.bin[0] << "," << inst.bin[1] << "," << inst.bin[2] << "]\n";
  o << "items = [";
  for (std::size_t i = 0; i < inst.items.size(); ++i) {
    const auto& d = inst.items[i].dims;
    o << (i ? "," : "") << "[" << d[0] << "," << d[1] << "," << d[2] << "]";
  }
  o << "]\n";
  o << "optimal_layout = [";
  for (std::size_t i = 0; i < inst.optimal_layout.size(); ++i) {
    const auto& p = inst.optimal_layout[i];
    o << (i ? "," : "") << "[" << p.item_id << "," << p.pos[0] << "," << p.pos[1] << "," << p.pos[2] << ","
      << p.orient.code << "]";
  }
  o << "]\n";
  return o.str();
}

namespace detail {

[[nodiscard]] inline auto int_array(const text::Field& f, const std::string& src, std::size_t n) -> std::vector<int> {
  if (!f.value.is_array() || f.value.size() != n) {
    throw ParseError(text::where(src, f) + ": expected an array of " + std::to_string(n) + " integers");
  }
  std::vector<int> out;
  for (const auto& v : f.value) {
    if (!v.is_number_integer()) throw ParseError(text::where(src, f) + ": non-integer entry");
    out.push_back(v.get<int>());
  }
  return out;
}

[[nodiscard]] inline auto rows(const text::Field& f, const std::string& src, std::size_t width)
    -> std::vector<std::vector<int>> {
  if (!f.value.is_array()) throw ParseError(text::where(src, f) + ": expected an array of rows");
  std::vector<std::vector<int>> out;
  for (std::size_t r = 0; r < f.value.size(); ++r) {
    const auto& row = f.value[r];
    if (!row.is_array() || row.size() != width) {
      throw ParseError(text::where(src, f) + ": row " + std::to_string(r) + " must have " + std::to_string(width) +
                       " integers");
    }
    std::vector<int> vals;
    for (const auto& v : row) {
      if (!v.is_number_integer()) {
        throw ParseError(text::where(src, f) + ": row " + std::to_string(r) + " has a non-integer entry");
      }
      vals.push_back(v.get<int>());
    }
    out.push_back(std::move(vals));
  }
  return out;
}

}  // namespace detail

[[nodiscard]] inline auto parse_instance(std::istream& in, const std::string& source = "<instance>") -> Instance {
  static const char* const order[] = {"version", "dim", "seed", "bin", "items", "optimal_layout"};
  const auto fields = text::parse(in, source);
  if (fields.size() != std::size(order)) {
    throw ParseError(source + ": expected " + std::to_string(std::size(order)) + " fields, found " +
                     std::to_string(fields.size()));
  }
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (fields[i].key != order[i]) {
      throw ParseError(text::where(source, fields[i]) + ": expected field `" + order[i] + "` here");
    }
  }
  const auto& fv = fields[0];
  if (!fv.value.is_number_integer() || fv.value.get<int>() != instance_format_version) {
    throw ParseError(text::where(source, fv) + ": unsupported version");
  }
  Instance inst;
  if (!fields[1].value.is_number_integer()) throw ParseError(text::where(source, fields[1]) + ": expected integer");
  inst.dim = fields[1].value.get<int>();
  if (inst.dim != 2 && inst.dim != 3) throw ParseError(text::where(source, fields[1]) + ": must be 2 or 3");
  if (!fields[2].value.is_number_unsigned()) {
    throw ParseError(text::where(source, fields[2]) + ": expected a non-negative integer");
  }
  inst.seed = fields[2].value.get<std::uint64_t>();
  const auto bin = detail::int_array(fields[3], source, 3);
  inst.bin = {bin[0], bin[1], bin[2]};
  if (bin[0] < 1 || bin[1] < 1 || bin[2] < 1) throw ParseError(text::where(source, fields[3]) + ": dims must be >= 1");

  const auto items = detail::rows(fields[4], source, 3);
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto& r = items[i];
    if (r[0] < 1 || r[1] < 1 || r[2] < 1) {
      throw ParseError(text::where(source, fields[4]) + ": item " + std::to_string(i) + " has a dimension < 1");
    }
    inst.items.push_back(Item{static_cast<int>(i), {r[0], r[1], r[2]}});
  }
  for (const auto& r : detail::rows(fields[5], source, 5)) {
    inst.optimal_layout.push_back(Placement{r[0], {r[1], r[2], r[3]}, Orientation{r[4]}});
  }
  if (auto bad = instance_problem(inst)) throw ParseError(source + ": " + *bad);
  return inst;
}

[[nodiscard]] inline auto load_instance(const std::filesystem::path& path) -> Instance {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  return parse_instance(in, path.string());
}

inline void save_instance(const Instance& inst, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << format_instance(inst);
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace r2
