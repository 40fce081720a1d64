#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "meshflow/autodiff.hpp"

namespace meshflow {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Parameter state as stored on disk.
struct ParameterRecord {
  std::string name;
  Matrix value;
  Matrix first_moment;
  Matrix second_moment;
  std::int64_t step = 0;
};

// Binary, little-endian:
//   "GUNT" u32 version u32 count
//   count x { u32 name_len, name bytes, u32 rows, u32 cols, f64 values (row-major) }
//   count x { same layout, first Adam moment }
//   count x { same layout, second Adam moment }
//   count x u64 Adam step
void write_parameters(std::ostream& os, std::span<const Parameter* const> params);
std::vector<ParameterRecord> read_parameter_records(std::istream& is);

/// Restores values and Adam state. Names and shapes must match exactly and in
/// order; otherwise DataError.
void apply_records(std::span<const ParameterRecord> records, std::span<Parameter* const> params);

}  // namespace meshflow
