#include "meshflow/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <istream>
#include <ostream>

#include "meshflow/error.hpp"

namespace meshflow {
namespace {

template <typename T>
void put(std::ostream& os, T v) {
  char bytes[sizeof(T)];
  std::memcpy(bytes, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  os.write(bytes, sizeof(T));
}

template <typename T>
T get(std::istream& is) {
  char bytes[sizeof(T)];
  if (!is.read(bytes, sizeof(T))) throw DataError("checkpoint truncated");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  T v;
  std::memcpy(&v, bytes, sizeof(T));
  return v;
}

void put_block(std::ostream& os, const std::string& name, const Matrix& m) {
  put<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
  os.write(name.data(), static_cast<std::streamsize>(name.size()));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(m.rows()));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(m.cols()));
  for (Eigen::Index i = 0; i < m.size(); ++i) put<double>(os, m.data()[i]);
}

std::pair<std::string, Matrix> get_block(std::istream& is) {
  const auto len = get<std::uint32_t>(is);
  if (len > (1u << 16)) throw DataError("checkpoint parameter name too long");
  std::string name(len, '\0');
  if (!is.read(name.data(), len)) throw DataError("checkpoint truncated");
  const auto rows = get<std::uint32_t>(is);
  const auto cols = get<std::uint32_t>(is);
  if (static_cast<std::uint64_t>(rows) * cols > (1ull << 32)) throw DataError("checkpoint block too large");
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = get<double>(is);
  return {std::move(name), std::move(m)};
}

}  // namespace

void write_parameters(std::ostream& os, std::span<const Parameter* const> params) {
  os.write("GUNT", 4);
  put<std::uint32_t>(os, kCheckpointVersion);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(params.size()));
  for (const Parameter* p : params) put_block(os, p->name(), p->value());
  for (const Parameter* p : params) put_block(os, p->name(), p->first_moment());
  for (const Parameter* p : params) put_block(os, p->name(), p->second_moment());
  for (const Parameter* p : params) put<std::uint64_t>(os, static_cast<std::uint64_t>(p->step()));
}

std::vector<ParameterRecord> read_parameter_records(std::istream& is) {
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, "GUNT", 4) != 0) throw DataError("not a parameter checkpoint (bad magic)");
  const auto version = get<std::uint32_t>(is);
  if (version != kCheckpointVersion) throw DataError("unsupported checkpoint version " + std::to_string(version));
  const auto count = get<std::uint32_t>(is);
  std::vector<ParameterRecord> records(count);
  for (auto& r : records) std::tie(r.name, r.value) = get_block(is);
  for (Matrix ParameterRecord::*section : {&ParameterRecord::first_moment, &ParameterRecord::second_moment}) {
    for (auto& r : records) {
      auto [name, m] = get_block(is);
      if (name != r.name || m.rows() != r.value.rows() || m.cols() != r.value.cols()) {
        throw DataError("checkpoint moment block for '" + name + "' does not match its parameter");
      }
      r.*section = std::move(m);
    }
  }
  for (auto& r : records) r.step = static_cast<std::int64_t>(get<std::uint64_t>(is));
  return records;
}

void apply_records(std::span<const ParameterRecord> records, std::span<Parameter* const> params) {
  if (records.size() != params.size()) {
    throw DataError("checkpoint has " + std::to_string(records.size()) + " parameters, model has " +
                    std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const ParameterRecord& r = records[i];
    Parameter& p = *params[i];
    if (r.name != p.name() || r.value.rows() != p.value().rows() || r.value.cols() != p.value().cols()) {
      throw DataError("checkpoint parameter '" + r.name + "' does not match model parameter '" + p.name() + "'");
    }
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = *params[i];
    p.value() = records[i].value;
    p.first_moment() = records[i].first_moment;
    p.second_moment() = records[i].second_moment;
    p.set_step(records[i].step);
    p.zero_grad();
  }
}

}  // namespace meshflow
