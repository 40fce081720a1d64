#include "meshflow/io.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <vector>

#include "meshflow/error.hpp"

namespace meshflow {
namespace {

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> tokens;
  std::size_t pos = 0;
  while (pos < line.size()) {
    while (pos < line.size() && (line[pos] == ' ' || line[pos] == '\t' || line[pos] == '\r')) ++pos;
    std::size_t end = pos;
    while (end < line.size() && line[end] != ' ' && line[end] != '\t' && line[end] != '\r') ++end;
    if (end > pos) tokens.push_back(line.substr(pos, end - pos));
    pos = end;
  }
  return tokens;
}

[[noreturn]] void fail(std::size_t line, const std::string& what) {
  throw DataError("line " + std::to_string(line) + ": " + what);
}

template <typename Int>
Int parse_int(std::string_view token, std::size_t line) {
  Int v{};
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
  if (ec != std::errc{} || ptr != token.data() + token.size()) {
    fail(line, "expected an integer, got '" + std::string(token) + "'");
  }
  return v;
}

class LineReader {
 public:
  explicit LineReader(std::istream& is) : is_(is) {}

  // Skips blank lines. Returns false at end of input.
  bool next(std::vector<std::string_view>& tokens) {
    while (std::getline(is_, buffer_)) {
      ++line_;
      tokens = split(buffer_);
      if (!tokens.empty()) return true;
    }
    return false;
  }

  std::vector<std::string_view> require(const char* what) {
    std::vector<std::string_view> tokens;
    if (!next(tokens)) fail(line_ + 1, std::string("unexpected end of file, expected ") + what);
    return tokens;
  }

  std::size_t line() const { return line_; }

 private:
  std::istream& is_;
  std::string buffer_;
  std::size_t line_ = 0;
};

}  // namespace

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

double parse_double(std::string_view token, std::size_t line) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
  if (ec != std::errc{} || ptr != token.data() + token.size()) {
    fail(line, "expected a number, got '" + std::string(token) + "'");
  }
  return v;
}

void write_mesh(std::ostream& os, const Graph& g) {
  const auto pairs = g.undirected_edges();
  os << "mesh " << g.num_nodes() << ' ' << pairs.size() << '\n';
  for (const Point2& p : g.coords()) os << "v " << format_double(p.x) << ' ' << format_double(p.y) << '\n';
  for (const auto& [a, b] : pairs) os << "e " << a << ' ' << b << '\n';
}

Graph read_mesh(std::istream& is) {
  LineReader reader(is);
  auto header = reader.require("mesh header");
  if (header.size() != 3 || header[0] != "mesh") fail(reader.line(), "expected 'mesh <num_nodes> <num_edges>'");
  const auto n = parse_int<std::size_t>(header[1], reader.line());
  const auto m = parse_int<std::size_t>(header[2], reader.line());

  std::vector<Point2> coords(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto t = reader.require("vertex line");
    if (t.size() != 3 || t[0] != "v") fail(reader.line(), "expected 'v <x> <y>'");
    coords[i] = {parse_double(t[1], reader.line()), parse_double(t[2], reader.line())};
  }
  std::vector<std::pair<NodeId, NodeId>> pairs(m);
  for (std::size_t k = 0; k < m; ++k) {
    auto t = reader.require("edge line");
    if (t.size() != 3 || t[0] != "e") fail(reader.line(), "expected 'e <i> <j>'");
    pairs[k] = {parse_int<NodeId>(t[1], reader.line()), parse_int<NodeId>(t[2], reader.line())};
    if (pairs[k].first >= n || pairs[k].second >= n) fail(reader.line(), "edge index out of range");
  }
  std::vector<std::string_view> extra;
  if (reader.next(extra)) fail(reader.line(), "trailing content after mesh");
  try {
    return Graph::build(std::move(coords), pairs);
  } catch (const Error& e) {
    throw DataError(std::string("invalid mesh: ") + e.what());
  }
}

void write_series(std::ostream& os, const SnapshotSeries& s) {
  os << "series " << s.graph_id << ' ' << s.steps() << ' ' << s.nodes() << ' ' << format_double(s.dt) << '\n';
  for (Eigen::Index t = 0; t < s.fields.rows(); ++t) {
    for (Eigen::Index n = 0; n < s.fields.cols(); ++n) {
      if (n > 0) os << ' ';
      os << format_double(s.fields(t, n));
    }
    os << '\n';
  }
}

SnapshotSeries read_series(std::istream& is) {
  LineReader reader(is);
  auto header = reader.require("series header");
  if (header.size() != 5 || header[0] != "series") {
    fail(reader.line(), "expected 'series <graph_id> <T> <N> <dt>'");
  }
  SnapshotSeries s;
  s.graph_id = std::string(header[1]);
  const auto steps = parse_int<std::size_t>(header[2], reader.line());
  const auto nodes = parse_int<std::size_t>(header[3], reader.line());
  s.dt = parse_double(header[4], reader.line());
  if (!(s.dt > 0.0)) fail(reader.line(), "dt must be positive");
  s.fields.resize(static_cast<Eigen::Index>(steps), static_cast<Eigen::Index>(nodes));
  for (std::size_t t = 0; t < steps; ++t) {
    auto tok = reader.require("snapshot line");
    if (tok.size() != nodes) {
      fail(reader.line(), "expected " + std::to_string(nodes) + " values, got " + std::to_string(tok.size()));
    }
    for (std::size_t n = 0; n < nodes; ++n) {
      s.fields(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(n)) = parse_double(tok[n], reader.line());
    }
  }
  std::vector<std::string_view> extra;
  if (reader.next(extra)) fail(reader.line(), "trailing content after series");
  return s;
}

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot open '" + path.string() + "' for writing");
  return os;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open '" + path.string() + "'");
  return is;
}

template <typename Fn>
auto with_path(const std::filesystem::path& path, Fn&& fn) {
  try {
    return fn();
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace

void save_mesh(const std::filesystem::path& path, const Graph& g) {
  auto os = open_out(path);
  write_mesh(os, g);
}

Graph load_mesh(const std::filesystem::path& path) {
  auto is = open_in(path);
  return with_path(path, [&] { return read_mesh(is); });
}

void save_series(const std::filesystem::path& path, const SnapshotSeries& s) {
  auto os = open_out(path);
  write_series(os, s);
}

SnapshotSeries load_series(const std::filesystem::path& path) {
  auto is = open_in(path);
  return with_path(path, [&] { return read_series(is); });
}

}  // namespace meshflow
