#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>

#include "meshflow/graph.hpp"

namespace meshflow {

/// Shortest decimal representation that parses back to the same double.
std::string format_double(double v);
double parse_double(std::string_view token, std::size_t line);

// Mesh text format:
//   mesh <num_nodes> <num_undirected_edges>
//   v <x> <y>        (one per node)
//   e <i> <j>        (one per undirected pair, i < j)
void write_mesh(std::ostream& os, const Graph& g);
Graph read_mesh(std::istream& is);

// Snapshot text format:
//   series <graph_id> <T> <N> <dt>
//   T lines of N space-separated values
void write_series(std::ostream& os, const SnapshotSeries& s);
SnapshotSeries read_series(std::istream& is);

void save_mesh(const std::filesystem::path& path, const Graph& g);
Graph load_mesh(const std::filesystem::path& path);
void save_series(const std::filesystem::path& path, const SnapshotSeries& s);
SnapshotSeries load_series(const std::filesystem::path& path);

}  // namespace meshflow
