#pragma once

#include <filesystem>

#include "geattack/graph/graph.hpp"

namespace geattack::graph {

struct LoadOptions {
  bool row_normalize = false;  // scale each feature row to sum 1 (zero rows untouched)
};

/// Reads edges.tsv, features.csv, labels.tsv and optional splits.json from
/// `dir`. Edges are undirected; duplicates and self-loops are dropped and
/// counted in the log.
Graph load_graph(const std::filesystem::path& dir, const LoadOptions& options = {});

/// Writes the same layout load_graph reads. Reals are written with 17
/// significant digits so a round trip is exact.
void save_graph(const Graph& g, const std::filesystem::path& dir);

/// Parses one numeric CSV file (features.csv layout).
DenseMatrix read_matrix_csv(const std::filesystem::path& file);
void write_matrix_csv(const DenseMatrix& m, const std::filesystem::path& file);

}  // namespace geattack::graph
