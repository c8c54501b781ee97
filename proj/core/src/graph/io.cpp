#include "geattack/graph/io.hpp"

#include <spdlog/spdlog.h>

#include <charconv>
#include <cstdio>
#include <fstream>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>
#include <string>
#include <string_view>

namespace geattack::graph {

namespace {

namespace fs = std::filesystem;

std::ifstream open_input(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw GraphError("cannot open " + file.string());
  return in;
}

std::ofstream open_output(const fs::path& file) {
  std::ofstream out(file);
  if (!out) throw GraphError("cannot write " + file.string());
  return out;
}

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string where(const fs::path& file, std::size_t line) {
  return file.filename().string() + ":" + std::to_string(line);
}

long long parse_int(std::string_view tok, const fs::path& file, std::size_t line) {
  long long v = 0;
  auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || p != tok.data() + tok.size())
    throw GraphError(where(file, line) + ": '" + std::string(tok) + "' is not an integer");
  return v;
}

double parse_real(std::string_view tok, const fs::path& file, std::size_t line) {
  tok = trim(tok);
  double v = 0;
  auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || p != tok.data() + tok.size())
    throw GraphError(where(file, line) + ": '" + std::string(tok) + "' is not a number");
  return v;
}

std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

DenseMatrix read_matrix_csv(const fs::path& file) {
  auto in = open_input(file);
  std::vector<double> data;
  std::size_t rows = 0, cols = 0, lineno = 0;
  std::string line;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view s = trim(line);
    if (s.empty()) continue;
    std::size_t count = 0;
    while (true) {
      const auto comma = s.find(',');
      data.push_back(parse_real(s.substr(0, comma), file, lineno));
      ++count;
      if (comma == std::string_view::npos) break;
      s.remove_prefix(comma + 1);
    }
    if (rows == 0) cols = count;
    if (count != cols)
      throw GraphError(where(file, lineno) + ": expected " + std::to_string(cols) +
                       " columns, found " + std::to_string(count));
    ++rows;
  }
  return DenseMatrix(rows, cols, std::move(data));
}

void write_matrix_csv(const DenseMatrix& m, const fs::path& file) {
  auto out = open_output(file);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto row = m.row(i);
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (j) out << ',';
      out << format_real(row[j]);
    }
    out << '\n';
  }
}

Graph load_graph(const fs::path& dir, const LoadOptions& options) {
  for (const char* name : {"edges.tsv", "features.csv", "labels.tsv"})
    if (!fs::exists(dir / name)) throw GraphError("missing " + (dir / name).string());

  auto features = std::make_shared<DenseMatrix>(read_matrix_csv(dir / "features.csv"));

  Graph g;
  {
    auto in = open_input(dir / "labels.tsv");
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      auto s = trim(line);
      if (s.empty()) continue;
      const long long c = parse_int(s, dir / "labels.tsv", lineno);
      if (c < 0) throw GraphError(where(dir / "labels.tsv", lineno) + ": negative class id");
      g.labels.push_back(static_cast<int>(c));
    }
  }
  const std::size_t n = g.labels.size();
  if (features->rows() != n)
    throw GraphError("features.csv has " + std::to_string(features->rows()) +
                     " rows but labels.tsv has " + std::to_string(n));
  for (int c : g.labels) g.num_classes = std::max(g.num_classes, c + 1);

  g.adjacency = DenseMatrix(n, n);
  std::size_t self_loops = 0, duplicates = 0;
  {
    const fs::path file = dir / "edges.tsv";
    auto in = open_input(file);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      std::istringstream tokens{std::string(trim(line))};
      std::string a, b, extra;
      if (!(tokens >> a)) continue;
      if (!(tokens >> b) || (tokens >> extra))
        throw GraphError(where(file, lineno) + ": expected two node ids");
      const long long u = parse_int(a, file, lineno), v = parse_int(b, file, lineno);
      for (long long id : {u, v})
        if (id < 0 || static_cast<std::size_t>(id) >= n)
          throw GraphError(where(file, lineno) + ": node id " + std::to_string(id) +
                           " out of range [0, " + std::to_string(n) + ")");
      if (u == v) {
        ++self_loops;
        continue;
      }
      double& entry = g.adjacency(u, v);
      if (entry != 0.0) {
        ++duplicates;
        continue;
      }
      entry = 1.0;
      g.adjacency(v, u) = 1.0;
    }
  }
  if (self_loops || duplicates)
    spdlog::info("load_graph {}: dropped {} self-loops and {} duplicate edges", dir.string(),
                 self_loops, duplicates);

  if (options.row_normalize) {
    for (std::size_t i = 0; i < n; ++i) {
      auto row = features->row(i);
      double s = 0;
      for (double x : row) s += x;
      if (s != 0.0)
        for (double& x : row) x /= s;
    }
  }
  g.features = std::move(features);

  if (fs::exists(dir / "splits.json")) {
    auto in = open_input(dir / "splits.json");
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw GraphError("splits.json: " + std::string(e.what()));
    }
    std::vector<int> seen(n, 0);
    g.split.assign(n, Split::Test);
    for (auto [key, tag] : {std::pair{"train", Split::Train}, std::pair{"val", Split::Val},
                            std::pair{"test", Split::Test}}) {
      if (!j.contains(key)) throw GraphError(std::string("splits.json: missing '") + key + "'");
      for (const auto& id : j.at(key)) {
        if (!id.is_number_integer()) throw GraphError("splits.json: non-integer node id");
        const auto v = id.get<long long>();
        if (v < 0 || static_cast<std::size_t>(v) >= n)
          throw GraphError("splits.json: node id " + std::to_string(v) + " out of range");
        ++seen[v];
        g.split[v] = tag;
      }
    }
    for (std::size_t i = 0; i < n; ++i)
      if (seen[i] != 1)
        throw GraphError("splits.json: node " + std::to_string(i) + " has " +
                         std::to_string(seen[i]) + " split tags");
  }
  validate(g);
  return g;
}

void save_graph(const Graph& g, const fs::path& dir) {
  validate(g);
  fs::create_directories(dir);
  {
    auto out = open_output(dir / "edges.tsv");
    for (const Edge& e : g.edges()) out << e.u << '\t' << e.v << '\n';
  }
  write_matrix_csv(*g.features, dir / "features.csv");
  {
    auto out = open_output(dir / "labels.tsv");
    for (int c : g.labels) out << c << '\n';
  }
  if (g.has_splits()) {
    nlohmann::json j = {{"train", g.nodes_in(Split::Train)},
                        {"val", g.nodes_in(Split::Val)},
                        {"test", g.nodes_in(Split::Test)}};
    open_output(dir / "splits.json") << j.dump() << '\n';
  } else if (fs::exists(dir / "splits.json")) {
    fs::remove(dir / "splits.json");
  }
}

}  // namespace geattack::graph
