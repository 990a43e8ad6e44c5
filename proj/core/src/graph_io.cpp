#include "muse/graph_io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <queue>
#include <sstream>

#include <json.hpp>

#include "muse/errors.hpp"

namespace muse {

namespace fs = std::filesystem;
using nlohmann::json;

static_assert(std::endian::native == std::endian::little,
              "f32 container I/O assumes a little-endian host");

namespace {

std::string read_text(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw DatasetError("cannot open " + file.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Splits on '\n', dropping a trailing '\r' so CRLF files parse like LF files.
std::vector<std::string_view> lines_of(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    out.push_back(line);
    start = end + 1;
  }
  return out;
}

bool skippable(std::string_view line) {
  const auto pos = line.find_first_not_of(" \t");
  return pos == std::string_view::npos || line[pos] == '#';
}

std::vector<std::string_view> fields_of(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == '\t' || line[i] == ' ')) ++i;
    if (i >= line.size()) break;
    std::size_t j = i;
    while (j < line.size() && line[j] != '\t' && line[j] != ' ') ++j;
    out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

template <typename T>
T parse_number(std::string_view s, const fs::path& file, std::size_t line_no) {
  T v{};
  const char* b = s.data();
  const char* e = s.data() + s.size();
  if (!s.empty() && *b == '+') ++b;
  auto [ptr, ec] = std::from_chars(b, e, v);
  if (ec != std::errc() || ptr != e) {
    throw DatasetError(file.string() + ":" + std::to_string(line_no) + ": not a number: '" +
                       std::string(s) + "'");
  }
  return v;
}

std::vector<std::size_t> id_list(const json& j, const char* key, std::size_t n,
                                 const fs::path& file) {
  std::vector<std::size_t> out;
  if (!j.contains(key)) return out;
  for (const auto& v : j.at(key)) {
    if (!v.is_number_integer() || v.get<long long>() < 0 ||
        static_cast<std::size_t>(v.get<long long>()) >= n) {
      throw DatasetError(file.string() + ": id out of range in '" + key + "'");
    }
    out.push_back(v.get<std::size_t>());
  }
  return out;
}

DenseMatrix read_features_csv(const fs::path& file) {
  const std::string text = read_text(file);
  std::vector<double> values;
  std::size_t rows = 0, cols = 0, line_no = 0;
  for (std::string_view line : lines_of(text)) {
    ++line_no;
    if (skippable(line)) continue;
    std::size_t count = 0;
    std::size_t start = 0;
    while (true) {
      std::size_t end = line.find(',', start);
      std::string_view tok = line.substr(start, end == std::string_view::npos ? line.npos : end - start);
      while (!tok.empty() && (tok.front() == ' ' || tok.front() == '\t')) tok.remove_prefix(1);
      while (!tok.empty() && (tok.back() == ' ' || tok.back() == '\t')) tok.remove_suffix(1);
      const double v = parse_number<double>(tok, file, line_no);
      if (!std::isfinite(v)) {
        throw DatasetError(file.string() + ":" + std::to_string(line_no) + ": non-finite feature");
      }
      values.push_back(v);
      ++count;
      if (end == std::string_view::npos) break;
      start = end + 1;
    }
    if (rows == 0) cols = count;
    if (count != cols) {
      throw DatasetError(file.string() + ":" + std::to_string(line_no) + ": expected " +
                         std::to_string(cols) + " columns, found " + std::to_string(count));
    }
    ++rows;
  }
  return DenseMatrix(rows, cols, std::move(values));
}

void write_atomic(const fs::path& file, const std::string& content) {
  const fs::path tmp = file.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DatasetError("cannot write " + tmp.string());
    out << content;
    if (!out) throw DatasetError("write failed for " + tmp.string());
  }
  fs::rename(tmp, file);
}

}  // namespace

DenseMatrix read_f32_matrix(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw DatasetError("cannot open " + file.string());
  std::uint32_t header[2];
  if (!in.read(reinterpret_cast<char*>(header), sizeof header)) {
    throw DatasetError(file.string() + ": truncated header");
  }
  const std::size_t rows = header[0], cols = header[1];
  std::vector<float> raw(rows * cols);
  if (!in.read(reinterpret_cast<char*>(raw.data()),
               static_cast<std::streamsize>(raw.size() * sizeof(float)))) {
    throw DatasetError(file.string() + ": truncated payload for " + std::to_string(rows) + "x" +
                       std::to_string(cols));
  }
  std::vector<double> values(raw.begin(), raw.end());
  for (double v : values) {
    if (!std::isfinite(v)) throw DatasetError(file.string() + ": non-finite value");
  }
  return DenseMatrix(rows, cols, std::move(values));
}

void write_f32_matrix(const fs::path& file, const DenseMatrix& m) {
  std::string buf(8 + m.size() * sizeof(float), '\0');
  const std::uint32_t header[2] = {static_cast<std::uint32_t>(m.rows()),
                                   static_cast<std::uint32_t>(m.cols())};
  std::memcpy(buf.data(), header, sizeof header);
  for (std::size_t k = 0; k < m.size(); ++k) {
    const float f = static_cast<float>(m.data()[k]);
    std::memcpy(buf.data() + 8 + k * sizeof(float), &f, sizeof f);
  }
  write_atomic(file, buf);
}

SparseMatrix adjacency_from_edges(std::size_t n,
                                  const std::vector<std::pair<std::size_t, std::size_t>>& edges,
                                  std::vector<std::string>* warnings) {
  std::vector<Triplet> trip;
  trip.reserve(edges.size() * 2);
  for (auto [u, v] : edges) {
    if (u >= n || v >= n) {
      throw DatasetError("edge (" + std::to_string(u) + "," + std::to_string(v) +
                         ") references a node outside [0," + std::to_string(n) + ")");
    }
    if (u == v) {
      if (warnings) warnings->push_back("self-loop on node " + std::to_string(u) + " dropped");
      continue;
    }
    trip.push_back({u, v, 1.0});
    trip.push_back({v, u, 1.0});
  }
  SparseMatrix summed = SparseMatrix::from_triplets(n, n, std::move(trip));
  std::vector<double> ones(summed.nnz(), 1.0);
  return SparseMatrix(n, n, summed.row_offsets(), summed.col_indices(), std::move(ones));
}

GraphDataset load_dataset(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DatasetError("dataset directory not found: " + dir.string());
  GraphDataset ds;
  ds.name = dir.filename().string();
  if (ds.name.empty()) ds.name = dir.parent_path().filename().string();

  std::optional<json> meta;
  if (fs::exists(dir / "meta.json")) {
    try {
      meta = json::parse(read_text(dir / "meta.json"));
    } catch (const json::exception& e) {
      throw DatasetError("meta.json: " + std::string(e.what()));
    }
  }

  if (fs::exists(dir / "features.csv")) {
    ds.features = read_features_csv(dir / "features.csv");
  } else if (fs::exists(dir / "features.f32")) {
    ds.features = read_f32_matrix(dir / "features.f32");
  } else {
    throw DatasetError("missing features.csv or features.f32 in " + dir.string());
  }
  ds.node_count = ds.features.rows();
  const std::size_t n = ds.node_count;

  const fs::path edge_file = dir / "edges.tsv";
  if (!fs::exists(edge_file)) throw DatasetError("missing " + edge_file.string());
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  {
    const std::string text = read_text(edge_file);
    std::size_t line_no = 0;
    for (std::string_view line : lines_of(text)) {
      ++line_no;
      if (skippable(line)) continue;
      const auto f = fields_of(line);
      if (f.size() != 2) {
        throw DatasetError(edge_file.string() + ":" + std::to_string(line_no) +
                           ": expected 'src<TAB>dst'");
      }
      const auto u = parse_number<std::size_t>(f[0], edge_file, line_no);
      const auto v = parse_number<std::size_t>(f[1], edge_file, line_no);
      if (u >= n || v >= n) {
        throw DatasetError(edge_file.string() + ":" + std::to_string(line_no) + ": node id " +
                           std::to_string(std::max(u, v)) + " out of range (|V|=" +
                           std::to_string(n) + ")");
      }
      edges.emplace_back(u, v);
    }
  }
  ds.adjacency = adjacency_from_edges(n, edges, &ds.warnings);

  const fs::path label_file = dir / "labels.tsv";
  if (!fs::exists(label_file)) throw DatasetError("missing " + label_file.string());
  std::optional<int> declared_k;
  if (meta && meta->contains("classes")) declared_k = meta->at("classes").get<int>();
  ds.labels.assign(n, -1);
  {
    const std::string text = read_text(label_file);
    std::size_t line_no = 0;
    for (std::string_view line : lines_of(text)) {
      ++line_no;
      if (skippable(line)) continue;
      const auto f = fields_of(line);
      if (f.size() != 2) {
        throw DatasetError(label_file.string() + ":" + std::to_string(line_no) +
                           ": expected 'node<TAB>class'");
      }
      const auto node = parse_number<std::size_t>(f[0], label_file, line_no);
      const auto cls = parse_number<int>(f[1], label_file, line_no);
      if (node >= n) {
        throw DatasetError(label_file.string() + ":" + std::to_string(line_no) + ": node id " +
                           std::to_string(node) + " out of range");
      }
      if (cls < 0 || (declared_k && cls >= *declared_k)) {
        throw DatasetError(label_file.string() + ":" + std::to_string(line_no) + ": label " +
                           std::to_string(cls) + " outside [0," +
                           std::to_string(declared_k.value_or(0)) + ")");
      }
      ds.labels[node] = cls;
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (ds.labels[i] < 0) throw DatasetError("node " + std::to_string(i) + " has no label");
  }
  const int max_label = n == 0 ? -1 : *std::max_element(ds.labels.begin(), ds.labels.end());
  ds.num_classes = declared_k.value_or(max_label + 1);

  if (meta) {
    auto check = [&](const char* key, std::size_t actual) {
      if (meta->contains(key) && meta->at(key).get<std::size_t>() != actual) {
        throw DatasetError("meta.json: '" + std::string(key) + "' is " +
                           std::to_string(meta->at(key).get<std::size_t>()) +
                           " but the files give " + std::to_string(actual));
      }
    };
    check("nodes", n);
    check("edges", ds.adjacency.nnz());
    check("features", ds.features.cols());
  }

  if (fs::exists(dir / "split.json")) {
    json sj;
    try {
      sj = json::parse(read_text(dir / "split.json"));
    } catch (const json::exception& e) {
      throw DatasetError("split.json: " + std::string(e.what()));
    }
    if (sj.contains("labels_per_class")) {
      ds.labels_per_class = sj.at("labels_per_class").get<std::size_t>();
    }
    if (sj.contains("train") || sj.contains("val") || sj.contains("test")) {
      ds.has_split_lists = true;
      ds.split.train = id_list(sj, "train", n, dir / "split.json");
      ds.split.val = id_list(sj, "val", n, dir / "split.json");
      ds.split.test = id_list(sj, "test", n, dir / "split.json");
      try {
        validate_split(ds.split, n);
      } catch (const ConfigError& e) {
        throw DatasetError("split.json: " + std::string(e.what()));
      }
    }
  }
  return ds;
}

void save_dataset(const GraphDataset& ds, const fs::path& dir, FeatureFormat format) {
  fs::create_directories(dir);
  {
    std::ostringstream os;
    const SparseMatrix& a = ds.adjacency;
    for (std::size_t i = 0; i < a.rows(); ++i) {
      for (std::size_t j : a.row_indices(i)) {
        if (i < j) os << i << '\t' << j << '\n';
      }
    }
    write_atomic(dir / "edges.tsv", os.str());
  }
  {
    std::ostringstream os;
    for (std::size_t i = 0; i < ds.labels.size(); ++i) os << i << '\t' << ds.labels[i] << '\n';
    write_atomic(dir / "labels.tsv", os.str());
  }
  if (format == FeatureFormat::kCsv) {
    std::ostringstream os;
    os << std::setprecision(17);
    for (std::size_t i = 0; i < ds.features.rows(); ++i) {
      const auto r = ds.features.row(i);
      for (std::size_t j = 0; j < r.size(); ++j) os << (j ? "," : "") << r[j];
      os << '\n';
    }
    write_atomic(dir / "features.csv", os.str());
    fs::remove(dir / "features.f32");
  } else {
    write_f32_matrix(dir / "features.f32", ds.features);
    fs::remove(dir / "features.csv");
  }
  json meta = {{"nodes", ds.node_count},
               {"edges", ds.adjacency.nnz()},
               {"features", ds.features.cols()},
               {"classes", ds.num_classes}};
  write_atomic(dir / "meta.json", meta.dump(2) + "\n");
  if (ds.has_split_lists || ds.labels_per_class) {
    json sj = json::object();
    if (ds.has_split_lists) {
      sj["train"] = ds.split.train;
      sj["val"] = ds.split.val;
      sj["test"] = ds.split.test;
    }
    if (ds.labels_per_class) sj["labels_per_class"] = *ds.labels_per_class;
    write_atomic(dir / "split.json", sj.dump() + "\n");
  } else {
    fs::remove(dir / "split.json");
  }
}

SparseMatrix symmetric_normalized(const SparseMatrix& adjacency) {
  const std::size_t n = adjacency.rows();
  std::vector<Triplet> trip;
  trip.reserve(adjacency.nnz() + n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto cols = adjacency.row_indices(i);
    const auto vals = adjacency.row_values(i);
    for (std::size_t k = 0; k < cols.size(); ++k) trip.push_back({i, cols[k], vals[k]});
    trip.push_back({i, i, 1.0});
  }
  SparseMatrix tilde = SparseMatrix::from_triplets(n, n, std::move(trip));
  std::vector<double> inv_sqrt(n);
  for (std::size_t i = 0; i < n; ++i) {
    double d = 0.0;
    for (double v : tilde.row_values(i)) d += v;
    inv_sqrt[i] = 1.0 / std::sqrt(d);
  }
  std::vector<double> vals(tilde.values());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = tilde.row_offsets()[i]; k < tilde.row_offsets()[i + 1]; ++k) {
      // Product order is symmetric in (i, j) so the result is exactly symmetric.
      const std::size_t j = tilde.col_indices()[k];
      vals[k] = vals[k] * (inv_sqrt[std::min(i, j)] * inv_sqrt[std::max(i, j)]);
    }
  }
  return SparseMatrix(n, n, tilde.row_offsets(), tilde.col_indices(), std::move(vals));
}

DenseMatrix row_normalized_latent(const DenseMatrix& a) {
  if (a.rows() != a.cols()) throw DimensionError("row_normalized_latent: not square " + a.shape_string());
  DenseMatrix out = a;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    out(i, i) += 1.0;
    double s = 0.0;
    for (double v : out.row(i)) s += v;
    for (double& v : out.row(i)) v /= s;
  }
  return out;
}

SparseMatrix row_normalized_latent(const SparseMatrix& a) {
  const std::size_t n = a.rows();
  std::vector<Triplet> trip;
  trip.reserve(a.nnz() + n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto cols = a.row_indices(i);
    const auto vals = a.row_values(i);
    for (std::size_t k = 0; k < cols.size(); ++k) trip.push_back({i, cols[k], vals[k]});
    trip.push_back({i, i, 1.0});
  }
  SparseMatrix tilde = SparseMatrix::from_triplets(n, n, std::move(trip));
  std::vector<double> vals(tilde.values());
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (double v : tilde.row_values(i)) s += v;
    for (std::size_t k = tilde.row_offsets()[i]; k < tilde.row_offsets()[i + 1]; ++k) vals[k] /= s;
  }
  return SparseMatrix(n, n, tilde.row_offsets(), tilde.col_indices(), std::move(vals));
}

void row_normalize_features(DenseMatrix& features) {
  for (std::size_t i = 0; i < features.rows(); ++i) {
    double s = 0.0;
    for (double v : features.row(i)) s += std::abs(v);
    if (s == 0.0) continue;
    for (double& v : features.row(i)) v /= s;
  }
}

void validate_split(const Split& split, std::size_t n) {
  std::vector<int> owner(n, -1);
  const std::vector<std::size_t>* lists[] = {&split.train, &split.val, &split.test};
  const char* names[] = {"train", "val", "test"};
  for (int l = 0; l < 3; ++l) {
    for (std::size_t id : *lists[l]) {
      if (id >= n) throw ConfigError(std::string(names[l]) + " id " + std::to_string(id) + " out of range");
      if (owner[id] != -1) {
        throw ConfigError("node " + std::to_string(id) + " appears in both " + names[owner[id]] +
                          " and " + names[l]);
      }
      owner[id] = l;
    }
  }
}

Split sample_labels(const GraphDataset& ds, std::size_t per_class, Rng& rng) {
  const std::size_t n = ds.node_count;
  if (per_class == 0) throw ConfigError("labels per class must be at least 1");
  std::vector<char> reserved(n, 0);
  for (std::size_t id : ds.split.val) reserved[id] = 1;
  if (ds.has_split_lists) {
    for (std::size_t id : ds.split.test) reserved[id] = 1;
  }
  std::vector<std::size_t> pool;
  if (ds.has_split_lists && !ds.split.train.empty()) {
    pool = ds.split.train;
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      if (!reserved[i]) pool.push_back(i);
    }
  }
  std::sort(pool.begin(), pool.end());

  Split out;
  std::vector<char> taken(n, 0);
  for (int c = 0; c < ds.num_classes; ++c) {
    std::vector<std::size_t> candidates;
    for (std::size_t id : pool) {
      if (ds.labels[id] == c) candidates.push_back(id);
    }
    if (candidates.size() < per_class) {
      throw ConfigError("class " + std::to_string(c) + " has " + std::to_string(candidates.size()) +
                        " candidate nodes but " + std::to_string(per_class) + " were requested");
    }
    for (std::size_t id : sample_without_replacement(std::move(candidates), per_class, rng)) {
      out.train.push_back(id);
      taken[id] = 1;
    }
  }
  out.val = ds.split.val;
  for (std::size_t id : out.val) taken[id] = 1;
  if (ds.has_split_lists && !ds.split.test.empty()) {
    out.test = ds.split.test;
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      if (!taken[i]) out.test.push_back(i);
    }
  }
  validate_split(out, n);
  return out;
}

std::vector<std::size_t> k_hop(const SparseMatrix& adjacency, std::size_t node, std::size_t k) {
  const std::size_t n = adjacency.rows();
  if (node >= n) throw DimensionError("k_hop: node " + std::to_string(node) + " out of range");
  std::vector<std::size_t> out;
  if (k == 0) return out;
  std::vector<std::size_t> dist(n, static_cast<std::size_t>(-1));
  std::queue<std::size_t> q;
  dist[node] = 0;
  q.push(node);
  while (!q.empty()) {
    const std::size_t u = q.front();
    q.pop();
    if (dist[u] == k) continue;
    for (std::size_t v : adjacency.row_indices(u)) {
      if (dist[v] != static_cast<std::size_t>(-1)) continue;
      dist[v] = dist[u] + 1;
      out.push_back(v);
      q.push(v);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace muse
