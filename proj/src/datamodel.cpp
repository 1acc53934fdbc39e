#include "fusion_probe/datamodel.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <string_view>
#include <unordered_set>

#include "fusion_probe/error.hpp"
#include "fusion_probe/random.hpp"

namespace fusion_probe {
namespace {

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    start = end + 1;
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  return lines;
}

std::vector<std::string_view> split_whitespace(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

std::vector<std::string_view> split_on(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t end = line.find(sep, start);
    if (end == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, end - start));
    start = end + 1;
  }
}

std::string where(std::size_t line_no) { return "line " + std::to_string(line_no); }

bool parse_double(std::string_view s, double& out) {
  const char* first = s.data();
  const char* last = s.data() + s.size();
  const auto res = std::from_chars(first, last, out);
  return res.ec == std::errc() && res.ptr == last;
}

bool parse_count(std::string_view s, long long& out) {
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size() && out >= 0;
}

template <class Ids>
void require_unique(const Ids& ids, const char* what) {
  std::unordered_set<std::string_view> seen;
  for (const auto& id : ids) {
    if (!seen.insert(id).second) throw DataError(std::string(what) + " '" + id + "' is duplicated");
  }
}

}  // namespace

std::string format_double(double v) {
  char buf[32];
  const int len = std::snprintf(buf, sizeof buf, "%.17g", v);
  return std::string(buf, static_cast<std::size_t>(len));
}

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string fnv1a_hex(const std::string& bytes) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(bytes)));
  return buf;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << contents;
  if (!out) throw DataError("write failed for " + path.string());
}

// ---------------------------------------------------------------------------
// Embeddings

void EmbeddingMatrix::validate() const {
  if (static_cast<Index>(ids.size()) != vectors.rows()) {
    throw DataError("embedding ids (" + std::to_string(ids.size()) + ") and rows (" +
                    std::to_string(vectors.rows()) + ") disagree");
  }
  if (vectors.cols() < 1) throw DataError("embedding dimension must be >= 1");
  require_unique(ids, "embedding id");
  for (const auto& id : ids) {
    if (id.empty() || id.find_first_of(" \t\r\n") != std::string::npos) {
      throw DataError("embedding id '" + id + "' is empty or contains whitespace");
    }
  }
  if (!vectors.allFinite()) throw DataError("embedding contains non-finite values");
}

EmbeddingMatrix parse_embeddings(const std::string& text) {
  const auto lines = split_lines(text);
  if (lines.empty()) throw DataError("line 1: missing 'n d' header");
  const auto header = split_whitespace(lines[0]);
  long long n = 0, d = 0;
  if (header.size() != 2 || !parse_count(header[0], n) || !parse_count(header[1], d)) {
    throw DataError("line 1: header must be 'n d'");
  }
  if (d < 1) throw DataError("line 1: dimension must be >= 1");
  if (static_cast<long long>(lines.size()) - 1 != n) {
    throw DataError("line 1: header declares " + std::to_string(n) + " rows but file has " +
                    std::to_string(lines.size() - 1));
  }
  EmbeddingMatrix m;
  m.ids.reserve(static_cast<std::size_t>(n));
  m.vectors.resize(n, d);
  std::unordered_set<std::string> seen;
  for (long long r = 0; r < n; ++r) {
    const std::size_t line_no = static_cast<std::size_t>(r) + 2;
    const auto tokens = split_whitespace(lines[static_cast<std::size_t>(r) + 1]);
    if (static_cast<long long>(tokens.size()) != d + 1) {
      throw DataError(where(line_no) + ": expected id and " + std::to_string(d) + " values, got " +
                      std::to_string(tokens.empty() ? 0 : tokens.size() - 1) + " values");
    }
    std::string id(tokens[0]);
    if (!seen.insert(id).second) throw DataError(where(line_no) + ": duplicate id '" + id + "'");
    for (long long c = 0; c < d; ++c) {
      double v = 0.0;
      if (!parse_double(tokens[static_cast<std::size_t>(c) + 1], v) || !std::isfinite(v)) {
        throw DataError(where(line_no) + ": bad value in column " + std::to_string(c + 1));
      }
      m.vectors(r, c) = v;
    }
    m.ids.push_back(std::move(id));
  }
  return m;
}

EmbeddingMatrix load_embeddings(const std::filesystem::path& path) {
  try {
    return parse_embeddings(read_file(path));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::string format_embeddings(const EmbeddingMatrix& m) {
  std::string out = std::to_string(m.rows()) + " " + std::to_string(m.dim()) + "\n";
  for (Index r = 0; r < m.rows(); ++r) {
    out += m.ids[static_cast<std::size_t>(r)];
    for (Index c = 0; c < m.dim(); ++c) {
      out += ' ';
      out += format_double(m.vectors(r, c));
    }
    out += '\n';
  }
  return out;
}

void save_embeddings(const EmbeddingMatrix& m, const std::filesystem::path& path) {
  m.validate();
  write_file(path, format_embeddings(m));
}

// ---------------------------------------------------------------------------
// Attributes

void AttributeMatrix::validate() const {
  if (static_cast<Index>(ids.size()) != values.rows()) throw DataError("attribute ids and rows disagree");
  if (static_cast<Index>(column_names.size()) != values.cols()) {
    throw DataError("attribute column names and columns disagree");
  }
  require_unique(ids, "attribute id");
  require_unique(column_names, "attribute column");
  for (Index r = 0; r < values.rows(); ++r) {
    for (Index c = 0; c < values.cols(); ++c) {
      if (values(r, c) != 0.0 && values(r, c) != 1.0) {
        throw DataError("attribute cell (" + std::to_string(r) + ", " + std::to_string(c) +
                        ") is not 0/1");
      }
    }
  }
}

AttributeMatrix parse_attributes(const std::string& text) {
  const auto lines = split_lines(text);
  if (lines.empty()) throw DataError("line 1: missing header");
  const auto header = split_on(lines[0], ',');
  if (header.empty() || header[0] != "id") throw DataError("line 1: first column must be 'id'");

  AttributeMatrix m;
  for (std::size_t c = 1; c < header.size(); ++c) m.column_names.emplace_back(header[c]);
  require_unique(m.column_names, "attribute column");
  const auto p = static_cast<Index>(m.column_names.size());
  const auto n = static_cast<Index>(lines.size() - 1);
  m.values.resize(n, p);
  std::unordered_set<std::string> seen;
  for (Index r = 0; r < n; ++r) {
    const std::size_t line_no = static_cast<std::size_t>(r) + 2;
    const auto cells = split_on(lines[static_cast<std::size_t>(r) + 1], ',');
    if (static_cast<Index>(cells.size()) != p + 1) {
      throw DataError(where(line_no) + ": expected " + std::to_string(p + 1) + " cells, got " +
                      std::to_string(cells.size()));
    }
    std::string id(cells[0]);
    if (id.empty()) throw DataError(where(line_no) + ": empty id");
    if (!seen.insert(id).second) throw DataError(where(line_no) + ": duplicate id '" + id + "'");
    for (Index c = 0; c < p; ++c) {
      const auto cell = cells[static_cast<std::size_t>(c) + 1];
      if (cell == "0") {
        m.values(r, c) = 0.0;
      } else if (cell == "1") {
        m.values(r, c) = 1.0;
      } else {
        throw DataError(where(line_no) + ", column " + std::to_string(c + 2) + " ('" +
                        m.column_names[static_cast<std::size_t>(c)] + "'): cell '" +
                        std::string(cell) + "' is not 0 or 1");
      }
    }
    m.ids.push_back(std::move(id));
  }
  return m;
}

AttributeMatrix load_attributes(const std::filesystem::path& path) {
  try {
    return parse_attributes(read_file(path));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::string format_attributes(const AttributeMatrix& m) {
  std::string out = "id";
  for (const auto& c : m.column_names) out += "," + c;
  out += '\n';
  for (Index r = 0; r < m.rows(); ++r) {
    out += m.ids[static_cast<std::size_t>(r)];
    for (Index c = 0; c < m.cols(); ++c) out += m.values(r, c) != 0.0 ? ",1" : ",0";
    out += '\n';
  }
  return out;
}

void save_attributes(const AttributeMatrix& m, const std::filesystem::path& path) {
  m.validate();
  write_file(path, format_attributes(m));
}

// ---------------------------------------------------------------------------
// Alignment

AlignedDataset::AlignedDataset(std::shared_ptr<const AttributeMatrix> attributes,
                               std::shared_ptr<const EmbeddingMatrix> embeddings,
                               std::vector<Index> alignment)
    : attributes_(std::move(attributes)),
      embeddings_(std::move(embeddings)),
      alignment_(std::move(alignment)) {
  const Index n = attributes_->rows();
  if (embeddings_->rows() != n || static_cast<Index>(alignment_.size()) != n) {
    throw ArgumentError("aligned dataset: row counts disagree");
  }
  std::vector<char> hit(static_cast<std::size_t>(n), 0);
  for (Index j : alignment_) {
    if (j < 0 || j >= n || hit[static_cast<std::size_t>(j)]) {
      throw ArgumentError("aligned dataset: alignment is not a permutation");
    }
    hit[static_cast<std::size_t>(j)] = 1;
  }
}

Eigen::MatrixXd AlignedDataset::targets() const {
  return embeddings_->vectors(alignment_, Eigen::all);
}

AlignedDataset AlignedDataset::with_alignment(std::vector<Index> alignment) const {
  return AlignedDataset(attributes_, embeddings_, std::move(alignment));
}

AlignedDataset align(const AttributeMatrix& attrs, const EmbeddingMatrix& embs) {
  std::unordered_map<std::string_view, Index> emb_row;
  for (std::size_t i = 0; i < embs.ids.size(); ++i) emb_row.emplace(embs.ids[i], static_cast<Index>(i));

  std::vector<std::pair<std::string_view, Index>> common;  // id, attribute row
  for (std::size_t i = 0; i < attrs.ids.size(); ++i) {
    if (emb_row.count(attrs.ids[i])) common.emplace_back(attrs.ids[i], static_cast<Index>(i));
  }
  if (common.empty()) throw DataError("attribute and embedding ids do not intersect");
  std::sort(common.begin(), common.end());

  auto a = std::make_shared<AttributeMatrix>();
  auto e = std::make_shared<EmbeddingMatrix>();
  const auto n = static_cast<Index>(common.size());
  a->column_names = attrs.column_names;
  a->values.resize(n, attrs.cols());
  e->vectors.resize(n, embs.dim());
  for (Index i = 0; i < n; ++i) {
    const auto& [id, arow] = common[static_cast<std::size_t>(i)];
    a->ids.emplace_back(id);
    e->ids.emplace_back(id);
    a->values.row(i) = attrs.values.row(arow);
    e->vectors.row(i) = embs.vectors.row(emb_row.at(id));
  }
  std::vector<Index> identity(static_cast<std::size_t>(n));
  std::iota(identity.begin(), identity.end(), Index{0});
  return AlignedDataset(std::move(a), std::move(e), std::move(identity));
}

AlignedDataset permute_alignment(const AlignedDataset& ds, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Index> perm(static_cast<std::size_t>(ds.rows()));
  std::iota(perm.begin(), perm.end(), Index{0});
  rng.shuffle(perm);
  return ds.with_alignment(std::move(perm));
}

// ---------------------------------------------------------------------------
// Triples

Vocabulary::Vocabulary(std::vector<std::string> names) {
  for (auto& n : names) {
    if (find(n)) throw DataError("vocabulary entry '" + n + "' is duplicated");
    intern(n);
  }
}

Index Vocabulary::intern(const std::string& name) {
  const auto it = index_.find(name);
  if (it != index_.end()) return it->second;
  const auto i = static_cast<Index>(names_.size());
  names_.push_back(name);
  index_.emplace(name, i);
  return i;
}

std::optional<Index> Vocabulary::find(const std::string& name) const {
  const auto it = index_.find(name);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::uint64_t Vocabulary::digest() const {
  std::string joined;
  for (const auto& n : names_) {
    joined += n;
    joined += '\n';
  }
  return fnv1a(joined);
}

namespace {

struct TripleHash {
  std::size_t operator()(const Triple& t) const {
    std::uint64_t h = mix_seed(static_cast<std::uint64_t>(t.head));
    h = mix_seed(h ^ static_cast<std::uint64_t>(t.relation));
    return static_cast<std::size_t>(mix_seed(h ^ static_cast<std::uint64_t>(t.tail)));
  }
};

}  // namespace

void TripleStore::validate() const {
  std::unordered_set<Triple, TripleHash> seen;
  for (const auto& t : triples) {
    if (t.head < 0 || t.head >= entities.size() || t.tail < 0 || t.tail >= entities.size() ||
        t.relation < 0 || t.relation >= relations.size()) {
      throw DataError("triple index out of range");
    }
    if (!seen.insert(t).second) {
      throw DataError("duplicate triple (" + entities.name(t.head) + ", " +
                      relations.name(t.relation) + ", " + entities.name(t.tail) + ")");
    }
  }
}

TripleStore parse_triples(const std::string& text) {
  TripleStore store;
  std::unordered_set<Triple, TripleHash> seen;
  const auto lines = split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto cols = split_on(lines[i], '\t');
    if (cols.size() != 3 || cols[0].empty() || cols[1].empty() || cols[2].empty()) {
      throw DataError(where(i + 1) + ": expected head<TAB>relation<TAB>tail");
    }
    const Triple t{store.entities.intern(std::string(cols[0])),
                   store.relations.intern(std::string(cols[1])),
                   store.entities.intern(std::string(cols[2]))};
    if (!seen.insert(t).second) throw DataError(where(i + 1) + ": duplicate triple");
    store.triples.push_back(t);
  }
  return store;
}

TripleStore load_triples(const std::filesystem::path& path) {
  try {
    return parse_triples(read_file(path));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::string format_triples(const TripleStore& store) {
  std::string out;
  for (const auto& t : store.triples) {
    out += store.entities.name(t.head);
    out += '\t';
    out += store.relations.name(t.relation);
    out += '\t';
    out += store.entities.name(t.tail);
    out += '\n';
  }
  return out;
}

void save_triples(const TripleStore& store, const std::filesystem::path& path) {
  store.validate();
  write_file(path, format_triples(store));
}

std::pair<TripleStore, TripleStore> split_triples(const TripleStore& store, double test_fraction,
                                                  std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw ArgumentError("split_triples: test fraction must lie in (0, 1)");
  }
  const std::size_t n = store.size();
  std::size_t n_test = static_cast<std::size_t>(std::llround(static_cast<double>(n) * test_fraction));
  if (n >= 2) n_test = std::clamp<std::size_t>(n_test, 1, n - 1);

  Rng rng(seed);
  auto order = rng.permutation(n);
  std::vector<char> is_test(n, 0);
  for (std::size_t i = 0; i < n_test; ++i) is_test[order[i]] = 1;

  TripleStore train{store.entities, store.relations, {}};
  TripleStore test{store.entities, store.relations, {}};
  for (std::size_t i = 0; i < n; ++i) (is_test[i] ? test : train).triples.push_back(store.triples[i]);
  return {std::move(train), std::move(test)};
}

std::optional<std::vector<double>> numeric_relation_values(const Vocabulary& relations) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(relations.size()));
  for (const auto& name : relations.names()) {
    double v = 0.0;
    if (!parse_double(name, v) || !std::isfinite(v)) return std::nullopt;
    out.push_back(v);
  }
  return out;
}

}  // namespace fusion_probe
