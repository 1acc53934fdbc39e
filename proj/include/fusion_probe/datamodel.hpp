#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace fusion_probe {

using Index = Eigen::Index;

/// n rows of d-dimensional vectors keyed by opaque string ids.
struct EmbeddingMatrix {
  std::vector<std::string> ids;
  Eigen::MatrixXd vectors;

  Index rows() const { return vectors.rows(); }
  Index dim() const { return vectors.cols(); }

  /// Throws DataError unless ids are unique, match the row count and d >= 1.
  void validate() const;
};

/// n rows of p Boolean indicator columns keyed by string ids.
struct AttributeMatrix {
  std::vector<std::string> ids;
  std::vector<std::string> column_names;
  Eigen::MatrixXd values;  // entries exactly 0.0 or 1.0

  Index rows() const { return values.rows(); }
  Index cols() const { return values.cols(); }

  void validate() const;
};

/// Attribute rows paired with embedding rows. Row i of the attributes is
/// paired with embedding row alignment[i]. The underlying containers are
/// shared between copies, so permuted replicas never duplicate the data.
class AlignedDataset {
 public:
  AlignedDataset(std::shared_ptr<const AttributeMatrix> attributes,
                 std::shared_ptr<const EmbeddingMatrix> embeddings,
                 std::vector<Index> alignment);

  const AttributeMatrix& attributes() const { return *attributes_; }
  const EmbeddingMatrix& embeddings() const { return *embeddings_; }
  const std::vector<Index>& alignment() const { return alignment_; }
  Index rows() const { return attributes_->rows(); }

  /// Attribute matrix A (n x p), rows in attribute order.
  const Eigen::MatrixXd& design() const { return attributes_->values; }
  /// Embedding matrix U (n x d) with rows reordered to follow the alignment.
  Eigen::MatrixXd targets() const;

  AlignedDataset with_alignment(std::vector<Index> alignment) const;

 private:
  std::shared_ptr<const AttributeMatrix> attributes_;
  std::shared_ptr<const EmbeddingMatrix> embeddings_;
  std::vector<Index> alignment_;
};

/// Restricts both inputs to their common ids, sorted, with identity alignment.
AlignedDataset align(const AttributeMatrix& attrs, const EmbeddingMatrix& embs);

/// Same data with the alignment replaced by a uniform random permutation
/// drawn from a generator seeded with `seed`.
AlignedDataset permute_alignment(const AlignedDataset& ds, std::uint64_t seed);

/// Bidirectional name <-> index map.
class Vocabulary {
 public:
  Vocabulary() = default;
  explicit Vocabulary(std::vector<std::string> names);

  /// Index of `name`, adding it when absent.
  Index intern(const std::string& name);
  std::optional<Index> find(const std::string& name) const;
  const std::string& name(Index i) const { return names_[static_cast<std::size_t>(i)]; }
  const std::vector<std::string>& names() const { return names_; }
  Index size() const { return static_cast<Index>(names_.size()); }

  /// FNV-1a 64 over the names joined by '\n'.
  std::uint64_t digest() const;

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, Index> index_;
};

struct Triple {
  Index head;
  Index relation;
  Index tail;

  friend bool operator==(const Triple&, const Triple&) = default;
};

struct TripleStore {
  Vocabulary entities;
  Vocabulary relations;
  std::vector<Triple> triples;

  std::size_t size() const { return triples.size(); }
  /// Throws DataError on out-of-range indices or duplicate triples.
  void validate() const;
};

// Text formats. All loaders throw DataError with a line (and column)
// reference on malformed input.

EmbeddingMatrix load_embeddings(const std::filesystem::path& path);
EmbeddingMatrix parse_embeddings(const std::string& text);
void save_embeddings(const EmbeddingMatrix& m, const std::filesystem::path& path);
std::string format_embeddings(const EmbeddingMatrix& m);

AttributeMatrix load_attributes(const std::filesystem::path& path);
AttributeMatrix parse_attributes(const std::string& text);
void save_attributes(const AttributeMatrix& m, const std::filesystem::path& path);
std::string format_attributes(const AttributeMatrix& m);

TripleStore load_triples(const std::filesystem::path& path);
TripleStore parse_triples(const std::string& text);
void save_triples(const TripleStore& store, const std::filesystem::path& path);
std::string format_triples(const TripleStore& store);

/// Disjoint, exhaustive, seed-deterministic split. Both halves keep the
/// vocabularies of the full store. The test half gets round(n * fraction)
/// triples, clamped to [1, n - 1] when n >= 2.
std::pair<TripleStore, TripleStore> split_triples(const TripleStore& store, double test_fraction,
                                                  std::uint64_t seed);

/// Numeric value of every relation name ("1".."5" for ratings), or nullopt
/// when some relation name is not a number.
std::optional<std::vector<double>> numeric_relation_values(const Vocabulary& relations);

/// Shortest round-trip decimal for a double (17 significant digits).
std::string format_double(double v);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& contents);

/// FNV-1a 64-bit hash, hex encoded.
std::string fnv1a_hex(const std::string& bytes);
std::uint64_t fnv1a(const std::string& bytes);

}  // namespace fusion_probe
