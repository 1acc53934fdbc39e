#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "fusion_probe/datamodel.hpp"

namespace fusion_probe::corpus {

inline constexpr const char* kDefaultTemplate = "The {sbj} {verb} on the {obj}.";

struct SvoSpec {
  std::vector<std::string> subjects;
  std::vector<std::string> verbs;
  std::vector<std::string> objects;
  std::string sentence_template = kDefaultTemplate;

  /// Throws ArgumentError on empty or non-unique lists and on templates that
  /// do not contain each placeholder exactly once.
  void validate() const;
};

/// Ten entries per category; our own list, single words throughout.
SvoSpec default_svo_spec();

struct Sentence {
  std::string id;    // "s{i}_v{j}_o{k}"
  std::string text;
};

struct SvoCorpus {
  std::vector<Sentence> sentences;
  AttributeMatrix design;  // columns "sbj=...", "verb=...", "obj=..."
  std::vector<std::string> warnings;
};

/// Every (subject, verb, object) combination in (i, j, k) index order.
SvoCorpus generate_svo(const SvoSpec& spec);

std::string format_sentences(const std::vector<Sentence>& sentences);

/// Categorical table: id column plus named string columns.
struct CategoricalTable {
  std::vector<std::string> ids;
  std::vector<std::string> column_names;
  std::vector<std::vector<std::string>> cells;  // rows x columns, "" = missing
};

CategoricalTable parse_categorical(const std::string& csv_text);
CategoricalTable load_categorical(const std::filesystem::path& path);

/// One indicator column "col=value" per observed value of each selected
/// column, ordered by the selection order and then by value.
AttributeMatrix one_hot_encode(const CategoricalTable& table, const std::vector<std::string>& columns);

/// Reads one entry per non-empty line.
std::vector<std::string> load_word_list(const std::filesystem::path& path);

}  // namespace fusion_probe::corpus
