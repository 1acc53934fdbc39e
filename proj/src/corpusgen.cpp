#include "fusion_probe/corpusgen.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

#include "fusion_probe/error.hpp"

namespace fusion_probe::corpus {
namespace {

std::size_t count_occurrences(const std::string& text, const std::string& needle) {
  std::size_t count = 0;
  for (std::size_t pos = text.find(needle); pos != std::string::npos;
       pos = text.find(needle, pos + needle.size())) {
    ++count;
  }
  return count;
}

void check_list(const std::vector<std::string>& list, const char* what) {
  if (list.empty()) throw ArgumentError(std::string(what) + " list is empty");
  std::set<std::string> seen;
  for (const auto& w : list) {
    if (w.empty()) throw ArgumentError(std::string(what) + " list has an empty entry");
    if (!seen.insert(w).second) throw ArgumentError(std::string(what) + " '" + w + "' is repeated");
  }
}

std::string replace_once(std::string text, const std::string& key, const std::string& value) {
  const auto pos = text.find(key);
  return text.replace(pos, key.size(), value);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

void SvoSpec::validate() const {
  check_list(subjects, "subject");
  check_list(verbs, "verb");
  check_list(objects, "object");
  for (const char* key : {"{sbj}", "{verb}", "{obj}"}) {
    const auto n = count_occurrences(sentence_template, key);
    if (n != 1) {
      throw ArgumentError(std::string("template must contain ") + key + " exactly once (found " +
                          std::to_string(n) + ")");
    }
  }
}

SvoSpec default_svo_spec() {
  SvoSpec spec;
  spec.subjects = {"cat", "dog", "bird", "child", "farmer", "teacher", "doctor", "king", "horse", "girl"};
  spec.verbs = {"sat", "slept", "stood", "danced", "waited", "jumped", "rested", "played", "sang", "lay"};
  spec.objects = {"mat", "bed", "floor", "roof", "grass", "table", "chair", "road", "bridge", "rock"};
  return spec;
}

SvoCorpus generate_svo(const SvoSpec& spec) {
  spec.validate();
  SvoCorpus out;
  for (const auto* list : {&spec.subjects, &spec.verbs, &spec.objects}) {
    for (const auto& w : *list) {
      if (w.find(' ') != std::string::npos) {
        out.warnings.push_back("entry '" + w + "' has several words; token counts will vary");
      }
    }
  }

  const auto ns = spec.subjects.size(), nv = spec.verbs.size(), no = spec.objects.size();
  auto& design = out.design;
  for (const auto& w : spec.subjects) design.column_names.push_back("sbj=" + w);
  for (const auto& w : spec.verbs) design.column_names.push_back("verb=" + w);
  for (const auto& w : spec.objects) design.column_names.push_back("obj=" + w);
  const auto rows = static_cast<Index>(ns * nv * no);
  design.values = Eigen::MatrixXd::Zero(rows, static_cast<Index>(ns + nv + no));
  out.sentences.reserve(static_cast<std::size_t>(rows));

  Index row = 0;
  for (std::size_t i = 0; i < ns; ++i) {
    for (std::size_t j = 0; j < nv; ++j) {
      for (std::size_t k = 0; k < no; ++k) {
        std::string id = "s" + std::to_string(i) + "_v" + std::to_string(j) + "_o" + std::to_string(k);
        std::string text = replace_once(spec.sentence_template, "{sbj}", spec.subjects[i]);
        text = replace_once(std::move(text), "{verb}", spec.verbs[j]);
        text = replace_once(std::move(text), "{obj}", spec.objects[k]);
        design.values(row, static_cast<Index>(i)) = 1.0;
        design.values(row, static_cast<Index>(ns + j)) = 1.0;
        design.values(row, static_cast<Index>(ns + nv + k)) = 1.0;
        design.ids.push_back(id);
        out.sentences.push_back({std::move(id), std::move(text)});
        ++row;
      }
    }
  }
  return out;
}

std::string format_sentences(const std::vector<Sentence>& sentences) {
  std::string out;
  for (const auto& s : sentences) out += s.id + "\t" + s.text + "\n";
  return out;
}

CategoricalTable parse_categorical(const std::string& csv_text) {
  std::istringstream in(csv_text);
  std::string line;
  if (!std::getline(in, line)) throw DataError("line 1: missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_csv_line(line);
  if (header.empty() || header[0] != "id") throw DataError("line 1: first column must be 'id'");

  CategoricalTable table;
  table.column_names.assign(header.begin() + 1, header.end());
  std::size_t line_no = 1;
  std::set<std::string> seen;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw DataError("line " + std::to_string(line_no) + ": expected " +
                      std::to_string(header.size()) + " cells, got " + std::to_string(cells.size()));
    }
    if (!seen.insert(cells[0]).second) {
      throw DataError("line " + std::to_string(line_no) + ": duplicate id '" + cells[0] + "'");
    }
    table.ids.push_back(cells[0]);
    table.cells.emplace_back(cells.begin() + 1, cells.end());
  }
  return table;
}

CategoricalTable load_categorical(const std::filesystem::path& path) {
  try {
    return parse_categorical(read_file(path));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

AttributeMatrix one_hot_encode(const CategoricalTable& table, const std::vector<std::string>& columns) {
  if (columns.empty()) throw ArgumentError("one_hot_encode: no columns selected");
  std::vector<std::size_t> source;
  for (const auto& c : columns) {
    const auto it = std::find(table.column_names.begin(), table.column_names.end(), c);
    if (it == table.column_names.end()) throw ArgumentError("one_hot_encode: no column '" + c + "'");
    source.push_back(static_cast<std::size_t>(it - table.column_names.begin()));
  }

  AttributeMatrix out;
  out.ids = table.ids;
  std::vector<std::map<std::string, Index>> offsets(source.size());
  for (std::size_t s = 0; s < source.size(); ++s) {
    std::set<std::string> values;
    for (std::size_t r = 0; r < table.ids.size(); ++r) {
      const auto& v = table.cells[r][source[s]];
      if (v.empty()) {
        throw DataError("row '" + table.ids[r] + "': missing value in column '" + columns[s] + "'");
      }
      values.insert(v);
    }
    for (const auto& v : values) {
      offsets[s][v] = static_cast<Index>(out.column_names.size());
      out.column_names.push_back(columns[s] + "=" + v);
    }
  }
  out.values = Eigen::MatrixXd::Zero(static_cast<Index>(table.ids.size()),
                                     static_cast<Index>(out.column_names.size()));
  for (std::size_t r = 0; r < table.ids.size(); ++r) {
    for (std::size_t s = 0; s < source.size(); ++s) {
      out.values(static_cast<Index>(r), offsets[s].at(table.cells[r][source[s]])) = 1.0;
    }
  }
  return out;
}

std::vector<std::string> load_word_list(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

}  // namespace fusion_probe::corpus
