#include <doctest.h>

#include <set>

#include "fusion_probe/corpusgen.hpp"
#include "fusion_probe/error.hpp"
#include "fusion_probe/random.hpp"

using namespace fusion_probe;
using namespace fusion_probe::corpus;

namespace {

SvoSpec sized_spec(int s, int v, int o) {
  SvoSpec spec;
  for (int i = 0; i < s; ++i) spec.subjects.push_back("s" + std::to_string(i));
  for (int i = 0; i < v; ++i) spec.verbs.push_back("v" + std::to_string(i));
  for (int i = 0; i < o; ++i) spec.objects.push_back("o" + std::to_string(i));
  return spec;
}

}  // namespace

TEST_CASE("default corpus is the full 10 x 10 x 10 factorial") {
  const auto corpus = generate_svo(default_svo_spec());
  CHECK(corpus.sentences.size() == 1000);
  CHECK(corpus.design.rows() == 1000);
  CHECK(corpus.design.cols() == 30);
  CHECK(corpus.sentences.front().text == "The cat sat on the mat.");
  CHECK(corpus.sentences.front().id == "s0_v0_o0");
  CHECK(corpus.design.column_names.front() == "sbj=cat");
  CHECK(corpus.design.column_names.back() == "obj=rock");
  CHECK(corpus.warnings.empty());
  CHECK_NOTHROW(corpus.design.validate());
}

TEST_CASE("single-entry lists give one sentence") {
  SvoSpec spec;
  spec.subjects = {"cat"};
  spec.verbs = {"sat"};
  spec.objects = {"mat"};
  const auto corpus = generate_svo(spec);
  REQUIRE(corpus.sentences.size() == 1);
  CHECK(corpus.sentences[0].text == "The cat sat on the mat.");
  CHECK(corpus.design.values.row(0).sum() == 3.0);
}

TEST_CASE("design matrix structure holds for random list sizes") {
  Rng rng(61);
  for (int trial = 0; trial < 20; ++trial) {
    const int s = 1 + static_cast<int>(rng.below(6));
    const int v = 1 + static_cast<int>(rng.below(6));
    const int o = 1 + static_cast<int>(rng.below(6));
    const auto corpus = generate_svo(sized_spec(s, v, o));
    const auto& m = corpus.design.values;
    const Index rows = s * v * o;
    REQUIRE(m.rows() == rows);
    REQUIRE(m.cols() == s + v + o);
    CHECK((m.rowwise().sum().array() == 3.0).all());
    // Each word appears in |corpus| / |its list| sentences.
    CHECK((m.leftCols(s).colwise().sum().array() == double(rows / s)).all());
    CHECK((m.middleCols(s, v).colwise().sum().array() == double(rows / v)).all());
    CHECK((m.rightCols(o).colwise().sum().array() == double(rows / o)).all());
    std::set<std::string> ids;
    for (const auto& sentence : corpus.sentences) ids.insert(sentence.id);
    CHECK(ids.size() == corpus.sentences.size());
  }
}

TEST_CASE("word lists and template are validated") {
  auto spec = sized_spec(2, 2, 2);
  spec.sentence_template = "The {sbj} {verb}.";
  CHECK_THROWS_AS(generate_svo(spec), ArgumentError);
  spec.sentence_template = "{sbj} {sbj} {verb} {obj}";
  CHECK_THROWS_AS(generate_svo(spec), ArgumentError);
  spec = sized_spec(0, 2, 2);
  CHECK_THROWS_AS(generate_svo(spec), ArgumentError);
  spec = sized_spec(2, 2, 2);
  spec.objects[1] = spec.objects[0];
  CHECK_THROWS_AS(generate_svo(spec), ArgumentError);

  spec = sized_spec(1, 1, 1);
  spec.objects = {"dining table"};
  const auto corpus = generate_svo(spec);
  CHECK(corpus.warnings.size() == 1);
  CHECK(corpus.sentences[0].text == "The s0 v0 on the dining table.");
}

TEST_CASE("sentences serialize as id and text") {
  const auto corpus = generate_svo(sized_spec(1, 1, 2));
  CHECK(format_sentences(corpus.sentences) == "s0_v0_o0\tThe s0 v0 on the o0.\ns0_v0_o1\tThe s0 v0 on the o1.\n");
}

TEST_CASE("one_hot_encode builds indicator blocks") {
  const auto table = parse_categorical(
      "id,gender,age,occupation\n"
      "u1,F,1,4\nu2,M,18,4\nu3,F,25,2\nu4,M,35,0\nu5,F,45,1\nu6,M,50,1\nu7,F,56,3\n"
      "u8,M,1,3\nu9,F,18,0\nu10,M,25,2\nu11,F,35,4\nu12,M,45,0\nu13,F,50,2\nu14,M,56,1\n");

  const auto gender = one_hot_encode(table, {"gender"});
  CHECK(gender.column_names == std::vector<std::string>{"gender=F", "gender=M"});
  CHECK((gender.values.rowwise().sum().array() == 1.0).all());

  const auto both = one_hot_encode(table, {"gender", "age"});
  CHECK(both.cols() == 9);
  CHECK((both.values.rowwise().sum().array() == 2.0).all());
  std::set<std::string> groups;
  for (Index r = 0; r < both.rows(); ++r) {
    std::string key;
    for (Index c = 0; c < both.cols(); ++c)
      if (both.values(r, c) == 1.0) key += both.column_names[static_cast<std::size_t>(c)] + "|";
    groups.insert(key);
  }
  CHECK(groups.size() == 14);

  const auto single = one_hot_encode(parse_categorical("id,g\nonly,x\n"), {"g"});
  CHECK(single.rows() == 1);
  CHECK(single.values(0, 0) == 1.0);

  CHECK_THROWS_WITH_AS(one_hot_encode(parse_categorical("id,g\na,x\nb,\n"), {"g"}), doctest::Contains("'b'"),
                       DataError);
  CHECK_THROWS_AS(one_hot_encode(table, {"zodiac"}), ArgumentError);
  CHECK_THROWS_AS(parse_categorical("id,g\na,x,y\n"), DataError);
}
