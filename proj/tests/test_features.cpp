#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "test_support.hpp"
#include "tonemine/config.hpp"
#include "tonemine/errors.hpp"
#include "tonemine/features.hpp"

using namespace tonemine;
using namespace tonemine::features;

namespace {

const PhonemeTable& phonemes() {
  static const PhonemeTable t = PhonemeTable::load(config::data_dir() / "phonemes.tsv");
  return t;
}

const PosCoarseMap& coarse() {
  static const PosCoarseMap m = PosCoarseMap::load(config::data_dir() / "pos_coarse.tsv");
  return m;
}

preprocess::NgramInstance window(const std::string& utt, std::size_t first, const Category& cat) {
  preprocess::NgramInstance inst;
  inst.instance_id = first;
  inst.category = cat;
  inst.utterance_id = utt;
  inst.first_syllable = first;
  inst.f0_vector.assign(preprocess::vector_length(static_cast<int>(cat.size())), 0.0);
  inst.start_pitch = -0.5;
  inst.end_pitch = 0.75;
  inst.sentence_position = 0.25;
  inst.prev_tone = first == 0 ? kBoundaryTone : 1;
  inst.next_tone = 3;
  return inst;
}

template <typename T>
T value(const FeatureVector& v, const FeatureSchema& s, const std::string& name) {
  return std::get<T>(v.values.at(s.index_of(name)));
}

}  // namespace

TEST_CASE("collapse_tagset examples") {
  const auto v = collapse_tagset({{"advmod:loc", 3}, {"advmod", 40}});
  CHECK(v.map("advmod:loc") == "advmod");
  CHECK(v.map("advmod") == "advmod");
  CHECK(v.map("advmod:tmp") == "advmod");

  const auto rare = collapse_tagset({{"nsubj", 4}, {"dobj", 5}}, 5);
  CHECK(rare.map("nsubj") == kOther);
  CHECK(rare.map("dobj") == "dobj");
  CHECK(rare.map("never_seen") == kOther);
  CHECK(rare.vocabulary == std::vector<std::string>{kOther, "dobj"});
}

TEST_CASE("collapse_tagset through the coarse POS map") {
  CHECK(coarse().tag_count() == 33);
  CHECK(coarse().classes().size() == 5);
  const auto v = collapse_tagset({{"NN", 50}, {"NR", 20}, {"VV", 30}, {"IJ", 1}}, 5, &coarse());
  CHECK(v.map("NN") == v.map("NR"));
  CHECK(v.map("NN") != v.map("VV"));
  CHECK(v.map("IJ") == coarse().fallback());
  CHECK(v.vocabulary.size() == 5);
}

TEST_CASE("property: collapse_tagset is idempotent") {
  std::mt19937_64 rng(2);
  const std::vector<std::string> tags{"nsubj", "dobj", "advmod", "advmod:loc", "advmod:tmp", "amod", "case", "mark", "det"};
  for (int trial = 0; trial < 100; ++trial) {
    std::map<std::string, std::size_t> counts;
    for (const auto& t : tags) {
      if (rng() % 3) counts[t] = rng() % 12;
    }
    const auto once = collapse_tagset(counts);
    std::map<std::string, std::size_t> collapsed_counts;
    for (const auto& [t, c] : counts) collapsed_counts[once.map(t)] += c;
    const auto twice = collapse_tagset(collapsed_counts);
    for (const auto& [sym, _] : collapsed_counts) REQUIRE(twice.map(sym) == sym);
  }
}

TEST_CASE("raw feature counts are 10n + 7") {
  const std::map<int, std::size_t> expected{{1, 17}, {2, 27}, {3, 37}};
  for (const auto& [n, count] : expected) {
    const auto s = build_schema(n, collapse_tagset({{"NN", 9}}), collapse_tagset({{"nsubj", 9}}));
    CHECK(s.raw_count() == count);
    CHECK(s.feature_names().size() == count);
  }
  CHECK_THROWS(build_schema(4, {}, {}));
}

TEST_CASE("phonology of a syllable") {
  const std::vector<std::string> man{"m", "a", "n"};
  const auto p = phonemes().syllable(man);
  CHECK(p.nasal);
  CHECK(p.low);
  CHECK_FALSE(p.high);
  CHECK_FALSE(p.diphthong);

  const std::vector<std::string> hao{"h", "a", "o"};
  CHECK(phonemes().syllable(hao).diphthong);

  const std::vector<std::string> bad{"m", "q!"};
  try {
    phonemes().syllable(bad);
    FAIL("expected an error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("q!") != std::string::npos);
  }
}

TEST_CASE("extract_features on trigram and bigram windows") {
  // enough copies that NN clears the rare-tag cutoff
  const auto corpus = testsupport::make_corpus(std::vector<std::vector<int>>(5, {1, 2, 3, 4, 1}));
  const auto schema = build_schema(corpus, 3, coarse(), phonemes());
  const auto fv = extract_features(window("utt0000", 0, {1, 2, 3}), corpus, schema, phonemes());
  CHECK(fv.values.size() == 37);
  // syllables 0-1 form one word and syllable 2 starts the next
  CHECK_FALSE(value<bool>(fv, schema, "tok_bound_1"));
  CHECK_FALSE(value<bool>(fv, schema, "tok_bound_2"));
  CHECK(value<bool>(fv, schema, "tok_bound_3"));
  CHECK(value<bool>(fv, schema, "is_entity"));
  CHECK(value<bool>(fv, schema, "is_singleton"));
  CHECK(value<bool>(fv, schema, "is_low_1"));
  CHECK(value<double>(fv, schema, "start_pitch") == -0.5);
  CHECK(value<double>(fv, schema, "end_pitch") == 0.75);
  CHECK(value<std::string>(fv, schema, "prev_tone") == "boundary");
  CHECK(value<std::string>(fv, schema, "next_tone") == "3");
  CHECK(value<std::string>(fv, schema, "pos_tag_1") == coarse().map("NN"));

  const auto bschema = build_schema(corpus, 2, coarse(), phonemes());
  const auto inside = extract_features(window("utt0000", 0, {1, 2}), corpus, bschema, phonemes());
  CHECK_FALSE(value<bool>(inside, bschema, "tok_bound_1"));
  CHECK_FALSE(value<bool>(inside, bschema, "tok_bound_2"));
  const auto later = extract_features(window("utt0000", 2, {3, 4}), corpus, bschema, phonemes());
  CHECK_FALSE(value<bool>(later, bschema, "is_entity"));
}

TEST_CASE("property: is_entity is monotone in the covered tokens") {
  std::mt19937_64 rng(6);
  auto corpus = testsupport::make_corpus({{1, 2, 3, 4, 1, 2, 3, 4}});
  auto& toks = corpus.annotations.at("utt0000");
  const auto schema = build_schema(corpus, 3, coarse(), phonemes());
  for (int trial = 0; trial < 50; ++trial) {
    for (auto& t : toks) t.in_named_entity = rng() % 4 == 0;
    for (std::size_t first = 0; first + 3 <= 8; ++first) {
      const auto inst = window("utt0000", first, {1, 2, 3});
      const bool before = value<bool>(extract_features(inst, corpus, schema, phonemes()), schema, "is_entity");
      auto& extra = toks[rng() % toks.size()];
      const bool saved = extra.in_named_entity;
      extra.in_named_entity = true;
      const bool after = value<bool>(extract_features(inst, corpus, schema, phonemes()), schema, "is_entity");
      extra.in_named_entity = saved;
      REQUIRE((!before || after));
    }
  }
}

TEST_CASE("encoding: one-hot, booleans and train-only standardization") {
  const auto corpus = testsupport::make_corpus({{1, 2, 3, 4, 1, 2}});
  const auto schema = build_schema(corpus, 1, coarse(), phonemes());
  std::vector<FeatureVector> train;
  for (std::size_t i = 0; i < 3; ++i) {
    auto inst = window("utt0000", i, {1});
    inst.sentence_position = 0.5 * static_cast<double>(i);
    train.push_back(extract_features(inst, corpus, schema, phonemes()));
  }
  const auto enc = Encoder::fit(schema, train);
  const auto m = enc.transform(train);
  const auto& names = m.column_names;
  CHECK(std::count_if(names.begin(), names.end(), [](const std::string& s) { return s.rfind("prev_tone=", 0) == 0; }) == 6);

  const auto col = [&](const std::string& name) {
    return static_cast<std::size_t>(std::find(names.begin(), names.end(), name) - names.begin());
  };
  REQUIRE(col("is_high_1") < names.size());
  for (const auto& row : m.rows) CHECK(row[col("is_high_1")] == 0.0);
  double mean = 0.0;
  for (const auto& row : m.rows) mean += row[col("sent_position")];
  CHECK(mean == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(m.rows[2][col("sent_position")] == doctest::Approx(std::sqrt(1.5)));

  // Test rows use the train statistics.
  auto held_out = window("utt0000", 4, {1});
  held_out.sentence_position = 0.5;
  const auto test_row = enc.transform(std::vector<FeatureVector>{extract_features(held_out, corpus, schema, phonemes())});
  CHECK(test_row.rows[0][col("sent_position")] == doctest::Approx(0.0));
}

TEST_CASE("property: decoding recovers every raw value") {
  const auto corpus = testsupport::make_corpus({{1, 2, 3, 4, 1, 2, 3, 4, 1}});
  for (int n = 1; n <= 3; ++n) {
    const auto schema = build_schema(corpus, n, coarse(), phonemes());
    std::vector<FeatureVector> vecs;
    for (std::size_t first = 0; first + static_cast<std::size_t>(n) <= 9; ++first) {
      Category cat(static_cast<std::size_t>(n), 1);
      auto inst = window("utt0000", first, cat);
      inst.next_tone = static_cast<int>(first % 5);
      inst.sentence_position = static_cast<double>(first) / 8.0;
      vecs.push_back(extract_features(inst, corpus, schema, phonemes()));
    }
    const auto enc = Encoder::fit(schema, vecs);
    const auto m = enc.transform(vecs);
    for (std::size_t r = 0; r < vecs.size(); ++r) {
      for (std::size_t f = 0; f < schema.raw_count(); ++f) {
        const auto back = enc.decode(m.rows[r], f);
        if (std::holds_alternative<double>(back)) {
          REQUIRE(std::get<double>(back) == doctest::Approx(std::get<double>(vecs[r].values[f])));
        } else {
          REQUIRE(back == vecs[r].values[f]);
        }
      }
    }
  }
}

TEST_CASE("feature selection drops columns") {
  const auto corpus = testsupport::make_corpus({{1, 2, 3}});
  const auto schema = build_schema(corpus, 1, coarse(), phonemes());
  const std::vector<FeatureVector> vecs{extract_features(window("utt0000", 0, {1}), corpus, schema, phonemes())};
  std::vector<bool> keep(schema.raw_count(), false);
  keep[schema.index_of("start_pitch")] = true;
  keep[schema.index_of("end_pitch")] = true;
  const auto enc = Encoder::fit(schema, vecs, keep);
  CHECK(enc.column_names() == std::vector<std::string>{"start_pitch", "end_pitch"});

  std::ostringstream csv;
  write_matrix_csv(csv, enc.transform(vecs));
  CHECK(csv.str().rfind("start_pitch,end_pitch\n", 0) == 0);
}
