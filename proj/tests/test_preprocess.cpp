#include <doctest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "test_support.hpp"
#include "tonemine/errors.hpp"
#include "tonemine/preprocess.hpp"

using namespace tonemine;
using namespace tonemine::preprocess;
using tonemine::ingest::F0Track;

namespace {

ingest::Corpus corpus_of_tracks(const std::vector<F0Track>& tracks) {
  ingest::Corpus c;
  for (const auto& t : tracks) c.tracks[t.utterance_id] = t;
  return c;
}

F0Track constant_track(const std::string& utt, const std::string& spk, std::size_t count,
                       const std::vector<double>& hz_cycle) {
  F0Track t{utt, spk, 0.01, {}};
  for (std::size_t i = 0; i < count; ++i) t.samples.push_back({0.01 * static_cast<double>(i), hz_cycle[i % hz_cycle.size()]});
  return t;
}

}  // namespace

TEST_CASE("L(n) lengths") {
  CHECK(vector_length(1) == 30);
  CHECK(vector_length(2) == 100);
  CHECK(vector_length(3) == 200);
  CHECK_THROWS(vector_length(4));
}

TEST_CASE("speaker stats: degenerate and sparse speakers are excluded") {
  std::vector<std::string> excluded;
  const auto flat = corpus_of_tracks({constant_track("a", "flat", 100, {100.0})});
  CHECK(speaker_stats(flat, &excluded).empty());
  CHECK(excluded == std::vector<std::string>{"flat"});

  excluded.clear();
  const auto few = corpus_of_tracks({constant_track("a", "few", 10, {100.0, 120.0})});
  CHECK(speaker_stats(few, &excluded).empty());
  CHECK(excluded == std::vector<std::string>{"few"});
}

TEST_CASE("speaker stats: equal mix of e^4.5 and e^4.7 has mean 4.6") {
  const auto c = corpus_of_tracks({constant_track("a", "s", 100, {std::exp(4.5), std::exp(4.7)})});
  const auto stats = speaker_stats(c);
  REQUIRE(stats.count("s") == 1);
  CHECK(stats.at("s").mean_log_f0 == doctest::Approx(4.6).epsilon(1e-12));
  CHECK(stats.at("s").std_log_f0 == doctest::Approx(0.1).epsilon(1e-9));
}

TEST_CASE("clean_track: mean maps to zero, gaps interpolate linearly") {
  const SpeakerStats st{"s", 0.0, 1.0};
  F0Track t{"u", "s", 0.05, {{0.0, 1.0}, {0.05, std::nullopt}, {0.1, std::exp(1.0)}}};
  const auto n = clean_track(t, st);
  REQUIRE(n.z.size() == 3);
  CHECK(*n.z[0] == doctest::Approx(0.0));
  CHECK(*n.z[1] == doctest::Approx(0.5));
  CHECK(*n.z[2] == doctest::Approx(1.0));
}

TEST_CASE("clean_track: an outlier between zeros is removed then bridged") {
  const SpeakerStats st{"s", 0.0, 1.0};
  F0Track t{"u", "s", 0.01, {{0.0, 1.0}, {0.01, std::exp(3.5)}, {0.02, 1.0}}};
  const auto n = clean_track(t, st);
  CHECK(*n.z[1] == doctest::Approx(0.0));
}

TEST_CASE("clean_track: leading and trailing gaps stay absent") {
  const SpeakerStats st{"s", 0.0, 1.0};
  F0Track t{"u", "s", 0.01, {{0.0, std::nullopt}, {0.01, 1.0}, {0.02, 1.0}, {0.03, std::nullopt}}};
  const auto n = clean_track(t, st);
  CHECK_FALSE(n.z[0].has_value());
  CHECK_FALSE(n.z[3].has_value());
  CHECK(n.present_count() == 2);

  F0Track gone{"g", "s", 0.01, {{0.0, std::exp(9.0)}, {0.01, std::nullopt}}};
  CHECK(clean_track(gone, st).empty());
}

namespace {

NormalizedTrack ramp_track(std::size_t samples, double period) {
  NormalizedTrack t;
  t.utterance_id = "u";
  for (std::size_t i = 0; i < samples; ++i) {
    t.times.push_back(period * static_cast<double>(i));
    t.z.push_back(static_cast<double>(i));
  }
  return t;
}

ingest::SyllableRecord syllable(std::size_t i, double start, double end) {
  return {"u", i, 1, start, end, {}, false, false};
}

}  // namespace

TEST_CASE("cut_contour counts inclusive bounds") {
  const auto t = ramp_track(100, 0.01);
  const std::vector<ingest::SyllableRecord> win{syllable(0, 0.1, 0.3)};
  const auto c = cut_contour(t, win);
  REQUIRE(c.has_value());
  CHECK(c->size() == 21);
}

TEST_CASE("cut_contour needs four present samples") {
  auto t = ramp_track(10, 0.01);
  for (std::size_t i = 2; i < 10; ++i) t.z[i].reset();
  const std::vector<ingest::SyllableRecord> win{syllable(0, 0.0, 0.09)};
  CHECK_FALSE(cut_contour(t, win).has_value());
}

TEST_CASE("cut_contour over a bigram window spans both syllables") {
  const auto t = ramp_track(50, 0.01);
  const std::vector<ingest::SyllableRecord> win{syllable(0, 0.0, 0.1), syllable(1, 0.1, 0.2)};
  const auto c = cut_contour(t, win);
  REQUIRE(c.has_value());
  CHECK(c->size() == 21);
  CHECK(c->times.front() == doctest::Approx(0.0));
  CHECK(c->times.back() == doctest::Approx(0.2));
}

TEST_CASE("downsample: constant, ramp and trigram lengths") {
  Contour flat{{0.0, 0.1, 0.2, 0.3}, {1.0, 1.0, 1.0, 1.0}};
  const auto v = downsample(flat, 1);
  REQUIRE(v.has_value());
  CHECK(v->size() == 30);
  for (double x : *v) CHECK(x == doctest::Approx(1.0));

  Contour ramp{{0.0, 0.25, 0.5, 0.75, 1.0}, {0.0, 0.25, 0.5, 0.75, 1.0}};
  const auto r = *downsample(ramp, 1);
  for (std::size_t k = 0; k < 30; ++k) CHECK(r[k] == doctest::Approx(static_cast<double>(k) / 29.0));

  CHECK(downsample(ramp, 3)->size() == 200);
  Contour short_one{{0.0, 0.1, 0.2}, {0.0, 0.0, 0.0}};
  CHECK_FALSE(downsample(short_one, 1).has_value());
}

TEST_CASE("property: downsampling a monotone contour stays monotone") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> step(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    Contour c;
    double t = 0.0, v = 0.0;
    const std::size_t len = 4 + trial % 40;
    for (std::size_t i = 0; i < len; ++i) {
      c.times.push_back(t);
      c.values.push_back(v);
      t += 0.001 + step(rng);
      v += step(rng);
    }
    for (int n = 1; n <= 3; ++n) {
      const auto d = *downsample(c, n);
      for (std::size_t k = 1; k < d.size(); ++k) REQUIRE(d[k] >= d[k - 1] - 1e-12);
    }
  }
}

TEST_CASE("sentence position") {
  CHECK(sentence_position(1, 4) == doctest::Approx(1.0 / 3.0));
  CHECK(sentence_position(0, 1) == 0.0);
  CHECK(sentence_position(3, 4) == 1.0);
}

TEST_CASE("bigram windows skip the neutral tone") {
  const auto clean = clean_corpus(testsupport::make_corpus({{1, 2, 0, 4}}));
  const auto ds = build_ngram_datasets(clean, 2, 1);
  REQUIRE(ds.size() == 1);
  CHECK(ds.begin()->first == Category{1, 2});
  const auto& inst = ds.begin()->second.instances.at(0);
  CHECK(inst.prev_tone == kBoundaryTone);
  CHECK(inst.next_tone == 0);
}

TEST_CASE("dataset invariants and sparsity filter") {
  std::vector<std::vector<int>> utts;
  for (int i = 0; i < 60; ++i) utts.push_back({1 + i % 4, 1 + (i / 4) % 4, 2, 3, 1});
  const auto clean = clean_corpus(testsupport::make_corpus(utts, 3));
  for (int n = 1; n <= 3; ++n) {
    const auto all = build_ngram_datasets(clean, n, 1);
    std::size_t total = 0;
    std::set<std::uint64_t> ids;
    for (const auto& [cat, ds] : all) {
      CHECK(cat.size() == static_cast<std::size_t>(n));
      for (const auto& inst : ds.instances) {
        CHECK(inst.category == cat);
        REQUIRE(inst.f0_vector.size() == vector_length(n));
        for (double x : inst.f0_vector) REQUIRE(std::isfinite(x));
        CHECK(inst.start_pitch == inst.f0_vector.front());
        CHECK(inst.end_pitch == inst.f0_vector.back());
        CHECK(inst.sentence_position >= 0.0);
        CHECK(inst.sentence_position <= 1.0);
        if (n > 1) CHECK(std::find(cat.begin(), cat.end(), 0) == cat.end());
        ids.insert(inst.instance_id);
        ++total;
      }
    }
    CHECK(ids.size() == total);
    const auto filtered = build_ngram_datasets(clean, n, 50);
    for (const auto& [cat, ds] : filtered) CHECK(ds.instances.size() >= 50);
    CHECK(filtered.size() < all.size());
  }
}

TEST_CASE("datasets round-trip through JSON lines") {
  std::vector<std::vector<int>> utts(30, std::vector<int>{1, 4, 2});
  const auto clean = clean_corpus(testsupport::make_corpus(utts, 2));
  const auto ds = build_ngram_datasets(clean, 2, 1);
  std::stringstream io;
  write_datasets(io, ds, 2, {{"seed", "5"}});
  const auto back = read_datasets(io);
  REQUIRE(back.size() == ds.size());
  for (const auto& [cat, d] : ds) {
    const auto& b = back.at(cat);
    REQUIRE(b.instances.size() == d.instances.size());
    for (std::size_t i = 0; i < d.instances.size(); ++i) CHECK(b.instances[i] == d.instances[i]);
  }
}

TEST_CASE("property: normalized z-values have mean 0 and sd 1 per speaker") {
  std::vector<std::vector<int>> utts(40, std::vector<int>{1, 2, 3, 4});
  const auto clean = clean_corpus(testsupport::make_corpus(utts, 2));
  std::map<std::string, std::vector<double>> per_speaker;
  for (const auto& [utt, t] : clean.tracks) {
    const auto& spk = clean.corpus.tracks.at(utt).speaker_id;
    for (const auto& z : t.z) {
      if (z) per_speaker[spk].push_back(*z);
    }
  }
  REQUIRE(per_speaker.size() == 2);
  for (const auto& [spk, zs] : per_speaker) {
    double m = 0.0, v = 0.0;
    for (double z : zs) m += z;
    m /= static_cast<double>(zs.size());
    for (double z : zs) v += (z - m) * (z - m);
    v /= static_cast<double>(zs.size());
    CHECK(std::abs(m) < 0.05);
    CHECK(std::abs(std::sqrt(v) - 1.0) < 0.1);
  }
}
