#pragma once

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "tonemine/ingest.hpp"

namespace testsupport {

// Utterances of the given tone sequences, one speaker each round-robin, with
// 0.1 s syllables sampled every 0.01 s. Pitch rises inside each syllable so
// contours are not flat; a seeded jitter keeps the speaker spread non-zero.
inline tonemine::ingest::Corpus make_corpus(const std::vector<std::vector<int>>& utterances,
                                            std::size_t speakers = 1, unsigned seed = 1) {
  using namespace tonemine::ingest;
  std::mt19937 rng(seed);
  std::normal_distribution<double> jitter(0.0, 0.02);
  std::vector<F0Track> tracks;
  std::vector<SyllableRecord> syllables;
  std::vector<TokenAnnotation> tokens;
  for (std::size_t u = 0; u < utterances.size(); ++u) {
    const std::string utt = fmt::format("utt{:04d}", u);
    const auto& tones = utterances[u];
    F0Track track{utt, fmt::format("spk{}", u % speakers), 0.01, {}};
    const std::size_t samples = tones.size() * 10 + 1;
    for (std::size_t k = 0; k < samples; ++k) {
      const double within = static_cast<double>(k % 10) / 10.0;
      track.samples.push_back({static_cast<double>(k) * 0.01, std::exp(5.0 + 0.1 * within + jitter(rng))});
    }
    tracks.push_back(std::move(track));
    for (std::size_t i = 0; i < tones.size(); ++i) {
      const double start = static_cast<double>(i) * 0.1;
      syllables.push_back({utt, i, tones[i], start, start + 0.1, {"m", "a"}, i % 2 == 0, i % 2 == 1 || i + 1 == tones.size()});
    }
    for (std::size_t i = 0; i < tones.size(); i += 2) {
      const std::size_t last = std::min(i + 1, tones.size() - 1);
      tokens.push_back({utt, i, last, i % 4 == 0 ? "NN" : "VV", "nsubj", i == 0, true});
    }
  }
  return assemble_corpus(tracks, syllables, tokens);
}

// Scratch directory removed on destruction.
struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& name) {
    path = std::filesystem::temp_directory_path() / fmt::format("tonemine_{}_{}", name, std::rand());
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
};

}  // namespace testsupport
