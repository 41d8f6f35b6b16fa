#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tonemine/ingest.hpp"
#include "tonemine/tone.hpp"

// Speaker normalization, outlier cleaning, gap interpolation, contour cutting
// and fixed-length tone n-gram datasets.
namespace tonemine::preprocess {

inline constexpr std::size_t kMinVoicedPerSpeaker = 30;
inline constexpr std::size_t kMinContourSamples = 4;
inline constexpr double kOutlierZ = 3.0;
inline constexpr std::size_t kDefaultMinCategorySize = 100;

/// Resampled vector length for n-grams of order n (30/100/200 for n = 1/2/3).
std::size_t vector_length(int n);

struct SpeakerStats {
  std::string speaker_id;
  double mean_log_f0 = 0.0;
  double std_log_f0 = 1.0;
};

using SpeakerStatsMap = std::map<std::string, SpeakerStats>;

/// Two-pass log-f0 statistics per speaker: plain statistics first, then
/// recomputed without samples beyond kOutlierZ. Speakers with fewer than
/// kMinVoicedPerSpeaker voiced samples or zero spread are left out and their
/// ids appended to `excluded`.
SpeakerStatsMap speaker_stats(const ingest::Corpus& corpus,
                              std::vector<std::string>* excluded = nullptr);

/// Speaker-normalized track on the original time grid. nullopt marks samples
/// that are unvoiced, removed as outliers or outside the interpolated span.
struct NormalizedTrack {
  std::string utterance_id;
  std::vector<double> times;
  std::vector<std::optional<double>> z;

  bool empty() const;
  std::size_t present_count() const;
};

NormalizedTrack clean_track(const ingest::F0Track& track, const SpeakerStats& stats);

/// Time-ordered samples of one window.
struct Contour {
  std::vector<double> times;
  std::vector<double> values;
  std::size_t size() const { return values.size(); }
};

/// Present samples with time in [window.front().start, window.back().end];
/// nullopt when fewer than kMinContourSamples remain.
std::optional<Contour> cut_contour(const NormalizedTrack& track,
                                   std::span<const ingest::SyllableRecord> window);

/// Linear interpolation onto vector_length(n) equally spaced times spanning
/// the contour. nullopt for contours shorter than kMinContourSamples.
std::optional<std::vector<double>> downsample(const Contour& contour, int n);

struct NgramInstance {
  std::uint64_t instance_id = 0;
  Category category;
  std::vector<double> f0_vector;
  double start_pitch = 0.0;
  double end_pitch = 0.0;
  int prev_tone = kBoundaryTone;
  int next_tone = kBoundaryTone;
  double sentence_position = 0.0;
  std::string utterance_id;
  std::size_t first_syllable = 0;

  bool operator==(const NgramInstance&) const = default;
};

struct NgramDataset {
  Category category;
  int n = 1;
  std::vector<NgramInstance> instances;

  std::vector<std::vector<double>> vectors() const;
  bool operator==(const NgramDataset&) const = default;
};

using DatasetMap = std::map<Category, NgramDataset>;

/// Corpus plus its normalized tracks; utterances of excluded speakers and
/// fully-removed tracks are absent from `tracks`.
struct CleanCorpus {
  ingest::Corpus corpus;
  SpeakerStatsMap stats;
  std::map<std::string, NormalizedTrack> tracks;
  std::vector<std::string> excluded_speakers;
};

CleanCorpus clean_corpus(ingest::Corpus corpus);

double sentence_position(std::size_t first_index, std::size_t utterance_length);

/// Sliding windows of n syllables per utterance. For n > 1, windows with a
/// neutral tone are skipped. Categories with fewer than min_category_size
/// instances are dropped. Instance ids follow (utterance, first syllable)
/// order across the whole corpus.
DatasetMap build_ngram_datasets(const CleanCorpus& clean, int n,
                                std::size_t min_category_size = kDefaultMinCategorySize);

// Versioned JSON-lines dataset format: one meta line, then one instance per line.
inline constexpr int kDatasetFormatVersion = 1;
/// `provenance` entries are added to the meta line.
void write_datasets(std::ostream& out, const DatasetMap& datasets, int n,
                    const std::map<std::string, std::string>& provenance = {});
DatasetMap read_datasets(std::istream& in);
void save_datasets(const std::filesystem::path& path, const DatasetMap& datasets, int n,
                   const std::map<std::string, std::string>& provenance = {});
DatasetMap load_datasets(const std::filesystem::path& path);

}  // namespace tonemine::preprocess
