#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tonemine/errors.hpp"

// Corpus files: f0 tracks (JSON lines), syllable segmentation (TSV) and
// token-level annotations (TSV), aligned into one in-memory Corpus.
namespace tonemine::ingest {

struct F0Sample {
  double time = 0.0;
  std::optional<double> hz;  // nullopt = unvoiced

  bool voiced() const { return hz.has_value(); }
  bool operator==(const F0Sample&) const = default;
};

struct F0Track {
  std::string utterance_id;
  std::string speaker_id;
  double sample_period = 0.0;
  std::vector<F0Sample> samples;

  std::size_t voiced_count() const;
  bool operator==(const F0Track&) const = default;
};

struct SyllableRecord {
  std::string utterance_id;
  std::size_t index = 0;
  int tone = 0;  // 0 = neutral
  double start = 0.0;
  double end = 0.0;
  std::vector<std::string> phonemes;
  bool word_initial = false;
  bool word_final = false;

  bool operator==(const SyllableRecord&) const = default;
};

struct TokenAnnotation {
  std::string utterance_id;
  std::size_t first_syllable = 0;
  std::size_t last_syllable = 0;
  std::string pos_tag;
  std::string dep_function;
  bool in_named_entity = false;
  bool is_singleton = false;

  bool covers(std::size_t syllable) const {
    return first_syllable <= syllable && syllable <= last_syllable;
  }
  bool operator==(const TokenAnnotation&) const = default;
};

struct Corpus {
  std::map<std::string, F0Track> tracks;
  std::map<std::string, std::vector<SyllableRecord>> syllables;
  std::map<std::string, std::vector<TokenAnnotation>> annotations;
  std::map<std::string, std::size_t> utterance_lengths;

  std::size_t size() const { return tracks.size(); }
  bool empty() const { return tracks.empty(); }

  /// Token covering a syllable. Coverage is an assembly invariant, so a miss throws.
  const TokenAnnotation& token_for(const std::string& utterance_id, std::size_t syllable) const;

  bool operator==(const Corpus&) const = default;
};

struct AssemblyReport {
  std::size_t dropped = 0;
  std::vector<std::string> reasons;
};

// Loaders. Lines starting with '#' in the TSV formats and JSON records with a
// "meta" key are treated as metadata and skipped.
std::vector<F0Track> parse_f0_tracks(std::istream& in);
std::vector<F0Track> load_f0_tracks(const std::filesystem::path& path);

/// Records come back grouped by utterance (in first-appearance order) and sorted by start time.
std::vector<SyllableRecord> parse_segmentation(std::istream& in);
std::vector<SyllableRecord> load_segmentation(const std::filesystem::path& path);

std::vector<TokenAnnotation> parse_annotations(std::istream& in);
std::vector<TokenAnnotation> load_annotations(const std::filesystem::path& path);

/// Throws ValidationError naming the utterance and syllable index of the
/// first syllable not covered by exactly one token.
void check_annotation_cover(const std::string& utterance_id, std::size_t syllable_count,
                            const std::vector<TokenAnnotation>& tokens);

Corpus assemble_corpus(const std::vector<F0Track>& tracks,
                       const std::vector<SyllableRecord>& syllables,
                       const std::vector<TokenAnnotation>& annotations,
                       AssemblyReport* report = nullptr);

Corpus load_corpus(const std::filesystem::path& f0, const std::filesystem::path& segmentation,
                   const std::filesystem::path& annotations, AssemblyReport* report = nullptr);

// Writers produce exactly the formats the loaders accept.
void write_f0_tracks(std::ostream& out, const std::vector<F0Track>& tracks);
void write_segmentation(std::ostream& out, const std::vector<SyllableRecord>& syllables);
void write_annotations(std::ostream& out, const std::vector<TokenAnnotation>& tokens);

std::string word_flags_string(bool initial, bool final);

}  // namespace tonemine::ingest
