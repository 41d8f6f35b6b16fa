#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "tonemine/ingest.hpp"

// Synthetic corpora with planted contour clusters. Each syllable approaches
// a linear pitch target exponentially; coupling rules shift the target from
// the syllable's linguistic features, so both the shape clusters and the
// feature -> shape dependence are known in advance.
namespace tonemine::synth {

inline constexpr std::size_t kSamplesPerSyllable = 20;
inline constexpr double kSyllableDuration = 0.2;  // seconds
inline constexpr double kSamplePeriod = kSyllableDuration / kSamplesPerSyllable;

struct Target {
  double intercept = 0.0;
  double slope = 0.0;
  double at(double u) const { return intercept + slope * u; }
};

struct SpeakerSpec {
  std::string id;
  double mean_log_f0 = 5.0;
  double std_log_f0 = 0.2;
};

struct WeightedTag {
  std::string tag;
  double weight = 0.0;
};

/// Fires on a syllable when `feature` holds for its token and its tone is in
/// `tones` (empty = every tone). Features: is_entity, is_singleton,
/// word_initial, pos=<TAG>.
struct CouplingRule {
  std::string feature;
  std::vector<int> tones;
  double d_intercept = 0.0;
  double d_slope = 0.0;
};

struct SynthSpec {
  std::uint64_t seed = 1;
  std::vector<SpeakerSpec> speakers;
  std::size_t utterances = 200;
  std::size_t min_syllables = 3;
  std::size_t max_syllables = 8;
  std::array<double, 5> tone_probs{0.05, 0.25, 0.25, 0.2, 0.25};
  std::array<Target, 5> targets{};
  double approach_rate = 8.0;  // lambda, per syllable
  double noise_std = 0.05;
  double onset_jitter = 0.0;   // sd of the utterance-initial entry around T(0)
  double unvoiced_prob = 0.0;  // per-sample chance of an unvoiced marker
  bool cycle_tones = false;    // tones cycle through the support instead of being drawn
  std::vector<double> word_length_probs{0.4, 0.5, 0.1};  // tokens of 1, 2, 3 syllables
  std::vector<WeightedTag> pos;
  std::vector<WeightedTag> dep;
  std::vector<std::string> entity_tags{"NR"};  // tokens with these tags are named entities
  double singleton_prob = 0.3;
  std::vector<CouplingRule> coupling;

  /// Throws ValidationError on an inconsistent spec.
  void validate() const;
};

/// Multi-syllable utterances, mild couplings on entities and POS.
SynthSpec default_spec();

/// Single-syllable utterances of tones 1-4, `per_tone` instances each, with
/// POS- and entity-driven rules giving 3, 4, 5 and 4 planted clusters
/// whose targets sit at least 1.2 apart.
SynthSpec planted_spec(std::uint64_t seed, std::size_t per_tone = 2000, double noise_std = 0.1);

/// INI file: [synth] scalars, [speakers] id = mean,std, [targets] toneK =
/// intercept,slope, [pos] / [dep] tag = weight, and one [couplingK] section
/// per rule with feature / tones / d_intercept / d_slope.
SynthSpec load_spec(const std::filesystem::path& path);
SynthSpec parse_spec(std::istream& in);
void write_spec(std::ostream& out, const SynthSpec& spec);

/// Closed form of one syllable: T(u) + (entry - T(0)) exp(-lambda u).
double contour_value(const Target& target, double entry, double lambda, double u);

/// Samples at u = k/20 (k = 0..19) of every syllable; each syllable enters
/// at the previous syllable's noiseless value at u = 1. Gaussian noise of
/// `noise_std` is added per sample from `rng`.
std::vector<double> generate_contour(std::span<const Target> targets, double start_pitch, double lambda,
                                     double noise_std, std::mt19937_64& rng);
std::vector<double> generate_contour(std::span<const int> tones, double start_pitch, const SynthSpec& spec,
                                     std::mt19937_64& rng);

struct GroundTruthRow {
  std::string instance_key;  // "<utterance>:<syllable index>"
  int cluster_id = 0;        // bitmask of the coupling rules that fired
  int tone = 0;
  Target target;
};

struct SynthCorpus {
  std::vector<ingest::F0Track> tracks;
  std::vector<ingest::SyllableRecord> syllables;
  std::vector<ingest::TokenAnnotation> tokens;
  std::vector<GroundTruthRow> ground_truth;
};

SynthCorpus generate_corpus(const SynthSpec& spec);

/// Key used in ground_truth.csv for a syllable (and the unigram starting there).
std::string instance_key(const std::string& utterance_id, std::size_t syllable);

void write_ground_truth(std::ostream& out, const std::vector<GroundTruthRow>& rows);
/// instance_key -> cluster id; '#' lines skipped.
std::vector<std::pair<std::string, int>> read_ground_truth(std::istream& in);

}  // namespace tonemine::synth
