#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "tonemine/ingest.hpp"
#include "tonemine/preprocess.hpp"

// Linguistic feature set of a tone n-gram (10n + 7 raw features) and its
// numeric encoding for the linear classifier.
namespace tonemine::features {

/// Reserved symbol for rare or unseen categorical values.
inline const std::string kOther = "OTHER";
inline constexpr std::size_t kDefaultMinTagCount = 5;

// ---------------------------------------------------------------- phonology

struct PhonemeAttributes {
  bool vowel = false;
  bool nasal = false;
  bool high = false;
  bool low = false;
  bool front = false;
  bool back = false;
  bool round = false;
};

struct SyllablePhonology {
  bool nasal = false;
  bool diphthong = false;  // two or more vowel symbols in the nucleus
  bool round = false;
  bool front = false;
  bool back = false;
  bool high = false;
  bool low = false;
};

class PhonemeTable {
 public:
  static PhonemeTable parse(std::istream& in);
  static PhonemeTable load(const std::filesystem::path& path);

  /// Throws ValidationError naming the symbol if it is not in the alphabet.
  const PhonemeAttributes& at(const std::string& symbol) const;
  SyllablePhonology syllable(std::span<const std::string> phonemes) const;
  std::uint64_t hash() const { return hash_; }
  std::size_t size() const { return table_.size(); }

 private:
  std::map<std::string, PhonemeAttributes> table_;
  std::uint64_t hash_ = 0;
};

// ------------------------------------------------------------- tag collapse

/// POS tag -> coarse class table (33 tags onto 5 classes by default).
class PosCoarseMap {
 public:
  static PosCoarseMap parse(std::istream& in);
  static PosCoarseMap load(const std::filesystem::path& path);

  /// Coarse class of a tag; class names map to themselves, unknown tags to `fallback()`.
  std::string map(const std::string& tag) const;
  std::vector<std::string> classes() const;
  std::size_t tag_count() const { return table_.size(); }
  const std::string& fallback() const { return fallback_; }

 private:
  std::map<std::string, std::string> table_;
  std::string fallback_ = "other";
};

struct CollapsedVocabulary {
  std::map<std::string, std::string> mapping;  // raw tag -> collapsed symbol
  std::vector<std::string> vocabulary;         // sorted collapsed symbols
  std::string unknown = kOther;                // symbol for unseen tags

  std::string map(const std::string& tag) const;
};

/// "advmod:loc" -> "advmod".
std::string tag_stem(const std::string& tag);

/// Colon subcategories fold into their stem, then stems seen fewer than
/// `min_count` times become OTHER. With a coarse map, surviving tags are
/// additionally mapped to their coarse class and OTHER to the map's fallback.
CollapsedVocabulary collapse_tagset(const std::map<std::string, std::size_t>& counts,
                                    std::size_t min_count = kDefaultMinTagCount,
                                    const PosCoarseMap* coarse = nullptr);

// ------------------------------------------------------------------ schema

enum class FeatureKind { Categorical, Boolean, Numeric };
enum class Domain { Syntactic, Morphological, Semantic, Phonological, Other };
enum class Family {
  Pos, Dep, TokBound, Entity, Singleton,
  Nasal, Diphthong, Round, Front, Back, High, Low,
  SentPosition, StartPitch, EndPitch, PrevTone, NextTone,
};

std::string to_string(Domain d);

struct FeatureSpec {
  std::string name;
  FeatureKind kind = FeatureKind::Boolean;
  Domain domain = Domain::Other;
  Family family = Family::Pos;
  std::vector<std::string> levels;  // categorical only
};

struct FeatureSchema {
  int n = 1;
  CollapsedVocabulary pos;
  CollapsedVocabulary dep;
  std::vector<FeatureSpec> features;
  std::uint64_t phoneme_table_hash = 0;

  std::size_t raw_count() const { return features.size(); }
  std::vector<std::string> feature_names() const;
  std::size_t index_of(const std::string& name) const;
};

/// Levels of prev_tone / next_tone: "0".."4" and "boundary".
std::vector<std::string> tone_levels();
std::string tone_level(int tone);

/// Tag counts over every token of the corpus.
std::map<std::string, std::size_t> pos_counts(const ingest::Corpus& corpus);
std::map<std::string, std::size_t> dep_counts(const ingest::Corpus& corpus);

FeatureSchema build_schema(int n, CollapsedVocabulary pos, CollapsedVocabulary dep,
                           std::uint64_t phoneme_table_hash = 0);
FeatureSchema build_schema(const ingest::Corpus& corpus, int n, const PosCoarseMap& coarse,
                           const PhonemeTable& phonemes, std::size_t min_count = kDefaultMinTagCount);

nlohmann::json schema_json(const FeatureSchema& schema);

// --------------------------------------------------------------- extraction

using FeatureValue = std::variant<std::string, bool, double>;

struct FeatureVector {
  std::uint64_t instance_id = 0;
  std::vector<FeatureValue> values;  // schema order
};

FeatureVector extract_features(const preprocess::NgramInstance& instance, const ingest::Corpus& corpus,
                               const FeatureSchema& schema, const PhonemeTable& phonemes);

// ----------------------------------------------------------------- encoding

struct FeatureMatrix {
  std::vector<std::vector<double>> rows;
  std::vector<std::string> column_names;
  std::vector<std::size_t> column_feature;  // schema feature index of each column

  std::size_t column_count() const { return column_names.size(); }
};

/// One-hot categoricals, {0,1} booleans, numerics standardized with
/// statistics of the vectors the encoder was fitted on.
class Encoder {
 public:
  /// `selected[i]` keeps raw feature i; empty means all.
  static Encoder fit(const FeatureSchema& schema, std::span<const FeatureVector> train,
                     std::vector<bool> selected = {});

  FeatureMatrix transform(std::span<const FeatureVector> vectors) const;
  const std::vector<std::string>& column_names() const { return names_; }
  const std::vector<std::size_t>& column_feature() const { return column_feature_; }
  /// Inverse of transform for one raw feature of one encoded row.
  FeatureValue decode(std::span<const double> row, std::size_t feature) const;

 private:
  FeatureSchema schema_;
  std::vector<bool> selected_;
  std::vector<std::string> names_;
  std::vector<std::size_t> column_feature_;
  std::vector<std::size_t> first_column_;  // per raw feature; SIZE_MAX if dropped
  std::vector<double> mean_, scale_;       // per raw feature, numerics only
};

FeatureMatrix encode(std::span<const FeatureVector> vectors, const FeatureSchema& schema);

void write_matrix_csv(std::ostream& out, const FeatureMatrix& m);

}  // namespace tonemine::features
