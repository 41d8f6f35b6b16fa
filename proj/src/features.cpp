#include "tonemine/features.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <ostream>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "tonemine/errors.hpp"
#include "tonemine/text_util.hpp"

namespace tonemine::features {

using nlohmann::json;

namespace {

std::vector<std::vector<std::string>> read_table(std::istream& in, std::size_t columns, std::uint64_t* hash) {
  std::vector<std::vector<std::string>> rows;
  std::string line;
  std::size_t line_no = 0;
  std::uint64_t h = fnv1a("");
  while (std::getline(in, line)) {
    ++line_no;
    const auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    auto cols = split_whitespace(t);
    if (cols.size() != columns) throw ParseError(fmt::format("expected {} columns", columns), line_no);
    h = fnv1a(t + "\n", h);
    rows.push_back(std::move(cols));
  }
  if (hash) *hash = h;
  return rows;
}

}  // namespace

PhonemeTable PhonemeTable::parse(std::istream& in) {
  PhonemeTable table;
  for (const auto& cols : read_table(in, 8, &table.hash_)) {
    auto flag = [&](std::size_t i) {
      if (cols[i] != "0" && cols[i] != "1") throw ParseError("phoneme flag must be 0/1 for " + cols[0]);
      return cols[i] == "1";
    };
    if (cols[1] != "C" && cols[1] != "V") throw ParseError("phoneme kind must be C or V for " + cols[0]);
    PhonemeAttributes a;
    a.vowel = cols[1] == "V";
    a.nasal = flag(2);
    a.high = flag(3);
    a.low = flag(4);
    a.front = flag(5);
    a.back = flag(6);
    a.round = flag(7);
    table.table_[cols[0]] = a;
  }
  if (table.table_.empty()) throw ParseError("empty phoneme table");
  return table;
}

PhonemeTable PhonemeTable::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open phoneme table " + path.string());
  return parse(in);
}

const PhonemeAttributes& PhonemeTable::at(const std::string& symbol) const {
  const auto it = table_.find(symbol);
  if (it == table_.end()) throw ValidationError("phoneme '" + symbol + "' is not in the phoneme alphabet");
  return it->second;
}

SyllablePhonology PhonemeTable::syllable(std::span<const std::string> phonemes) const {
  SyllablePhonology p;
  std::size_t vowels = 0;
  for (const auto& sym : phonemes) {
    const auto& a = at(sym);
    p.nasal |= a.nasal;
    if (!a.vowel) continue;
    ++vowels;
    p.high |= a.high;
    p.low |= a.low;
    p.front |= a.front;
    p.back |= a.back;
    p.round |= a.round;
  }
  p.diphthong = vowels >= 2;
  return p;
}

PosCoarseMap PosCoarseMap::parse(std::istream& in) {
  PosCoarseMap m;
  for (const auto& cols : read_table(in, 2, nullptr)) m.table_[cols[0]] = cols[1];
  if (m.table_.empty()) throw ParseError("empty POS coarse map");
  return m;
}

PosCoarseMap PosCoarseMap::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open POS coarse map " + path.string());
  return parse(in);
}

std::vector<std::string> PosCoarseMap::classes() const {
  std::set<std::string> s{fallback_};
  for (const auto& [_, c] : table_) s.insert(c);
  return {s.begin(), s.end()};
}

std::string PosCoarseMap::map(const std::string& tag) const {
  const auto it = table_.find(tag);
  if (it != table_.end()) return it->second;
  for (const auto& [_, c] : table_) {
    if (c == tag) return tag;
  }
  return fallback_;
}

std::string CollapsedVocabulary::map(const std::string& tag) const {
  auto it = mapping.find(tag);
  if (it != mapping.end()) return it->second;
  it = mapping.find(tag_stem(tag));
  if (it != mapping.end()) return it->second;
  return unknown;
}

std::string tag_stem(const std::string& tag) {
  const auto pos = tag.find(':');
  return pos == std::string::npos ? tag : tag.substr(0, pos);
}

CollapsedVocabulary collapse_tagset(const std::map<std::string, std::size_t>& counts, std::size_t min_count,
                                    const PosCoarseMap* coarse) {
  if (min_count < 1) throw ValidationError("min_count must be >= 1");
  std::map<std::string, std::size_t> stem_counts;
  for (const auto& [tag, c] : counts) stem_counts[tag_stem(tag)] += c;

  CollapsedVocabulary out;
  if (coarse) out.unknown = coarse->fallback();
  std::set<std::string> vocab;
  for (const auto& [tag, _] : counts) {
    const auto stem = tag_stem(tag);
    std::string sym = stem_counts[stem] < min_count ? kOther : stem;
    if (coarse) sym = sym == kOther ? coarse->fallback() : coarse->map(sym);
    out.mapping[tag] = sym;
    out.mapping[stem] = sym;
    vocab.insert(sym);
  }
  if (coarse) {
    for (const auto& c : coarse->classes()) vocab.insert(c);
  } else {
    vocab.insert(kOther);
  }
  for (const auto& sym : vocab) out.mapping.emplace(sym, sym);
  out.vocabulary.assign(vocab.begin(), vocab.end());
  return out;
}

std::string to_string(Domain d) {
  switch (d) {
    case Domain::Syntactic: return "syntactic";
    case Domain::Morphological: return "morphological";
    case Domain::Semantic: return "semantic";
    case Domain::Phonological: return "phonological";
    case Domain::Other: return "other";
  }
  return "other";
}

std::vector<std::string> tone_levels() { return {"0", "1", "2", "3", "4", "boundary"}; }

std::string tone_level(int tone) { return tone == kBoundaryTone ? "boundary" : std::to_string(tone); }

std::vector<std::string> FeatureSchema::feature_names() const {
  std::vector<std::string> out;
  for (const auto& f : features) out.push_back(f.name);
  return out;
}

std::size_t FeatureSchema::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < features.size(); ++i) {
    if (features[i].name == name) return i;
  }
  throw std::out_of_range("no feature named " + name);
}

std::map<std::string, std::size_t> pos_counts(const ingest::Corpus& corpus) {
  std::map<std::string, std::size_t> out;
  for (const auto& [_, toks] : corpus.annotations) {
    for (const auto& t : toks) ++out[t.pos_tag];
  }
  return out;
}

std::map<std::string, std::size_t> dep_counts(const ingest::Corpus& corpus) {
  std::map<std::string, std::size_t> out;
  for (const auto& [_, toks] : corpus.annotations) {
    for (const auto& t : toks) ++out[t.dep_function];
  }
  return out;
}

FeatureSchema build_schema(int n, CollapsedVocabulary pos, CollapsedVocabulary dep,
                           std::uint64_t phoneme_table_hash) {
  if (n < 1 || n > 3) throw ValidationError(fmt::format("n-gram order {} not in {{1,2,3}}", n));
  FeatureSchema s;
  s.n = n;
  s.pos = std::move(pos);
  s.dep = std::move(dep);
  s.phoneme_table_hash = phoneme_table_hash;
  auto per_syllable = [&](const std::string& stem, FeatureKind kind, Domain domain, Family family,
                          const std::vector<std::string>& levels = {}) {
    for (int i = 1; i <= n; ++i) s.features.push_back({fmt::format("{}_{}", stem, i), kind, domain, family, levels});
  };
  auto single = [&](const std::string& name, FeatureKind kind, Domain domain, Family family,
                    const std::vector<std::string>& levels = {}) {
    s.features.push_back({name, kind, domain, family, levels});
  };
  using K = FeatureKind;
  using D = Domain;
  using F = Family;
  per_syllable("pos_tag", K::Categorical, D::Syntactic, F::Pos, s.pos.vocabulary);
  per_syllable("dep_func", K::Categorical, D::Syntactic, F::Dep, s.dep.vocabulary);
  per_syllable("tok_bound", K::Boolean, D::Morphological, F::TokBound);
  single("is_entity", K::Boolean, D::Semantic, F::Entity);
  single("is_singleton", K::Boolean, D::Semantic, F::Singleton);
  per_syllable("is_nasal", K::Boolean, D::Phonological, F::Nasal);
  per_syllable("is_dipthong", K::Boolean, D::Phonological, F::Diphthong);
  per_syllable("is_round", K::Boolean, D::Phonological, F::Round);
  per_syllable("is_front", K::Boolean, D::Phonological, F::Front);
  per_syllable("is_back", K::Boolean, D::Phonological, F::Back);
  per_syllable("is_high", K::Boolean, D::Phonological, F::High);
  per_syllable("is_low", K::Boolean, D::Phonological, F::Low);
  single("sent_position", K::Numeric, D::Other, F::SentPosition);
  single("start_pitch", K::Numeric, D::Other, F::StartPitch);
  single("end_pitch", K::Numeric, D::Other, F::EndPitch);
  single("prev_tone", K::Categorical, D::Other, F::PrevTone, tone_levels());
  single("next_tone", K::Categorical, D::Other, F::NextTone, tone_levels());
  return s;
}

FeatureSchema build_schema(const ingest::Corpus& corpus, int n, const PosCoarseMap& coarse,
                           const PhonemeTable& phonemes, std::size_t min_count) {
  return build_schema(n, collapse_tagset(pos_counts(corpus), min_count, &coarse),
                      collapse_tagset(dep_counts(corpus), min_count), phonemes.hash());
}

json schema_json(const FeatureSchema& schema) {
  return {{"n", schema.n},
          {"features", schema.feature_names()},
          {"pos", {{"vocabulary", schema.pos.vocabulary}, {"mapping", schema.pos.mapping}}},
          {"dep", {{"vocabulary", schema.dep.vocabulary}, {"mapping", schema.dep.mapping}}},
          {"phoneme_table_hash", fmt::format("{:016x}", schema.phoneme_table_hash)}};
}

FeatureVector extract_features(const preprocess::NgramInstance& instance, const ingest::Corpus& corpus,
                               const FeatureSchema& schema, const PhonemeTable& phonemes) {
  const std::size_t n = static_cast<std::size_t>(schema.n);
  if (instance.category.size() != n) throw ValidationError("instance order does not match schema");
  const auto& syls = corpus.syllables.at(instance.utterance_id);
  if (instance.first_syllable + n > syls.size()) throw ValidationError("instance window outside utterance");

  std::vector<const ingest::TokenAnnotation*> tokens;
  std::vector<SyllablePhonology> phon;
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t idx = instance.first_syllable + k;
    tokens.push_back(&corpus.token_for(instance.utterance_id, idx));
    phon.push_back(phonemes.syllable(syls[idx].phonemes));
  }

  FeatureVector fv;
  fv.instance_id = instance.instance_id;
  fv.values.reserve(schema.raw_count());
  for (std::size_t k = 0; k < n; ++k) fv.values.emplace_back(schema.pos.map(tokens[k]->pos_tag));
  for (std::size_t k = 0; k < n; ++k) fv.values.emplace_back(schema.dep.map(tokens[k]->dep_function));
  for (std::size_t k = 0; k < n; ++k) fv.values.emplace_back(k > 0 && syls[instance.first_syllable + k].word_initial);
  fv.values.emplace_back(std::any_of(tokens.begin(), tokens.end(), [](auto* t) { return t->in_named_entity; }));
  fv.values.emplace_back(std::any_of(tokens.begin(), tokens.end(), [](auto* t) { return t->is_singleton; }));
  for (bool SyllablePhonology::*attr : {&SyllablePhonology::nasal, &SyllablePhonology::diphthong,
                                        &SyllablePhonology::round, &SyllablePhonology::front,
                                        &SyllablePhonology::back, &SyllablePhonology::high,
                                        &SyllablePhonology::low}) {
    for (std::size_t k = 0; k < n; ++k) fv.values.emplace_back(phon[k].*attr);
  }
  fv.values.emplace_back(instance.sentence_position);
  fv.values.emplace_back(instance.start_pitch);
  fv.values.emplace_back(instance.end_pitch);
  fv.values.emplace_back(tone_level(instance.prev_tone));
  fv.values.emplace_back(tone_level(instance.next_tone));
  return fv;
}

Encoder Encoder::fit(const FeatureSchema& schema, std::span<const FeatureVector> train, std::vector<bool> selected) {
  Encoder e;
  e.schema_ = schema;
  const std::size_t raw = schema.raw_count();
  if (selected.empty()) selected.assign(raw, true);
  if (selected.size() != raw) throw std::invalid_argument("feature selection size mismatch");
  e.selected_ = std::move(selected);
  e.first_column_.assign(raw, std::numeric_limits<std::size_t>::max());
  e.mean_.assign(raw, 0.0);
  e.scale_.assign(raw, 1.0);
  for (std::size_t f = 0; f < raw; ++f) {
    if (!e.selected_[f]) continue;
    const auto& spec = schema.features[f];
    e.first_column_[f] = e.names_.size();
    if (spec.kind == FeatureKind::Categorical) {
      for (const auto& level : spec.levels) {
        e.names_.push_back(spec.name + "=" + level);
        e.column_feature_.push_back(f);
      }
      continue;
    }
    e.names_.push_back(spec.name);
    e.column_feature_.push_back(f);
    if (spec.kind == FeatureKind::Numeric && !train.empty()) {
      double sum = 0.0, ss = 0.0;
      for (const auto& v : train) sum += std::get<double>(v.values[f]);
      const double mean = sum / static_cast<double>(train.size());
      for (const auto& v : train) {
        const double d = std::get<double>(v.values[f]) - mean;
        ss += d * d;
      }
      const double sd = std::sqrt(ss / static_cast<double>(train.size()));
      e.mean_[f] = mean;
      e.scale_[f] = sd > 1e-12 ? sd : 1.0;
    }
  }
  return e;
}

FeatureMatrix Encoder::transform(std::span<const FeatureVector> vectors) const {
  FeatureMatrix m;
  m.column_names = names_;
  m.column_feature = column_feature_;
  m.rows.reserve(vectors.size());
  for (const auto& v : vectors) {
    if (v.values.size() != schema_.raw_count()) throw ValidationError("feature vector arity does not match schema");
    std::vector<double> row(names_.size(), 0.0);
    for (std::size_t f = 0; f < schema_.raw_count(); ++f) {
      if (!selected_[f]) continue;
      const auto& spec = schema_.features[f];
      const std::size_t col = first_column_[f];
      switch (spec.kind) {
        case FeatureKind::Categorical: {
          const auto& val = std::get<std::string>(v.values[f]);
          auto it = std::find(spec.levels.begin(), spec.levels.end(), val);
          if (it == spec.levels.end()) {
            it = std::find(spec.levels.begin(), spec.levels.end(), kOther);
            if (it == spec.levels.end()) throw ValidationError("value '" + val + "' not in levels of " + spec.name);
          }
          row[col + static_cast<std::size_t>(it - spec.levels.begin())] = 1.0;
          break;
        }
        case FeatureKind::Boolean:
          row[col] = std::get<bool>(v.values[f]) ? 1.0 : 0.0;
          break;
        case FeatureKind::Numeric:
          row[col] = (std::get<double>(v.values[f]) - mean_[f]) / scale_[f];
          break;
      }
    }
    m.rows.push_back(std::move(row));
  }
  return m;
}

FeatureValue Encoder::decode(std::span<const double> row, std::size_t feature) const {
  if (!selected_.at(feature)) throw std::invalid_argument("feature not encoded");
  const auto& spec = schema_.features[feature];
  const std::size_t col = first_column_[feature];
  switch (spec.kind) {
    case FeatureKind::Categorical: {
      const auto begin = row.begin() + static_cast<std::ptrdiff_t>(col);
      const auto best = std::max_element(begin, begin + static_cast<std::ptrdiff_t>(spec.levels.size()));
      return spec.levels[static_cast<std::size_t>(best - begin)];
    }
    case FeatureKind::Boolean:
      return row[col] > 0.5;
    case FeatureKind::Numeric:
      return row[col] * scale_[feature] + mean_[feature];
  }
  return false;
}

FeatureMatrix encode(std::span<const FeatureVector> vectors, const FeatureSchema& schema) {
  return Encoder::fit(schema, vectors).transform(vectors);
}

void write_matrix_csv(std::ostream& out, const FeatureMatrix& m) {
  out << fmt::format("{}\n", fmt::join(m.column_names, ","));
  for (const auto& row : m.rows) {
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (j) out << ',';
      out << fmt::format("{}", row[j]);
    }
    out << '\n';
  }
}

}  // namespace tonemine::features
