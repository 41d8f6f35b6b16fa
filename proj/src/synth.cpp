#include "tonemine/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <ostream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>
#include <tbb/parallel_for.h>

#include "tonemine/errors.hpp"
#include "tonemine/text_util.hpp"

namespace tonemine::synth {

namespace {

// Onset + rime pairs drawn uniformly for each syllable. Every symbol is in data/phonemes.tsv.
const std::vector<std::string> kOnsets{"b", "p", "m", "f", "d", "t", "n", "l", "g", "k", "h",
                                       "j", "q", "x", "zh", "ch", "sh", "r", "z", "c", "s", ""};
const std::vector<std::vector<std::string>> kRimes{
    {"a"}, {"o"}, {"e"}, {"i"}, {"u"}, {"v"}, {"a", "i"}, {"a", "u"}, {"o", "u"}, {"E", "i"},
    {"a", "n"}, {"a", "ng"}, {"e", "n"}, {"e", "ng"}, {"i", "a"}, {"u", "a"}, {"i", "E"}, {"u", "o"}, {"er"}};

bool near_one(double s) { return std::abs(s - 1.0) < 1e-9; }

void check_rule(const CouplingRule& r) {
  static const std::vector<std::string> plain{"is_entity", "is_singleton", "word_initial"};
  const bool ok = std::find(plain.begin(), plain.end(), r.feature) != plain.end() ||
                  (r.feature.rfind("pos=", 0) == 0 && r.feature.size() > 4);
  if (!ok) throw ValidationError("unknown coupling feature '" + r.feature + "'");
  for (int t : r.tones) {
    if (t < 0 || t > 4) throw ValidationError(fmt::format("coupling tone {} outside 0..4", t));
  }
  if (!std::isfinite(r.d_intercept) || !std::isfinite(r.d_slope)) {
    throw ValidationError("coupling shifts must be finite");
  }
}

bool rule_fires(const CouplingRule& r, int tone, const ingest::TokenAnnotation& tok, bool word_initial) {
  if (!r.tones.empty() && std::find(r.tones.begin(), r.tones.end(), tone) == r.tones.end()) return false;
  if (r.feature == "is_entity") return tok.in_named_entity;
  if (r.feature == "is_singleton") return tok.is_singleton;
  if (r.feature == "word_initial") return word_initial;
  return tok.pos_tag == r.feature.substr(4);
}

std::string join_numbers(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += fmt::format("{}{}", i ? "," : "", v[i]);
  return s;
}

}  // namespace

void SynthSpec::validate() const {
  if (speakers.empty()) throw ValidationError("synth spec needs at least one speaker");
  for (const auto& s : speakers) {
    if (s.id.empty() || !(s.std_log_f0 > 0.0) || !std::isfinite(s.mean_log_f0)) {
      throw ValidationError("speaker '" + s.id + "' needs a name, finite mean and positive std");
    }
  }
  if (utterances == 0) throw ValidationError("synth spec needs utterances > 0");
  if (min_syllables == 0 || min_syllables > max_syllables) {
    throw ValidationError("syllables per utterance must satisfy 1 <= min <= max");
  }
  for (double p : tone_probs) {
    if (p < 0.0) throw ValidationError("tone probabilities must be non-negative");
  }
  if (!near_one(std::accumulate(tone_probs.begin(), tone_probs.end(), 0.0))) {
    throw ValidationError("tone probabilities must sum to 1");
  }
  if (word_length_probs.empty() || !near_one(std::accumulate(word_length_probs.begin(), word_length_probs.end(), 0.0))) {
    throw ValidationError("word length probabilities must sum to 1");
  }
  if (!(approach_rate > 0.0)) throw ValidationError("approach rate must be > 0");
  if (!(noise_std >= 0.0) || !(onset_jitter >= 0.0)) throw ValidationError("noise must be >= 0");
  if (!(unvoiced_prob >= 0.0 && unvoiced_prob < 1.0)) throw ValidationError("unvoiced_prob must be in [0, 1)");
  if (pos.empty() || dep.empty()) throw ValidationError("synth spec needs POS and dependency distributions");
  for (const auto* dist : {&pos, &dep}) {
    for (const auto& w : *dist) {
      if (!(w.weight > 0.0)) throw ValidationError("tag weight for '" + w.tag + "' must be > 0");
    }
  }
  if (!(singleton_prob >= 0.0 && singleton_prob <= 1.0)) throw ValidationError("singleton_prob must be in [0, 1]");
  if (coupling.size() > 30) throw ValidationError("at most 30 coupling rules");
  for (const auto& r : coupling) check_rule(r);
}

SynthSpec default_spec() {
  SynthSpec s;
  s.seed = 20240501;
  s.speakers = {{"spk_a", 5.30, 0.18}, {"spk_b", 4.85, 0.22}, {"spk_c", 5.55, 0.15}};
  s.utterances = 2000;
  s.targets = {Target{-0.3, -0.5}, Target{1.0, 0.0}, Target{-0.5, 1.5}, Target{-1.0, -0.5}, Target{1.2, -2.2}};
  s.onset_jitter = 0.3;
  s.unvoiced_prob = 0.02;
  s.pos = {{"NN", 0.30}, {"VV", 0.25}, {"AD", 0.10}, {"P", 0.08}, {"NR", 0.07},
           {"JJ", 0.05}, {"DEG", 0.05}, {"CD", 0.05}, {"M", 0.05}};
  s.dep = {{"nsubj", 0.25}, {"dobj", 0.20}, {"advmod", 0.15}, {"nmod", 0.15},
           {"case", 0.10}, {"root", 0.10}, {"amod", 0.05}};
  s.coupling = {{"is_entity", {}, 0.6, 0.0}, {"pos=VV", {4}, 0.0, -1.0}, {"word_initial", {}, 0.3, 0.0}};
  return s;
}

SynthSpec planted_spec(std::uint64_t seed, std::size_t per_tone, double noise_std) {
  SynthSpec s;
  s.seed = seed;
  s.speakers = {{"spk_a", 5.30, 0.18}, {"spk_b", 4.85, 0.22}, {"spk_c", 5.55, 0.15}};
  s.utterances = 4 * per_tone;
  s.min_syllables = s.max_syllables = 1;
  s.tone_probs = {0.0, 0.25, 0.25, 0.25, 0.25};
  s.cycle_tones = true;
  s.targets = {Target{0.0, 0.0}, Target{0.0, 0.0}, Target{-0.6, 1.2}, Target{0.0, -0.6}, Target{0.6, -1.8}};
  s.noise_std = noise_std;
  s.word_length_probs = {1.0};
  s.pos = {{"NN", 0.25}, {"VV", 0.25}, {"AD", 0.20}, {"P", 0.15}, {"NR", 0.15}};
  s.dep = {{"nsubj", 0.3}, {"dobj", 0.3}, {"advmod", 0.2}, {"case", 0.2}};
  s.coupling = {
      {"pos=VV", {1, 2, 3}, 1.2, 0.0}, {"pos=AD", {1, 2, 3}, -1.2, 0.0}, {"pos=P", {2, 3}, 2.4, 0.0},
      {"is_entity", {3}, -2.4, 0.0},   {"pos=VV", {4}, -1.2, 0.0},       {"pos=P", {4}, 1.2, 0.0},
      {"is_entity", {4}, -2.4, 0.0},
  };
  return s;
}

SynthSpec parse_spec(std::istream& in) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ParseError(e.message(), e.line());
  }
  SynthSpec s;
  s.pos.clear();
  s.dep.clear();
  s.entity_tags.clear();
  try {
    const auto& g = tree.get_child("synth");
    s.seed = g.get<std::uint64_t>("seed");
    s.utterances = g.get<std::size_t>("utterances", s.utterances);
    s.min_syllables = g.get<std::size_t>("syllables_min", s.min_syllables);
    s.max_syllables = g.get<std::size_t>("syllables_max", s.max_syllables);
    s.approach_rate = g.get<double>("approach_rate", s.approach_rate);
    s.noise_std = g.get<double>("noise_std", s.noise_std);
    s.onset_jitter = g.get<double>("onset_jitter", s.onset_jitter);
    s.unvoiced_prob = g.get<double>("unvoiced_prob", s.unvoiced_prob);
    s.singleton_prob = g.get<double>("singleton_prob", s.singleton_prob);
    s.cycle_tones = g.get<bool>("cycle_tones", s.cycle_tones);
    if (auto v = g.get_optional<std::string>("tone_probs")) {
      const auto p = parse_number_list<double>(*v);
      if (p.size() != 5) throw ValidationError("tone_probs needs 5 values");
      std::copy(p.begin(), p.end(), s.tone_probs.begin());
    }
    if (auto v = g.get_optional<std::string>("word_length_probs")) s.word_length_probs = parse_number_list<double>(*v);
    for (const auto& t : split(g.get<std::string>("entity_tags", "NR"), ',')) {
      if (!trim(t).empty()) s.entity_tags.push_back(trim(t));
    }
    for (const auto& [id, v] : tree.get_child("speakers")) {
      const auto p = parse_number_list<double>(v.data());
      if (p.size() != 2) throw ValidationError("speaker '" + id + "' needs mean,std");
      s.speakers.push_back({id, p[0], p[1]});
    }
    for (int t = 0; t <= 4; ++t) {
      const auto p = parse_number_list<double>(tree.get<std::string>(fmt::format("targets.tone{}", t)));
      if (p.size() != 2) throw ValidationError(fmt::format("tone{} target needs intercept,slope", t));
      s.targets[static_cast<std::size_t>(t)] = {p[0], p[1]};
    }
    for (const auto& [tag, v] : tree.get_child("pos")) s.pos.push_back({tag, parse_number<double>(trim(v.data()))});
    for (const auto& [tag, v] : tree.get_child("dep")) s.dep.push_back({tag, parse_number<double>(trim(v.data()))});
    for (const auto& [name, sec] : tree) {
      if (name.rfind("coupling", 0) != 0) continue;
      CouplingRule r;
      r.feature = sec.get<std::string>("feature");
      r.tones = parse_number_list<int>(sec.get<std::string>("tones", ""));
      r.d_intercept = sec.get<double>("d_intercept", 0.0);
      r.d_slope = sec.get<double>("d_slope", 0.0);
      s.coupling.push_back(std::move(r));
    }
  } catch (const pt::ptree_error& e) {
    throw ValidationError(std::string("synth spec: ") + e.what());
  }
  s.validate();
  return s;
}

SynthSpec load_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open synth spec " + path.string());
  return parse_spec(in);
}

void write_spec(std::ostream& out, const SynthSpec& s) {
  out << "[synth]\n";
  out << fmt::format("seed = {}\nutterances = {}\nsyllables_min = {}\nsyllables_max = {}\n", s.seed, s.utterances,
                     s.min_syllables, s.max_syllables);
  out << fmt::format("approach_rate = {}\nnoise_std = {}\nonset_jitter = {}\nunvoiced_prob = {}\n", s.approach_rate,
                     s.noise_std, s.onset_jitter, s.unvoiced_prob);
  out << fmt::format("singleton_prob = {}\ncycle_tones = {}\n", s.singleton_prob, s.cycle_tones ? "true" : "false");
  out << "tone_probs = " << join_numbers({s.tone_probs.begin(), s.tone_probs.end()}) << "\n";
  out << "word_length_probs = " << join_numbers(s.word_length_probs) << "\n";
  std::string tags;
  for (const auto& t : s.entity_tags) tags += (tags.empty() ? "" : ",") + t;
  out << "entity_tags = " << tags << "\n\n[speakers]\n";
  for (const auto& sp : s.speakers) out << fmt::format("{} = {},{}\n", sp.id, sp.mean_log_f0, sp.std_log_f0);
  out << "\n[targets]\n";
  for (std::size_t t = 0; t < 5; ++t) {
    out << fmt::format("tone{} = {},{}\n", t, s.targets[t].intercept, s.targets[t].slope);
  }
  out << "\n[pos]\n";
  for (const auto& w : s.pos) out << fmt::format("{} = {}\n", w.tag, w.weight);
  out << "\n[dep]\n";
  for (const auto& w : s.dep) out << fmt::format("{} = {}\n", w.tag, w.weight);
  for (std::size_t i = 0; i < s.coupling.size(); ++i) {
    const auto& r = s.coupling[i];
    std::string tones;
    for (int t : r.tones) tones += fmt::format("{}{}", tones.empty() ? "" : ",", t);
    out << fmt::format("\n[coupling{}]\nfeature = {}\ntones = {}\nd_intercept = {}\nd_slope = {}\n", i + 1,
                       r.feature, tones, r.d_intercept, r.d_slope);
  }
}

double contour_value(const Target& target, double entry, double lambda, double u) {
  return target.at(u) + (entry - target.at(0.0)) * std::exp(-lambda * u);
}

std::vector<double> generate_contour(std::span<const Target> targets, double start_pitch, double lambda,
                                     double noise_std, std::mt19937_64& rng) {
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<double> out;
  out.reserve(targets.size() * kSamplesPerSyllable);
  double entry = start_pitch;
  for (const auto& target : targets) {
    for (std::size_t k = 0; k < kSamplesPerSyllable; ++k) {
      const double u = static_cast<double>(k) / kSamplesPerSyllable;
      double v = contour_value(target, entry, lambda, u);
      if (noise_std > 0.0) v += noise_std * noise(rng);
      out.push_back(v);
    }
    entry = contour_value(target, entry, lambda, 1.0);
  }
  return out;
}

std::vector<double> generate_contour(std::span<const int> tones, double start_pitch, const SynthSpec& spec,
                                     std::mt19937_64& rng) {
  std::vector<Target> targets;
  for (int t : tones) {
    if (t < 0 || t > 4) throw ValidationError(fmt::format("tone {} outside 0..4", t));
    targets.push_back(spec.targets[static_cast<std::size_t>(t)]);
  }
  return generate_contour(targets, start_pitch, spec.approach_rate, spec.noise_std, rng);
}

std::string instance_key(const std::string& utterance_id, std::size_t syllable) {
  return fmt::format("{}:{}", utterance_id, syllable);
}

namespace {

struct Utterance {
  ingest::F0Track track;
  std::vector<ingest::SyllableRecord> syllables;
  std::vector<ingest::TokenAnnotation> tokens;
  std::vector<GroundTruthRow> truth;
};

template <typename T>
std::discrete_distribution<std::size_t> weights_of(const std::vector<T>& items) {
  std::vector<double> w;
  for (const auto& i : items) {
    if constexpr (std::is_same_v<T, WeightedTag>) {
      w.push_back(i.weight);
    } else {
      w.push_back(i);
    }
  }
  return std::discrete_distribution<std::size_t>(w.begin(), w.end());
}

Utterance generate_utterance(const SynthSpec& spec, std::size_t index, const std::vector<int>& tone_support) {
  std::mt19937_64 rng(derive_seed(spec.seed, fmt::format("utt/{}", index)));
  Utterance u;
  const auto& speaker = spec.speakers[index % spec.speakers.size()];
  const std::string utt = fmt::format("u{:06d}", index);

  std::uniform_int_distribution<std::size_t> len_dist(spec.min_syllables, spec.max_syllables);
  const std::size_t len = len_dist(rng);
  auto tone_dist = weights_of(std::vector<double>(spec.tone_probs.begin(), spec.tone_probs.end()));
  std::vector<int> tones(len);
  for (std::size_t i = 0; i < len; ++i) {
    tones[i] = spec.cycle_tones ? tone_support[(index + i) % tone_support.size()]
                                : static_cast<int>(tone_dist(rng));
  }

  // Tokens: word lengths truncated at the utterance end; one token per word.
  auto wlen_dist = weights_of(spec.word_length_probs);
  auto pos_dist = weights_of(spec.pos);
  auto dep_dist = weights_of(spec.dep);
  std::bernoulli_distribution singleton(spec.singleton_prob);
  for (std::size_t first = 0; first < len;) {
    const std::size_t w = std::min(wlen_dist(rng) + 1, len - first);
    ingest::TokenAnnotation tok;
    tok.utterance_id = utt;
    tok.first_syllable = first;
    tok.last_syllable = first + w - 1;
    tok.pos_tag = spec.pos[pos_dist(rng)].tag;
    tok.dep_function = spec.dep[dep_dist(rng)].tag;
    tok.in_named_entity =
        std::find(spec.entity_tags.begin(), spec.entity_tags.end(), tok.pos_tag) != spec.entity_tags.end();
    tok.is_singleton = singleton(rng);
    u.tokens.push_back(std::move(tok));
    first += w;
  }

  std::uniform_int_distribution<std::size_t> onset_dist(0, kOnsets.size() - 1);
  std::uniform_int_distribution<std::size_t> rime_dist(0, kRimes.size() - 1);
  std::vector<Target> targets(len);
  std::size_t tok_index = 0;
  for (std::size_t i = 0; i < len; ++i) {
    while (!u.tokens[tok_index].covers(i)) ++tok_index;
    const auto& tok = u.tokens[tok_index];
    const bool initial = tok.first_syllable == i;

    Target target = spec.targets[static_cast<std::size_t>(tones[i])];
    int cluster = 0;
    for (std::size_t r = 0; r < spec.coupling.size(); ++r) {
      const auto& rule = spec.coupling[r];
      if (!rule_fires(rule, tones[i], tok, initial)) continue;
      target.intercept += rule.d_intercept;
      target.slope += rule.d_slope;
      cluster |= 1 << r;
    }
    targets[i] = target;
    u.truth.push_back({instance_key(utt, i), cluster, tones[i], target});

    ingest::SyllableRecord syl;
    syl.utterance_id = utt;
    syl.index = i;
    syl.tone = tones[i];
    syl.start = static_cast<double>(i * kSamplesPerSyllable) * kSamplePeriod;
    syl.end = static_cast<double>((i + 1) * kSamplesPerSyllable - 1) * kSamplePeriod;
    const auto& onset = kOnsets[onset_dist(rng)];
    if (!onset.empty()) syl.phonemes.push_back(onset);
    const auto& rime = kRimes[rime_dist(rng)];
    syl.phonemes.insert(syl.phonemes.end(), rime.begin(), rime.end());
    syl.word_initial = initial;
    syl.word_final = tok.last_syllable == i;
    u.syllables.push_back(std::move(syl));
  }

  std::normal_distribution<double> jitter(0.0, 1.0);
  double start = targets.front().at(0.0);
  if (spec.onset_jitter > 0.0) start += spec.onset_jitter * jitter(rng);
  const auto pitch = generate_contour(targets, start, spec.approach_rate, spec.noise_std, rng);

  std::bernoulli_distribution unvoiced(spec.unvoiced_prob);
  u.track.utterance_id = utt;
  u.track.speaker_id = speaker.id;
  u.track.sample_period = kSamplePeriod;
  for (std::size_t k = 0; k < pitch.size(); ++k) {
    ingest::F0Sample s;
    s.time = static_cast<double>(k) * kSamplePeriod;
    const bool drop = spec.unvoiced_prob > 0.0 && unvoiced(rng);
    if (!drop) s.hz = std::exp(speaker.mean_log_f0 + speaker.std_log_f0 * pitch[k]);
    u.track.samples.push_back(s);
  }
  return u;
}

}  // namespace

SynthCorpus generate_corpus(const SynthSpec& spec) {
  spec.validate();
  std::vector<int> support;
  for (int t = 0; t <= 4; ++t) {
    if (spec.tone_probs[static_cast<std::size_t>(t)] > 0.0) support.push_back(t);
  }
  std::vector<Utterance> utts(spec.utterances);
  tbb::parallel_for(std::size_t{0}, spec.utterances,
                    [&](std::size_t i) { utts[i] = generate_utterance(spec, i, support); });

  SynthCorpus c;
  for (auto& u : utts) {
    c.tracks.push_back(std::move(u.track));
    std::move(u.syllables.begin(), u.syllables.end(), std::back_inserter(c.syllables));
    std::move(u.tokens.begin(), u.tokens.end(), std::back_inserter(c.tokens));
    std::move(u.truth.begin(), u.truth.end(), std::back_inserter(c.ground_truth));
  }
  return c;
}

void write_ground_truth(std::ostream& out, const std::vector<GroundTruthRow>& rows) {
  out << "instance_key,cluster_id\n";
  for (const auto& r : rows) out << r.instance_key << ',' << r.cluster_id << '\n';
}

std::vector<std::pair<std::string, int>> read_ground_truth(std::istream& in) {
  std::vector<std::pair<std::string, int>> out;
  std::string line;
  std::size_t line_no = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    if (!header) {
      if (trim(line) != "instance_key,cluster_id") throw ParseError("expected ground-truth header", line_no);
      header = true;
      continue;
    }
    const auto cols = split(line, ',');
    if (cols.size() != 2) throw ParseError("expected 2 columns", line_no);
    out.emplace_back(cols[0], parse_number<int>(cols[1], line_no));
  }
  return out;
}

}  // namespace tonemine::synth
