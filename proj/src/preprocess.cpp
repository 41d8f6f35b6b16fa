#include "tonemine/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>
#include <tbb/parallel_for.h>

#include "tonemine/text_util.hpp"

namespace tonemine {

std::string category_name(const Category& c) {
  std::string out;
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (i) out += '-';
    out += std::to_string(c[i]);
  }
  return out;
}

Category parse_category(const std::string& name) {
  Category c;
  for (const auto& part : split(name, '-')) {
    const int t = parse_number<int>(part);
    if (t < 0 || t > 4) throw ParseError("tone outside 0..4 in category '" + name + "'");
    c.push_back(t);
  }
  if (c.empty() || c.size() > 3) throw ParseError("bad category '" + name + "'");
  return c;
}

}  // namespace tonemine

namespace tonemine::preprocess {

using ingest::Corpus;
using ingest::F0Track;
using ingest::SyllableRecord;
using nlohmann::json;

std::size_t vector_length(int n) {
  switch (n) {
    case 1: return 30;
    case 2: return 100;
    case 3: return 200;
    default: throw ValidationError(fmt::format("n-gram order {} not in {{1,2,3}}", n));
  }
}

namespace {

struct Moments {
  double mean = 0.0;
  double stddev = 0.0;
};

Moments moments(const std::vector<double>& xs) {
  Moments m;
  if (xs.empty()) return m;
  m.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - m.mean) * (x - m.mean);
  m.stddev = std::sqrt(ss / static_cast<double>(xs.size()));
  return m;
}

constexpr double kDegenerateStd = 1e-12;

}  // namespace

SpeakerStatsMap speaker_stats(const Corpus& corpus, std::vector<std::string>* excluded) {
  std::map<std::string, std::vector<double>> log_f0;
  for (const auto& [_, track] : corpus.tracks) {
    auto& v = log_f0[track.speaker_id];
    for (const auto& s : track.samples) {
      if (s.hz) v.push_back(std::log(*s.hz));
    }
  }

  SpeakerStatsMap out;
  for (const auto& [speaker, values] : log_f0) {
    auto reject = [&](const char* why) {
      spdlog::warn("speaker '{}' excluded from normalization: {}", speaker, why);
      if (excluded) excluded->push_back(speaker);
    };
    if (values.size() < kMinVoicedPerSpeaker) {
      reject("too few voiced samples");
      continue;
    }
    const Moments first = moments(values);
    if (first.stddev < kDegenerateStd) {
      reject("zero log-f0 variance");
      continue;
    }
    std::vector<double> kept;
    kept.reserve(values.size());
    for (double x : values) {
      if (std::abs((x - first.mean) / first.stddev) <= kOutlierZ) kept.push_back(x);
    }
    const Moments second = moments(kept);
    if (kept.size() < kMinVoicedPerSpeaker || second.stddev < kDegenerateStd) {
      reject("degenerate after outlier removal");
      continue;
    }
    out.emplace(speaker, SpeakerStats{speaker, second.mean, second.stddev});
  }
  return out;
}

bool NormalizedTrack::empty() const { return present_count() == 0; }

std::size_t NormalizedTrack::present_count() const {
  return static_cast<std::size_t>(
      std::count_if(z.begin(), z.end(), [](const auto& v) { return v.has_value(); }));
}

NormalizedTrack clean_track(const F0Track& track, const SpeakerStats& stats) {
  NormalizedTrack out;
  out.utterance_id = track.utterance_id;
  out.times.reserve(track.samples.size());
  out.z.reserve(track.samples.size());
  for (const auto& s : track.samples) {
    out.times.push_back(s.time);
    std::optional<double> z;
    if (s.hz) {
      const double v = (std::log(*s.hz) - stats.mean_log_f0) / stats.std_log_f0;
      if (std::abs(v) <= kOutlierZ) z = v;
    }
    out.z.push_back(z);
  }

  // Interior gaps only; leading and trailing gaps stay absent.
  std::optional<std::size_t> prev;
  for (std::size_t i = 0; i < out.z.size(); ++i) {
    if (!out.z[i]) continue;
    if (prev && i > *prev + 1) {
      const double t0 = out.times[*prev], t1 = out.times[i];
      const double z0 = *out.z[*prev], z1 = *out.z[i];
      for (std::size_t j = *prev + 1; j < i; ++j) {
        const double w = (out.times[j] - t0) / (t1 - t0);
        out.z[j] = z0 + w * (z1 - z0);
      }
    }
    prev = i;
  }
  return out;
}

std::optional<Contour> cut_contour(const NormalizedTrack& track,
                                   std::span<const SyllableRecord> window) {
  if (window.empty()) return std::nullopt;
  constexpr double kEps = 1e-9;
  const double lo = window.front().start - kEps;
  const double hi = window.back().end + kEps;
  Contour c;
  const auto first = std::lower_bound(track.times.begin(), track.times.end(), lo);
  for (auto it = first; it != track.times.end() && *it <= hi; ++it) {
    const auto i = static_cast<std::size_t>(it - track.times.begin());
    if (track.z[i]) {
      c.times.push_back(track.times[i]);
      c.values.push_back(*track.z[i]);
    }
  }
  if (c.size() < kMinContourSamples) return std::nullopt;
  return c;
}

std::optional<std::vector<double>> downsample(const Contour& contour, int n) {
  if (contour.size() < kMinContourSamples) return std::nullopt;
  const std::size_t len = vector_length(n);
  const double t0 = contour.times.front();
  const double t1 = contour.times.back();
  std::vector<double> out(len);
  std::size_t seg = 0;
  for (std::size_t k = 0; k < len; ++k) {
    const double t = (k + 1 == len) ? t1 : t0 + (t1 - t0) * static_cast<double>(k) / static_cast<double>(len - 1);
    while (seg + 2 < contour.size() && contour.times[seg + 1] < t) ++seg;
    const double ta = contour.times[seg], tb = contour.times[seg + 1];
    const double w = std::clamp((t - ta) / (tb - ta), 0.0, 1.0);
    out[k] = contour.values[seg] + w * (contour.values[seg + 1] - contour.values[seg]);
  }
  return out;
}

std::vector<std::vector<double>> NgramDataset::vectors() const {
  std::vector<std::vector<double>> out;
  out.reserve(instances.size());
  for (const auto& inst : instances) out.push_back(inst.f0_vector);
  return out;
}

CleanCorpus clean_corpus(Corpus corpus) {
  CleanCorpus out;
  out.stats = speaker_stats(corpus, &out.excluded_speakers);
  for (const auto& [id, track] : corpus.tracks) {
    const auto st = out.stats.find(track.speaker_id);
    if (st == out.stats.end()) continue;
    auto cleaned = clean_track(track, st->second);
    if (cleaned.empty()) {
      spdlog::debug("utterance '{}': track fully removed", id);
      continue;
    }
    out.tracks.emplace(id, std::move(cleaned));
  }
  out.corpus = std::move(corpus);
  return out;
}

double sentence_position(std::size_t first_index, std::size_t utterance_length) {
  if (utterance_length <= 1) return 0.0;
  return static_cast<double>(first_index) / static_cast<double>(utterance_length - 1);
}

DatasetMap build_ngram_datasets(const CleanCorpus& clean, int n, std::size_t min_category_size) {
  const std::size_t order = static_cast<std::size_t>(n);
  (void)vector_length(n);

  std::vector<const std::string*> utts;
  for (const auto& [id, _] : clean.tracks) utts.push_back(&id);

  // Per-utterance windows computed independently, merged in utterance order.
  std::vector<std::vector<NgramInstance>> per_utt(utts.size());
  tbb::parallel_for(std::size_t{0}, utts.size(), [&](std::size_t u) {
    const std::string& id = *utts[u];
    const auto& track = clean.tracks.at(id);
    const auto& syls = clean.corpus.syllables.at(id);
    if (syls.size() < order) return;
    for (std::size_t i = 0; i + order <= syls.size(); ++i) {
      std::span<const SyllableRecord> window(syls.data() + i, order);
      Category cat;
      for (const auto& s : window) cat.push_back(s.tone);
      if (n > 1 && std::find(cat.begin(), cat.end(), 0) != cat.end()) continue;
      const auto contour = cut_contour(track, window);
      if (!contour) continue;
      auto vec = downsample(*contour, n);
      if (!vec) continue;
      NgramInstance inst;
      inst.category = std::move(cat);
      inst.start_pitch = vec->front();
      inst.end_pitch = vec->back();
      inst.f0_vector = std::move(*vec);
      inst.prev_tone = i > 0 ? syls[i - 1].tone : kBoundaryTone;
      inst.next_tone = i + order < syls.size() ? syls[i + order].tone : kBoundaryTone;
      inst.sentence_position = sentence_position(i, syls.size());
      inst.utterance_id = id;
      inst.first_syllable = i;
      per_utt[u].push_back(std::move(inst));
    }
  });

  DatasetMap all;
  std::uint64_t next_id = 0;
  for (auto& insts : per_utt) {
    for (auto& inst : insts) {
      inst.instance_id = next_id++;
      auto& ds = all[inst.category];
      ds.category = inst.category;
      ds.n = n;
      ds.instances.push_back(std::move(inst));
    }
  }
  DatasetMap out;
  for (auto& [cat, ds] : all) {
    if (ds.instances.size() < min_category_size) {
      spdlog::debug("n={} category {} excluded: {} instances < {}", n, category_name(cat),
                   ds.instances.size(), min_category_size);
      continue;
    }
    out.emplace(cat, std::move(ds));
  }
  return out;
}

namespace {

json tone_json(int t) { return t == kBoundaryTone ? json(nullptr) : json(t); }
int tone_from_json(const json& j) { return j.is_null() ? kBoundaryTone : j.get<int>(); }

}  // namespace

void write_datasets(std::ostream& out, const DatasetMap& datasets, int n,
                    const std::map<std::string, std::string>& provenance) {
  json meta = {{"meta", {{"format", "tonemine.ngram-dataset"}, {"version", kDatasetFormatVersion}, {"n", n}}}};
  for (const auto& [k, v] : provenance) meta["meta"][k] = v;
  out << meta.dump() << '\n';
  for (const auto& [cat, ds] : datasets) {
    for (const auto& inst : ds.instances) {
      json rec = {{"id", inst.instance_id},
                  {"category", inst.category},
                  {"utt", inst.utterance_id},
                  {"first_syl", inst.first_syllable},
                  {"prev_tone", tone_json(inst.prev_tone)},
                  {"next_tone", tone_json(inst.next_tone)},
                  {"sent_position", inst.sentence_position},
                  {"start_pitch", inst.start_pitch},
                  {"end_pitch", inst.end_pitch},
                  {"f0", inst.f0_vector}};
      out << rec.dump() << '\n';
    }
  }
}

DatasetMap read_datasets(std::istream& in) {
  DatasetMap out;
  std::string line;
  std::size_t line_no = 0;
  int n = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json rec;
    try {
      rec = json::parse(line);
      if (rec.contains("meta")) {
        const auto& meta = rec["meta"];
        if (meta.at("format") != "tonemine.ngram-dataset") throw ParseError("not a dataset file", line_no);
        if (meta.at("version").get<int>() != kDatasetFormatVersion) {
          throw ParseError("unsupported dataset version", line_no);
        }
        n = meta.at("n").get<int>();
        continue;
      }
      if (n == 0) throw ParseError("dataset record before meta line", line_no);
      NgramInstance inst;
      inst.instance_id = rec.at("id").get<std::uint64_t>();
      inst.category = rec.at("category").get<Category>();
      inst.utterance_id = rec.at("utt").get<std::string>();
      inst.first_syllable = rec.at("first_syl").get<std::size_t>();
      inst.prev_tone = tone_from_json(rec.at("prev_tone"));
      inst.next_tone = tone_from_json(rec.at("next_tone"));
      inst.sentence_position = rec.at("sent_position").get<double>();
      inst.start_pitch = rec.at("start_pitch").get<double>();
      inst.end_pitch = rec.at("end_pitch").get<double>();
      inst.f0_vector = rec.at("f0").get<std::vector<double>>();
      if (inst.f0_vector.size() != vector_length(n)) {
        throw ParseError(fmt::format("f0 vector length {} != {}", inst.f0_vector.size(), vector_length(n)), line_no);
      }
      auto& ds = out[inst.category];
      ds.category = inst.category;
      ds.n = n;
      ds.instances.push_back(std::move(inst));
    } catch (const json::exception& e) {
      throw ParseError(std::string("bad dataset record: ") + e.what(), line_no);
    }
  }
  return out;
}

void save_datasets(const std::filesystem::path& path, const DatasetMap& datasets, int n,
                   const std::map<std::string, std::string>& provenance) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path.string());
  write_datasets(out, datasets, n, provenance);
}

DatasetMap load_datasets(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  return read_datasets(in);
}

}  // namespace tonemine::preprocess
