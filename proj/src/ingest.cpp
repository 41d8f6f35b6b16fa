#include "tonemine/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <fmt/ranges.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "tonemine/text_util.hpp"

namespace tonemine::ingest {

using nlohmann::json;

std::size_t F0Track::voiced_count() const {
  return static_cast<std::size_t>(
      std::count_if(samples.begin(), samples.end(), [](const F0Sample& s) { return s.voiced(); }));
}

const TokenAnnotation& Corpus::token_for(const std::string& utterance_id,
                                         std::size_t syllable) const {
  const auto it = annotations.find(utterance_id);
  if (it != annotations.end()) {
    for (const auto& tok : it->second) {
      if (tok.covers(syllable)) return tok;
    }
  }
  throw ValidationError(
      fmt::format("utterance '{}': syllable {} has no covering token", utterance_id, syllable));
}

namespace {

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  return in;
}

bool skip_line(const std::string& line) {
  return line.empty() || line.front() == '#' ||
         line.find_first_not_of(" \t\r") == std::string::npos;
}

void validate_track(const F0Track& track, std::size_t line_no) {
  for (std::size_t i = 0; i < track.samples.size(); ++i) {
    const auto& s = track.samples[i];
    if (s.hz && !(*s.hz > 0.0)) {
      throw ValidationError(fmt::format("utterance '{}': non-positive f0 {} at t={} (line {})",
                                        track.utterance_id, *s.hz, s.time, line_no));
    }
    if (i > 0 && !(s.time > track.samples[i - 1].time)) {
      throw ValidationError(fmt::format("utterance '{}': non-monotonic time {} (line {})",
                                        track.utterance_id, s.time, line_no));
    }
  }
}

double estimate_period(const std::vector<F0Sample>& samples) {
  if (samples.size() < 2) return 0.01;
  std::vector<double> diffs;
  diffs.reserve(samples.size() - 1);
  for (std::size_t i = 1; i < samples.size(); ++i) diffs.push_back(samples[i].time - samples[i - 1].time);
  auto mid = diffs.begin() + static_cast<std::ptrdiff_t>(diffs.size() / 2);
  std::nth_element(diffs.begin(), mid, diffs.end());
  return *mid;
}

}  // namespace

std::vector<F0Track> parse_f0_tracks(std::istream& in) {
  std::vector<F0Track> tracks;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (skip_line(line)) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(std::string("invalid JSON: ") + e.what(), line_no);
    }
    if (!rec.is_object()) throw ParseError("record is not an object", line_no);
    if (rec.contains("meta")) continue;
    try {
      F0Track track;
      track.utterance_id = rec.at("utt").get<std::string>();
      track.speaker_id = rec.at("spk").get<std::string>();
      for (const auto& pair : rec.at("f0")) {
        if (!pair.is_array() || pair.size() != 2) throw ParseError("f0 entry must be [t, hz|null]", line_no);
        F0Sample s;
        s.time = pair[0].get<double>();
        if (!pair[1].is_null()) s.hz = pair[1].get<double>();
        track.samples.push_back(s);
      }
      track.sample_period = estimate_period(track.samples);
      validate_track(track, line_no);
      tracks.push_back(std::move(track));
    } catch (const json::exception& e) {
      throw ParseError(std::string("bad field: ") + e.what(), line_no);
    }
  }
  return tracks;
}

std::vector<F0Track> load_f0_tracks(const std::filesystem::path& path) {
  auto in = open_input(path);
  return parse_f0_tracks(in);
}

std::vector<SyllableRecord> parse_segmentation(std::istream& in) {
  std::vector<std::string> order;
  std::map<std::string, std::vector<SyllableRecord>> by_utt;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (skip_line(line)) continue;
    const auto cols = split(line, '\t');
    if (cols.size() != 7) throw ParseError(fmt::format("expected 7 columns, got {}", cols.size()), line_no);
    SyllableRecord rec;
    rec.utterance_id = cols[0];
    rec.index = parse_number<std::size_t>(cols[1], line_no);
    rec.tone = parse_number<int>(cols[2], line_no);
    rec.start = parse_number<double>(cols[3], line_no);
    rec.end = parse_number<double>(cols[4], line_no);
    rec.phonemes = split_whitespace(cols[5]);
    const std::string& flags = cols[6];
    if (flags == "I") {
      rec.word_initial = true;
    } else if (flags == "F") {
      rec.word_final = true;
    } else if (flags == "IF") {
      rec.word_initial = rec.word_final = true;
    } else if (flags != "-") {
      throw ParseError("word_flags must be one of I, F, IF, -", line_no);
    }
    if (rec.tone < 0 || rec.tone > 4) {
      throw ValidationError(fmt::format("tone {} outside 0..4 (line {})", rec.tone, line_no));
    }
    if (!(rec.start < rec.end)) {
      throw ValidationError(fmt::format("syllable start >= end (line {})", line_no));
    }
    if (rec.phonemes.empty()) throw ParseError("empty phoneme list", line_no);
    if (!by_utt.count(rec.utterance_id)) order.push_back(rec.utterance_id);
    by_utt[rec.utterance_id].push_back(std::move(rec));
  }

  std::vector<SyllableRecord> out;
  for (const auto& utt : order) {
    auto& recs = by_utt[utt];
    std::stable_sort(recs.begin(), recs.end(),
                     [](const SyllableRecord& a, const SyllableRecord& b) { return a.start < b.start; });
    for (std::size_t i = 0; i < recs.size(); ++i) {
      if (recs[i].index != i) {
        throw ValidationError(fmt::format("utterance '{}': syllable index {} at sorted position {}",
                                          utt, recs[i].index, i));
      }
      if (i > 0 && recs[i].start < recs[i - 1].end) {
        throw ValidationError(fmt::format("utterance '{}': syllables {} and {} overlap", utt, i - 1, i));
      }
    }
    std::move(recs.begin(), recs.end(), std::back_inserter(out));
  }
  return out;
}

std::vector<SyllableRecord> load_segmentation(const std::filesystem::path& path) {
  auto in = open_input(path);
  return parse_segmentation(in);
}

std::vector<TokenAnnotation> parse_annotations(std::istream& in) {
  std::vector<TokenAnnotation> out;
  std::string line;
  std::size_t line_no = 0;
  auto parse_flag = [&](const std::string& s) {
    if (s == "0") return false;
    if (s == "1") return true;
    throw ParseError("boolean column must be 0 or 1", line_no);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (skip_line(line)) continue;
    const auto cols = split(line, '\t');
    if (cols.size() != 7) throw ParseError(fmt::format("expected 7 columns, got {}", cols.size()), line_no);
    TokenAnnotation tok;
    tok.utterance_id = cols[0];
    tok.first_syllable = parse_number<std::size_t>(cols[1], line_no);
    tok.last_syllable = parse_number<std::size_t>(cols[2], line_no);
    tok.pos_tag = cols[3];
    tok.dep_function = cols[4];
    tok.in_named_entity = parse_flag(cols[5]);
    tok.is_singleton = parse_flag(cols[6]);
    if (tok.first_syllable > tok.last_syllable) {
      throw ValidationError(fmt::format("token span {}..{} is reversed (line {})", tok.first_syllable,
                                        tok.last_syllable, line_no));
    }
    out.push_back(std::move(tok));
  }
  return out;
}

std::vector<TokenAnnotation> load_annotations(const std::filesystem::path& path) {
  auto in = open_input(path);
  return parse_annotations(in);
}

void check_annotation_cover(const std::string& utterance_id, std::size_t syllable_count,
                            const std::vector<TokenAnnotation>& tokens) {
  std::vector<int> cover(syllable_count, 0);
  for (const auto& tok : tokens) {
    if (tok.last_syllable >= syllable_count) {
      throw ValidationError(fmt::format("utterance '{}': token span {}..{} exceeds {} syllables",
                                        utterance_id, tok.first_syllable, tok.last_syllable,
                                        syllable_count));
    }
    for (std::size_t i = tok.first_syllable; i <= tok.last_syllable; ++i) ++cover[i];
  }
  for (std::size_t i = 0; i < syllable_count; ++i) {
    if (cover[i] == 0) {
      throw ValidationError(fmt::format("utterance '{}': syllable {} is not covered by any token",
                                        utterance_id, i));
    }
    if (cover[i] > 1) {
      throw ValidationError(fmt::format("utterance '{}': syllable {} is covered by {} tokens",
                                        utterance_id, i, cover[i]));
    }
  }
}

Corpus assemble_corpus(const std::vector<F0Track>& tracks,
                       const std::vector<SyllableRecord>& syllables,
                       const std::vector<TokenAnnotation>& annotations, AssemblyReport* report) {
  std::map<std::string, const F0Track*> track_by;
  for (const auto& t : tracks) track_by[t.utterance_id] = &t;
  std::map<std::string, std::vector<SyllableRecord>> syl_by;
  for (const auto& s : syllables) syl_by[s.utterance_id].push_back(s);
  std::map<std::string, std::vector<TokenAnnotation>> ann_by;
  for (const auto& a : annotations) ann_by[a.utterance_id].push_back(a);

  std::set<std::string> all_ids;
  for (const auto& [id, _] : track_by) all_ids.insert(id);
  for (const auto& [id, _] : syl_by) all_ids.insert(id);
  for (const auto& [id, _] : ann_by) all_ids.insert(id);

  AssemblyReport local;
  auto drop = [&](const std::string& reason) {
    ++local.dropped;
    local.reasons.push_back(reason);
  };

  Corpus corpus;
  for (const auto& id : all_ids) {
    const auto t = track_by.find(id);
    const auto s = syl_by.find(id);
    const auto a = ann_by.find(id);
    if (t == track_by.end() || s == syl_by.end() || a == ann_by.end()) {
      drop(fmt::format("utterance '{}': missing {}", id,
                       t == track_by.end()   ? "f0 track"
                       : s == syl_by.end()   ? "segmentation"
                                             : "annotations"));
      continue;
    }
    const F0Track& track = *t->second;
    if (track.samples.empty()) {
      drop(fmt::format("utterance '{}': empty f0 track", id));
      continue;
    }
    const double t0 = track.samples.front().time;
    const double t1 = track.samples.back().time;
    constexpr double kEps = 1e-9;
    const auto& syls = s->second;
    const bool in_range = std::all_of(syls.begin(), syls.end(), [&](const SyllableRecord& r) {
      return r.start >= t0 - kEps && r.end <= t1 + kEps;
    });
    if (!in_range) {
      drop(fmt::format("utterance '{}': syllable span outside track time range", id));
      continue;
    }
    try {
      check_annotation_cover(id, syls.size(), a->second);
    } catch (const ValidationError& e) {
      drop(e.what());
      continue;
    }
    corpus.tracks.emplace(id, track);
    corpus.syllables.emplace(id, syls);
    auto tokens = a->second;
    std::sort(tokens.begin(), tokens.end(), [](const TokenAnnotation& x, const TokenAnnotation& y) {
      return x.first_syllable < y.first_syllable;
    });
    corpus.annotations.emplace(id, std::move(tokens));
    corpus.utterance_lengths.emplace(id, syls.size());
  }
  if (local.dropped > 0) {
    spdlog::info("assembled corpus: {} utterances kept, {} dropped", corpus.size(), local.dropped);
    for (const auto& r : local.reasons) spdlog::debug("dropped: {}", r);
  }
  if (report) *report = std::move(local);
  return corpus;
}

Corpus load_corpus(const std::filesystem::path& f0, const std::filesystem::path& segmentation,
                   const std::filesystem::path& annotations, AssemblyReport* report) {
  return assemble_corpus(load_f0_tracks(f0), load_segmentation(segmentation),
                         load_annotations(annotations), report);
}

void write_f0_tracks(std::ostream& out, const std::vector<F0Track>& tracks) {
  for (const auto& t : tracks) {
    // Hand-written to keep shortest round-trip number formatting stable.
    out << "{\"utt\":" << json(t.utterance_id).dump() << ",\"spk\":" << json(t.speaker_id).dump()
        << ",\"f0\":[";
    for (std::size_t i = 0; i < t.samples.size(); ++i) {
      const auto& s = t.samples[i];
      if (i) out << ',';
      if (s.hz) {
        out << fmt::format("[{},{}]", s.time, *s.hz);
      } else {
        out << fmt::format("[{},null]", s.time);
      }
    }
    out << "]}\n";
  }
}

std::string word_flags_string(bool initial, bool final) {
  if (initial && final) return "IF";
  if (initial) return "I";
  if (final) return "F";
  return "-";
}

void write_segmentation(std::ostream& out, const std::vector<SyllableRecord>& syllables) {
  for (const auto& s : syllables) {
    out << fmt::format("{}\t{}\t{}\t{}\t{}\t{}\t{}\n", s.utterance_id, s.index, s.tone, s.start, s.end,
                       fmt::join(s.phonemes, " "), word_flags_string(s.word_initial, s.word_final));
  }
}

void write_annotations(std::ostream& out, const std::vector<TokenAnnotation>& tokens) {
  for (const auto& t : tokens) {
    out << fmt::format("{}\t{}\t{}\t{}\t{}\t{}\t{}\n", t.utterance_id, t.first_syllable, t.last_syllable,
                       t.pos_tag, t.dep_function, t.in_named_entity ? 1 : 0, t.is_singleton ? 1 : 0);
  }
}

}  // namespace tonemine::ingest
