#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "test_support.hpp"
#include "tonemine/predict.hpp"
#include "tonemine/synth.hpp"

namespace fs = std::filesystem;

namespace {

int run(const std::string& args) {
  const std::string cmd = std::string(TONEMINE_CLI) + " -q " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_file(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path());
  std::ofstream(p) << text;
}

// A small corpus spec and a run config writing under `dir/out`.
fs::path setup_run(const fs::path& dir, std::uint64_t seed) {
  auto spec = tonemine::synth::default_spec();
  spec.utterances = 300;
  std::ofstream(dir / "spec.ini") << [&] {
    std::ostringstream s;
    tonemine::synth::write_spec(s, spec);
    return s.str();
  }();
  write_file(dir / "run.ini", fmt::format("[run]\nseed = {}\nn = 1,2\n[paths]\nout = out\n", seed));
  return dir / "run.ini";
}

std::string full_pipeline(const fs::path& dir, const std::string& extra = "") {
  const auto cfg = (dir / "run.ini").string();
  const auto spec = (dir / "spec.ini").string();
  std::string codes;
  codes += std::to_string(run("synth -c " + cfg + " --spec " + spec + extra));
  codes += std::to_string(run("cluster -c " + cfg + extra));
  codes += std::to_string(run("predict -c " + cfg + extra));
  codes += std::to_string(run("report -c " + cfg + extra));
  return codes;
}

}  // namespace

TEST_CASE("usage errors exit with 2") {
  CHECK(run("") == 2);
  CHECK(run("frobnicate") == 2);
  CHECK(run("cluster --jobs many") == 2);
  CHECK(run("--help") == 0);
}

TEST_CASE("missing inputs exit with 2") {
  testsupport::TempDir tmp("cli_missing");
  const auto cfg = setup_run(tmp.path, 3);
  CHECK(run("synth -c " + cfg.string() + " --spec " + (tmp.path / "nope.ini").string()) == 2);
  CHECK(run("cluster --seed 1 -o " + (tmp.path / "nothing").string()) == 2);
  // predict and report need earlier stages
  CHECK(run("predict -c " + cfg.string()) == 2);
  CHECK(run("report -c " + cfg.string()) == 2);
  // no seed anywhere
  CHECK(run("synth -o " + (tmp.path / "x").string()) == 2);
  write_file(tmp.path / "bad.ini", "[run]\nseed = 1\nn = 7\n");
  CHECK(run("cluster -c " + (tmp.path / "bad.ini").string()) == 2);
}

TEST_CASE("an empty corpus exits with 2") {
  testsupport::TempDir tmp("cli_empty");
  write_file(tmp.path / "f0.jsonl", "");
  write_file(tmp.path / "seg.tsv", "");
  write_file(tmp.path / "ann.tsv", "");
  write_file(tmp.path / "run.ini",
             "[run]\nseed = 1\n[paths]\nout = out\nf0 = f0.jsonl\nsegmentation = seg.tsv\nannotations = ann.tsv\n");
  CHECK(run("cluster -c " + (tmp.path / "run.ini").string()) == 2);
}

TEST_CASE("missing cluster labels exit with 2") {
  testsupport::TempDir tmp("cli_labels");
  setup_run(tmp.path, 4);
  REQUIRE(full_pipeline(tmp.path) == "0000");
  const auto n1 = tmp.path / "out" / "cluster" / "n1";
  bool removed = false;
  for (const auto& entry : fs::directory_iterator(n1)) {
    if (entry.is_directory() && fs::exists(entry.path() / "labels.csv")) {
      fs::remove(entry.path() / "labels.csv");
      removed = true;
      break;
    }
  }
  REQUIRE(removed);
  CHECK(run("predict -c " + (tmp.path / "run.ini").string()) == 2);

  write_file(tmp.path / "out" / "predict" / "results.csv", "n,category,feature_set,d,test_accuracy\n");
  CHECK(run("report -c " + (tmp.path / "run.ini").string()) == 2);
}

TEST_CASE("reruns with the same seed are byte-identical") {
  testsupport::TempDir a("cli_rerun_a");
  testsupport::TempDir b("cli_rerun_b");
  setup_run(a.path, 5);
  setup_run(b.path, 5);
  REQUIRE(full_pipeline(a.path) == "0000");
  REQUIRE(full_pipeline(b.path, " -j 1") == "0000");

  std::size_t compared = 0;
  for (const auto& entry : fs::recursive_directory_iterator(a.path / "out")) {
    if (!entry.is_regular_file()) continue;
    const auto rel = fs::relative(entry.path(), a.path / "out");
    REQUIRE(fs::exists(b.path / "out" / rel));
    CHECK_MESSAGE(slurp(entry.path()) == slurp(b.path / "out" / rel), rel.string());
    ++compared;
  }
  CHECK(compared > 10);

  const auto results = slurp(a.path / "out" / "predict" / "results.csv");
  CHECK(results.rfind("# config_hash=", 0) == 0);
  std::istringstream in(results);
  const auto rows = tonemine::predict::read_results_csv(in);
  REQUIRE_FALSE(rows.empty());
  std::size_t mle = 0;
  for (const auto& r : rows) {
    if (r.feature_set != tonemine::predict::FeatureSet::Mle) continue;
    CHECK(r.test_accuracy == 1.0 / static_cast<double>(r.class_count));
    ++mle;
  }
  CHECK(mle > 0);
  CHECK(fs::exists(a.path / "out" / "report" / "summary.json"));
  CHECK(fs::exists(a.path / "out" / "corpus" / "ground_truth.csv"));
}

TEST_CASE("a different seed changes the outputs") {
  testsupport::TempDir a("cli_seed_a");
  testsupport::TempDir b("cli_seed_b");
  setup_run(a.path, 6);
  setup_run(b.path, 6);
  REQUIRE(full_pipeline(a.path) == "0000");
  REQUIRE(full_pipeline(b.path, " --seed 99") == "0000");
  CHECK(slurp(a.path / "out" / "predict" / "results.csv") != slurp(b.path / "out" / "predict" / "results.csv"));
}
