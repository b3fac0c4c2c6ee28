/*
 Copyright 2026 The Scribo Authors
 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      http://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/

#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>

#include "scribo/cli.hpp"
#include "test_util.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using scribo::Error;
using scribo::ErrorKind;
namespace pipeline = scribo::pipeline;

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(const std::vector<std::string>& args, const std::string& stdin_text = "") {
  std::ostringstream out, err;
  std::istringstream in(stdin_text);
  const int code = scribo::cli::run(args, out, err, in);
  return {code, out.str(), err.str()};
}

std::vector<json> json_lines(const std::string& text) {
  std::vector<json> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) {
    if (!line.empty()) out.push_back(json::parse(line));
  }
  return out;
}

void write_noise(const fs::path& path, double seconds, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<float> n(0.0f, 0.1f);
  std::vector<float> s(static_cast<std::size_t>(seconds * 16000));
  for (auto& v : s) v = n(rng);
  scribo::wav::write_pcm16(path, s);
}

scribo::net::NetConfig tiny_config() {
  scribo::net::NetConfig cfg;
  cfg.name = "tiny";
  cfg.input_features = 64;
  cfg.prologue = {11, 2, 1, 32, true};
  cfg.blocks = {{2, 7, 32, 1, true}, {2, 9, 48, 1, true}};
  cfg.epilogue = {{13, 1, 2, 48, true}, {1, 1, 1, 64, false}};
  return cfg;
}

/// Model directory holding the tiny network with random weights.
fs::path tiny_model(const fs::path& dir, const std::string& alphabet = "en") {
  std::ofstream(dir / "tiny.json") << scribo::net::config_to_json(tiny_config()).dump();
  const auto r = run({"--seed", "5", "model-init", "--config", (dir / "tiny.json").string(), "--alphabet", alphabet,
                      "--out", (dir / "model").string()});
  EXPECT_EQ(r.code, 0) << r.err;
  return dir / "model";
}

// ---------------------------------------------------------------------------
// Exit codes and usage

TEST(Cli, HelpExitsZero) {
  const auto r = run({"--help"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("Usage"), std::string::npos);
  EXPECT_NE(r.out.find("transcribe"), std::string::npos);
  EXPECT_EQ(run({"corpus", "split", "--help"}).code, 0);
}

TEST(Cli, UsageErrorsExitOne) {
  EXPECT_EQ(run({"eval", "--ref", "a", "--hyp", "b", "--frobnicate"}).code, 1);
  EXPECT_EQ(run({"frobnicate"}).code, 1);
  EXPECT_EQ(run({}).code, 1);
  EXPECT_EQ(run({"eval", "--ref", "a"}).code, 1);
  EXPECT_EQ(run({"corpus"}).code, 1);
  EXPECT_EQ(run({"transcribe", "--wav", "x.wav", "--decoder", "viterbi"}).code, 1);
  EXPECT_EQ(run({"--workers", "0", "eval", "--ref", "a", "--hyp", "b"}).code, 1);
}

TEST(Cli, DataErrorsExitTwo) {
  const auto dir = scribo::testing::temp_dir("cli_data_err");
  const auto r = run({"eval", "--ref", (dir / "none.txt").string(), "--hyp", (dir / "none.txt").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("none.txt"), std::string::npos);
  EXPECT_EQ(run({"lm", "score", "--lm", (dir / "none.arpa").string(), "x"}).code, 2);
}

// ---------------------------------------------------------------------------
// eval

TEST(Eval, IdenticalFilesGiveZero) {
  const auto dir = scribo::testing::temp_dir("cli_eval");
  std::ofstream(dir / "r.txt") << "the cat sat\non the mat\n";
  std::ofstream(dir / "h.txt") << "the cat sat\non the mat\n";
  const auto r = run({"eval", "--ref", (dir / "r.txt").string(), "--hyp", (dir / "h.txt").string()});
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out.rfind("WER 0.0", 0), 0u) << r.out;
}

TEST(Eval, PoolsErrorsOverLines) {
  const auto dir = scribo::testing::temp_dir("cli_eval_pool");
  std::ofstream(dir / "r.txt") << "the cat sat\non the mat\n";
  std::ofstream(dir / "h.txt") << "the bat sat\non the mat today\n";
  const auto r = run({"--json", "eval", "--ref", (dir / "r.txt").string(), "--hyp", (dir / "h.txt").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = json_lines(r.out).at(0);
  EXPECT_EQ(j["errors"], 2);
  EXPECT_EQ(j["words"], 6);
  EXPECT_DOUBLE_EQ(j["wer"].get<double>(), 2.0 / 6.0);
  std::ofstream(dir / "short.txt") << "one line\n";
  EXPECT_EQ(run({"eval", "--ref", (dir / "r.txt").string(), "--hyp", (dir / "short.txt").string()}).code, 2);
}

// ---------------------------------------------------------------------------
// normalize and lm

TEST(Normalize, ArgumentsAndStdin) {
  const std::string rules = std::string(SCRIBO_RULES_DIR) + "/en.json";
  auto r = run({"normalize", "--rules", rules, "Hello,   World!"});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "hello world\n");
  r = run({"--json", "normalize", "--rules", rules}, "A\nB c\n");
  const auto lines = json_lines(r.out);
  ASSERT_EQ(lines.size(), 2u);
  EXPECT_EQ(lines[1]["text"], "b c");
  EXPECT_EQ(run({"normalize", "--rules", "xx", "a"}).code, 2);
}

TEST(Lm, ScoreMatchesLibrary) {
  const std::string arpa = std::string(SCRIBO_TEST_DATA) + "/toy.arpa";
  const auto model = scribo::lm::parse_arpa(fs::path(arpa));
  const auto r = run({"--json", "lm", "score", "--lm", arpa, "the cat", "dog the"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto lines = json_lines(r.out);
  ASSERT_EQ(lines.size(), 2u);
  const std::vector<std::string> words{"the", "cat"};
  EXPECT_DOUBLE_EQ(lines[0]["log10_prob"].get<double>(), model.score_sequence(words, true).log10_total);
}

TEST(Lm, PerplexityAndPrune) {
  const auto dir = scribo::testing::temp_dir("cli_lm");
  const std::string arpa = std::string(SCRIBO_TEST_DATA) + "/five.arpa";
  const auto model = scribo::lm::parse_arpa(fs::path(arpa));
  std::ofstream(dir / "t.txt") << "the cat sat\n";
  auto r = run({"--json", "lm", "ppl", "--lm", arpa, "--text", (dir / "t.txt").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const std::vector<std::string> words{"the", "cat", "sat"};
  EXPECT_NEAR(json_lines(r.out)[0]["perplexity"].get<double>(), model.perplexity(words, true), 1e-9);
  r = run({"lm", "prune", "--lm", arpa, "--max", "40", "--out", (dir / "p.arpa").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(scribo::lm::parse_arpa(dir / "p.arpa").total_size(), 40u);
  EXPECT_EQ(run({"lm", "prune", "--lm", arpa, "--max", "1", "--out", (dir / "q.arpa").string()}).code, 2);
}

// ---------------------------------------------------------------------------
// corpus

TEST(Corpus, ConvertStatsCleanSplit) {
  const auto dir = scribo::testing::temp_dir("cli_corpus");
  fs::create_directories(dir / "src");
  for (int i = 0; i < 12; ++i) {
    const std::string stem = "u" + std::to_string(i);
    write_noise(dir / "src" / (stem + ".wav"), 1.0 + 0.25 * i, static_cast<unsigned>(i));
    std::ofstream(dir / "src" / (stem + ".txt")) << "utterance number " << i << "\n";
  }
  auto r = run({"--workers", "3", "corpus", "convert", "--format", "folder-txt", "--in", (dir / "src").string(),
                "--out", (dir / "out").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto manifest = (dir / "out" / "data.tsv").string();
  const auto ds = scribo::corpus::read_manifest(manifest);
  EXPECT_EQ(ds.items.size(), 12u);

  r = run({"--json", "corpus", "stats", "--manifest", manifest});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(json_lines(r.out)[0]["items"], 12);
  EXPECT_NEAR(json_lines(r.out)[0]["total_duration"].get<double>(), 12 + 0.25 * 66, 1e-9);

  r = run({"--json", "corpus", "clean", "--manifest", manifest, "--out", (dir / "out" / "clean.tsv").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto report = scribo::corpus::clean_corpus(ds.items);
  EXPECT_EQ(json_lines(r.out)[0]["kept"], report.kept.size());
  EXPECT_EQ(scribo::corpus::read_manifest(dir / "out" / "clean.tsv").items, report.kept);

  const std::vector<std::string> split{"--json", "--seed", "9", "corpus", "split", "--manifest", manifest,
                                       "--fractions", "0.5,0.25,0.25"};
  const auto first = run(split);
  ASSERT_EQ(first.code, 0) << first.err;
  const auto train = scribo::corpus::read_manifest(dir / "out" / "train.tsv").items;
  EXPECT_EQ(train.size(), 6u);
  EXPECT_EQ(run(split).out, first.out);
  EXPECT_EQ(scribo::corpus::read_manifest(dir / "out" / "train.tsv").items, train);
  EXPECT_EQ(run({"corpus", "split", "--manifest", manifest, "--fractions", "0.5,0.6"}).code, 2);
  EXPECT_EQ(run({"corpus", "convert", "--format", "nope", "--in", (dir / "src").string(), "--out",
                 (dir / "o2").string()})
                .code,
            2);
}

// ---------------------------------------------------------------------------
// transcribe, decode, adapt, bench

TEST(Transcribe, StreamingTranscriptMatchesFull) {
  const auto dir = scribo::testing::temp_dir("cli_transcribe");
  const auto model = tiny_model(dir);
  write_noise(dir / "a.wav", 4.0, 1);
  const auto full = run({"--json", "transcribe", "--model", model.string(), "--wav", (dir / "a.wav").string()});
  ASSERT_EQ(full.code, 0) << full.err;
  const auto chunked = run({"--json", "transcribe", "--model", model.string(), "--wav", (dir / "a.wav").string(),
                            "--chunk", "0.5"});
  ASSERT_EQ(chunked.code, 0) << chunked.err;
  const auto a = json_lines(full.out)[0], b = json_lines(chunked.out)[0];
  EXPECT_FALSE(a["text"].get<std::string>().empty());
  EXPECT_EQ(a["text"], b["text"]);
  EXPECT_DOUBLE_EQ(a["clip_duration"].get<double>(), 4.0);
  EXPECT_GT(a["rtf"].get<double>(), 0.0);
  EXPECT_EQ(a["stages"].size(), 3u);
  const auto again = run({"--json", "transcribe", "--model", model.string(), "--wav", (dir / "a.wav").string()});
  EXPECT_EQ(json_lines(again.out)[0]["text"], a["text"]);
}

TEST(Transcribe, ModelDirFromEnvironment) {
  const auto dir = scribo::testing::temp_dir("cli_env");
  const auto model = tiny_model(dir);
  write_noise(dir / "a.wav", 1.0, 2);
  ::setenv("SCRIBO_MODEL_DIR", model.c_str(), 1);
  const auto r = run({"transcribe", "--wav", (dir / "a.wav").string()});
  ::unsetenv("SCRIBO_MODEL_DIR");
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(run({"transcribe", "--wav", (dir / "a.wav").string()}).code, 2);
}

TEST(Transcribe, ZeroLengthAudioIsAnError) {
  const auto dir = scribo::testing::temp_dir("cli_empty");
  const auto model = tiny_model(dir);
  scribo::wav::write_pcm16(dir / "empty.wav", std::vector<std::int16_t>{});
  const auto r = run({"transcribe", "--model", model.string(), "--wav", (dir / "empty.wav").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("zero-length"), std::string::npos);
}

TEST(Decode, DumpedLogitsDecodeToTheTranscript) {
  const auto dir = scribo::testing::temp_dir("cli_decode");
  const auto model = tiny_model(dir);
  write_noise(dir / "a.wav", 2.0, 3);
  const auto t = run({"--json", "transcribe", "--model", model.string(), "--wav", (dir / "a.wav").string(),
                      "--dump-logits", (dir / "lg").string()});
  ASSERT_EQ(t.code, 0) << t.err;
  const auto d = run({"--json", "decode", "--logits", (dir / "lg").string()});
  ASSERT_EQ(d.code, 0) << d.err;
  EXPECT_EQ(json_lines(d.out)[0]["text"], json_lines(t.out)[0]["text"]);
  const auto beam = run({"--json", "decode", "--logits", (dir / "lg").string(), "--decoder", "beam",
                         "--beam-width", "8"});
  ASSERT_EQ(beam.code, 0) << beam.err;
  EXPECT_TRUE(json_lines(beam.out)[0].contains("combined"));
  EXPECT_EQ(run({"decode", "--logits", (dir / "lg").string(), "--alphabet", "es"}).code, 2);
  EXPECT_EQ(run({"decode", "--logits", (dir / "lg").string(), "--tensor", "nope"}).code, 2);
}

TEST(Adapt, ExtendThenShrink) {
  const auto dir = scribo::testing::temp_dir("cli_adapt");
  const auto model = tiny_model(dir);
  auto r = run({"--json", "adapt-alphabet", "--model", model.string(), "--target", "es", "--out",
                (dir / "es").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(json_lines(r.out)[0]["mode"], "extend");
  const auto es = scribo::net::load_weights(dir / "es");
  EXPECT_EQ(es.alphabet, scribo::textnorm::AlphabetSpec::spanish());
  r = run({"--json", "adapt-alphabet", "--model", (dir / "es").string(), "--target", "it", "--out",
           (dir / "it").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(json_lines(r.out)[0]["mode"], "shrink");
  // Round trip back to the original output layer.
  EXPECT_EQ(scribo::net::load_weights(dir / "it").weights, scribo::net::load_weights(model).weights);
  r = run({"adapt-alphabet", "--model", model.string(), "--target", "es", "--map", "ñ=n", "--out",
           (dir / "es2").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto mapped = scribo::net::load_weights(dir / "es2");
  const auto& pw = mapped.weights.get("out.pw");
  const auto cols = static_cast<std::size_t>(pw.shape[1]);
  for (std::int64_t i = 0; i < pw.shape[0]; ++i) {
    EXPECT_EQ(pw.data[static_cast<std::size_t>(i) * cols + 28], pw.data[static_cast<std::size_t>(i) * cols + 14]);
  }
  EXPECT_EQ(run({"adapt-alphabet", "--model", model.string(), "--target", "es", "--map", "ß=s", "--out",
                 (dir / "bad").string()})
                .code,
            2);
}

TEST(Bench, CountsMeasurements) {
  const auto dir = scribo::testing::temp_dir("cli_bench");
  const auto model = tiny_model(dir);
  std::vector<scribo::corpus::DatasetItem> items;
  for (int i = 0; i < 3; ++i) {
    const std::string name = "c" + std::to_string(i) + ".wav";
    write_noise(dir / name, 0.5 + i * 0.5, static_cast<unsigned>(10 + i));
    items.push_back({name, "x", 0.5 + i * 0.5, std::nullopt});
  }
  scribo::corpus::write_manifest(items, dir / "data.tsv");
  const auto r = run({"--json", "--workers", "2", "bench", "--model", model.string(), "--manifest",
                      (dir / "data.tsv").string(), "--reps", "2"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto lines = json_lines(r.out);
  ASSERT_EQ(lines.size(), 7u);
  EXPECT_EQ(lines.back()["measurements"], 6);
  EXPECT_DOUBLE_EQ(lines.back()["clip_duration"].get<double>(), 2 * (0.5 + 1.0 + 1.5));
  scribo::corpus::write_manifest({}, dir / "empty.tsv");
  EXPECT_EQ(run({"bench", "--model", model.string(), "--manifest", (dir / "empty.tsv").string()}).code, 2);
}

// ---------------------------------------------------------------------------
// Pipeline library

TEST(Pipeline, RealTimeFactorIsARatio) {
  EXPECT_DOUBLE_EQ(pipeline::real_time_factor(2.4, 10.0), 0.24);
  EXPECT_THROW(pipeline::real_time_factor(1.0, 0.0), Error);
}

pipeline::Measurement measurement(double duration, double wall) {
  pipeline::Measurement m;
  m.report.clip_duration = duration;
  m.report.wall_time = wall;
  m.report.rtf = wall / duration;
  m.report.stage_breakdown = {{"features", wall / 4}, {"forward", wall / 2}, {"decode", wall / 8}};
  return m;
}

TEST(Pipeline, SummaryStatistics) {
  const auto single = pipeline::summarize({measurement(10.0, 2.4)});
  EXPECT_DOUBLE_EQ(single.mean_rtf, 0.24);
  EXPECT_DOUBLE_EQ(single.median_rtf, 0.24);

  std::vector<pipeline::Measurement> six;
  const double walls[] = {1, 2, 3, 4, 5, 9};
  for (double w : walls) six.push_back(measurement(10.0, w));
  const auto r = pipeline::summarize(six);
  EXPECT_EQ(r.measurements.size(), 6u);
  EXPECT_DOUBLE_EQ(r.median_rtf, 0.35);
  EXPECT_DOUBLE_EQ(r.mean_rtf, 0.4);
  EXPECT_DOUBLE_EQ(r.aggregate.rtf, 24.0 / 60.0);
  EXPECT_DOUBLE_EQ(r.aggregate.stage_breakdown.at("forward"), 12.0);
  EXPECT_THROW(pipeline::summarize({}), Error);
}

TEST(Pipeline, StagesFitInsideWallTime) {
  scribo::net::LoadedModel model;
  model.config = tiny_config();
  model.weights = scribo::net::random_weights(model.config, 1);
  model.alphabet = scribo::textnorm::AlphabetSpec::english();
  std::mt19937 rng(4);
  std::normal_distribution<float> n(0.0f, 0.1f);
  scribo::features::AudioClip clip;
  clip.samples.resize(24000);
  for (auto& s : clip.samples) s = n(rng);
  for (bool beam : {false, true}) {
    pipeline::DecodeOptions o;
    o.beam = beam;
    o.params.beam_width = 8;
    const auto t = pipeline::transcribe(model, clip, o);
    EXPECT_GT(t.report.rtf, 0.0);
    EXPECT_DOUBLE_EQ(t.report.rtf, t.report.wall_time / 1.5);
    EXPECT_LE(t.report.stage_total(), t.report.wall_time + 1e-3);
  }
  try {
    pipeline::transcribe(model, scribo::features::AudioClip{}, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kDomain);
  }
  scribo::features::AudioClip tiny;
  tiny.samples.resize(100);
  try {
    pipeline::transcribe(model, tiny, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(std::string(e.what()).rfind("features:", 0), 0u) << e.what();
  }
}

}  // namespace
