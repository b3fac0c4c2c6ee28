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

#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "scribo/archive.hpp"
#include "scribo/corpus.hpp"
#include "scribo/ctc.hpp"
#include "scribo/lm.hpp"
#include "scribo/net.hpp"
#include "scribo/pipeline.hpp"
#include "scribo/textnorm.hpp"

#ifndef SCRIBO_DEFAULT_RULES_DIR
#define SCRIBO_DEFAULT_RULES_DIR "rules"
#endif

namespace scribo::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

namespace fs = std::filesystem;
using nlohmann::json;

namespace detail {

/// One result per line, either human-readable or as a JSON object.
class Printer {
 public:
  Printer(std::ostream& out, bool json) : out_(out), json_(json) {}

  void emit(const json& record, const std::string& human) {
    if (json_) {
      out_ << record.dump() << '\n';
    } else {
      out_ << human << '\n';
    }
  }

  bool json_mode() const { return json_; }

 private:
  std::ostream& out_;
  bool json_;
};

inline std::string fixed(double v, int digits = 4) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

inline std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot open " + path.string());
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

inline std::vector<std::string> input_lines(const std::vector<std::string>& args, std::istream& in) {
  if (!args.empty()) return args;
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  return lines;
}

/// Rule file path, or a language code looked up in SCRIBO_RULES_DIR.
inline textnorm::NormRules resolve_rules(const std::string& name_or_path) {
  if (fs::exists(name_or_path)) return textnorm::load_rules(name_or_path);
  const char* env = std::getenv("SCRIBO_RULES_DIR");
  const fs::path dir = env && *env ? fs::path(env) : fs::path(SCRIBO_DEFAULT_RULES_DIR);
  const fs::path candidate = dir / (name_or_path + ".json");
  if (!fs::exists(candidate)) fail(ErrorKind::kMissing, "no rule file for '" + name_or_path + "'");
  return textnorm::load_rules(candidate.string());
}

inline std::vector<double> parse_fractions(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  for (std::string part; std::getline(ss, part, ',');) {
    const auto v = corpus::detail::parse_double(part);
    if (!v) fail(ErrorKind::kDomain, "bad fraction '" + part + "'");
    out.push_back(*v);
  }
  return out;
}

inline std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string part; std::getline(ss, part, ',');) out.push_back(part);
  return out;
}

inline json stages_json(const pipeline::RtfReport& r) {
  json j = json::object();
  for (const auto& [k, v] : r.stage_breakdown) j[k] = v;
  return j;
}

inline json report_json(const pipeline::RtfReport& r) {
  return {{"clip_duration", r.clip_duration}, {"wall_time", r.wall_time}, {"rtf", r.rtf}, {"stages", stages_json(r)}};
}

inline std::string report_text(const pipeline::RtfReport& r) {
  std::string s = "duration " + fixed(r.clip_duration, 3) + " s, wall " + fixed(r.wall_time, 3) + " s, rtf " +
                  fixed(r.rtf, 4) + " (";
  bool first = true;
  for (const auto& [k, v] : r.stage_breakdown) {
    s += (first ? "" : ", ") + k + " " + fixed(v, 3) + " s";
    first = false;
  }
  return s + ")";
}

struct DecodeFlags {
  std::string decoder = "greedy";
  int beam_width = 256;
  double alpha = 0.8;
  double beta = 1.0;
  std::string lm_path;

  void attach(CLI::App* app) {
    app->add_option("--decoder", decoder, "greedy or beam")->check(CLI::IsMember({"greedy", "beam"}));
    app->add_option("--beam-width", beam_width, "Beam width")->check(CLI::PositiveNumber);
    app->add_option("--alpha", alpha, "Language model weight");
    app->add_option("--beta", beta, "Word insertion bonus");
    app->add_option("--lm", lm_path, "ARPA language model (implies beam decoding)");
  }

  /// `lm_storage` keeps the parsed model alive for the returned options.
  pipeline::DecodeOptions resolve(std::optional<lm::NgramModel>& lm_storage) const {
    pipeline::DecodeOptions o;
    o.beam = decoder == "beam" || !lm_path.empty();
    o.params.beam_width = beam_width;
    o.params.alpha = alpha;
    o.params.beta = beta;
    if (!lm_path.empty()) {
      lm_storage = lm::parse_arpa(fs::path(lm_path));
      o.params.lm = &*lm_storage;
    }
    return o;
  }
};

inline std::string model_dir_or_env(const std::string& flag) {
  if (!flag.empty()) return flag;
  const char* env = std::getenv("SCRIBO_MODEL_DIR");
  if (env && *env) return env;
  fail(ErrorKind::kMissing, "no model given: pass --model or set SCRIBO_MODEL_DIR");
}

}  // namespace detail

/// Parses and executes one command line. Returns 0 on success, 1 on usage
/// errors and 2 on data errors.
inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr,
               std::istream& in = std::cin) {
  CLI::App app{"Speech corpus tooling, language models and CTC speech recognition inference", "scribo"};
  app.require_subcommand(1);
  app.fallthrough();
  bool json_out = false;
  std::uint64_t seed = 0;
  int workers = 1;
  app.add_flag("--json", json_out, "Print one JSON object per result line");
  app.add_option("--seed", seed, "Seed for randomized operations");
  app.add_option("--workers", workers, "Worker threads for corpus convert and bench")->check(CLI::PositiveNumber);

  std::function<void(detail::Printer&)> action;

  // corpus ------------------------------------------------------------------
  auto* corpus_cmd = app.add_subcommand("corpus", "Dataset conversion, cleaning, statistics and splits");
  corpus_cmd->require_subcommand(1);

  std::string conv_format, conv_to = "manifest-csv", conv_in, conv_out, conv_work;
  auto* convert = corpus_cmd->add_subcommand("convert", "Read a dataset and write audio plus manifest");
  convert->add_option("--format", conv_format, "Reader: " + [] {
    std::string s;
    for (const auto& f : corpus::reader_formats()) s += (s.empty() ? "" : ", ") + f;
    return s;
  }())->required();
  convert->add_option("--to", conv_to, "Output layout")->check(CLI::IsMember({"manifest-csv"}));
  convert->add_option("--in", conv_in, "Dataset directory, archive or metadata file")->required();
  convert->add_option("--out", conv_out, "Output directory")->required();
  convert->add_option("--work", conv_work, "Directory for archive extraction (default: <out>/.work)");
  convert->callback([&] {
    action = [&](detail::Printer& p) {
      const fs::path work = conv_work.empty() ? fs::path(conv_out) / ".work" : fs::path(conv_work);
      const bool metadata_file = fs::is_regular_file(conv_in) &&
                                 corpus::detect_archive(conv_in) == corpus::ArchiveFormat::kUnknown;
      const fs::path source = metadata_file ? fs::path(conv_in) : corpus::fetch_dataset(conv_in, work);
      const auto ds = corpus::read_dataset(conv_format, source);
      corpus::WriteOptions opts;
      opts.workers = workers;
      const auto manifest = corpus::write_dataset(ds.items, ds.root, conv_to, conv_out, opts);
      for (const auto& w : ds.warnings) p.emit({{"warning", w}}, "warning: " + w);
      p.emit({{"manifest", manifest.string()}, {"items", ds.items.size()}, {"skipped_rows", ds.skipped_rows}},
             "wrote " + std::to_string(ds.items.size()) + " items to " + manifest.string() + " (" +
                 std::to_string(ds.skipped_rows) + " rows skipped)");
    };
  });

  std::string clean_manifest, clean_out;
  corpus::CleaningThresholds th;
  auto* clean = corpus_cmd->add_subcommand("clean", "Drop items failing the duration and speaking-rate filters");
  clean->add_option("--manifest", clean_manifest, "Input manifest")->required();
  clean->add_option("--out", clean_out, "Manifest for kept items (same directory as the input)");
  clean->add_option("--min-duration", th.min_duration, "Seconds");
  clean->add_option("--max-duration", th.max_duration, "Seconds");
  clean->add_option("--max-chars", th.max_chars, "Characters");
  clean->callback([&] {
    action = [&](detail::Printer& p) {
      const auto ds = corpus::read_manifest(clean_manifest);
      const auto report = corpus::clean_corpus(ds.items, th);
      std::map<int, std::size_t> by_metric;
      for (const auto& e : report.excluded) ++by_metric[e.metric];
      json metrics = json::object();
      std::string human;
      for (const auto& [m, n] : by_metric) {
        metrics[std::to_string(m)] = n;
        human += " metric" + std::to_string(m) + "=" + std::to_string(n);
      }
      if (!clean_out.empty()) {
        const fs::path target(clean_out);
        if (fs::absolute(target).parent_path() != fs::absolute(fs::path(clean_manifest)).parent_path()) {
          fail(ErrorKind::kDomain, "cleaned manifest must live next to the input so relative paths stay valid");
        }
        corpus::write_manifest(report.kept, target);
      }
      p.emit({{"items", ds.items.size()},
              {"kept", report.kept.size()},
              {"excluded", report.excluded.size()},
              {"by_metric", metrics},
              {"average_cps", report.average_cps},
              {"average_duration", report.average_duration}},
             "kept " + std::to_string(report.kept.size()) + " of " + std::to_string(ds.items.size()) + ", excluded " +
                 std::to_string(report.excluded.size()) + human + " (avg " + detail::fixed(report.average_cps, 3) +
                 " chars/s, " + detail::fixed(report.average_duration, 3) + " s)");
    };
  });

  std::string stats_manifest;
  auto* stats = corpus_cmd->add_subcommand("stats", "Duration, speaking rate and speaker statistics");
  stats->add_option("--manifest", stats_manifest, "Input manifest")->required();
  stats->callback([&] {
    action = [&](detail::Printer& p) {
      const auto s = corpus::compute_stats(corpus::read_manifest(stats_manifest).items);
      json speakers = json::array();
      std::string human;
      for (std::size_t i = 0; i < std::min<std::size_t>(10, s.top_speakers.size()); ++i) {
        speakers.push_back({{"speaker", s.top_speakers[i].first}, {"items", s.top_speakers[i].second}});
        human += "\n  " + s.top_speakers[i].first + " " + std::to_string(s.top_speakers[i].second);
      }
      p.emit({{"items", s.item_count},
              {"total_duration", s.total_duration},
              {"hours", s.total_duration / 3600.0},
              {"mean_chars_per_second", s.mean_chars_per_second},
              {"mean_duration", s.mean_duration},
              {"top_speakers", speakers}},
             "items " + std::to_string(s.item_count) + "\nhours " + detail::fixed(s.total_duration / 3600.0) +
                 "\nmean duration " + detail::fixed(s.mean_duration, 3) + " s\nmean chars/s " +
                 detail::fixed(s.mean_chars_per_second, 3) + (human.empty() ? "" : "\ntop speakers:" + human));
    };
  });

  std::string split_manifest, split_by, split_fractions = "0.8,0.1,0.1", split_names = "train,dev,test";
  auto* split = corpus_cmd->add_subcommand("split", "Seeded train/dev/test partition, optionally by speaker");
  split->add_option("--manifest", split_manifest, "Input manifest")->required();
  split->add_option("--by", split_by, "Keep each value of this key in one partition (speaker)");
  split->add_option("--fractions", split_fractions, "Comma-separated shares summing to 1");
  split->add_option("--names", split_names, "Comma-separated partition names");
  split->callback([&] {
    action = [&](detail::Printer& p) {
      const auto ds = corpus::read_manifest(split_manifest);
      const auto fractions = detail::parse_fractions(split_fractions);
      const auto names = detail::split_commas(split_names);
      if (names.size() != fractions.size()) {
        fail(ErrorKind::kDomain, std::to_string(names.size()) + " names for " + std::to_string(fractions.size()) +
                                     " fractions");
      }
      corpus::SplitPolicy policy;
      for (std::size_t i = 0; i < names.size(); ++i) policy.fractions.emplace_back(names[i], fractions[i]);
      policy.seed = seed;
      if (!split_by.empty()) policy.key = split_by;
      const auto parts = corpus::split_dataset(ds.items, policy);
      const fs::path dir = fs::path(split_manifest).parent_path();
      for (const auto& part : parts) {
        const fs::path target = dir / (part.name + ".tsv");
        corpus::write_manifest(part.items, target);
        p.emit({{"partition", part.name}, {"items", part.items.size()}, {"manifest", target.string()}},
               part.name + " " + std::to_string(part.items.size()) + " " + target.string());
      }
    };
  });

  // normalize -----------------------------------------------------------------
  std::string norm_rules = "en", norm_alphabet;
  std::vector<std::string> norm_text;
  auto* normalize = app.add_subcommand("normalize", "Normalize transcripts (arguments or stdin lines)");
  normalize->add_option("--rules", norm_rules, "Rule file or language code");
  normalize->add_option("--alphabet", norm_alphabet, "Alphabet preset or JSON file (default: the rule language)");
  normalize->add_option("text", norm_text, "Text to normalize");
  normalize->callback([&] {
    action = [&](detail::Printer& p) {
      const auto rules = detail::resolve_rules(norm_rules);
      const auto alphabet =
          textnorm::resolve_alphabet(norm_alphabet.empty() ? (fs::exists(norm_rules) ? "en" : norm_rules) : norm_alphabet);
      for (const auto& line : detail::input_lines(norm_text, in)) {
        const auto n = textnorm::normalize_text(line, rules, alphabet);
        p.emit({{"input", line}, {"text", n}}, n);
      }
    };
  });

  // lm ----------------------------------------------------------------------
  auto* lm_cmd = app.add_subcommand("lm", "ARPA n-gram language models");
  lm_cmd->require_subcommand(1);
  std::string lm_path;
  bool no_markers = false;
  std::vector<std::string> lm_text;
  auto* score = lm_cmd->add_subcommand("score", "log10 probability of sentences (arguments or stdin lines)");
  score->add_option("--lm", lm_path, "ARPA file")->required();
  score->add_flag("--no-markers", no_markers, "Do not add <s> and </s>");
  score->add_option("text", lm_text, "Sentences");
  score->callback([&] {
    action = [&](detail::Printer& p) {
      const auto model = lm::parse_arpa(fs::path(lm_path));
      for (const auto& line : detail::input_lines(lm_text, in)) {
        const auto words = ctc::split_words(line);
        const auto s = model.score_sequence(words, !no_markers);
        p.emit({{"text", line}, {"log10_prob", s.log10_total}, {"oov", s.oov_count}, {"words", words.size()}},
               detail::fixed(s.log10_total, 6) + "\t" + std::to_string(s.oov_count) + " oov\t" + line);
      }
    };
  });

  std::string ppl_lm, ppl_text;
  auto* ppl = lm_cmd->add_subcommand("ppl", "Perplexity over a text file, one sentence per line");
  ppl->add_option("--lm", ppl_lm, "ARPA file")->required();
  ppl->add_option("--text", ppl_text, "Text file")->required();
  ppl->add_flag("--no-markers", no_markers, "Do not add <s> and </s>");
  ppl->callback([&] {
    action = [&](detail::Printer& p) {
      const auto model = lm::parse_arpa(fs::path(ppl_lm));
      double total = 0.0;
      std::size_t tokens = 0, oov = 0, sentences = 0;
      for (const auto& line : detail::read_lines(ppl_text)) {
        const auto words = ctc::split_words(line);
        if (words.empty()) continue;
        const auto s = model.score_sequence(words, !no_markers);
        total += s.log10_total;
        tokens += words.size() + (no_markers ? 0 : 1);
        oov += static_cast<std::size_t>(s.oov_count);
        ++sentences;
      }
      if (tokens == 0) fail(ErrorKind::kDomain, "no words in " + ppl_text);
      const double perplexity = std::pow(10.0, -total / static_cast<double>(tokens));
      p.emit({{"sentences", sentences}, {"tokens", tokens}, {"oov", oov}, {"log10_prob", total}, {"perplexity", perplexity}},
             "sentences " + std::to_string(sentences) + ", tokens " + std::to_string(tokens) + ", oov " +
                 std::to_string(oov) + ", log10 " + detail::fixed(total, 4) + ", ppl " + detail::fixed(perplexity, 4));
    };
  });

  std::string prune_lm, prune_out;
  std::size_t prune_max = 0;
  auto* prune = lm_cmd->add_subcommand("prune", "Drop the least probable n-grams down to a size budget");
  prune->add_option("--lm", prune_lm, "ARPA file")->required();
  prune->add_option("--max", prune_max, "Maximum stored n-grams")->required();
  prune->add_option("--out", prune_out, "Output ARPA file")->required();
  prune->callback([&] {
    action = [&](detail::Printer& p) {
      const auto model = lm::parse_arpa(fs::path(prune_lm));
      const auto pruned = lm::prune_model(model, prune_max);
      lm::write_arpa(pruned, fs::path(prune_out));
      p.emit({{"before", model.total_size()}, {"after", pruned.total_size()}, {"out", prune_out}},
             "pruned " + std::to_string(model.total_size()) + " -> " + std::to_string(pruned.total_size()) +
                 " n-grams, wrote " + prune_out);
    };
  });

  // decode ------------------------------------------------------------------
  std::string dec_logits, dec_tensor = "logits", dec_alphabet = "en";
  detail::DecodeFlags dec_flags;
  auto* decode = app.add_subcommand("decode", "CTC-decode a logit matrix from a tensor store");
  decode->add_option("--logits", dec_logits, "Tensor store directory or manifest")->required();
  decode->add_option("--tensor", dec_tensor, "Tensor name");
  decode->add_option("--alphabet", dec_alphabet, "Alphabet preset or JSON file");
  dec_flags.attach(decode);
  decode->callback([&] {
    action = [&](detail::Printer& p) {
      const auto alphabet = textnorm::resolve_alphabet(dec_alphabet);
      const auto tensors = net::load_tensors(dec_logits);
      const auto it = std::find_if(tensors.begin(), tensors.end(), [&](const auto& t) { return t.first == dec_tensor; });
      if (it == tensors.end()) fail(ErrorKind::kMissing, "no tensor '" + dec_tensor + "' in " + dec_logits);
      const auto& t = it->second;
      if (t.shape.size() != 2) fail(ErrorKind::kShape, "logits must be 2-D, got " + net::shape_string(t.shape));
      Matrix<float> raw(static_cast<std::size_t>(t.shape[0]), static_cast<std::size_t>(t.shape[1]));
      std::copy(t.data.begin(), t.data.end(), raw.data());
      const auto logits = ctc::log_softmax(raw);
      std::optional<lm::NgramModel> lm_storage;
      const auto opts = dec_flags.resolve(lm_storage);
      if (!opts.beam) {
        const auto text = ctc::greedy_decode(logits, alphabet);
        p.emit({{"text", text}}, text);
        return;
      }
      const auto hyp = ctc::beam_decode(logits, alphabet, opts.params).front();
      p.emit({{"text", hyp.text},
              {"combined", hyp.combined},
              {"acoustic_log", hyp.acoustic_log},
              {"lm_log10", hyp.lm_log10},
              {"words", hyp.word_count}},
             hyp.text);
    };
  });

  // transcribe ----------------------------------------------------------------
  std::string tr_model, tr_wav, tr_dump;
  std::optional<double> tr_chunk;
  detail::DecodeFlags tr_flags;
  auto* transcribe = app.add_subcommand("transcribe", "Speech to text for one WAV file");
  transcribe->add_option("--model", tr_model, "Model directory (default: $SCRIBO_MODEL_DIR)");
  transcribe->add_option("--wav", tr_wav, "Mono 16 kHz PCM-16 WAV")->required();
  transcribe->add_option("--chunk", tr_chunk, "Stream in chunks of this many seconds");
  transcribe->add_option("--dump-logits", tr_dump, "Also write the log-probabilities to this tensor store");
  tr_flags.attach(transcribe);
  transcribe->callback([&] {
    action = [&](detail::Printer& p) {
      const auto model = net::load_weights(detail::model_dir_or_env(tr_model));
      std::optional<lm::NgramModel> lm_storage;
      auto opts = tr_flags.resolve(lm_storage);
      opts.chunk_seconds = tr_chunk;
      const auto result = pipeline::transcribe(model, fs::path(tr_wav), opts);
      if (!tr_dump.empty()) {
        const auto clip = features::load_wav(tr_wav);
        const auto x = features::normalize_features(features::logmel(clip, model.features));
        const auto logits = net::forward(model.config, model.weights, x);
        net::Tensor t{{static_cast<std::int64_t>(logits.rows()), static_cast<std::int64_t>(logits.cols())},
                      logits.values()};
        net::save_tensors(tr_dump, {{"logits", t}});
      }
      json record = detail::report_json(result.report);
      record["text"] = result.text;
      p.emit(record, result.text + "\n" + detail::report_text(result.report));
    };
  });

  // adapt-alphabet --------------------------------------------------------------
  std::string ad_model, ad_target, ad_out, ad_init = "zero";
  std::vector<std::string> ad_map;
  float ad_scale = 0.01f;
  auto* adapt = app.add_subcommand("adapt-alphabet", "Resize the output layer for another alphabet");
  adapt->add_option("--model", ad_model, "Source model directory (default: $SCRIBO_MODEL_DIR)");
  adapt->add_option("--target", ad_target, "Target alphabet preset or JSON file")->required();
  adapt->add_option("--out", ad_out, "Output model directory")->required();
  adapt->add_option("--init", ad_init, "New-symbol initialization")->check(CLI::IsMember({"zero", "uniform"}));
  adapt->add_option("--scale", ad_scale, "Half-width of the uniform initialization");
  adapt->add_option("--map", ad_map, "target=source symbol pairs overriding identity matches");
  adapt->callback([&] {
    action = [&](detail::Printer& p) {
      const auto model = net::load_weights(detail::model_dir_or_env(ad_model));
      const auto target = textnorm::resolve_alphabet(ad_target);
      net::AdaptPolicy policy;
      policy.mapping = net::default_mapping(model.alphabet, target);
      for (const auto& pair : ad_map) {
        const auto eq = pair.find('=');
        if (eq == std::string::npos) fail(ErrorKind::kDomain, "mapping '" + pair + "' is not target=source");
        const auto tgt = pair.substr(0, eq), src = pair.substr(eq + 1);
        const auto it = std::find_if(policy.mapping.begin(), policy.mapping.end(),
                                     [&](const auto& m) { return m.first == tgt; });
        if (it == policy.mapping.end()) fail(ErrorKind::kDomain, "'" + tgt + "' is not in the target alphabet");
        it->second = src;
      }
      std::set<std::string> kept;
      for (const auto& [t, s] : policy.mapping) {
        if (s) kept.insert(*s);
      }
      policy.mode = kept.size() == model.alphabet.size() ? net::AdaptPolicy::Mode::kExtend
                                                          : net::AdaptPolicy::Mode::kShrink;
      policy.init = ad_init == "uniform" ? net::AdaptPolicy::Init::kUniform : net::AdaptPolicy::Init::kZero;
      policy.scale = ad_scale;
      policy.seed = seed;
      const auto [cfg, weights] = net::adapt_alphabet(model.config, model.weights, model.alphabet, target, policy);
      const auto manifest = net::save_weights(ad_out, cfg, weights, model.features, target);
      const bool extend = policy.mode == net::AdaptPolicy::Mode::kExtend;
      p.emit({{"mode", extend ? "extend" : "shrink"},
              {"from", model.alphabet.size()},
              {"to", target.size()},
              {"manifest", manifest.string()}},
             std::string(extend ? "extended " : "shrank ") + std::to_string(model.alphabet.size()) + " -> " +
                 std::to_string(target.size()) + " symbols, wrote " + manifest.string());
    };
  });

  // eval --------------------------------------------------------------------
  std::string ev_ref, ev_hyp;
  auto* eval = app.add_subcommand("eval", "Word error rate of hypothesis lines against reference lines");
  eval->add_option("--ref", ev_ref, "Reference transcripts, one per line")->required();
  eval->add_option("--hyp", ev_hyp, "Hypothesis transcripts, one per line")->required();
  eval->callback([&] {
    action = [&](detail::Printer& p) {
      const auto ref = detail::read_lines(ev_ref);
      const auto hyp = detail::read_lines(ev_hyp);
      if (ref.size() != hyp.size()) {
        fail(ErrorKind::kSchema, "reference has " + std::to_string(ref.size()) + " lines, hypothesis has " +
                                     std::to_string(hyp.size()));
      }
      std::size_t edits = 0, words = 0;
      for (std::size_t i = 0; i < ref.size(); ++i) {
        const auto r = ctc::split_words(ref[i]);
        edits += ctc::word_edit_distance(r, ctc::split_words(hyp[i]));
        words += r.size();
      }
      if (words == 0) fail(ErrorKind::kDomain, "reference has no words");
      const double wer = static_cast<double>(edits) / static_cast<double>(words);
      p.emit({{"wer", wer}, {"errors", edits}, {"words", words}, {"lines", ref.size()}},
             "WER " + detail::fixed(wer) + " (" + std::to_string(edits) + " errors / " + std::to_string(words) +
                 " words)");
    };
  });

  // bench -------------------------------------------------------------------
  std::string bn_model, bn_manifest;
  int bn_reps = 3;
  std::optional<double> bn_chunk;
  detail::DecodeFlags bn_flags;
  auto* bench = app.add_subcommand("bench", "Real-time factor over a manifest");
  bench->add_option("--model", bn_model, "Model directory (default: $SCRIBO_MODEL_DIR)");
  bench->add_option("--manifest", bn_manifest, "Manifest of clips")->required();
  bench->add_option("--reps", bn_reps, "Repetitions per clip")->check(CLI::PositiveNumber);
  bench->add_option("--chunk", bn_chunk, "Stream in chunks of this many seconds");
  bn_flags.attach(bench);
  bench->callback([&] {
    action = [&](detail::Printer& p) {
      const auto model = net::load_weights(detail::model_dir_or_env(bn_model));
      const auto ds = corpus::read_manifest(bn_manifest);
      std::optional<lm::NgramModel> lm_storage;
      auto opts = bn_flags.resolve(lm_storage);
      opts.chunk_seconds = bn_chunk;
      const auto r = pipeline::bench(model, ds.items, ds.root, bn_reps, opts, workers);
      for (const auto& m : r.measurements) {
        json rec = detail::report_json(m.report);
        rec["filepath"] = m.filepath;
        rec["repetition"] = m.repetition;
        p.emit(rec, m.filepath + " #" + std::to_string(m.repetition) + " " + detail::report_text(m.report));
      }
      json summary = detail::report_json(r.aggregate);
      summary["measurements"] = r.measurements.size();
      summary["mean_rtf"] = r.mean_rtf;
      summary["median_rtf"] = r.median_rtf;
      p.emit(summary, "measurements " + std::to_string(r.measurements.size()) + ", mean rtf " +
                          detail::fixed(r.mean_rtf) + ", median rtf " + detail::fixed(r.median_rtf) + "\ntotal " +
                          detail::report_text(r.aggregate));
    };
  });

  // model-init ----------------------------------------------------------------
  std::string mi_preset = "quartznet15x5", mi_config, mi_alphabet = "en", mi_out;
  bool mi_fold = false;
  auto* model_init = app.add_subcommand("model-init", "Write a randomly initialized model directory");
  model_init->add_option("--preset", mi_preset, "Architecture preset");
  model_init->add_option("--config", mi_config, "Network config JSON instead of a preset");
  model_init->add_option("--alphabet", mi_alphabet, "Alphabet preset or JSON file");
  model_init->add_option("--out", mi_out, "Output model directory")->required();
  model_init->add_flag("--fold", mi_fold, "Fold batch normalization into the convolutions");
  model_init->callback([&] {
    action = [&](detail::Printer& p) {
      const auto alphabet = textnorm::resolve_alphabet(mi_alphabet);
      net::NetConfig cfg;
      if (mi_config.empty()) {
        cfg = net::preset(mi_preset);
      } else {
        std::ifstream f(mi_config);
        if (!f) fail(ErrorKind::kIo, "cannot open " + mi_config);
        try {
          cfg = net::config_from_json(json::parse(f));
        } catch (const json::exception& e) {
          fail(ErrorKind::kParse, mi_config + ": " + e.what());
        }
      }
      cfg.vocab_size = static_cast<int>(alphabet.size());
      auto weights = net::random_weights(cfg, seed);
      if (mi_fold) std::tie(cfg, weights) = net::fold_batchnorm(cfg, weights);
      features::FeatureConfig feats;
      feats.mel_bins = cfg.input_features;
      const auto manifest = net::save_weights(mi_out, cfg, weights, feats, alphabet);
      p.emit({{"model", cfg.name}, {"parameters", net::param_count(cfg)}, {"manifest", manifest.string()}},
             cfg.name + " with " + std::to_string(net::param_count(cfg)) + " parameters, wrote " + manifest.string());
    };
  });

  std::vector<std::string> argv;
  for (auto it = args.rbegin(); it != args.rend(); ++it) argv.push_back(*it);
  try {
    app.parse(argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }
  detail::Printer printer(out, json_out);
  try {
    action(printer);
  } catch (const Error& e) {
    err << "error: " << to_string(e.kind()) << ": " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitOk;
}

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr,
               std::istream& in = std::cin) {
  return run(std::vector<std::string>(argv + 1, argv + argc), out, err, in);
}

}  // namespace scribo::cli
