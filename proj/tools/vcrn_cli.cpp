// vcrn: command-line driver for the dictionary-aware video captioner.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "vcrn/config_file.hpp"
#include "vcrn/corpus/corpus_io.hpp"
#include "vcrn/corpus/synthetic.hpp"
#include "vcrn/dictionary/video_dictionary.hpp"
#include "vcrn/inference/captioner.hpp"
#include "vcrn/metrics/caption_metrics.hpp"
#include "vcrn/pipeline.hpp"
#include "vcrn/training/checkpoint.hpp"
#include "vcrn/training/gradcheck_harness.hpp"
#include "vcrn/training/trainer.hpp"

namespace {

using namespace vcrn;
using json = nlohmann::json;
using Real = double;

constexpr int kCheckFailed = 1;

bool g_json = false;

// One report per command: a JSON line under --json, `human` otherwise.
void report(const json& j, const std::string& human) {
  if (g_json) {
    std::cout << j.dump() << '\n';
  } else {
    std::cout << human;
  }
}

std::string read_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  return out;
}

// Applies "section.key=value" overrides on top of a config file.
config::ConfigFile load_config(const std::string& path, const std::vector<std::string>& sets) {
  config::ConfigFile cfg = path.empty() ? config::ConfigFile{}
                                        : config::ConfigFile::parse(read_text(path), path);
  for (const auto& s : sets) {
    const auto eq = s.find('=');
    const auto dot = s.find('.');
    if (eq == std::string::npos || dot == std::string::npos || dot > eq) {
      throw ConfigError("--set expects section.key=value, got \"" + s + "\"");
    }
    cfg.set(s.substr(0, dot), s.substr(dot + 1, eq - dot - 1), s.substr(eq + 1));
  }
  return cfg;
}

std::string fixed(double v, int digits = 4) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

// ---------------------------------------------------------------- gen-data

struct GenDataArgs {
  corpus::SyntheticSpec spec;
  std::string out;
};

int run_gen_data(const GenDataArgs& a) {
  corpus::SyntheticCorpus syn = corpus::generate_synthetic_corpus(a.spec);
  corpus::save_corpus(syn.corpus, a.out);
  corpus::Corpus back = corpus::load_corpus(a.out);
  if (back.videos.size() != syn.corpus.videos.size()) {
    throw IoError("corpus written to " + a.out + " does not read back");
  }
  json j{{"command", "gen-data"},
         {"out", a.out},
         {"videos", syn.corpus.videos.size()},
         {"captions", syn.corpus.captions.size()},
         {"concepts", a.spec.num_concepts},
         {"frames", a.spec.frames},
         {"dim_appearance", a.spec.dim_appearance},
         {"dim_motion", a.spec.dim_motion},
         {"seed", a.spec.seed}};
  std::ostringstream h;
  h << "wrote " << syn.corpus.videos.size() << " videos and " << syn.corpus.captions.size()
    << " captions to " << a.out << "\n  " << a.spec.num_concepts << " planted concepts, "
    << a.spec.frames << " frames, d = " << a.spec.dim_appearance << " + " << a.spec.dim_motion
    << "\n";
  report(j, h.str());
  return 0;
}

// -------------------------------------------------------------- build-dict

struct BuildDictArgs {
  std::string corpus;
  std::size_t m = 16;
  dictionary::KMeansOptions kmeans;
  std::string out;
};

int run_build_dict(BuildDictArgs a) {
  corpus::Corpus c = corpus::load_corpus(a.corpus);
  auto pool = dictionary::pool_frames(c.videos, a.kmeans.l2_normalize);
  dictionary::VideoDictionary dict = dictionary::kmeans_fit(pool, a.m, a.kmeans);
  dictionary::save_dictionary(dict, a.out);
  json j{{"command", "build-dict"}, {"out", a.out},       {"m", dict.size()},
         {"dim", dict.dim()},       {"frames", pool.rows()}, {"objective", dict.objective},
         {"iterations", dict.iterations}, {"seed", a.kmeans.seed}};
  report(j, "fitted " + std::to_string(dict.size()) + " centers over " +
                std::to_string(pool.rows()) + " frames\n  objective " + fixed(dict.objective) +
                " after " + std::to_string(dict.iterations) + " iterations\n  saved to " + a.out +
                "\n");
  return 0;
}

// ------------------------------------------------------------------- train

struct TrainArgs {
  std::string corpus, dict, config, out, log;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
};

int run_train(const TrainArgs& a) {
  config::ConfigFile cfg = load_config(a.config, a.sets);
  if (a.seed) cfg.set(training::kTrainSection, "seed", *a.seed);
  corpus::Corpus c = corpus::load_corpus(a.corpus);
  std::optional<dictionary::VideoDictionary> dict;
  if (!a.dict.empty()) dict = dictionary::load_dictionary(a.dict);
  pipeline::TrainingSetup s = pipeline::prepare_training(c, cfg, dict ? &*dict : nullptr);
  auto m = pipeline::build_model<Real>(s, dict ? &*dict : nullptr);

  const std::string log_path = a.log.empty() ? a.out + ".log.jsonl" : a.log;
  std::ofstream log = open_out(log_path);
  if (!g_json) {
    std::cout << "training on " << s.train_set.size() << " captions (" << s.split.train_ids.size()
              << " videos), holding out " << s.split.held_out_ids.size() << " videos\n  vocab "
              << s.vocab.size() << ", " << m.params().scalar_count() << " parameters, strategy "
              << model::to_string(s.model.strategy)
              << (s.model.use_dictionary ? ", M = " + std::to_string(s.model.num_concepts)
                                         : std::string(", no dictionary"))
              << "\n";
  }
  auto result = training::train(m, s.vocab, s.train_set, s.held_out, s.train,
                                [&](const training::EpochRecord& r) {
                                  log << r.to_json().dump() << '\n';
                                  log.flush();
                                  if (g_json) {
                                    std::cout << r.to_json().dump() << '\n';
                                  } else {
                                    std::cout << "epoch " << r.epoch << "  train_loss "
                                              << fixed(r.train_loss);
                                    if (r.val_loss) {
                                      std::cout << "  val_loss " << fixed(*r.val_loss)
                                                << "  val_token_acc " << fixed(*r.val_token_acc);
                                    }
                                    std::cout << '\n';
                                  }
                                });
  training::save_checkpoint(training::make_checkpoint(m, s.vocab, &s.train), a.out);
  json j{{"command", "train"}, {"out", a.out}, {"log", log_path}, {"best_epoch", result.best_epoch},
         {"steps", result.steps}};
  report(j, "saved epoch " + std::to_string(result.best_epoch) + " to " + a.out + " (log " +
                log_path + ")\n");
  return 0;
}

// ----------------------------------------------------------------- caption

std::vector<std::string> split_ids(const corpus::Corpus& c, const training::Checkpoint& ck,
                                   const std::string& which) {
  training::Split s =
      training::split_videos(c, training::read_train_config(ck.config).val_fraction);
  if (which == "held-out") return s.held_out_ids;
  if (which == "train") return s.train_ids;
  std::vector<std::string> all;
  for (const auto& v : c.videos) all.push_back(v.id);
  return all;
}

struct CaptionArgs {
  std::string ckpt, corpus, out, split = "all";
  std::size_t beam = 5, max_len = corpus::kDefaultMaxWords;
};

int run_caption(const CaptionArgs& a) {
  training::Checkpoint ck = training::load_checkpoint(a.ckpt);
  auto m = training::model_from_checkpoint<Real>(ck, a.ckpt);
  corpus::Corpus c = corpus::load_corpus(a.corpus);
  auto videos = pipeline::select_videos(c, split_ids(c, ck, a.split));
  auto caps = pipeline::caption_videos(m, ck.vocab, videos, a.beam,
                                       inference::caption_options(a.max_len));
  std::ofstream file;
  if (!a.out.empty()) file = open_out(a.out);
  std::ostream& out = a.out.empty() ? std::cout : file;
  for (const auto& cap : caps) out << cap.to_json().dump() << '\n';
  if (!a.out.empty()) {
    report({{"command", "caption"}, {"out", a.out}, {"videos", caps.size()}, {"beam", a.beam}},
           "captioned " + std::to_string(caps.size()) + " videos (beam " +
               std::to_string(a.beam) + ") into " + a.out + "\n");
  }
  return 0;
}

// -------------------------------------------------------------------- eval

std::vector<corpus::CaptionRecord> load_references(const std::string& refs) {
  if (std::filesystem::is_directory(refs)) return corpus::load_captions(corpus::captions_path(refs));
  return corpus::load_captions(refs);
}

std::vector<inference::CaptionResult> load_hypotheses(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::vector<inference::CaptionResult> out;
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      json j = json::parse(line);
      inference::CaptionResult r;
      r.video_id = j.at("video_id").get<std::string>();
      r.caption = j.at("caption").get<std::string>();
      out.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw ParseError(ParseError::Reason::kMalformed,
                       path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

int run_eval(const std::string& hyp, const std::string& refs) {
  auto caps = load_hypotheses(hyp);
  metrics::EvalReport r = pipeline::score_captions(caps, load_references(refs));
  if (r.degenerate_idf) {
    std::cerr << "vcrn: warning: a single video makes every CIDEr idf zero\n";
  }
  report(r.to_json(), "BLEU-4 " + fixed(r.bleu4) + "\nCIDEr  " + fixed(r.cider) + "\nvideos " +
                          std::to_string(r.num_videos) + ", references " +
                          std::to_string(r.num_refs_total) + "\n");
  return 0;
}

// --------------------------------------------------------------- gradcheck

int run_gradcheck(const std::string& config, const std::vector<std::string>& sets,
                  std::uint64_t seed, double threshold) {
  config::ConfigFile defaults;
  training::write_model_config(defaults, training::tiny_gradcheck_config());
  config::ConfigFile user = load_config(config, sets);
  for (const auto& [section, entries] : user.sections())
    for (const auto& [k, v] : entries) defaults.set(section, k, v);
  model::ModelConfig cfg = training::read_model_config(defaults);
  numerics::GradCheckReport rep = training::gradcheck_model(cfg, seed);
  const bool pass = rep.max_relative_error < threshold;
  if (g_json) {
    json params = json::array();
    for (const auto& p : rep.parameters) {
      params.push_back({{"name", p.name},
                        {"entries", p.entries},
                        {"relative_error", p.relative_error},
                        {"max_abs_error", p.max_abs_error}});
    }
    std::cout << json{{"command", "gradcheck"},
                      {"max_relative_error", rep.max_relative_error},
                      {"worst_parameter", rep.worst_parameter},
                      {"threshold", threshold},
                      {"pass", pass},
                      {"parameters", params}}
                     .dump()
              << '\n';
  } else {
    for (const auto& p : rep.parameters) {
      std::printf("%-28s %6zu  rel %.3e  abs %.3e\n", p.name.c_str(), p.entries, p.relative_error,
                  p.max_abs_error);
    }
    std::printf("max relative error %.3e (%s): %s\n", rep.max_relative_error,
                rep.worst_parameter.c_str(), pass ? "PASS" : "FAIL");
  }
  return pass ? 0 : kCheckFailed;
}

// ---------------------------------------------------------- dump-attention

struct DumpArgs {
  std::string ckpt, corpus, video_id, out;
  std::size_t beam = 5, top_k = 5, max_len = corpus::kDefaultMaxWords;
};

int run_dump(const DumpArgs& a) {
  training::Checkpoint ck = training::load_checkpoint(a.ckpt);
  auto m = training::model_from_checkpoint<Real>(ck, a.ckpt);
  corpus::Corpus c = corpus::load_corpus(a.corpus);
  const corpus::Video* v = c.find(a.video_id);
  if (!v) throw ConfigError("video " + a.video_id + " is not in " + a.corpus);
  auto cap = inference::caption_video(m, ck.vocab, *v, a.beam, inference::caption_options(a.max_len));
  auto recs = inference::dump_attention(m, ck.vocab, *v, cap.tokens, a.top_k);
  std::ofstream file;
  if (!a.out.empty()) file = open_out(a.out);
  std::ostream& out = a.out.empty() ? std::cout : file;
  for (const auto& r : recs) {
    json j = r.to_json();
    j["video_id"] = v->id;
    out << j.dump() << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"vcrn: dictionary-aware video captioning"};
  app.require_subcommand(1);
  app.add_flag("--json", g_json, "Print reports as line-delimited JSON");

  GenDataArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Write a synthetic corpus with planted concepts");
  gen_cmd->add_option("--seed", gen.spec.seed, "Random seed")->capture_default_str();
  gen_cmd->add_option("--videos", gen.spec.num_videos, "Number of videos")->capture_default_str();
  gen_cmd->add_option("--concepts", gen.spec.num_concepts, "Planted concepts K")->capture_default_str();
  gen_cmd->add_option("--frames", gen.spec.frames, "Frames per video L")->capture_default_str();
  gen_cmd->add_option("--dim-a", gen.spec.dim_appearance, "Appearance feature width")->capture_default_str();
  gen_cmd->add_option("--dim-m", gen.spec.dim_motion, "Motion feature width")->capture_default_str();
  gen_cmd->add_option("--noise", gen.spec.noise_sigma, "Per-frame Gaussian noise sigma")->capture_default_str();
  gen_cmd->add_option("--captions-per-video", gen.spec.captions_per_video, "Reference captions per video")
      ->capture_default_str();
  gen_cmd->add_option("--second-concept-prob", gen.spec.second_concept_prob,
                      "Probability that a video shows a second concept")
      ->capture_default_str();
  gen_cmd->add_option("--out", gen.out, "Output corpus directory")->required();

  BuildDictArgs bd;
  auto* bd_cmd = app.add_subcommand("build-dict", "Cluster all frames into a video dictionary");
  bd_cmd->add_option("--corpus", bd.corpus, "Corpus directory")->required();
  bd_cmd->add_option("--m", bd.m, "Number of centers M")->capture_default_str();
  bd_cmd->add_option("--seed", bd.kmeans.seed, "Random seed")->capture_default_str();
  bd_cmd->add_option("--max-iter", bd.kmeans.max_iter, "Lloyd iteration cap")->capture_default_str();
  bd_cmd->add_option("--tol", bd.kmeans.tol, "Stop when no center moves further")->capture_default_str();
  bd_cmd->add_option("--restarts", bd.kmeans.restarts, "Independent seedings; best objective kept")
      ->capture_default_str();
  bd_cmd->add_flag("--l2-normalize", bd.kmeans.l2_normalize, "Cluster unit-length frames");
  bd_cmd->add_option("--out", bd.out, "Output dictionary file")->required();

  TrainArgs tr;
  auto* tr_cmd = app.add_subcommand("train", "Train a captioner with teacher forcing");
  tr_cmd->add_option("--corpus", tr.corpus, "Corpus directory")->required();
  tr_cmd->add_option("--dict", tr.dict, "Dictionary file (required unless use_dictionary = false)");
  tr_cmd->add_option("--config", tr.config, "Config file with [model] and [train] sections");
  tr_cmd->add_option("--set", tr.sets, "Override a config key: section.key=value (repeatable)");
  tr_cmd->add_option("--seed", tr.seed, "Override train.seed");
  tr_cmd->add_option("--log", tr.log, "Per-epoch JSON log (default: <out>.log.jsonl)");
  tr_cmd->add_option("--out", tr.out, "Output checkpoint")->required();

  CaptionArgs ca;
  auto* ca_cmd = app.add_subcommand("caption", "Generate captions with beam search");
  ca_cmd->add_option("--ckpt", ca.ckpt, "Checkpoint")->required();
  ca_cmd->add_option("--corpus", ca.corpus, "Corpus directory")->required();
  ca_cmd->add_option("--beam", ca.beam, "Beam size (1 = greedy)")->capture_default_str();
  ca_cmd->add_option("--max-len", ca.max_len, "Decode steps per caption")->capture_default_str();
  ca_cmd->add_option("--split", ca.split, "Videos to caption")
      ->check(CLI::IsMember({"all", "train", "held-out"}))
      ->capture_default_str();
  ca_cmd->add_option("--out", ca.out, "JSON-lines output (default: stdout)");

  std::string hyp, refs;
  auto* ev_cmd = app.add_subcommand("eval", "Score captions with BLEU-4 and CIDEr");
  ev_cmd->add_option("--hyp", hyp, "JSON-lines captions from `caption`")->required();
  ev_cmd->add_option("--refs", refs, "Corpus directory or captions.tsv")->required();

  std::string gc_config;
  std::vector<std::string> gc_sets;
  std::uint64_t gc_seed = 1;
  double gc_threshold = 1e-6;
  auto* gc_cmd = app.add_subcommand("gradcheck", "Compare backprop against finite differences");
  gc_cmd->add_option("--config", gc_config, "Config file; [model] keys override the tiny defaults");
  gc_cmd->add_option("--set", gc_sets, "Override a config key: section.key=value (repeatable)");
  gc_cmd->add_option("--seed", gc_seed, "Seed for the random example")->capture_default_str();
  gc_cmd->add_option("--threshold", gc_threshold, "Pass when the max relative error is below this")
      ->capture_default_str();

  DumpArgs du;
  auto* du_cmd = app.add_subcommand("dump-attention", "Per-step attention and gate diagnostics");
  du_cmd->add_option("--ckpt", du.ckpt, "Checkpoint")->required();
  du_cmd->add_option("--corpus", du.corpus, "Corpus directory")->required();
  du_cmd->add_option("--video-id", du.video_id, "Video to decode")->required();
  du_cmd->add_option("--beam", du.beam, "Beam size for the decoded caption")->capture_default_str();
  du_cmd->add_option("--top-k", du.top_k, "Dictionary entries to list")->capture_default_str();
  du_cmd->add_option("--max-len", du.max_len, "Decode steps")->capture_default_str();
  du_cmd->add_option("--out", du.out, "JSON-lines output (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(ErrorKind::kConfig);
  }

  try {
    if (*gen_cmd) return run_gen_data(gen);
    if (*bd_cmd) return run_build_dict(bd);
    if (*tr_cmd) return run_train(tr);
    if (*ca_cmd) return run_caption(ca);
    if (*ev_cmd) return run_eval(hyp, refs);
    if (*gc_cmd) return run_gradcheck(gc_config, gc_sets, gc_seed, gc_threshold);
    if (*du_cmd) return run_dump(du);
  } catch (const Error& e) {
    std::cerr << "vcrn: " << to_string(e.kind()) << ": " << e.what() << '\n';
    return static_cast<int>(e.kind());
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "vcrn: " << to_string(ErrorKind::kIo) << ": " << e.what() << '\n';
    return static_cast<int>(ErrorKind::kIo);
  }
  return 0;
}
