#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include "vcrn/corpus/synthetic.hpp"
#include "vcrn/dictionary/video_dictionary.hpp"
#include "vcrn/training/gradcheck_harness.hpp"
#include "vcrn/training/trainer.hpp"

namespace vcrn::training {
namespace {

using M = Matrix<double>;
using V = Var<double>;

V dist(std::initializer_list<double> p) { return V::constant(M(1, p.size(), std::vector<double>(p))); }

TEST(CrossEntropy, OneHotPredictionsCostNothing) {
  std::vector<V> probs{dist({0, 0, 1, 0}), dist({0, 1, 0, 0})};
  EXPECT_EQ(sequence_nll(probs, {2, 1}).scalar(), 0.0);
}

TEST(CrossEntropy, UniformPredictionsCostTLogV) {
  std::vector<V> probs(5, dist({0.125, 0.125, 0.125, 0.125, 0.125, 0.125, 0.125, 0.125}));
  EXPECT_NEAR(sequence_nll(probs, {4, 5, 0, 7, 2}).scalar(), 4 * std::log(8.0), 1e-12);
}

TEST(CrossEntropy, PadTargetsAreMaskedAndZeroIsClamped) {
  std::vector<V> probs{dist({0.5, 0.5}), dist({0.5, 0.5})};
  EXPECT_EQ(sequence_nll(probs, {0, 0}).scalar(), 0.0);
  EXPECT_NEAR(sequence_nll(std::vector<V>{dist({1, 0, 0, 0, 0})}, {4}).scalar(), -std::log(1e-12),
              1e-9);
  EXPECT_THROW(sequence_nll(probs, {1}), DimensionError);
  EXPECT_THROW(sequence_nll(probs, {1, 9}), ContractError);
}

TEST(CrossEntropy, BatchMeanIgnoresOrder) {
  std::vector<std::vector<V>> a{{dist({0.1, 0.9})}, {dist({0.3, 0.7}), dist({0.6, 0.4})},
                                {dist({0.2, 0.8})}};
  std::vector<std::vector<std::int32_t>> ta{{1}, {1, 0}, {1}};
  // pad id 0 removes the second position of the middle sequence
  const double want = -(std::log(0.9) + std::log(0.7) + std::log(0.8)) / 3;
  EXPECT_NEAR(cross_entropy_loss(a, ta).scalar(), want, 1e-15);
  std::vector<std::vector<V>> b{a[2], a[0], a[1]};
  std::vector<std::vector<std::int32_t>> tb{ta[2], ta[0], ta[1]};
  EXPECT_NEAR(cross_entropy_loss(b, tb).scalar(), want, 1e-15);
}

TEST(TokenAccuracy, ArgmaxTiesPickLowestId) {
  std::vector<V> probs{dist({0, 0.5, 0.5}), dist({0, 0.2, 0.8}), dist({0.1, 0.1, 0.8})};
  TokenCounts c = count_correct(probs, {2, 2, 0});
  EXPECT_EQ(c.total, 2u);
  EXPECT_EQ(c.correct, 1u);
  EXPECT_DOUBLE_EQ(c.accuracy(), 0.5);
}

TEST(Adam, ZeroGradientLeavesParameters) {
  numerics::ParameterStore<double> store;
  store.add("w", M{{1, -2, 3}});
  Adam<double> adam({.learning_rate = 0.1});
  store.zero_grad();
  adam.step(store);
  EXPECT_EQ(store.at("w").value(), (M{{1, -2, 3}}));
}

TEST(Adam, FirstStepMovesByLearningRate) {
  numerics::ParameterStore<double> store;
  store.add("x", M{{0.5}});
  Adam<double> adam({.learning_rate = 1e-3});
  store.at("x").mutable_grad()(0, 0) = 1;
  adam.step(store);
  EXPECT_NEAR(store.at("x").value()(0, 0), 0.5 - 1e-3, 1e-10);
}

// Scalar restatement of the published update rule, one parameter at a time.
struct ReferenceAdam {
  double lr, b1, b2, eps;
  std::vector<double> m, v;
  int t = 0;
  void step(std::vector<double>& w, const std::vector<double>& g) {
    if (m.empty()) m.assign(w.size(), 0), v.assign(w.size(), 0);
    ++t;
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = b1 * m[i] + (1 - b1) * g[i];
      v[i] = b2 * v[i] + (1 - b2) * g[i] * g[i];
      double mhat = m[i] / (1 - std::pow(b1, t));
      double vhat = v[i] / (1 - std::pow(b2, t));
      w[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
};

TEST(Adam, MatchesReferenceOverTenSteps) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0, 1);
  numerics::ParameterStore<double> store;
  M w0(2, 3);
  for (auto& v : w0.data()) v = n(rng);
  store.add("w", w0);
  Adam<double> adam({.learning_rate = 0.01, .beta1 = 0.8, .beta2 = 0.99, .eps = 1e-6,
                     .clip_norm = 0});
  ReferenceAdam ref{0.01, 0.8, 0.99, 1e-6, {}, {}};
  std::vector<double> w(w0.data().begin(), w0.data().end());
  for (int step = 0; step < 10; ++step) {
    std::vector<double> g(6);
    for (auto& x : g) x = n(rng) * (step + 1);
    store.zero_grad();
    for (std::size_t i = 0; i < 6; ++i) store.at("w").mutable_grad()[i] = g[i];
    adam.step(store);
    ref.step(w, g);
  }
  for (std::size_t i = 0; i < 6; ++i) EXPECT_NEAR(store.at("w").value()[i], w[i], 1e-10);
}

TEST(Adam, ClipsByGlobalNorm) {
  numerics::ParameterStore<double> clipped, scaled;
  for (auto* s : {&clipped, &scaled}) {
    s->add("a", M{{1, 1}});
    s->add("b", M{{-1}});
  }
  clipped.at("a").mutable_grad() = M{{6, 0}};
  clipped.at("b").mutable_grad() = M{{8}};
  scaled.at("a").mutable_grad() = M{{3, 0}};
  scaled.at("b").mutable_grad() = M{{4}};
  Adam<double> a({.learning_rate = 0.1, .clip_norm = 5}), b({.learning_rate = 0.1, .clip_norm = 0});
  EXPECT_DOUBLE_EQ(a.step(clipped), 10.0);
  b.step(scaled);
  a.step(clipped);
  b.step(scaled);
  EXPECT_LT(numerics::max_abs_diff(clipped.at("a").value(), scaled.at("a").value()), 1e-15);
  EXPECT_LT(numerics::max_abs_diff(clipped.at("b").value(), scaled.at("b").value()), 1e-15);
}

TEST(Adam, NanGradientNamesTheParameter) {
  numerics::ParameterStore<double> store;
  store.add("decoder.output.bias", M{{0, 0}});
  store.at("decoder.output.bias").mutable_grad()(0, 1) = std::nan("");
  Adam<double> adam({});
  try {
    adam.step(store);
    FAIL() << "expected TrainingError";
  } catch (const TrainingError& e) {
    EXPECT_NE(std::string(e.what()).find("decoder.output.bias"), std::string::npos);
  }
}

TEST(ConfigFile, ParsesSectionsCommentsAndTypes) {
  auto f = config::ConfigFile::parse(
      "# top comment\nname = run1\n\n[train]\nlearning_rate = 3e-3\n  epochs=12  \n"
      "[model]\nstrategy = ADD\nuse_dictionary = false\n");
  EXPECT_EQ(f.get<std::string>("", "name"), "run1");
  EXPECT_DOUBLE_EQ(f.get<double>("train", "learning_rate"), 3e-3);
  EXPECT_EQ(f.get<std::size_t>("train", "epochs"), 12u);
  EXPECT_FALSE(f.get<bool>("model", "use_dictionary"));
  EXPECT_EQ(f.get<int>("model", "missing", 5), 5);
  EXPECT_THROW(f.get<int>("model", "missing"), ConfigError);
  EXPECT_THROW(f.get<int>("model", "strategy"), ConfigError);
}

TEST(ConfigFile, RoundTripsModuloCommentsAndOrder) {
  const std::string text = "[train]\nepochs = 3\nbeta1 = 0.9\n# note\n[model]\nd_model = 16\n";
  auto f = config::ConfigFile::parse(text);
  auto g = config::ConfigFile::parse(f.to_string());
  EXPECT_EQ(f, g);
  EXPECT_EQ(g.to_string(), "[model]\nd_model = 16\n\n[train]\nbeta1 = 0.9\nepochs = 3\n");
}

TEST(ConfigFile, MalformedInputIsRejected) {
  EXPECT_THROW(config::ConfigFile::parse("[model\n"), ParseError);
  EXPECT_THROW(config::ConfigFile::parse("just words\n"), ParseError);
  EXPECT_THROW(config::ConfigFile::parse("a = 1\na = 2\n"), ConfigError);
  auto f = config::ConfigFile::parse("[model]\nd_modle = 3\n");
  EXPECT_THROW(read_model_config(f), ConfigError);
}

TEST(ConfigFile, ModelAndTrainConfigsRoundTrip) {
  model::ModelConfig m;
  m.vocab_size = 123;
  m.strategy = model::FusionStrategy::kMha;
  m.encoder.dropout = 0.15;
  m.layer_norm_eps = 1e-7;
  m.fixed_dictionary = false;
  TrainConfig t;
  t.learning_rate = 3.3e-3;
  t.seed = 99;
  t.log_wall_time = false;
  config::ConfigFile f;
  write_model_config(f, m);
  write_train_config(f, t);
  auto g = config::ConfigFile::parse(f.to_string());
  auto m2 = read_model_config(g);
  auto t2 = read_train_config(g);
  config::ConfigFile h;
  write_model_config(h, m2);
  write_train_config(h, t2);
  EXPECT_EQ(h.to_string(), f.to_string());
  EXPECT_EQ(m2.encoder.dropout, 0.15);
  EXPECT_EQ(t2.learning_rate, 3.3e-3);
  EXPECT_EQ(m2.strategy, model::FusionStrategy::kMha);
}

TEST(Split, HoldsOutTheTailOfTheSortedIds) {
  corpus::SyntheticSpec spec;
  spec.num_videos = 10;
  spec.frames = 2;
  spec.dim_appearance = spec.dim_motion = 2;
  auto syn = corpus::generate_synthetic_corpus(spec);
  Split s = split_videos(syn.corpus, 0.25);
  ASSERT_EQ(s.held_out_ids.size(), 3u);
  EXPECT_EQ(s.held_out_ids.front(), "vid0007");
  EXPECT_EQ(s.train_ids.size(), 7u);
  EXPECT_TRUE(split_videos(syn.corpus, 0).held_out_ids.empty());
}

struct TinyTask {
  corpus::SyntheticCorpus syn;
  corpus::Vocabulary vocab;
  std::vector<Example> train_set, held_out;
  dictionary::VideoDictionary dict;
  model::ModelConfig cfg;

  explicit TinyTask(std::size_t videos = 8, double val_fraction = 0.25) {
    corpus::SyntheticSpec spec;
    spec.num_videos = videos;
    spec.frames = 4;
    spec.dim_appearance = spec.dim_motion = 4;
    spec.captions_per_video = 2;
    syn = corpus::generate_synthetic_corpus(spec);
    Split s = split_videos(syn.corpus, val_fraction);
    vocab = vocabulary_for(syn.corpus, s.train_ids, 26, 0);
    train_set = examples_for(syn.corpus, vocab, s.train_ids, 26);
    held_out = examples_for(syn.corpus, vocab, s.held_out_ids, 26);
    dict = dictionary::kmeans_fit(dictionary::pool_frames(syn.corpus.videos, false), 4, {.seed = 1});
    cfg.feature_dim = 8;
    cfg.vocab_size = vocab.size();
    cfg.num_concepts = 4;
    cfg.encoder = {.d_model = 8, .heads = 2, .blocks = 1, .dropout = 0.1};
    cfg.d_hidden = 8;
  }
};

TrainConfig quick_train(std::size_t epochs) {
  TrainConfig t;
  t.learning_rate = 1e-2;
  t.batch_size = 4;
  t.epochs = epochs;
  t.seed = 5;
  t.log_wall_time = false;
  return t;
}

TEST(Trainer, OneEpochOnTwoExamplesIsFinite) {
  TinyTask task;
  model::CaptionModel<double> m(task.cfg);
  m.set_dictionary(task.dict.centers);
  std::vector<Example> two(task.train_set.begin(), task.train_set.begin() + 2);
  auto r = train(m, task.vocab, two, {}, quick_train(1));
  ASSERT_EQ(r.log.size(), 1u);
  EXPECT_TRUE(std::isfinite(r.log[0].train_loss));
  EXPECT_FALSE(r.log[0].val_loss.has_value());
  EXPECT_EQ(r.steps, 1u);
}

TEST(Trainer, LossFallsOnTheTrainingSet) {
  TinyTask task;
  model::CaptionModel<double> m(task.cfg);
  m.set_dictionary(task.dict.centers);
  const double before = evaluate(m, task.train_set).loss;
  train(m, task.vocab, task.train_set, {}, quick_train(80));
  EXPECT_LT(evaluate(m, task.train_set).loss, 0.7 * before);
}

TEST(Trainer, SameSeedGivesIdenticalLogsAndTensors) {
  TinyTask task;
  std::string logs[2];
  std::vector<char> ckpts[2];
  for (int run = 0; run < 2; ++run) {
    model::CaptionModel<double> m(task.cfg);
    m.set_dictionary(task.dict.centers);
    auto r = train(m, task.vocab, task.train_set, task.held_out, quick_train(3));
    std::ostringstream out;
    write_log(out, r.log);
    logs[run] = out.str();
    ckpts[run] = encode_checkpoint(make_checkpoint(m, task.vocab));
  }
  EXPECT_EQ(logs[0], logs[1]);
  EXPECT_EQ(ckpts[0], ckpts[1]);
  EXPECT_NE(logs[0].find("\"val_token_acc\""), std::string::npos);
}

TEST(Trainer, FixedDictionaryStaysAndJointDictionaryMoves) {
  TinyTask task;
  for (bool fixed : {true, false}) {
    auto cfg = task.cfg;
    cfg.fixed_dictionary = fixed;
    model::CaptionModel<double> m(cfg);
    m.set_dictionary(task.dict.centers);
    train(m, task.vocab, task.train_set, {}, quick_train(2));
    const bool same = m.dictionary_centers() == task.dict.centers;
    EXPECT_EQ(same, fixed) << "fixed = " << fixed;
  }
}

TEST(Trainer, IncompatibleDataFailsBeforeTheFirstStep) {
  TinyTask task;
  auto cfg = task.cfg;
  cfg.feature_dim = 6;
  model::CaptionModel<double> m(cfg);
  m.set_dictionary(Matrix<float>(4, 6));
  EXPECT_THROW(train(m, task.vocab, task.train_set, {}, quick_train(1)), ConfigError);
  model::CaptionModel<double> no_dict(task.cfg);
  EXPECT_THROW(train(no_dict, task.vocab, task.train_set, {}, quick_train(1)), ConfigError);
}

TEST(Trainer, KeepsTheEpochWithLowestHeldOutLoss) {
  TinyTask task;
  model::CaptionModel<double> m(task.cfg);
  m.set_dictionary(task.dict.centers);
  auto r = train(m, task.vocab, task.train_set, task.held_out, quick_train(6));
  double best = 1e300;
  std::size_t best_epoch = 0;
  for (const auto& e : r.log)
    if (*e.val_loss < best) best = *e.val_loss, best_epoch = e.epoch;
  EXPECT_EQ(r.best_epoch, best_epoch);
  EXPECT_NEAR(evaluate(m, task.held_out).loss, best, 1e-5);
}

TEST(Checkpoint, RoundTripRebuildsTheSameModel) {
  TinyTask task;
  auto cfg = task.cfg;
  cfg.fixed_dictionary = false;
  model::CaptionModel<double> m(cfg);
  m.set_dictionary(task.dict.centers);
  train(m, task.vocab, task.train_set, {}, quick_train(1));
  Checkpoint ck = make_checkpoint(m, task.vocab);
  auto bytes = encode_checkpoint(ck);
  Checkpoint back = decode_checkpoint(bytes, "mem");
  EXPECT_EQ(back, ck);
  EXPECT_EQ(encode_checkpoint(back), bytes);
  auto m2 = model_from_checkpoint<double>(back);
  const auto& ex = task.train_set[0];
  numerics::Rng r(0);
  auto a = m.teacher_forced(ex.video->features, ex.tokens, false, r);
  auto b = m2.teacher_forced(ex.video->features, ex.tokens, false, r);
  for (std::size_t t = 0; t < a.size(); ++t)
    EXPECT_LT(numerics::max_abs_diff(a[t].value(), b[t].value()), 1e-6);
}

TEST(Checkpoint, DamagedFilesAreRejected) {
  TinyTask task;
  model::CaptionModel<double> m(task.cfg);
  m.set_dictionary(task.dict.centers);
  Checkpoint ck = make_checkpoint(m, task.vocab);
  auto bytes = encode_checkpoint(ck);
  auto bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(decode_checkpoint(bad, "x"), ParseError);
  bytes.resize(bytes.size() - 3);
  EXPECT_THROW(decode_checkpoint(bytes, "x"), ParseError);
  ck.tensors.erase("decoder.output.bias");
  EXPECT_THROW(model_from_checkpoint<double>(ck), ParseError);
  ck = make_checkpoint(m, task.vocab);
  ck.tensors["decoder.output.bias"] = Matrix<float>(1, 3);
  EXPECT_THROW(model_from_checkpoint<double>(ck), DimensionError);
}

TEST(Gradcheck, TinyConfigPassesAndListsEveryParameterOnce) {
  auto cfg = tiny_gradcheck_config();
  auto report = gradcheck_model(cfg, 1);
  EXPECT_LT(report.max_relative_error, 1e-6) << report.worst_parameter;
  model::CaptionModel<double> m(cfg);
  ASSERT_EQ(report.parameters.size(), m.params().size());
  auto it = m.params().begin();
  for (const auto& e : report.parameters) EXPECT_EQ(e.name, (it++)->first);
}

// Doubles its input but claims the derivative is 3.
V corrupted_double(const V& x) {
  M y = x.value();
  for (auto& v : y.data()) v *= 2;
  auto xn = x.node();
  return numerics::make_node<double>(std::move(y), {x}, [xn](numerics::Node<double>& self) {
    auto& g = xn->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += 3 * self.grad[i];
  });
}

TEST(Gradcheck, CorruptedBackwardRuleIsCaught) {
  numerics::ParameterStore<double> store;
  store.add("w", M{{0.3, -0.7, 1.1}});
  auto loss = [&] {
    return numerics::sum_all(numerics::tanh(corrupted_double(store.at("w"))));
  };
  auto report = numerics::check_gradients<double>(loss, store, 1e-5);
  EXPECT_GT(report.max_relative_error, 1e-2);
  EXPECT_EQ(report.worst_parameter, "w");
}

}  // namespace
}  // namespace vcrn::training
