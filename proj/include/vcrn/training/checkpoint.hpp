#pragma once

#include <map>
#include <string>
#include <vector>

#include "vcrn/binary_io.hpp"
#include "vcrn/config_file.hpp"
#include "vcrn/corpus/vocabulary.hpp"
#include "vcrn/model/caption_model.hpp"
#include "vcrn/training/train_config.hpp"

namespace vcrn::training {

inline constexpr char kCheckpointMagic[] = "VCRNCKPT";
inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Everything needed to rebuild a model for decoding: its configuration, the
/// vocabulary it was trained with and every named tensor (including the
/// dictionary, fixed or not).
struct Checkpoint {
  config::ConfigFile config;
  corpus::Vocabulary vocab;
  std::map<std::string, Matrix<float>> tensors;

  bool operator==(const Checkpoint&) const = default;
};

inline std::vector<char> encode_checkpoint(const Checkpoint& ckpt) {
  io::Writer w;
  w.put_raw(std::string_view(kCheckpointMagic, 8));
  w.put_u32(kCheckpointVersion);
  w.put_string(ckpt.config.to_string());
  const auto& tokens = ckpt.vocab.tokens();
  w.put_u32(static_cast<std::uint32_t>(tokens.size() - corpus::kReservedCount));
  for (std::size_t i = corpus::kReservedCount; i < tokens.size(); ++i) w.put_string(tokens[i]);
  w.put_u32(static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& [name, m] : ckpt.tensors) {
    w.put_string(name);
    w.put_u32(2);
    w.put_u32(static_cast<std::uint32_t>(m.rows()));
    w.put_u32(static_cast<std::uint32_t>(m.cols()));
    for (float v : m.data()) w.put_f32(v);
  }
  return w.bytes();
}

inline Checkpoint decode_checkpoint(const std::vector<char>& bytes, const std::string& what) {
  io::Reader r(bytes, what);
  r.expect_magic(std::string_view(kCheckpointMagic, 8));
  r.expect_version(kCheckpointVersion);
  Checkpoint ckpt;
  ckpt.config = config::ConfigFile::parse(r.get_string(), what + " (embedded config)");
  std::vector<std::string> tokens(r.get_u32());
  for (auto& t : tokens) t = r.get_string();
  try {
    ckpt.vocab = corpus::Vocabulary::from_tokens(tokens);
  } catch (const ConfigError& e) {
    throw ParseError(ParseError::Reason::kMalformed, what + ": " + e.what());
  }
  const std::uint32_t count = r.get_u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = r.get_string();
    const std::uint32_t ndim = r.get_u32();
    if (ndim != 2) {
      throw ParseError(ParseError::Reason::kMalformed,
                       what + ": tensor " + name + " has " + std::to_string(ndim) + " dims");
    }
    const std::size_t rows = r.get_u32(), cols = r.get_u32();
    if (r.remaining() / 4 < rows * cols) {
      throw ParseError(ParseError::Reason::kTruncated, what + ": tensor " + name + " is cut short");
    }
    std::vector<float> values(rows * cols);
    for (auto& v : values) v = r.get_f32();
    if (!ckpt.tensors.emplace(name, Matrix<float>(rows, cols, std::move(values))).second) {
      throw ParseError(ParseError::Reason::kMalformed, what + ": tensor " + name + " repeated");
    }
  }
  r.expect_remaining(0);
  return ckpt;
}

inline void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  io::write_file(path, encode_checkpoint(ckpt));
}

inline Checkpoint load_checkpoint(const std::string& path) {
  return decode_checkpoint(io::read_file(path), path);
}

/// Snapshot of every model tensor, the dictionary included.
template <class Real>
std::map<std::string, Matrix<float>> model_tensors(const model::CaptionModel<Real>& m) {
  std::map<std::string, Matrix<float>> out;
  for (const auto& [name, p] : m.params()) out.emplace(name, p.value().template cast<float>());
  if (m.has_dictionary()) out[model::kDictionaryParam] = m.dictionary_centers();
  return out;
}

template <class Real>
Checkpoint make_checkpoint(const model::CaptionModel<Real>& m, const corpus::Vocabulary& vocab,
                           const TrainConfig* train = nullptr) {
  Checkpoint ckpt;
  write_model_config(ckpt.config, m.config());
  if (train) write_train_config(ckpt.config, *train);
  ckpt.vocab = vocab;
  ckpt.tensors = model_tensors(m);
  return ckpt;
}

/// Copies `tensors` into a model built from the same configuration. Every
/// parameter must be present with its exact shape.
template <class Real>
void load_tensors(model::CaptionModel<Real>& m, const std::map<std::string, Matrix<float>>& tensors,
                  const std::string& what = "checkpoint") {
  if (m.config().use_dictionary) {
    auto it = tensors.find(model::kDictionaryParam);
    if (it == tensors.end()) throw ParseError(ParseError::Reason::kMalformed, what + ": no dictionary");
    m.set_dictionary(it->second);
  }
  for (auto& [name, p] : m.params()) {
    auto it = tensors.find(name);
    if (it == tensors.end()) {
      throw ParseError(ParseError::Reason::kMalformed, what + ": missing tensor " + name);
    }
    if (it->second.rows() != p.rows() || it->second.cols() != p.cols()) {
      throw DimensionError(what + ": tensor " + name + " is " + it->second.shape_string() +
                           ", model expects " + p.value().shape_string());
    }
    p.mutable_value() = it->second.template cast<Real>();
  }
  for (const auto& [name, _] : tensors) {
    if (name != model::kDictionaryParam && !m.params().contains(name)) {
      throw ParseError(ParseError::Reason::kMalformed, what + ": unexpected tensor " + name);
    }
  }
}

template <class Real>
model::CaptionModel<Real> model_from_checkpoint(const Checkpoint& ckpt,
                                                const std::string& what = "checkpoint") {
  model::ModelConfig cfg = read_model_config(ckpt.config);
  if (cfg.vocab_size != ckpt.vocab.size()) {
    throw DimensionError(what + ": config vocab_size " + std::to_string(cfg.vocab_size) +
                         " but " + std::to_string(ckpt.vocab.size()) + " stored tokens");
  }
  model::CaptionModel<Real> m(cfg);
  load_tensors(m, ckpt.tensors, what);
  return m;
}

}  // namespace vcrn::training
