#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "vcrn/binary_io.hpp"
#include "vcrn/corpus/video.hpp"

namespace vcrn::corpus {

inline constexpr char kFeatureMagic[] = "VCRNFEAT";
inline constexpr std::uint32_t kFeatureVersion = 1;

inline std::vector<char> encode_features(const Video& video) {
  video.validate();
  io::Writer w;
  w.put_raw(kFeatureMagic);
  w.put_u32(kFeatureVersion);
  w.put_string(video.id);
  w.put_u32(static_cast<std::uint32_t>(video.frames()));
  w.put_u32(static_cast<std::uint32_t>(video.dim_appearance));
  w.put_u32(static_cast<std::uint32_t>(video.dim_motion));
  for (float v : video.features.data()) w.put_f32(v);
  return w.bytes();
}

inline Video decode_features(const std::vector<char>& bytes, const std::string& what) {
  io::Reader r(bytes, what);
  r.expect_magic(kFeatureMagic);
  r.expect_version(kFeatureVersion);
  Video v;
  v.id = r.get_string();
  const std::uint64_t frames = r.get_u32();
  v.dim_appearance = r.get_u32();
  v.dim_motion = r.get_u32();
  const std::uint64_t count = frames * (v.dim_appearance + v.dim_motion);
  r.expect_remaining(count * 4);
  if (frames == 0 || count == 0) {
    throw ParseError(ParseError::Reason::kMalformed, what + ": empty feature matrix");
  }
  std::vector<float> values(count);
  for (auto& x : values) x = r.get_f32();
  v.features = numerics::Matrix<float>(frames, v.dim(), std::move(values));
  return v;
}

inline void save_features(const Video& video, const std::string& path) {
  io::write_file(path, encode_features(video));
}

inline Video load_features(const std::string& path) {
  return decode_features(io::read_file(path), path);
}

/// One record per line: video id, a tab, then the raw caption text.
inline std::vector<CaptionRecord> load_captions(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path + " for reading");
  std::vector<CaptionRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw ParseError(ParseError::Reason::kMalformed,
                       path + ":" + std::to_string(lineno) + ": missing tab separator");
    }
    out.push_back({line.substr(0, tab), line.substr(tab + 1)});
  }
  return out;
}

inline void save_captions(const std::vector<CaptionRecord>& records, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  for (const auto& r : records) out << r.video_id << '\t' << r.text << '\n';
  if (!out) throw IoError("write failed for " + path);
}

/// On-disk corpus: DIR/features/<id>.feat plus DIR/captions.tsv.
struct Corpus {
  std::vector<Video> videos;  // sorted by id
  std::vector<CaptionRecord> captions;

  const Video* find(const std::string& id) const {
    auto it = std::lower_bound(videos.begin(), videos.end(), id,
                               [](const Video& v, const std::string& k) { return v.id < k; });
    return it != videos.end() && it->id == id ? &*it : nullptr;
  }
  std::vector<std::string> references(const std::string& id) const {
    std::vector<std::string> refs;
    for (const auto& c : captions)
      if (c.video_id == id) refs.push_back(c.text);
    return refs;
  }
};

inline std::string features_dir(const std::string& dir) { return dir + "/features"; }
inline std::string captions_path(const std::string& dir) { return dir + "/captions.tsv"; }

inline void save_corpus(const Corpus& corpus, const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(features_dir(dir), ec);
  if (ec) throw IoError("cannot create " + features_dir(dir) + ": " + ec.message());
  for (const auto& v : corpus.videos) save_features(v, features_dir(dir) + "/" + v.id + ".feat");
  save_captions(corpus.captions, captions_path(dir));
}

inline Corpus load_corpus(const std::string& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(features_dir(dir))) throw IoError("no features directory in " + dir);
  std::vector<std::string> files;
  for (const auto& e : fs::directory_iterator(features_dir(dir)))
    if (e.is_regular_file() && e.path().extension() == ".feat") files.push_back(e.path().string());
  std::sort(files.begin(), files.end());
  Corpus c;
  for (const auto& f : files) c.videos.push_back(load_features(f));
  std::sort(c.videos.begin(), c.videos.end(),
            [](const Video& a, const Video& b) { return a.id < b.id; });
  for (std::size_t i = 0; i < c.videos.size(); ++i) {
    if (i && c.videos[i].id == c.videos[i - 1].id)
      throw ConfigError("duplicate video id " + c.videos[i].id + " in " + dir);
    if (c.videos[i].dim_appearance != c.videos[0].dim_appearance ||
        c.videos[i].dim_motion != c.videos[0].dim_motion) {
      throw ConfigError("video " + c.videos[i].id + " has feature dims inconsistent with " +
                        c.videos[0].id);
    }
  }
  c.captions = load_captions(captions_path(dir));
  return c;
}

}  // namespace vcrn::corpus
