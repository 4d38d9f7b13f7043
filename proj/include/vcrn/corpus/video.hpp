#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vcrn/numerics/matrix.hpp"

namespace vcrn::corpus {

/// Frame features of one clip: L rows, appearance columns first, then motion.
struct Video {
  std::string id;
  numerics::Matrix<float> features;
  std::size_t dim_appearance = 0;
  std::size_t dim_motion = 0;

  std::size_t frames() const { return features.rows(); }
  std::size_t dim() const { return dim_appearance + dim_motion; }

  void validate() const {
    if (features.rows() < 1) throw ConfigError("video " + id + " has no frames");
    if (features.cols() != dim()) {
      throw DimensionError("video " + id + ": feature width " +
                           std::to_string(features.cols()) + " != d_a + d_m = " +
                           std::to_string(dim()));
    }
    if (!features.all_finite()) throw NumericError("video " + id + " has non-finite features");
  }
};

/// A raw reference sentence for a video.
struct CaptionRecord {
  std::string video_id;
  std::string text;
};

/// Token ids of a caption: bos first, eos last, no pad.
struct Caption {
  std::string video_id;
  std::vector<std::int32_t> token_ids;
};

}  // namespace vcrn::corpus
