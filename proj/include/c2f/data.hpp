#pragma once

#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "c2f/tensor.hpp"

namespace c2f::data {

/// Generator settings for the two-stream toy videos.
///
/// Every class carries a fixed random patch signature per stream, visible
/// for `signature_width` consecutive frames. Stream 2 shows its signature
/// `lag` frames after stream 1. Everything outside the window is Gaussian
/// noise. Confusable pairs share one stream's signature (pattern and
/// position) and differ only in the other stream: even-indexed pairs share
/// the stream-1 signature, odd-indexed pairs share the stream-2 signature,
/// so single-stream, single-frame classification is ambiguous within a
/// pair by construction.
struct SyntheticConfig {
  int num_classes = 8;
  int videos_per_class = 40;
  int frames = 60;
  int channels = 3;
  int height = 32;
  int width = 32;
  int lag = 5;
  int signature_width = 5;
  int signature_size = 16;
  double signature_amplitude = 2.0;
  double noise_sigma = 0.3;
  std::vector<std::pair<int, int>> confusable_pairs = {{0, 1}, {2, 3}};
  double train_fraction = 0.8;
  std::uint64_t seed = 7;

  std::int64_t frame_values() const { return static_cast<std::int64_t>(channels) * height * width; }
  void validate() const;
};

struct Video {
  std::vector<float> stream1;  // frames * channels * height * width
  std::vector<float> stream2;
  int label = 0;
  int onset1 = 0;  // first frame of the stream-1 signature window
  int onset2 = 0;  // onset1 + lag
};

class Dataset {
 public:
  SyntheticConfig config;
  std::vector<Video> videos;
  std::vector<int> train_indices;
  std::vector<int> test_indices;

  /// Frame `t` of the given stream (1 or 2) as a [C,H,W] tensor.
  Tensor frame(int video, int stream, int t) const;
  int num_frames() const { return config.frames; }
  int num_classes() const { return config.num_classes; }
};

/// Deterministic generation with a stratified train/test split.
Dataset generate_dataset(const SyntheticConfig& cfg);

/// Persists manifest.json plus one binary tensor file per video.
/// File layout (little-endian): magic "C2FVID1\0", u32 version, u32 dtype
/// (1 = float32), u32 stream count, then per stream u32 ndim, u32 dims[],
/// raw values.
void save_dataset(const Dataset& ds, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir);

}  // namespace c2f::data
