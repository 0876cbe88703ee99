#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qmit/random.hpp"

namespace qmit {

inline constexpr int kImageSide = 28;
inline constexpr int kFeatureSide = 8;
inline constexpr int kFeatureCount = kFeatureSide * kFeatureSide;

struct Sample {
  std::vector<double> features;  // kFeatureCount values in [0, 1]
  int label = 0;
};

struct Dataset {
  std::vector<Sample> samples;
  int classes = 0;

  std::size_t size() const noexcept { return samples.size(); }
  bool empty() const noexcept { return samples.empty(); }
  /// Sample counts per label.
  std::vector<std::size_t> class_counts() const;
};

/// Images as loaded from IDX: rows x cols bytes each, row-major.
struct RawDataset {
  int rows = 0;
  int cols = 0;
  std::vector<std::vector<std::uint8_t>> images;
  std::vector<int> labels;
};

/// Parses IDX image and label files from memory. Gzip is not handled here.
RawDataset parse_idx(std::span<const std::uint8_t> images, std::span<const std::uint8_t> labels);

/// Reads IDX files from disk; gzipped files are decompressed transparently.
RawDataset load_idx(const std::string& images_path, const std::string& labels_path);

/// Bilinear resize to 8x8 (corner-aligned), scaled to [0, 1], flattened row-major.
std::vector<double> preprocess(std::span<const std::uint8_t> image, int rows = kImageSide, int cols = kImageSide);

struct BenchmarkSpec {
  std::string name;
  std::vector<int> source_classes;  // position in this list is the remapped label

  int classes() const { return static_cast<int>(source_classes.size()); }
};

/// MNIST-4, MNIST-2, Fashion-4, Fashion-2.
BenchmarkSpec benchmark_spec(std::string_view name);

struct Split {
  Dataset train;
  Dataset test;
};

/// Filter, remap and class-balance-subsample separate train and test pools.
Split make_benchmark(const RawDataset& train_raw, const RawDataset& test_raw, const BenchmarkSpec& spec,
                     std::size_t train_cap, std::size_t test_cap, std::uint64_t seed);

/// Same from a single pool: the per-class draws for train and test are disjoint.
Split make_benchmark(const RawDataset& raw, const BenchmarkSpec& spec, std::size_t train_cap, std::size_t test_cap,
                     std::uint64_t seed);

/// Class k is a clipped Gaussian around 0.5 + 0.1 * separation * a_k, a_k a random sign pattern.
Dataset synthetic_blobs(int classes, std::size_t per_class, double separation, std::uint64_t seed);

}  // namespace qmit
