#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "rsam/batch.hpp"
#include "rsam/linalg.hpp"

namespace rsam {

struct Dataset {
  Matrix x;            // samples x features
  std::vector<int> y;
  std::size_t num_classes = 0;
  std::string source;

  std::size_t size() const noexcept { return y.size(); }
};

inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

struct IdxImages {
  Matrix pixels;  // count x (rows*cols), values in [0, 1]
  std::size_t image_rows = 0;
  std::size_t image_cols = 0;
};

/// IDX3 unsigned-byte images, big-endian header. Throws FormatError on a bad
/// magic number and LengthError when the payload size does not match the
/// header dimensions.
IdxImages parse_idx_images(std::span<const std::uint8_t> bytes);
std::vector<int> parse_idx_labels(std::span<const std::uint8_t> bytes);

/// Inverse of the parsers (pixels are rounded back to bytes).
std::vector<std::uint8_t> serialize_idx_images(const IdxImages& images);
std::vector<std::uint8_t> serialize_idx_labels(const std::vector<int>& labels);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);

/// Images + labels from a pair of pre-decompressed IDX files.
Dataset load_mnist(const std::filesystem::path& images, const std::filesystem::path& labels);

/// `per_class` samples per class; class c is centred at separation·e_c with
/// unit Gaussian noise. Throws ShapeError if feature_dim < classes.
Dataset synthetic_clusters(std::size_t classes, std::size_t per_class,
                           std::size_t feature_dim, double separation, std::uint64_t seed);

/// Rows `indices` of a dataset, in that order.
Dataset subset(const Dataset& d, std::span<const std::size_t> indices);

struct BatchPlan {
  std::size_t batch_size = 16;
  std::uint64_t seed = 0;
  bool multiview = false;
  double jitter_sigma = 0.01;  // multiview view noise
};

/// Seeded Fisher–Yates permutation keyed by (seed, epoch).
std::vector<std::size_t> epoch_permutation(std::size_t n, std::uint64_t seed,
                                           std::uint64_t epoch);

/// Batches of one epoch; the last partial batch is kept. In multiview mode
/// every sample becomes two jittered views at rows 2k and 2k+1, paired with
/// each other.
std::vector<Batch> batches(const Dataset& d, const BatchPlan& plan, std::uint64_t epoch);

/// All rows as a single batch (no shuffling).
Batch as_batch(const Dataset& d);

}  // namespace rsam
