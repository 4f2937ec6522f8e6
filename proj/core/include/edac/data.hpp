#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "edac/attack.hpp"
#include "edac/model.hpp"
#include "edac/tensor.hpp"

namespace edac {

struct Dataset {
  Tensor inputs;  // [N, n]
  std::vector<Label> labels;
  std::size_t num_classes = 0;
  std::optional<DomainBox> domain_box;
  std::string name;

  std::size_t size() const noexcept { return labels.size(); }
  std::size_t input_dim() const { return inputs.cols(); }

  /// Throws ConfigError describing the first violated invariant.
  void validate() const;

  Dataset subset(std::span<const std::size_t> indices) const;
  Batch batch(std::span<const std::size_t> indices) const;
  Batch all() const { return Batch{inputs, labels}; }
  std::vector<std::size_t> class_counts() const;
};

struct GaussianMixtureSpec {
  std::size_t num_classes = 4;
  std::size_t input_dim = 16;
  std::size_t per_class = 750;
  double class_separation = 2.0;
  double noise_std = 1.0;
  std::uint64_t seed = 0;
};

/// Class means are `separation / sqrt(2)` times seeded orthonormal
/// directions (pairwise distance == separation) when K <= n, otherwise
/// seeded random unit directions. Points are mean + noise_std * N(0, I),
/// emitted class by class.
Dataset make_gaussian_mixture(const GaussianMixtureSpec& spec);

/// Class means used by make_gaussian_mixture, [K, n].
Tensor gaussian_mixture_means(const GaussianMixtureSpec& spec);

struct SplitSpec {
  double train_fraction = 2.0 / 3.0;
  std::uint64_t shuffle_seed = 0;
};

struct SplitResult {
  Dataset train;
  Dataset test;
};

/// Per-class split: after a seeded shuffle, the first round(train_fraction *
/// N_k) examples of class k go to train, kept within [1, N_k - 1] when that
/// share lies in [0.5, N_k - 0.5]. Both sides keep the shuffled order.
/// Throws ConfigError if either side would be empty.
SplitResult split(const Dataset& dataset, const SplitSpec& spec);

/// Seeded shuffle, then contiguous chunks of batch_size (last may be short).
std::vector<std::vector<std::size_t>> batches(std::size_t dataset_size, std::size_t batch_size,
                                              std::uint64_t epoch_seed);

/// Min-max rescales every feature column into [lo, hi] and sets the domain box.
Dataset normalize_to_box(const Dataset& dataset, DomainBox box = {});

// IDX files: big-endian u32 magic (0x00000801 labels, 0x00000803 images),
// big-endian u32 dims, then raw unsigned bytes.
struct IdxImages {
  std::size_t count = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::uint8_t> pixels;
};

IdxImages read_idx_images(const std::filesystem::path& path);
std::vector<std::uint8_t> read_idx_labels(const std::filesystem::path& path);
void write_idx_images(const std::filesystem::path& path, const IdxImages& images);
void write_idx_labels(const std::filesystem::path& path, std::span<const std::uint8_t> labels);

/// Reads an image/label IDX pair, scales pixels to [0, 1] and optionally
/// average-pools each image to `downsample_to` x `downsample_to` (the source
/// edge must be a multiple). num_classes is max label + 1 unless given.
Dataset load_idx_images(const std::filesystem::path& images_path, const std::filesystem::path& labels_path,
                        std::optional<std::size_t> downsample_to = std::nullopt,
                        std::optional<std::size_t> num_classes = std::nullopt);

}  // namespace edac
