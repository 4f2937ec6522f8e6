#include "edac/data.hpp"

#include <algorithm>
#include <cmath>

#include "edac/error.hpp"
#include "edac/random.hpp"

namespace edac {

void Dataset::validate() const {
  if (labels.empty()) throw ConfigError("dataset '" + name + "' is empty");
  if (inputs.rank() != 2 || inputs.rows() != labels.size()) {
    throw ConfigError("dataset '" + name + "' inputs " + shape_string(inputs.shape()) + " do not match " +
                      std::to_string(labels.size()) + " labels");
  }
  if (num_classes < 2) throw ConfigError("dataset '" + name + "' needs at least 2 classes");
  for (Label y : labels) {
    if (y >= num_classes) throw ConfigError("dataset '" + name + "' has a label outside [0, K)");
  }
  if (!inputs.all_finite()) throw ConfigError("dataset '" + name + "' has non-finite inputs");
  if (domain_box) {
    for (double v : inputs.data()) {
      if (v < domain_box->lo || v > domain_box->hi) {
        throw ConfigError("dataset '" + name + "' has inputs outside its domain box");
      }
    }
  }
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out;
  out.inputs = inputs.gather_rows(indices);
  out.labels.reserve(indices.size());
  for (std::size_t i : indices) out.labels.push_back(labels.at(i));
  out.num_classes = num_classes;
  out.domain_box = domain_box;
  out.name = name;
  return out;
}

Batch Dataset::batch(std::span<const std::size_t> indices) const {
  Batch b{inputs.gather_rows(indices), {}};
  b.labels.reserve(indices.size());
  for (std::size_t i : indices) b.labels.push_back(labels.at(i));
  return b;
}

std::vector<std::size_t> Dataset::class_counts() const {
  std::vector<std::size_t> counts(num_classes, 0);
  for (Label y : labels) counts.at(y) += 1;
  return counts;
}

Tensor gaussian_mixture_means(const GaussianMixtureSpec& spec) {
  const std::size_t k_classes = spec.num_classes;
  const std::size_t n = spec.input_dim;
  Engine engine(derive_seed({spec.seed, 0x6d65616e73ULL}));
  Tensor means(Shape{k_classes, n});
  for (std::size_t k = 0; k < k_classes; ++k) {
    auto row = means.row(k);
    for (double& v : row) v = standard_normal(engine);
    if (k_classes <= n) {
      // Gram-Schmidt against earlier directions (twice for stability).
      for (int pass = 0; pass < 2; ++pass) {
        for (std::size_t j = 0; j < k; ++j) {
          auto prev = means.row(j);
          double dot = 0.0;
          for (std::size_t i = 0; i < n; ++i) dot += row[i] * prev[i];
          for (std::size_t i = 0; i < n; ++i) row[i] -= dot * prev[i];
        }
      }
    }
    double norm = 0.0;
    for (double v : row) norm += v * v;
    norm = std::sqrt(norm);
    for (double& v : row) v /= norm;
  }
  const double radius = spec.class_separation / std::sqrt(2.0);
  for (double& v : means.data()) v *= radius;
  return means;
}

Dataset make_gaussian_mixture(const GaussianMixtureSpec& spec) {
  if (spec.num_classes < 2 || spec.input_dim == 0 || spec.per_class == 0) {
    throw ConfigError("gaussian mixture needs >= 2 classes, input_dim >= 1 and per_class >= 1");
  }
  if (!(spec.noise_std >= 0.0) || !std::isfinite(spec.class_separation)) {
    throw ConfigError("gaussian mixture needs finite separation and noise_std >= 0");
  }
  const Tensor means = gaussian_mixture_means(spec);
  const std::size_t n = spec.input_dim;
  Dataset ds;
  ds.num_classes = spec.num_classes;
  ds.name = "gaussian_mixture";
  ds.inputs = Tensor(Shape{spec.num_classes * spec.per_class, n});
  ds.labels.reserve(spec.num_classes * spec.per_class);
  Engine engine(derive_seed({spec.seed, 0x706f696e7473ULL}));
  std::size_t r = 0;
  for (std::size_t k = 0; k < spec.num_classes; ++k) {
    auto mu = means.row(k);
    for (std::size_t i = 0; i < spec.per_class; ++i, ++r) {
      auto row = ds.inputs.row(r);
      for (std::size_t j = 0; j < n; ++j) {
        const double z = standard_normal(engine);
        row[j] = mu[j] + spec.noise_std * z;
      }
      ds.labels.push_back(static_cast<Label>(k));
    }
  }
  return ds;
}

SplitResult split(const Dataset& dataset, const SplitSpec& spec) {
  if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0)) {
    throw ConfigError("split train_fraction must lie in (0, 1)");
  }
  const std::size_t n = dataset.size();
  const std::size_t k_classes = std::max<std::size_t>(dataset.num_classes, 1);
  std::vector<std::size_t> class_size(k_classes, 0);
  for (Label y : dataset.labels) class_size.at(y) += 1;
  std::vector<std::size_t> class_train(k_classes, 0);
  for (std::size_t k = 0; k < k_classes; ++k) {
    const std::size_t m = class_size[k];
    const double share = spec.train_fraction * static_cast<double>(m);
    auto t = static_cast<std::size_t>(std::llround(share));
    // A tie at 0.5 or m - 0.5 rounds away from zero and would empty one side.
    if (m >= 2 && share >= 0.5 && share <= static_cast<double>(m) - 0.5) t = std::clamp<std::size_t>(t, 1, m - 1);
    class_train[k] = t;
  }

  std::vector<std::size_t> train_idx;
  std::vector<std::size_t> test_idx;
  std::vector<std::size_t> taken(k_classes, 0);
  for (std::size_t i : shuffled_indices(n, spec.shuffle_seed)) {
    const Label y = dataset.labels[i];
    (taken[y]++ < class_train[y] ? train_idx : test_idx).push_back(i);
  }
  if (train_idx.empty() || test_idx.empty()) {
    throw ConfigError("split of " + std::to_string(n) + " examples at fraction " +
                      std::to_string(spec.train_fraction) + " leaves one side empty");
  }
  SplitResult out{dataset.subset(train_idx), dataset.subset(test_idx)};
  out.train.name = dataset.name + ":train";
  out.test.name = dataset.name + ":test";
  return out;
}

std::vector<std::vector<std::size_t>> batches(std::size_t dataset_size, std::size_t batch_size,
                                              std::uint64_t epoch_seed) {
  if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
  const auto order = shuffled_indices(dataset_size, epoch_seed);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t start = 0; start < dataset_size; start += batch_size) {
    const std::size_t end = std::min(dataset_size, start + batch_size);
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                     order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return out;
}

Dataset normalize_to_box(const Dataset& dataset, DomainBox box) {
  Dataset out = dataset;
  const std::size_t n = dataset.input_dim();
  for (std::size_t j = 0; j < n; ++j) {
    double lo = dataset.inputs.at(0, j);
    double hi = lo;
    for (std::size_t r = 0; r < dataset.size(); ++r) {
      lo = std::min(lo, dataset.inputs.at(r, j));
      hi = std::max(hi, dataset.inputs.at(r, j));
    }
    const double range = hi - lo;
    for (std::size_t r = 0; r < dataset.size(); ++r) {
      const double t = range > 0.0 ? (dataset.inputs.at(r, j) - lo) / range : 0.0;
      out.inputs.at(r, j) = std::clamp(box.lo + t * (box.hi - box.lo), box.lo, box.hi);
    }
  }
  out.domain_box = box;
  return out;
}

}  // namespace edac
