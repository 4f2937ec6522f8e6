#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <numeric>

#include "edac/data.hpp"
#include "edac/error.hpp"
#include "helpers.hpp"

namespace edac {
namespace {

namespace fs = std::filesystem;

const fs::path kIdxDir = fs::path(EDAC_FIXTURE_DIR) / "idx";

std::vector<std::size_t> sorted(std::vector<std::size_t> v) {
  std::sort(v.begin(), v.end());
  return v;
}

TEST(GaussianMixture, ZeroNoisePutsEveryPointOnItsMean) {
  GaussianMixtureSpec spec{3, 4, 5, 2.0, 0.0, 17};
  const Dataset ds = make_gaussian_mixture(spec);
  const Tensor means = gaussian_mixture_means(spec);
  ASSERT_EQ(ds.size(), 15u);
  for (std::size_t r = 0; r < ds.size(); ++r) {
    for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(ds.inputs.at(r, j), means.at(ds.labels[r], j));
  }
}

TEST(GaussianMixture, MeansArePairwiseSeparationApart) {
  GaussianMixtureSpec spec{4, 16, 1, 3.0, 1.0, 7};
  const Tensor means = gaussian_mixture_means(spec);
  for (std::size_t a = 0; a < 4; ++a) {
    for (std::size_t b = a + 1; b < 4; ++b) {
      double sq = 0.0;
      for (std::size_t j = 0; j < 16; ++j) sq += std::pow(means.at(a, j) - means.at(b, j), 2);
      EXPECT_NEAR(std::sqrt(sq), 3.0, 1e-12);
    }
  }
}

TEST(GaussianMixture, SameSeedIsIdentical) {
  GaussianMixtureSpec spec{4, 6, 30, 2.0, 1.0, 5};
  const Dataset a = make_gaussian_mixture(spec);
  const Dataset b = make_gaussian_mixture(spec);
  EXPECT_TRUE(bitwise_equal(a.inputs, b.inputs));
  EXPECT_EQ(a.labels, b.labels);
  spec.seed = 6;
  EXPECT_FALSE(bitwise_equal(a.inputs, make_gaussian_mixture(spec).inputs));
}

TEST(GaussianMixture, WellSeparatedClassesAreLinearlySeparable) {
  GaussianMixtureSpec spec{4, 8, 100, 10.0, 0.5, 9};
  const Dataset ds = make_gaussian_mixture(spec);
  // Probe: nearest class centroid estimated from the data (a linear rule).
  Tensor centroid(Shape{4, 8});
  std::vector<double> count(4, 0.0);
  for (std::size_t r = 0; r < ds.size(); ++r) {
    for (std::size_t j = 0; j < 8; ++j) centroid.at(ds.labels[r], j) += ds.inputs.at(r, j);
    count[ds.labels[r]] += 1.0;
  }
  for (std::size_t k = 0; k < 4; ++k) {
    for (std::size_t j = 0; j < 8; ++j) centroid.at(k, j) /= count[k];
  }
  std::size_t correct = 0;
  for (std::size_t r = 0; r < ds.size(); ++r) {
    std::size_t best = 0;
    double best_d = INFINITY;
    for (std::size_t k = 0; k < 4; ++k) {
      double d = 0.0;
      for (std::size_t j = 0; j < 8; ++j) d += std::pow(ds.inputs.at(r, j) - centroid.at(k, j), 2);
      if (d < best_d) {
        best_d = d;
        best = k;
      }
    }
    correct += best == ds.labels[r];
  }
  EXPECT_GE(static_cast<double>(correct) / static_cast<double>(ds.size()), 0.99);
}

TEST(Split, IsASeededPartition) {
  const Dataset ds = testing::small_mixture(20);
  const SplitResult s = split(ds, SplitSpec{2.0 / 3.0, 4});
  // round(20 * 2/3) = 13 per class.
  EXPECT_EQ(s.train.size(), 39u);
  EXPECT_EQ(s.test.size(), 21u);
  // Every original row appears exactly once across both sides.
  std::vector<int> seen(ds.size(), 0);
  for (const Dataset* side : {&s.train, &s.test}) {
    for (std::size_t r = 0; r < side->size(); ++r) {
      for (std::size_t i = 0; i < ds.size(); ++i) {
        if (std::equal(ds.inputs.row(i).begin(), ds.inputs.row(i).end(), side->inputs.row(r).begin())) {
          seen[i] += 1;
          EXPECT_EQ(ds.labels[i], side->labels[r]);
        }
      }
    }
  }
  EXPECT_TRUE(std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; }));

  const SplitResult again = split(ds, SplitSpec{2.0 / 3.0, 4});
  EXPECT_TRUE(bitwise_equal(again.train.inputs, s.train.inputs));
  EXPECT_EQ(again.test.labels, s.test.labels);
}

TEST(Split, KeepsEveryClassOnBothSides) {
  const Dataset ds = testing::small_mixture(2, 8);
  for (double fraction : {0.25, 0.5, 0.75}) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const SplitResult s = split(ds, SplitSpec{fraction, seed});
      for (std::size_t c : s.train.class_counts()) EXPECT_GE(c, 1u) << fraction << " seed " << seed;
      for (std::size_t c : s.test.class_counts()) EXPECT_GE(c, 1u) << fraction << " seed " << seed;
    }
  }
}

TEST(Split, EmptySideIsAnError) {
  const Dataset ds = testing::small_mixture(3);
  EXPECT_THROW(split(ds, SplitSpec{0.01, 1}), ConfigError);
  EXPECT_THROW(split(ds, SplitSpec{0.99, 1}), ConfigError);
  EXPECT_THROW(split(ds, SplitSpec{1.0, 1}), ConfigError);
}

TEST(Batches, LargeBatchIsOneShuffledBatch) {
  const auto b = batches(10, 64, 3);
  ASSERT_EQ(b.size(), 1u);
  std::vector<std::size_t> all(10);
  std::iota(all.begin(), all.end(), 0);
  EXPECT_EQ(sorted(b[0]), all);
}

TEST(Batches, CoverEveryIndexOnceWithShortTail) {
  const auto b = batches(23, 5, 9);
  ASSERT_EQ(b.size(), 5u);
  EXPECT_EQ(b.back().size(), 3u);
  std::vector<std::size_t> flat;
  for (const auto& chunk : b) flat.insert(flat.end(), chunk.begin(), chunk.end());
  std::vector<std::size_t> all(23);
  std::iota(all.begin(), all.end(), 0);
  EXPECT_EQ(sorted(flat), all);
  EXPECT_EQ(batches(23, 5, 9), b);
  EXPECT_NE(batches(23, 5, 10), b);
  EXPECT_THROW(batches(23, 0, 9), ConfigError);
}

TEST(NormalizeToBox, MapsColumnsOntoTheBox) {
  const Dataset ds = normalize_to_box(testing::small_mixture(10));
  ASSERT_TRUE(ds.domain_box.has_value());
  for (std::size_t j = 0; j < ds.input_dim(); ++j) {
    double lo = 1.0, hi = 0.0;
    for (std::size_t r = 0; r < ds.size(); ++r) {
      lo = std::min(lo, ds.inputs.at(r, j));
      hi = std::max(hi, ds.inputs.at(r, j));
    }
    EXPECT_EQ(lo, 0.0);
    EXPECT_EQ(hi, 1.0);
  }
  EXPECT_NO_THROW(ds.validate());
}

TEST(DatasetValidate, RejectsBadLabels) {
  Dataset ds = testing::small_mixture(2);
  ds.labels[0] = 7;
  EXPECT_THROW(ds.validate(), ConfigError);
}

TEST(Idx, ReadsHandBuiltImageFile) {
  const IdxImages img = read_idx_images(kIdxDir / "four-images.idx3");
  EXPECT_EQ(img.count, 4u);
  EXPECT_EQ(img.rows, 2u);
  EXPECT_EQ(img.cols, 2u);
  const std::vector<std::uint8_t> expected = {0,   255, 0,   255, 255, 255, 255, 255,
                                              0,   0,   0,   0,   51,  102, 153, 204};
  EXPECT_EQ(img.pixels, expected);
  EXPECT_EQ(read_idx_labels(kIdxDir / "four-labels.idx1"), (std::vector<std::uint8_t>{0, 1, 2, 1}));
}

TEST(Idx, LoadScalesPixelsToUnitInterval) {
  const Dataset ds = load_idx_images(kIdxDir / "four-images.idx3", kIdxDir / "four-labels.idx1");
  EXPECT_EQ(ds.size(), 4u);
  EXPECT_EQ(ds.input_dim(), 4u);
  EXPECT_EQ(ds.num_classes, 3u);
  EXPECT_EQ(ds.inputs.at(0, 1), 1.0);
  EXPECT_EQ(ds.inputs.at(3, 0), 51.0 / 255.0);
  EXPECT_EQ(ds.inputs.at(3, 3), 204.0 / 255.0);
  ASSERT_TRUE(ds.domain_box.has_value());
  EXPECT_EQ(*ds.domain_box, (DomainBox{0.0, 1.0}));
  EXPECT_EQ(load_idx_images(kIdxDir / "four-images.idx3", kIdxDir / "four-labels.idx1", std::nullopt, 10).num_classes,
            10u);
}

TEST(Idx, AveragePoolsWhenDownsampling) {
  const Dataset ds = load_idx_images(kIdxDir / "pool-images.idx3", kIdxDir / "pool-labels.idx1", 2);
  ASSERT_EQ(ds.input_dim(), 4u);
  // Image 0 holds 10 * (4r + c); the top-left 2x2 cell averages 0, 10, 40, 50.
  EXPECT_DOUBLE_EQ(ds.inputs.at(0, 0), 25.0 / 255.0);
  EXPECT_DOUBLE_EQ(ds.inputs.at(0, 3), (100.0 + 110 + 140 + 150) / 4.0 / 255.0);
  // A constant image stays constant.
  for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(ds.inputs.at(1, j), 1.0);
  EXPECT_THROW(load_idx_images(kIdxDir / "pool-images.idx3", kIdxDir / "pool-labels.idx1", 3), ConfigError);
}

TEST(Idx, ConstantImageSurvivesDownsampling) {
  const fs::path dir = fs::temp_directory_path() / "edac_idx_constant";
  fs::create_directories(dir);
  IdxImages img{1, 28, 28, std::vector<std::uint8_t>(28 * 28, 77)};
  write_idx_images(dir / "img.idx3", img);
  write_idx_labels(dir / "lab.idx1", std::vector<std::uint8_t>{1});
  const Dataset ds = load_idx_images(dir / "img.idx3", dir / "lab.idx1", 14);
  ASSERT_EQ(ds.input_dim(), 196u);
  for (double v : ds.inputs.data()) EXPECT_EQ(v, 77.0 / 255.0);
  fs::remove_all(dir);
}

std::size_t format_error_offset(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const FormatError& e) {
    return e.offset();
  }
  ADD_FAILURE() << "expected FormatError";
  return 0;
}

TEST(Idx, TruncatedFilesReportTheOffset) {
  EXPECT_EQ(format_error_offset([] { read_idx_images(kIdxDir / "truncated-header.idx3"); }), 8u);
  EXPECT_EQ(format_error_offset([] { read_idx_images(kIdxDir / "truncated-pixels.idx3"); }), 16u);
  EXPECT_EQ(format_error_offset([] { read_idx_labels(kIdxDir / "truncated-labels.idx1"); }), 8u);
}

TEST(Idx, BadMagicAndCountMismatch) {
  EXPECT_EQ(format_error_offset([] { read_idx_images(kIdxDir / "bad-magic.idx3"); }), 0u);
  EXPECT_EQ(format_error_offset([] { read_idx_labels(kIdxDir / "four-images.idx3"); }), 0u);
  EXPECT_EQ(format_error_offset([] {
              load_idx_images(kIdxDir / "four-images.idx3", kIdxDir / "three-labels.idx1");
            }),
            4u);
  EXPECT_THROW(read_idx_images(kIdxDir / "missing.idx3"), FormatError);
}

TEST(Idx, WriteThenReadRoundTrips) {
  const fs::path dir = fs::temp_directory_path() / "edac_idx_roundtrip";
  fs::create_directories(dir);
  const IdxImages original = read_idx_images(kIdxDir / "four-images.idx3");
  write_idx_images(dir / "copy.idx3", original);
  const IdxImages copy = read_idx_images(dir / "copy.idx3");
  EXPECT_EQ(copy.pixels, original.pixels);
  EXPECT_EQ(fs::file_size(dir / "copy.idx3"), fs::file_size(kIdxDir / "four-images.idx3"));
  fs::remove_all(dir);
}

}  // namespace
}  // namespace edac
