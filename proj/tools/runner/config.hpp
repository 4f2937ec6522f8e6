#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "edac/attack.hpp"
#include "edac/data.hpp"
#include "edac/gradcheck.hpp"
#include "edac/model.hpp"
#include "edac/train.hpp"

namespace edac::runner {

enum class DatasetKind { kGaussianMixture, kIdx };

struct DatasetSection {
  DatasetKind kind = DatasetKind::kGaussianMixture;
  GaussianMixtureSpec mixture;
  std::filesystem::path idx_images;
  std::filesystem::path idx_labels;
  std::optional<std::size_t> downsample;
  std::optional<std::size_t> classes;  // idx only; defaults to max label + 1
  SplitSpec split;
};

struct NamedAttack {
  std::string name;
  AttackConfig attack;
  bool clamp_to_domain = true;  // take the dataset's domain box when no clamp is given
};

struct ExperimentConfig {
  std::filesystem::path source;
  DatasetSection dataset;
  std::vector<std::size_t> hidden;
  Activation activation = Activation::kRelu;
  std::optional<std::uint64_t> init_seed;  // defaults to train.seed
  TrainConfig train;
  bool train_attack_auto_clamp = true;
  bool eval_attack_auto_clamp = true;
  std::vector<NamedAttack> eval_attacks;
  std::filesystem::path output_dir = "out";
  GradcheckOptions gradcheck;

  /// Model spec for the given input dimension and class count.
  ModelSpec model_spec(std::size_t input_dim, std::size_t num_classes) const;
};

/// Parses a YAML experiment file. Unknown keys, wrong types and invalid
/// values raise ConfigError naming file:line:column and the key path.
ExperimentConfig load_config(const std::filesystem::path& path);
ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& source = "<string>");

/// "0.1,0.2,1" -> {0.1, 0.2, 1}. Throws ConfigError on malformed entries.
std::vector<double> parse_number_list(const std::string& text);

/// Accepts plain numbers and "p/q" fractions such as 8/255.
double parse_number(const std::string& text);

struct Splits {
  Dataset train;
  Dataset test;
};

/// Builds the dataset and split described by the config, and fills in
/// attack domain clamps from the dataset's domain box where requested.
Splits load_data(ExperimentConfig& config);

}  // namespace edac::runner
