#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

namespace edac::runner {

/// Process exit codes; scripts depend on these values.
enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitConfig = 2,
  kExitNumeric = 3,
  kExitCheckpoint = 4,
  kExitGradcheck = 5,
};

struct CommonOptions {
  std::filesystem::path config;
  std::optional<std::filesystem::path> out;
  std::optional<std::uint64_t> seed;
};

struct TrainOptionsCli {
  // Continue from this checkpoint; history.csv and best.ckpt next to it are picked up.
  std::optional<std::filesystem::path> resume;
  std::optional<std::size_t> stop_after;
};

enum class SplitName { kTrain, kTest };

int cmd_train(const CommonOptions& common, const TrainOptionsCli& options, std::ostream& out, std::ostream& err);
int cmd_eval(const CommonOptions& common, const std::filesystem::path& checkpoint, std::ostream& out,
             std::ostream& err);
int cmd_heatmap(const CommonOptions& common, const std::filesystem::path& checkpoint, SplitName split,
                const std::optional<std::string>& attack_name, std::ostream& out, std::ostream& err);
int cmd_sweep(const CommonOptions& common, const std::filesystem::path& checkpoint,
              const std::optional<std::string>& etas, std::ostream& out, std::ostream& err);
int cmd_gradcheck(const CommonOptions& common, std::ostream& out, std::ostream& err);

/// Full command line entry point (argv[0] is the program name).
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace edac::runner
