#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "edac/metrics.hpp"
#include "edac/model.hpp"

namespace edac {

/// Seeds are derived from (run seed, epoch, batch), so the run seed and the
/// next epoch to execute fully determine every later random draw.
struct RngRecord {
  std::uint64_t seed = 0;
  std::uint64_t next_epoch = 1;
  friend bool operator==(const RngRecord&, const RngRecord&) = default;
};

struct Checkpoint {
  ModelState model;
  std::size_t epoch = 0;
  ParamVector optimizer_momentum;
  RngRecord rng;
  MetricsRecord metrics;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Little-endian binary container; layout documented in docs/checkpoint-format.md.
std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace edac
