#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "edac/model.hpp"
#include "edac/tensor.hpp"

namespace edac {

enum class Norm { kLinf, kL2 };
enum class AttackKind { kPgd, kFgsm };

const char* norm_name(Norm n) noexcept;
Norm parse_norm(const std::string& name);
const char* attack_kind_name(AttackKind k) noexcept;
AttackKind parse_attack_kind(const std::string& name);

struct DomainBox {
  double lo = 0.0;
  double hi = 1.0;
  friend bool operator==(const DomainBox&, const DomainBox&) = default;
};

/// Threat model plus the attack that approximates the inner maximisation.
struct AttackConfig {
  AttackKind kind = AttackKind::kPgd;
  Norm norm = Norm::kLinf;
  double epsilon = 0.0;
  double step_size = 0.0;
  std::size_t steps = 0;
  bool random_start = false;
  std::optional<DomainBox> domain_clamp;
  // Seeds the random start; rows of a batch draw sequentially from one stream.
  std::uint64_t seed = 0;

  void validate() const;
  friend bool operator==(const AttackConfig&, const AttackConfig&) = default;
};

struct AdversarialBatch {
  Tensor originals;  // [B, n]
  Tensor perturbed;  // [B, n]
  std::vector<Label> labels;
  AttackConfig config;
};

/// Distance between two rows under `norm`.
double perturbation_norm(std::span<const double> a, std::span<const double> b, Norm norm);

/// Projects every row of x_prime onto the epsilon-ball around the matching
/// row of center, then applies the domain clamp. Accepts [n] or [B, n].
Tensor project_ball(const Tensor& x_prime, const Tensor& center, const AttackConfig& config);

/// x + eps * sgn(grad_x CE), projected and clamped. sgn(0) = 0. Linf only.
Tensor fgsm(const ModelState& model, const Tensor& x, std::span<const Label> labels,
            const AttackConfig& config);

/// Projected gradient ascent on cross-entropy starting at x (or a seeded
/// uniform in-ball point when random_start). Linf steps are alpha * sgn(g);
/// L2 steps are alpha * g / ||g||_2 per row. Returns x_S.
Tensor pgd(const ModelState& model, const Tensor& x, std::span<const Label> labels,
           const AttackConfig& config);

/// Dispatches on config.kind.
Tensor attack(const ModelState& model, const Tensor& x, std::span<const Label> labels,
              const AttackConfig& config);

AdversarialBatch generate_batch(const ModelState& model, const Batch& batch, const AttackConfig& config);

}  // namespace edac
