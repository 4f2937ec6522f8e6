#pragma once

#include <cstddef>
#include <string>

namespace edac {

enum class Method { kAt, kEdac, kEdacReg };

const char* method_name(Method m) noexcept;
Method parse_method(const std::string& name);

/// One row of per-epoch measurements. Accuracies are fractions in [0, 1].
struct MetricsRecord {
  std::size_t epoch = 0;
  double clean_acc_train = 0.0;
  double clean_acc_test = 0.0;
  double robust_acc_train = 0.0;
  double robust_acc_test = 0.0;
  double ac_train = 0.0;
  double ac_test = 0.0;
  double lr = 0.0;
  Method method = Method::kAt;
  // Progress output only; never written to checkpoints or CSVs.
  double wall_time_s = 0.0;

  friend bool operator==(const MetricsRecord&, const MetricsRecord&) = default;
};

}  // namespace edac
