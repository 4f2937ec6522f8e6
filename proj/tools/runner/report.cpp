#include "report.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "edac/error.hpp"

namespace edac::runner {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw Error("cannot format number");
  return std::string(buf, ptr);
}

std::string history_row(const MetricsRecord& r) {
  std::ostringstream os;
  os << r.epoch << ',' << method_name(r.method) << ',' << format_double(r.lr) << ','
     << format_double(r.clean_acc_train) << ',' << format_double(r.clean_acc_test) << ','
     << format_double(r.robust_acc_train) << ',' << format_double(r.robust_acc_test) << ','
     << format_double(r.ac_train) << ',' << format_double(r.ac_test);
  return os.str();
}

std::string sweep_csv(std::span<const SweepRow> rows) {
  std::ostringstream os;
  os << kSweepHeader << '\n';
  for (const SweepRow& r : rows) {
    os << format_double(r.eta) << ',' << format_double(r.ac_train) << ',' << format_double(r.robust_acc_test) << ','
       << (r.ok ? 1 : 0) << '\n';
  }
  return os.str();
}

std::vector<std::string> class_names(std::size_t num_classes) {
  std::vector<std::string> names;
  for (std::size_t k = 0; k < num_classes; ++k) names.push_back("class_" + std::to_string(k));
  return names;
}

namespace {

std::string header_line(std::size_t k) {
  std::string line;
  for (const auto& name : class_names(k)) line += (line.empty() ? "" : ",") + name;
  return line + '\n';
}

}  // namespace

std::string heatmap_csv(const Heatmap& heatmap) {
  std::string out = header_line(heatmap.num_classes);
  for (std::size_t j = 0; j < heatmap.num_classes; ++j) {
    for (std::size_t k = 0; k < heatmap.num_classes; ++k) {
      out += (k ? "," : "") + format_double(heatmap.at(j, k));
    }
    out += '\n';
  }
  return out;
}

std::string label_variance_csv(const Heatmap& heatmap) {
  std::string out = header_line(heatmap.num_classes);
  const auto llv = label_level_variance(heatmap);
  for (std::size_t j = 0; j < llv.size(); ++j) {
    out += (j ? "," : "") + (heatmap.row_empty(j) ? std::string("nan") : format_double(llv[j]));
  }
  return out + '\n';
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write '" + tmp.string() + "'");
    out << content;
    if (!out) throw Error("failed writing '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace edac::runner
