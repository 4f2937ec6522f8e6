#include "commands.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>

#include "config.hpp"
#include "edac/checkpoint.hpp"
#include "edac/diagnostics.hpp"
#include "edac/error.hpp"
#include "edac/gradcheck.hpp"
#include "edac/sweep.hpp"
#include "edac/train.hpp"
#include "report.hpp"

namespace edac::runner {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

template <typename Fn>
int guarded(std::ostream& err, Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const FormatError& e) {
    err << "data error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const CheckpointError& e) {
    err << "checkpoint error: " << e.what() << '\n';
    return kExitCheckpoint;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

struct Prepared {
  ExperimentConfig config;
  Splits data;
  fs::path out_dir;
  ModelSpec spec;
};

Prepared prepare(const CommonOptions& common) {
  Prepared p;
  p.config = load_config(common.config);
  if (common.seed) p.config.train.seed = *common.seed;
  p.out_dir = common.out.value_or(p.config.output_dir);
  p.data = load_data(p.config);
  p.spec = p.config.model_spec(p.data.train.input_dim(), p.data.train.num_classes);
  p.spec.validate();
  return p;
}

std::string describe(const ModelSpec& spec) {
  std::string s = std::to_string(spec.input_dim);
  for (std::size_t w : spec.layer_widths) s += "-" + std::to_string(w);
  return s + " " + activation_name(spec.activation);
}

void check_compatible(const ModelSpec& stored, const ModelSpec& expected) {
  if (stored.input_dim != expected.input_dim || stored.layer_widths != expected.layer_widths ||
      stored.activation != expected.activation) {
    throw CheckpointError("checkpoint model (" + describe(stored) + ") does not match the config (" +
                          describe(expected) + ")");
  }
}

Checkpoint load_for(const Prepared& p, const fs::path& path) {
  Checkpoint ckpt = load_checkpoint(path);
  check_compatible(ckpt.model.spec, p.spec);
  return ckpt;
}

double parse_field(const std::string& s) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw Error("bad number '" + s + "' in history.csv");
  return v;
}

MetricsRecord parse_history_row(const std::string& line) {
  std::vector<std::string> f;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) f.push_back(cell);
  if (f.size() != 9) throw Error("malformed history.csv row '" + line + "'");
  MetricsRecord r;
  r.epoch = static_cast<std::size_t>(parse_field(f[0]));
  r.method = parse_method(f[1]);
  r.lr = parse_field(f[2]);
  r.clean_acc_train = parse_field(f[3]);
  r.clean_acc_test = parse_field(f[4]);
  r.robust_acc_train = parse_field(f[5]);
  r.robust_acc_test = parse_field(f[6]);
  r.ac_train = parse_field(f[7]);
  r.ac_test = parse_field(f[8]);
  return r;
}

// Rows of an earlier run's history.csv up to and including `epoch`.
std::vector<MetricsRecord> read_history_prefix(const fs::path& path, std::size_t epoch) {
  std::vector<MetricsRecord> rows;
  std::ifstream in(path);
  if (!in) return rows;
  std::string line;
  if (!std::getline(in, line) || line != kHistoryHeader) throw Error("'" + path.string() + "' has an unexpected header");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    MetricsRecord r = parse_history_row(line);
    if (r.epoch <= epoch) rows.push_back(r);
  }
  return rows;
}

std::string history_csv(const std::vector<MetricsRecord>& rows) {
  std::string out = std::string(kHistoryHeader) + '\n';
  for (const auto& r : rows) out += history_row(r) + '\n';
  return out;
}

json attack_json(const AttackConfig& a) {
  json j = {{"kind", attack_kind_name(a.kind)},
            {"norm", norm_name(a.norm)},
            {"epsilon", a.epsilon},
            {"step_size", a.step_size},
            {"steps", a.steps},
            {"random_start", a.random_start}};
  if (a.domain_clamp) j["clamp"] = {a.domain_clamp->lo, a.domain_clamp->hi};
  return j;
}

json model_report(const Checkpoint& ckpt, const Prepared& p) {
  json attacks = json::object();
  for (const auto& named : p.config.eval_attacks) {
    const EvalResult r = evaluate(ckpt.model, p.data.test, named.attack);
    attacks[named.name] = {{"clean_acc", r.clean_accuracy}, {"robust_acc", r.robust_accuracy}, {"ac", r.certainty.mean}};
  }
  const MetricsRecord& m = ckpt.metrics;
  return {{"epoch", ckpt.epoch},
          {"clean_acc_test", m.clean_acc_test},
          {"robust_acc_test", m.robust_acc_test},
          {"robust_acc_train", m.robust_acc_train},
          {"ac_train", m.ac_train},
          {"ac_test", m.ac_test},
          {"eval", attacks}};
}

AttackConfig selection_attack(const TrainConfig& train) {
  AttackConfig a = train.eval_attack;
  a.seed = eval_attack_seed(train.seed);
  return a;
}

}  // namespace

int cmd_train(const CommonOptions& common, const TrainOptionsCli& options, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto t0 = std::chrono::steady_clock::now();
    Prepared p = prepare(common);
    const TrainConfig& tc = p.config.train;
    fs::create_directories(p.out_dir);

    std::vector<MetricsRecord> rows;
    std::optional<ResumeFrom> resume;
    if (options.resume) {
      ResumeFrom from{load_for(p, *options.resume), std::nullopt};
      const fs::path dir = options.resume->parent_path();
      if (fs::exists(dir / "best.ckpt")) {
        Checkpoint best = load_for(p, dir / "best.ckpt");
        if (best.epoch <= from.last.epoch) from.best = std::move(best);
      }
      rows = read_history_prefix(dir / "history.csv", from.last.epoch);
      resume = std::move(from);
    }

    TrainOptions loop;
    loop.stop_after_epoch = options.stop_after;
    loop.on_epoch = [&](const MetricsRecord& r) {
      rows.push_back(r);
      char line[160];
      std::snprintf(line, sizeof(line), "epoch %3zu  lr %.4g  clean %.4f  robust %.4f  ac %.4f  (%.1fs)\n", r.epoch,
                    r.lr, r.clean_acc_test, r.robust_acc_test, r.ac_train, r.wall_time_s);
      out << line << std::flush;
    };

    TrainResult result;
    try {
      result = resume ? resume_run(tc, p.data.train, p.data.test, *resume, loop)
                      : train_run(tc, p.spec, p.data.train, p.data.test, loop);
    } catch (const TrainingAborted& e) {
      write_file(p.out_dir / "history.csv", history_csv(rows));
      save_checkpoint(p.out_dir / "last.ckpt", e.last_completed());
      err << "numeric failure in epoch " << e.failed_epoch() << ": " << e.what() << '\n';
      return static_cast<int>(kExitNumeric);
    }

    write_file(p.out_dir / "history.csv", history_csv(rows));
    save_checkpoint(p.out_dir / "best.ckpt", result.best);
    save_checkpoint(p.out_dir / "last.ckpt", result.final);

    json summary;
    summary["method"] = method_name(tc.method);
    summary["seed"] = tc.seed;
    summary["epochs_completed"] = result.final.epoch;
    summary["selection_attack"] = attack_json(tc.eval_attack);
    summary["best"] = model_report(result.best, p);
    summary["last"] = model_report(result.final, p);
    if (!rows.empty()) {
      const OverfittingGap gap = overfitting_gap(rows);
      summary["overfitting_gap"] = {
          {"best_robust", gap.best_robust}, {"last_robust", gap.last_robust}, {"gap", gap.gap}};
    }
    summary["certainty_gap_train"] =
        certainty_gap(result.best, result.final, p.data.train, selection_attack(tc));
    json curves = {{"epoch", json::array()}, {"ac_train", json::array()}, {"ac_test", json::array()},
                   {"robust_acc_test", json::array()}};
    for (const auto& r : rows) {
      curves["epoch"].push_back(r.epoch);
      curves["ac_train"].push_back(r.ac_train);
      curves["ac_test"].push_back(r.ac_test);
      curves["robust_acc_test"].push_back(r.robust_acc_test);
    }
    summary["curves"] = curves;
    write_file(p.out_dir / "summary.json", summary.dump(2) + '\n');

    out << "best epoch " << result.best.epoch << " robust " << result.best.metrics.robust_acc_test << ", last epoch "
        << result.final.epoch << " robust " << result.final.metrics.robust_acc_test << ", "
        << std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() << "s\n";
    return static_cast<int>(kExitOk);
  });
}

int cmd_eval(const CommonOptions& common, const fs::path& checkpoint, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    Prepared p = prepare(common);
    const Checkpoint ckpt = load_for(p, checkpoint);
    fs::create_directories(p.out_dir);
    std::string csv = "attack,split,clean_acc,robust_acc,ac\n";
    char line[160];
    std::snprintf(line, sizeof(line), "%-16s %-6s %9s %10s %8s\n", "attack", "split", "clean", "robust", "ac");
    out << line;
    for (const auto& named : p.config.eval_attacks) {
      for (const auto& [split_name, data] : {std::pair<const char*, const Dataset*>{"train", &p.data.train},
                                             std::pair<const char*, const Dataset*>{"test", &p.data.test}}) {
        const EvalResult r = evaluate(ckpt.model, *data, named.attack);
        csv += named.name + "," + split_name + "," + format_double(r.clean_accuracy) + "," +
               format_double(r.robust_accuracy) + "," + format_double(r.certainty.mean) + "\n";
        std::snprintf(line, sizeof(line), "%-16s %-6s %9.4f %10.4f %8.4f\n", named.name.c_str(), split_name,
                      r.clean_accuracy, r.robust_accuracy, r.certainty.mean);
        out << line;
      }
    }
    write_file(p.out_dir / (checkpoint.stem().string() + "_eval.csv"), csv);
    return static_cast<int>(kExitOk);
  });
}

int cmd_heatmap(const CommonOptions& common, const fs::path& checkpoint, SplitName split,
                const std::optional<std::string>& attack_name, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    Prepared p = prepare(common);
    const Checkpoint ckpt = load_for(p, checkpoint);
    AttackConfig attack = selection_attack(p.config.train);
    if (attack_name) {
      auto it = std::find_if(p.config.eval_attacks.begin(), p.config.eval_attacks.end(),
                             [&](const NamedAttack& a) { return a.name == *attack_name; });
      if (it == p.config.eval_attacks.end()) throw ConfigError("no eval attack named '" + *attack_name + "'");
      attack = it->attack;
    }
    const Dataset& data = split == SplitName::kTrain ? p.data.train : p.data.test;
    const std::string split_name = split == SplitName::kTrain ? "train" : "test";
    const Heatmap hm = compute_heatmap(ckpt.model, data, attack);
    fs::create_directories(p.out_dir);
    const std::string stem = checkpoint.stem().string();
    write_file(p.out_dir / (stem + "_heatmap_" + split_name + ".csv"), heatmap_csv(hm));
    write_file(p.out_dir / (stem + "_label_variance_" + split_name + ".csv"), label_variance_csv(hm));
    out << heatmap_csv(hm) << "mean label-level variance " << format_double(mean_label_level_variance(hm)) << '\n';
    return static_cast<int>(kExitOk);
  });
}

int cmd_sweep(const CommonOptions& common, const fs::path& checkpoint, const std::optional<std::string>& etas,
              std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    std::vector<double> grid;
    if (etas) {
      grid = parse_number_list(*etas);
    } else {
      for (int i = 0; i <= 20; ++i) grid.push_back(i / 10.0);
    }
    Prepared p = prepare(common);
    const Checkpoint ckpt = load_for(p, checkpoint);
    const auto rows = stepsize_sweep(ckpt, p.data.train, p.data.test, grid, p.config.train);
    fs::create_directories(p.out_dir);
    write_file(p.out_dir / "sweep.csv", sweep_csv(rows));
    out << sweep_csv(rows);
    out << "ac inversions " << count_ac_inversions(rows) << ", interior robust peak "
        << (has_interior_robust_peak(rows) ? "yes" : "no") << '\n';
    return static_cast<int>(kExitOk);
  });
}

int cmd_gradcheck(const CommonOptions& common, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    ExperimentConfig config = load_config(common.config);
    GradcheckOptions options = config.gradcheck;
    if (common.seed) options.seed = *common.seed;
    const GradcheckReport report = run_gradcheck(options);
    std::vector<std::string> offenders;
    char line[160];
    for (const auto& s : report.suites) {
      std::snprintf(line, sizeof(line), "%-28s h=%-8.0e cases=%zu max_rel_err=%.3e %s\n", s.name.c_str(), s.h, s.cases,
                    s.max_relative_error, s.passed ? "ok" : "FAIL");
      out << line;
      if (!s.passed) {
        std::snprintf(line, sizeof(line), "%s (h=%.0e, case %zu, rel err %.3e)", s.name.c_str(), s.h, s.worst_case,
                      s.max_relative_error);
        offenders.emplace_back(line);
      }
    }
    if (offenders.empty()) return static_cast<int>(kExitOk);
    err << "gradient check failed (tolerance " << options.tolerance << "):\n";
    for (const auto& o : offenders) err << "  " << o << '\n';
    return static_cast<int>(kExitGradcheck);
  });
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Adversarial training laboratory: train, evaluate and diagnose robust models"};
  app.require_subcommand(1);

  CommonOptions common;
  std::string config;
  std::string out_dir;
  std::uint64_t seed = 0;
  std::string checkpoint;
  std::string etas;
  std::string split = "test";
  std::string attack;
  std::string resume;
  std::size_t stop_after = 0;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config, "Experiment YAML file")->required();
    sub->add_option("--out", out_dir, "Output directory (overrides output.dir)");
    sub->add_option("--seed", seed, "Override train.seed");
  };
  auto* train = app.add_subcommand("train", "Train a model and write history, checkpoints and summary");
  add_common(train);
  train->add_option("--checkpoint", resume, "Resume from this checkpoint");
  train->add_option("--stop-after", stop_after, "Stop after this many completed epochs");
  auto* eval = app.add_subcommand("eval", "Clean/robust accuracy and certainty for every eval attack");
  add_common(eval);
  eval->add_option("--checkpoint", checkpoint, "Checkpoint to evaluate")->required();
  auto* heatmap = app.add_subcommand("heatmap", "Predicted-label heatmap on attacked inputs");
  add_common(heatmap);
  heatmap->add_option("--checkpoint", checkpoint, "Checkpoint to analyse")->required();
  heatmap->add_option("--split", split, "train or test")->check(CLI::IsMember({"train", "test"}));
  heatmap->add_option("--attack", attack, "Eval attack name (default: the selection attack)");
  auto* sweep = app.add_subcommand("sweep", "One EDAC epoch per step size from a checkpoint");
  add_common(sweep);
  sweep->add_option("--checkpoint", checkpoint, "Starting checkpoint")->required();
  sweep->add_option("--etas", etas, "Comma-separated step sizes (default 0,0.1,...,2)");
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of the analytic gradients");
  add_common(gradcheck);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return kExitOk;
    }
    err << e.what() << '\n';
    return kExitConfig;
  }

  common.config = config;
  if (!out_dir.empty()) common.out = fs::path(out_dir);
  for (auto* sub : {train, eval, heatmap, sweep, gradcheck}) {
    if (sub->parsed() && sub->count("--seed")) common.seed = seed;
  }

  if (train->parsed()) {
    TrainOptionsCli options;
    if (!resume.empty()) options.resume = fs::path(resume);
    if (train->count("--stop-after")) options.stop_after = stop_after;
    return cmd_train(common, options, out, err);
  }
  if (eval->parsed()) return cmd_eval(common, checkpoint, out, err);
  if (heatmap->parsed()) {
    return cmd_heatmap(common, checkpoint, split == "train" ? SplitName::kTrain : SplitName::kTest,
                       attack.empty() ? std::nullopt : std::optional<std::string>(attack), out, err);
  }
  if (sweep->parsed()) {
    return cmd_sweep(common, checkpoint, sweep->count("--etas") ? std::optional<std::string>(etas) : std::nullopt, out,
                     err);
  }
  return cmd_gradcheck(common, out, err);
}

}  // namespace edac::runner
