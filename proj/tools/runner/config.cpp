#include "config.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "edac/error.hpp"

namespace edac::runner {

namespace fs = std::filesystem;

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

bool parse_double_strict(const std::string& s, double& out) {
  if (s.empty()) return false;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last && std::isfinite(out);
}

// Wraps one YAML mapping; every key read is recorded so that finish() can
// reject the ones nobody asked for.
class Section {
 public:
  Section(YAML::Node node, std::string path, const fs::path& file)
      : node_(std::move(node)), path_(std::move(path)), file_(file) {
    if (!node_.IsMap()) fail(node_, "expected a mapping");
  }

  bool has(const std::string& key) {
    known_.insert(key);
    return static_cast<bool>(node_[key]);
  }

  YAML::Node node(const std::string& key) {
    known_.insert(key);
    return node_[key];
  }

  Section section(const std::string& key) { return Section(node(key), join(key), file_); }

  std::string string(const std::string& key, const std::string& fallback) {
    const YAML::Node n = node(key);
    if (!n) return fallback;
    return scalar(n, key);
  }

  double number(const std::string& key, double fallback) {
    const YAML::Node n = node(key);
    if (!n) return fallback;
    return number_of(n, key);
  }

  std::uint64_t integer(const std::string& key, std::uint64_t fallback) {
    const YAML::Node n = node(key);
    if (!n) return fallback;
    return integer_of(n, key);
  }

  bool boolean(const std::string& key, bool fallback) {
    const YAML::Node n = node(key);
    if (!n) return fallback;
    const std::string s = scalar(n, key);
    if (s == "true") return true;
    if (s == "false") return false;
    fail(n, join(key) + ": expected true or false, got '" + s + "'");
  }

  std::vector<std::uint64_t> integers(const std::string& key, std::vector<std::uint64_t> fallback) {
    const YAML::Node n = node(key);
    if (!n) return fallback;
    if (!n.IsSequence()) fail(n, join(key) + ": expected a list");
    std::vector<std::uint64_t> out;
    for (const auto& item : n) out.push_back(integer_of(item, key));
    return out;
  }

  std::vector<double> numbers(const std::string& key, std::vector<double> fallback) {
    const YAML::Node n = node(key);
    if (!n) return fallback;
    if (!n.IsSequence()) fail(n, join(key) + ": expected a list");
    std::vector<double> out;
    for (const auto& item : n) out.push_back(number_of(item, key));
    return out;
  }

  std::string scalar(const YAML::Node& n, const std::string& key) const {
    if (!n.IsScalar()) fail(n, join(key) + ": expected a scalar value");
    return n.Scalar();
  }

  double number_of(const YAML::Node& n, const std::string& key) const {
    const std::string s = scalar(n, key);
    try {
      return parse_number(s);
    } catch (const ConfigError&) {
      fail(n, join(key) + ": expected a number, got '" + s + "'");
    }
  }

  std::uint64_t integer_of(const YAML::Node& n, const std::string& key) const {
    const std::string s = scalar(n, key);
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
      fail(n, join(key) + ": expected a non-negative integer, got '" + s + "'");
    }
    return v;
  }

  [[noreturn]] void fail(const YAML::Node& n, const std::string& message) const {
    const YAML::Mark m = n.Mark();
    std::ostringstream os;
    os << file_.string();
    if (!m.is_null()) os << ":" << m.line + 1 << ":" << m.column + 1;
    os << ": " << message;
    throw ConfigError(os.str());
  }

  [[noreturn]] void fail_key(const std::string& key, const std::string& message) {
    const YAML::Node n = node(key);
    fail(n ? n : node_, join(key) + ": " + message);
  }

  void finish() const {
    for (const auto& kv : node_) {
      const std::string key = kv.first.Scalar();
      if (!known_.count(key)) fail(kv.first, "unknown key '" + join(key) + "'");
    }
  }

  std::string join(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  const std::string& path() const { return path_; }

 private:
  YAML::Node node_;
  std::string path_;
  fs::path file_;
  std::set<std::string> known_;
};

// Reads a string key and converts it with `parse`, reporting failures at the key.
template <typename Parse>
auto parse_key(Section& s, const std::string& key, const std::string& fallback, Parse&& parse)
    -> decltype(parse(fallback)) {
  const std::string text = s.string(key, fallback);
  try {
    return parse(text);
  } catch (const ConfigError& e) {
    s.fail_key(key, e.what());
  }
}

// Returns true when the clamp should follow the dataset's domain box.
bool read_clamp(Section& s, AttackConfig& attack) {
  const YAML::Node n = s.node("clamp");
  if (!n) return true;
  if (n.IsScalar()) {
    const std::string v = n.Scalar();
    if (v == "auto") return true;
    if (v == "none") {
      attack.domain_clamp.reset();
      return false;
    }
    s.fail(n, s.join("clamp") + ": expected auto, none or [lo, hi]");
  }
  if (!n.IsSequence() || n.size() != 2) s.fail(n, s.join("clamp") + ": expected auto, none or [lo, hi]");
  attack.domain_clamp = DomainBox{s.number_of(n[0], "clamp"), s.number_of(n[1], "clamp")};
  return false;
}

AttackConfig read_attack(Section s, bool allow_seed, bool& auto_clamp) {
  AttackConfig a;
  a.kind = parse_key(s, "kind", "pgd", parse_attack_kind);
  a.norm = parse_key(s, "norm", "linf", parse_norm);
  a.epsilon = s.number("epsilon", 0.0);
  a.steps = s.integer("steps", a.kind == AttackKind::kFgsm ? 1 : 10);
  a.step_size = s.number("step_size", a.kind == AttackKind::kFgsm ? a.epsilon : a.epsilon / 4.0);
  a.random_start = s.boolean("random_start", false);
  auto_clamp = read_clamp(s, a);
  if (allow_seed) a.seed = s.integer("seed", 0);
  try {
    a.validate();
  } catch (const ConfigError& e) {
    s.fail(s.node("epsilon") ? s.node("epsilon") : YAML::Node(), s.path() + ": " + e.what());
  }
  s.finish();
  return a;
}

void read_dataset(Section s, DatasetSection& d) {
  const std::string kind = s.string("kind", "gaussian_mixture");
  if (kind == "gaussian_mixture") {
    d.kind = DatasetKind::kGaussianMixture;
    d.mixture.num_classes = s.integer("classes", d.mixture.num_classes);
    d.mixture.input_dim = s.integer("dim", d.mixture.input_dim);
    d.mixture.per_class = s.integer("per_class", d.mixture.per_class);
    d.mixture.class_separation = s.number("separation", d.mixture.class_separation);
    d.mixture.noise_std = s.number("noise_std", d.mixture.noise_std);
    d.mixture.seed = s.integer("seed", d.mixture.seed);
  } else if (kind == "idx") {
    d.kind = DatasetKind::kIdx;
    if (!s.has("images") || !s.has("labels")) s.fail_key("kind", "idx datasets need both 'images' and 'labels'");
    d.idx_images = s.string("images", "");
    d.idx_labels = s.string("labels", "");
    if (s.has("downsample")) d.downsample = s.integer("downsample", 0);
    if (s.has("classes")) d.classes = s.integer("classes", 0);
  } else {
    s.fail_key("kind", "expected gaussian_mixture or idx, got '" + kind + "'");
  }
  d.split.train_fraction = s.number("train_fraction", d.split.train_fraction);
  if (!(d.split.train_fraction > 0.0 && d.split.train_fraction < 1.0)) {
    s.fail_key("train_fraction", "must lie in (0, 1)");
  }
  d.split.shuffle_seed = s.integer("split_seed", d.split.shuffle_seed);
  s.finish();
}

void read_train(Section s, ExperimentConfig& c) {
  TrainConfig& t = c.train;
  t.method = parse_key(s, "method", "at", parse_method);
  t.epochs = s.integer("epochs", t.epochs);
  t.batch_size = s.integer("batch_size", t.batch_size);
  t.lr = s.number("lr", t.lr);
  t.momentum = s.number("momentum", t.momentum);
  for (auto e : s.integers("lr_decay_epochs", {})) t.lr_decay_epochs.push_back(e);
  t.lr_decay_factor = s.number("lr_decay_factor", t.lr_decay_factor);
  t.edac_eta = s.number("edac_eta", t.edac_eta);
  t.edac_eta_follows_lr = s.boolean("edac_eta_follows_lr", t.edac_eta_follows_lr);
  t.edac_backoff = s.boolean("edac_backoff", t.edac_backoff);
  t.edac_reg_lambda = s.number("edac_reg_lambda", t.edac_reg_lambda);
  t.objective.kind = parse_key(s, "objective", "at_ce", parse_objective);
  t.objective.trades_beta = s.number("trades_beta", t.objective.trades_beta);
  t.seed = s.integer("seed", t.seed);
  if (!s.has("attack")) s.fail_key("attack", "missing required section");
  t.train_attack = read_attack(s.section("attack"), false, c.train_attack_auto_clamp);
  if (s.has("eval_attack")) {
    t.eval_attack = read_attack(s.section("eval_attack"), false, c.eval_attack_auto_clamp);
  } else {
    t.eval_attack = t.train_attack;
    c.eval_attack_auto_clamp = c.train_attack_auto_clamp;
  }
  try {
    t.validate();
  } catch (const ConfigError& e) {
    s.fail(YAML::Node(), e.what());
  }
  s.finish();
}

void read_eval(Section s, ExperimentConfig& c) {
  const YAML::Node list = s.node("attacks");
  if (list) {
    if (!list.IsSequence()) s.fail(list, s.join("attacks") + ": expected a list");
    for (std::size_t i = 0; i < list.size(); ++i) {
      Section item(list[i], s.join("attacks[" + std::to_string(i) + "]"), c.source);
      NamedAttack named;
      named.name = item.string("name", "");
      if (named.name.empty()) item.fail(list[i], item.join("name") + ": every eval attack needs a name");
      for (const auto& other : c.eval_attacks) {
        if (other.name == named.name) item.fail_key("name", "duplicate attack name '" + named.name + "'");
      }
      // `name` is consumed here; read_attack sees the remaining keys.
      YAML::Node rest = YAML::Clone(list[i]);
      rest.remove("name");
      named.attack = read_attack(Section(rest, item.path(), c.source), true, named.clamp_to_domain);
      c.eval_attacks.push_back(std::move(named));
    }
  }
  s.finish();
}

void read_gradcheck(Section s, GradcheckOptions& g) {
  g.cases = s.integer("cases", g.cases);
  g.step_sizes = s.numbers("step_sizes", g.step_sizes);
  if (g.step_sizes.empty()) s.fail_key("step_sizes", "must not be empty");
  for (double h : g.step_sizes) {
    if (!(h > 0.0)) s.fail_key("step_sizes", "entries must be > 0");
  }
  g.tolerance = s.number("tolerance", g.tolerance);
  g.seed = s.integer("seed", g.seed);
  const std::string fault = s.string("fault_injection", "none");
  if (fault == "none") {
    g.fault = GradcheckFault::kNone;
  } else if (fault == "params") {
    g.fault = GradcheckFault::kParams;
  } else if (fault == "input") {
    g.fault = GradcheckFault::kInput;
  } else if (fault == "certainty") {
    g.fault = GradcheckFault::kCertainty;
  } else {
    s.fail_key("fault_injection", "expected none, params, input or certainty");
  }
  s.finish();
}

}  // namespace

double parse_number(const std::string& text) {
  const std::string s = trim(text);
  double v = 0.0;
  if (parse_double_strict(s, v)) return v;
  const auto slash = s.find('/');
  if (slash != std::string::npos) {
    double num = 0.0;
    double den = 0.0;
    if (parse_double_strict(trim(s.substr(0, slash)), num) && parse_double_strict(trim(s.substr(slash + 1)), den) &&
        den != 0.0) {
      return num / den;
    }
  }
  throw ConfigError("not a number: '" + text + "'");
}

std::vector<double> parse_number_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (trim(item).empty()) throw ConfigError("empty entry in number list '" + text + "'");
    out.push_back(parse_number(item));
  }
  if (out.empty() || (!text.empty() && text.back() == ',')) {
    throw ConfigError("malformed number list '" + text + "'");
  }
  return out;
}

ModelSpec ExperimentConfig::model_spec(std::size_t input_dim, std::size_t num_classes) const {
  ModelSpec spec;
  spec.input_dim = input_dim;
  spec.layer_widths = hidden;
  spec.layer_widths.push_back(num_classes);
  spec.activation = activation;
  spec.init_seed = init_seed.value_or(train.seed);
  return spec;
}

ExperimentConfig parse_config(const std::string& text, const fs::path& source) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError(source.string() + ":" + std::to_string(e.mark.line + 1) + ":" +
                      std::to_string(e.mark.column + 1) + ": " + e.msg);
  }
  if (!root || root.IsNull()) throw ConfigError(source.string() + ": empty config");

  ExperimentConfig c;
  c.source = source;
  Section top(root, "", source);
  if (!top.has("dataset")) top.fail(root, "missing required section 'dataset'");
  if (!top.has("train")) top.fail(root, "missing required section 'train'");
  read_dataset(top.section("dataset"), c.dataset);

  if (top.has("model")) {
    Section m = top.section("model");
    for (auto w : m.integers("hidden", {})) c.hidden.push_back(w);
    c.activation = parse_key(m, "activation", "relu", parse_activation);
    if (m.has("init_seed")) c.init_seed = m.integer("init_seed", 0);
    for (std::size_t w : c.hidden) {
      if (w == 0) m.fail_key("hidden", "layer widths must be >= 1");
    }
    m.finish();
  }

  read_train(top.section("train"), c);
  if (top.has("eval")) read_eval(top.section("eval"), c);
  if (c.eval_attacks.empty()) {
    c.eval_attacks.push_back(NamedAttack{"selection", c.train.eval_attack, c.eval_attack_auto_clamp});
  }

  if (top.has("output")) {
    Section o = top.section("output");
    c.output_dir = o.string("dir", c.output_dir.string());
    o.finish();
  }
  if (top.has("gradcheck")) read_gradcheck(top.section("gradcheck"), c.gradcheck);
  top.finish();
  return c;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  ExperimentConfig c = parse_config(ss.str(), path);
  // Relative data paths resolve against the config file's directory.
  const fs::path base = path.parent_path();
  if (c.dataset.kind == DatasetKind::kIdx) {
    if (c.dataset.idx_images.is_relative()) c.dataset.idx_images = base / c.dataset.idx_images;
    if (c.dataset.idx_labels.is_relative()) c.dataset.idx_labels = base / c.dataset.idx_labels;
  }
  return c;
}

Splits load_data(ExperimentConfig& config) {
  Dataset all;
  if (config.dataset.kind == DatasetKind::kGaussianMixture) {
    all = make_gaussian_mixture(config.dataset.mixture);
  } else {
    all = load_idx_images(config.dataset.idx_images, config.dataset.idx_labels, config.dataset.downsample,
                          config.dataset.classes);
  }
  SplitResult parts = split(all, config.dataset.split);
  if (all.domain_box) {
    auto fill = [&](AttackConfig& a, bool wanted) {
      if (wanted && !a.domain_clamp) a.domain_clamp = all.domain_box;
    };
    fill(config.train.train_attack, config.train_attack_auto_clamp);
    fill(config.train.eval_attack, config.eval_attack_auto_clamp);
    for (auto& named : config.eval_attacks) fill(named.attack, named.clamp_to_domain);
  }
  return Splits{std::move(parts.train), std::move(parts.test)};
}

}  // namespace edac::runner
