#include "edac/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "edac/attack.hpp"
#include "edac/error.hpp"
#include "edac/objective.hpp"
#include "edac/random.hpp"

namespace edac {

std::vector<double> finite_diff_grad(const std::function<double(std::span<const double>)>& f,
                                     std::span<const double> point, double h) {
  if (!(h > 0.0)) throw ConfigError("finite_diff_grad needs h > 0");
  std::vector<double> p(point.begin(), point.end());
  std::vector<double> g(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double orig = p[i];
    p[i] = orig + h;
    const double up = f(p);
    p[i] = orig - h;
    const double down = f(p);
    p[i] = orig;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

double relative_error(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("relative_error: length mismatch");
  double diff = 0.0;
  double scale = 1e-10;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff = std::max(diff, std::abs(a[i] - b[i]));
    scale = std::max({scale, std::abs(a[i]), std::abs(b[i])});
  }
  return diff / scale;
}

double min_hidden_margin(const ModelState& model, const Tensor& inputs) {
  Graph graph;
  GraphModel gm(graph, model, false);
  Var h = graph.constant(as_batch(inputs));
  double margin = std::numeric_limits<double>::infinity();
  const std::size_t layers = model.spec.num_layers();
  for (std::size_t l = 0; l + 1 < layers; ++l) {
    h = affine(h, gm.params()[2 * l], gm.params()[2 * l + 1]);
    for (double v : h.value().data()) margin = std::min(margin, std::abs(v));
    h = model.spec.activation == Activation::kRelu ? relu(h) : tanh(h);
  }
  return margin;
}

bool GradcheckReport::passed() const {
  return std::all_of(suites.begin(), suites.end(), [](const GradcheckSuite& s) { return s.passed; });
}

namespace {

struct Case {
  ModelState model;
  Batch batch;
  Tensor adversarial;
};

// Draws a random MLP and batch whose ReLU pre-activations (clean and
// adversarial) stay clear of the kink.
Case draw_case(Engine& engine, double margin) {
  for (int attempt = 0;; ++attempt) {
    ModelSpec spec;
    spec.input_dim = 2 + uniform_index(engine, 5);
    const std::size_t hidden = 1 + uniform_index(engine, 2);
    for (std::size_t l = 0; l < hidden; ++l) spec.layer_widths.push_back(2 + uniform_index(engine, 7));
    spec.layer_widths.push_back(2 + uniform_index(engine, 4));
    spec.activation = uniform_index(engine, 2) == 0 ? Activation::kRelu : Activation::kTanh;
    spec.init_seed = engine();
    Case c{init_model(spec), {}, {}};
    const std::size_t b = 1 + uniform_index(engine, 6);
    c.batch.inputs = Tensor(Shape{b, spec.input_dim});
    for (double& v : c.batch.inputs.data()) v = standard_normal(engine);
    for (std::size_t i = 0; i < b; ++i) c.batch.labels.push_back(static_cast<Label>(uniform_index(engine, spec.num_classes())));
    AttackConfig atk;
    atk.norm = uniform_index(engine, 2) == 0 ? Norm::kLinf : Norm::kL2;
    atk.epsilon = 0.05 + 0.2 * uniform01(engine);
    atk.step_size = atk.epsilon / 2.0;
    atk.steps = 3;
    c.adversarial = pgd(c.model, c.batch.inputs, c.batch.labels, atk);
    if (spec.activation == Activation::kTanh || attempt >= 100) return c;
    if (min_hidden_margin(c.model, c.batch.inputs) > margin && min_hidden_margin(c.model, c.adversarial) > margin) {
      return c;
    }
  }
}

void corrupt(std::vector<double>& g) {
  if (!g.empty()) g[0] += 1e-2 * (1.0 + std::abs(g[0]));
}

}  // namespace

GradcheckReport run_gradcheck(const GradcheckOptions& options) {
  GradcheckReport report;
  const Loss ce = mean_cross_entropy_loss();
  for (double h : options.step_sizes) {
    if (!(h > 0.0)) throw ConfigError("gradcheck step sizes must be > 0");
    Engine engine(derive_seed({options.seed, 0x67726164ULL}));
    GradcheckSuite params{"grad_params", h};
    GradcheckSuite input{"grad_input", h};
    GradcheckSuite certainty{"grad_adversarial_certainty", h};
    // Stay well clear of ReLU kinks relative to the probe width.
    const double margin = std::max(1e-3, 100.0 * h);
    for (std::size_t i = 0; i < options.cases; ++i) {
      const Case c = draw_case(engine, margin);
      const ParamVector layout = c.model.params;
      const std::vector<double> theta = layout.flatten();

      auto track = [&](GradcheckSuite& s, std::vector<double> analytic, const std::vector<double>& numeric) {
        const double err = relative_error(analytic, numeric);
        if (err > s.max_relative_error || !std::isfinite(err)) {
          s.max_relative_error = std::isfinite(err) ? err : std::numeric_limits<double>::infinity();
          s.worst_case = i;
        }
        s.cases += 1;
      };

      {
        std::vector<double> analytic = grad_params(ce, c.model, c.batch).flatten();
        if (options.fault == GradcheckFault::kParams) corrupt(analytic);
        auto f = [&](std::span<const double> p) {
          return loss_value(ce, ModelState{c.model.spec, ParamVector::unflatten(layout, p)}, c.batch);
        };
        track(params, std::move(analytic), finite_diff_grad(f, theta, h));
      }
      {
        const Tensor g = grad_input(ce, c.model, c.batch.inputs, c.batch.labels);
        std::vector<double> analytic(g.data().begin(), g.data().end());
        if (options.fault == GradcheckFault::kInput) corrupt(analytic);
        auto f = [&](std::span<const double> x) {
          Batch b{Tensor(c.batch.inputs.shape(), std::vector<double>(x.begin(), x.end())), c.batch.labels};
          return loss_value(ce, c.model, b);
        };
        const auto x0 = c.batch.inputs.data();
        track(input, std::move(analytic), finite_diff_grad(f, x0, h));
      }
      {
        std::vector<double> analytic = grad_certainty_frozen(c.model, c.adversarial).flatten();
        if (options.fault == GradcheckFault::kCertainty) corrupt(analytic);
        auto f = [&](std::span<const double> p) {
          const ModelState m{c.model.spec, ParamVector::unflatten(layout, p)};
          return certainty_of(m, c.adversarial, c.batch.labels).mean;
        };
        track(certainty, std::move(analytic), finite_diff_grad(f, theta, h));
      }
    }
    for (GradcheckSuite* s : {&params, &input, &certainty}) {
      s->passed = s->max_relative_error < options.tolerance;
      report.suites.push_back(*s);
    }
  }
  return report;
}

}  // namespace edac
