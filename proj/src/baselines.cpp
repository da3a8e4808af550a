#include "hpoloop/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hpoloop/errors.hpp"
#include "hpoloop/text_util.hpp"

namespace hpoloop {

HyperparameterConfig random_propose(const SearchSpace& space, Rng& rng) {
  return sample_uniform(space, rng);
}

void TpeParams::check() const {
  std::vector<std::string> problems;
  if (!(gamma > 0.0 && gamma < 1.0)) problems.push_back("gamma must be in (0, 1)");
  if (n_candidates < 1) problems.push_back("n_candidates must be >= 1");
  if (n_startup < 1) problems.push_back("n_startup must be >= 1");
  if (!problems.empty()) throw SchemaError("tpe: " + join(problems, "; "));
}

TpeState TpeState::from_log(const ExperimentLog& log, TpeParams params) {
  TpeState s;
  s.params = params;
  for (const auto& e : log.entries()) {
    if (e.result.status == TrialStatus::succeeded && e.result.final_score)
      s.observations.emplace_back(e.config, *e.result.final_score);
  }
  return s;
}

namespace {

constexpr double kInvSqrt2Pi = 0.3989422804014327;

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// One-dimensional Parzen estimator over a transformed numeric axis,
// truncated to [lo, hi]. Besides one component per observation it carries a
// wide prior component centred on the range. Each observation's bandwidth is
// the larger gap to its sorted neighbours, clipped to
// [range / min(100, n + 1), range].
struct NumericParzen {
  std::vector<double> mus;
  std::vector<double> sigmas;
  double lo = 0.0, hi = 1.0;

  NumericParzen(const std::vector<double>& points, double lower, double upper) : lo(lower), hi(upper) {
    const double range = hi - lo;
    const double prior_mu = 0.5 * (lo + hi);
    std::vector<double> sorted = points;
    sorted.push_back(prior_mu);
    std::sort(sorted.begin(), sorted.end());
    const double min_sigma = range / std::min(100.0, 1.0 + static_cast<double>(points.size()));
    for (double p : points) {
      const auto it = std::lower_bound(sorted.begin(), sorted.end(), p);
      const auto idx = static_cast<std::size_t>(it - sorted.begin());
      double gap = 0.0;
      if (idx > 0) gap = std::max(gap, p - sorted[idx - 1]);
      // skip copies of p itself when looking right
      auto right = std::upper_bound(sorted.begin(), sorted.end(), p);
      if (right != sorted.end()) gap = std::max(gap, *right - p);
      mus.push_back(p);
      sigmas.push_back(std::clamp(gap, min_sigma, range));
    }
    mus.push_back(prior_mu);
    sigmas.push_back(range);
  }

  double density(double x) const {
    double total = 0.0;
    for (std::size_t i = 0; i < mus.size(); ++i) {
      const double mu = mus[i], sigma = sigmas[i];
      const double z = (x - mu) / sigma;
      const double mass = normal_cdf((hi - mu) / sigma) - normal_cdf((lo - mu) / sigma);
      total += kInvSqrt2Pi * std::exp(-0.5 * z * z) / sigma / std::max(mass, 1e-12);
    }
    return total / static_cast<double>(mus.size());
  }

  double sample(Rng& rng) const {
    const auto i = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(mus.size()) - 1));
    for (int k = 0; k < 100; ++k) {
      const double x = mus[i] + sigmas[i] * standard_normal(rng);
      if (x >= lo && x <= hi) return x;
    }
    return std::clamp(mus[i], lo, hi);
  }
};

// Laplace-smoothed category frequencies.
struct CategoricalParzen {
  std::vector<double> probs;

  CategoricalParzen(const std::vector<std::size_t>& picks, std::size_t n_choices)
      : probs(n_choices, 1.0) {
    for (auto p : picks) probs[p] += 1.0;
    const double total = std::accumulate(probs.begin(), probs.end(), 0.0);
    for (auto& p : probs) p /= total;
  }

  std::size_t sample(Rng& rng) const {
    double u = uniform01(rng);
    for (std::size_t i = 0; i < probs.size(); ++i) {
      if (u < probs[i]) return i;
      u -= probs[i];
    }
    return probs.size() - 1;
  }
};

double to_axis(const HyperparameterSpec& spec, double v) { return spec.log_scale ? std::log10(v) : v; }
double from_axis(const HyperparameterSpec& spec, double t) { return spec.log_scale ? std::pow(10.0, t) : t; }

std::size_t choice_index(const HyperparameterSpec& spec, const HpValue& v) {
  for (std::size_t i = 0; i < spec.choices.size(); ++i) {
    if (value_equal(spec.choices[i], v)) return i;
  }
  return 0;
}

HpValue numeric_value(const HyperparameterSpec& spec, double axis) {
  double v = std::clamp(from_axis(spec, axis), spec.lower, spec.upper);
  if (spec.kind == HpKind::integer) {
    v = std::clamp(std::round(v), std::ceil(spec.lower), std::floor(spec.upper));
    return static_cast<std::int64_t>(v);
  }
  return v;
}

}  // namespace

HyperparameterConfig tpe_propose(const SearchSpace& space, const TpeState& state,
                                 Direction direction, Rng& rng) {
  state.params.check();
  const auto& obs = state.observations;
  if (static_cast<int>(obs.size()) < state.params.n_startup) return random_propose(space, rng);
  const auto [mn, mx] = std::minmax_element(obs.begin(), obs.end(),
                                            [](const auto& a, const auto& b) { return a.second < b.second; });
  if (mn->second == mx->second) return random_propose(space, rng);

  std::vector<std::size_t> order(obs.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return better(direction, obs[a].second, obs[b].second);
  });
  const auto n_good = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::ceil(state.params.gamma * static_cast<double>(obs.size()))), 1,
      obs.size() - 1);

  struct Dim {
    std::optional<NumericParzen> good_num, bad_num;
    std::optional<CategoricalParzen> good_cat, bad_cat;
  };
  std::vector<Dim> dims;
  for (const auto& spec : space.specs()) {
    Dim d;
    if (spec.numeric()) {
      std::vector<double> g, b;
      for (std::size_t k = 0; k < order.size(); ++k) {
        const HpValue* v = obs[order[k]].first.get(spec.name);
        const double x = v && is_numeric(*v) ? to_axis(spec, std::clamp(as_double(*v), spec.lower, spec.upper))
                                             : to_axis(spec, spec.lower);
        (k < n_good ? g : b).push_back(x);
      }
      const double lo = to_axis(spec, spec.lower), hi = to_axis(spec, spec.upper);
      d.good_num.emplace(g, lo, hi);
      d.bad_num.emplace(b, lo, hi);
    } else {
      std::vector<std::size_t> g, b;
      for (std::size_t k = 0; k < order.size(); ++k) {
        const HpValue* v = obs[order[k]].first.get(spec.name);
        (k < n_good ? g : b).push_back(v ? choice_index(spec, *v) : 0);
      }
      d.good_cat.emplace(g, spec.choices.size());
      d.bad_cat.emplace(b, spec.choices.size());
    }
    dims.push_back(std::move(d));
  }

  HyperparameterConfig best;
  double best_score = -std::numeric_limits<double>::infinity();
  for (int c = 0; c < state.params.n_candidates; ++c) {
    HyperparameterConfig cand;
    double score = 0.0;
    for (std::size_t i = 0; i < dims.size(); ++i) {
      const auto& spec = space.specs()[i];
      const auto& d = dims[i];
      if (spec.numeric()) {
        const HpValue v = numeric_value(spec, d.good_num->sample(rng));
        const double x = to_axis(spec, as_double(v));
        score += std::log(std::max(d.good_num->density(x), 1e-300)) -
                 std::log(std::max(d.bad_num->density(x), 1e-300));
        cand.assignments[spec.name] = v;
      } else {
        const std::size_t k = d.good_cat->sample(rng);
        score += std::log(d.good_cat->probs[k]) - std::log(d.bad_cat->probs[k]);
        cand.assignments[spec.name] = spec.choices[k];
      }
    }
    if (score > best_score) {
      best_score = score;
      best = std::move(cand);
    }
  }
  return validate_config(space, best);
}

Proposal opro_create(const ExperimentLog& log, const SearchSpace& space, CreatorContext ctx,
                     Rng& rng) {
  ctx.view = LogView::opro;
  return create(log, space, ctx, rng);
}

Proposal RandomStrategy::propose(const StrategyContext& ctx) {
  return Proposal{random_propose(ctx.space, ctx.rng), "uniform random draw"};
}

Proposal TpeStrategy::propose(const StrategyContext& ctx) {
  const auto state = TpeState::from_log(ctx.log, params_);
  const bool warm = static_cast<int>(state.observations.size()) >= params_.n_startup;
  return Proposal{tpe_propose(ctx.space, state, ctx.log.metadata.direction, ctx.rng),
                  warm ? "TPE density-ratio candidate" : "TPE cold start (uniform random draw)"};
}

Proposal AgentStrategy::propose(const StrategyContext& ctx) {
  if (!ctx.creator) throw SchemaError("the agent strategy needs a creator context");
  CreatorContext c = *ctx.creator;
  c.view = LogView::full;
  return create(ctx.log, ctx.space, c, ctx.rng);
}

Proposal OproStrategy::propose(const StrategyContext& ctx) {
  if (!ctx.creator) throw SchemaError("the opro strategy needs a creator context");
  return opro_create(ctx.log, ctx.space, *ctx.creator, ctx.rng);
}

std::unique_ptr<Strategy> make_strategy(const std::string& name, const json& params) {
  if (!params.is_null() && !params.is_object()) throw SchemaError("strategy.params must be an object");
  const json p = params.is_null() ? json::object() : params;
  auto no_params = [&] {
    if (!p.empty()) throw SchemaError("strategy '" + name + "' takes no params");
  };
  if (name == "random") {
    no_params();
    return std::make_unique<RandomStrategy>();
  }
  if (name == "tpe") {
    TpeParams t;
    for (const auto& [key, value] : p.items()) {
      if (key == "gamma" && value.is_number()) t.gamma = value.get<double>();
      else if (key == "n_candidates" && value.is_number_integer()) t.n_candidates = value.get<int>();
      else if (key == "n_startup" && value.is_number_integer()) t.n_startup = value.get<int>();
      else throw SchemaError("strategy.params." + key + " is not a valid tpe parameter");
    }
    return std::make_unique<TpeStrategy>(t);
  }
  if (name == "agent") {
    no_params();
    return std::make_unique<AgentStrategy>();
  }
  if (name == "opro") {
    no_params();
    return std::make_unique<OproStrategy>();
  }
  throw SchemaError("unknown strategy '" + name + "' (expected random, tpe, agent or opro)");
}

}  // namespace hpoloop
