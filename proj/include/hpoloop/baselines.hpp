#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "hpoloop/creator.hpp"
#include "hpoloop/experiment_log.hpp"
#include "hpoloop/search_space.hpp"

namespace hpoloop {

HyperparameterConfig random_propose(const SearchSpace& space, Rng& rng);

struct TpeParams {
  double gamma = 0.25;
  int n_candidates = 24;
  int n_startup = 5;

  // Throws SchemaError unless gamma is in (0, 1) and counts are >= 1.
  void check() const;
};

struct TpeState {
  std::vector<std::pair<HyperparameterConfig, double>> observations;
  TpeParams params;

  // Succeeded trials of `log`, in trial order.
  static TpeState from_log(const ExperimentLog& log, TpeParams params = {});
};

// Tree-structured Parzen estimator step. Random below n_startup observations
// or when every score is equal.
HyperparameterConfig tpe_propose(const SearchSpace& space, const TpeState& state,
                                 Direction direction, Rng& rng);

// creator.create with the log rendered in OPRO view.
Proposal opro_create(const ExperimentLog& log, const SearchSpace& space, CreatorContext ctx,
                     Rng& rng);

// Everything a proposer may read. `creator` is required by the LLM strategies.
struct StrategyContext {
  const SearchSpace& space;
  const ExperimentLog& log;
  Rng& rng;
  const CreatorContext* creator = nullptr;
};

class Strategy {
 public:
  virtual ~Strategy() = default;
  virtual std::string name() const = 0;
  virtual bool uses_llm() const { return false; }
  virtual Proposal propose(const StrategyContext& ctx) = 0;
};

class RandomStrategy final : public Strategy {
 public:
  std::string name() const override { return "random"; }
  Proposal propose(const StrategyContext& ctx) override;
};

class TpeStrategy final : public Strategy {
 public:
  explicit TpeStrategy(TpeParams params = {}) : params_(params) { params_.check(); }
  std::string name() const override { return "tpe"; }
  Proposal propose(const StrategyContext& ctx) override;

 private:
  TpeParams params_;
};

class AgentStrategy final : public Strategy {
 public:
  std::string name() const override { return "agent"; }
  bool uses_llm() const override { return true; }
  Proposal propose(const StrategyContext& ctx) override;
};

class OproStrategy final : public Strategy {
 public:
  std::string name() const override { return "opro"; }
  bool uses_llm() const override { return true; }
  Proposal propose(const StrategyContext& ctx) override;
};

// "random" | "tpe" | "agent" | "opro". Throws SchemaError.
std::unique_ptr<Strategy> make_strategy(const std::string& name, const json& params = json::object());

}  // namespace hpoloop
