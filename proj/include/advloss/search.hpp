#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "advloss/attack.hpp"
#include "advloss/expr.hpp"
#include "advloss/losses.hpp"
#include "advloss/model.hpp"
#include "advloss/riskeval.hpp"

namespace advloss {

struct SearchConfig {
  int generations = 50;
  int max_depth = kMaxTreeDepth;
  std::size_t population_size = 100;
  std::size_t tournament_size = 3;
  double crossover_rate = 0.5;
  double mutation_rate = 0.3;
  std::size_t fitness_samples = 1000;
  AttackSpec attack{};  // PGD-10
  std::uint64_t seed = 0;

  // Ramped half-and-half initialization range and subtree-mutation depth.
  int init_min_depth = 2;
  int init_max_depth = 6;
  int mutation_max_depth = 4;
  std::size_t probe_rows = 8;

  void validate() const;
  // Single "# key=value,..." line echoed at the top of the search log.
  std::string header_line() const;
};

struct FitnessResult {
  double fitness = 0.0;
  bool invalid = false;  // zeroed because the probe evaluation was infeasible
};

// Fixed random logits/labels used to reject infeasible expressions before
// running the attack.
EvalContext make_probe_context(std::size_t rows, std::size_t num_classes, std::uint64_t seed);

// R'' of the tree used as surrogate, or exactly 0 when the probe value or
// gradient is non-finite or evaluation fails.
FitnessResult fitness(const ExprTree& tree, const MlpModel& model, const Dataset& slice,
                      const AttackSpec& spec, const EvalContext& probe);

// Indices of the winners; ties go to the lowest population index.
std::vector<std::size_t> tournament_select(std::span<const double> fitness,
                                           std::size_t winners, std::size_t tournament_size,
                                           Rng& rng);

// Swaps the subtree at index ia of a with the subtree at index ib of b.
std::pair<ExprTree, ExprTree> swap_subtrees(const ExprTree& a, std::size_t ia, const ExprTree& b,
                                            std::size_t ib);

// One-point crossover; a child deeper than max_depth is replaced by its parent.
std::pair<ExprTree, ExprTree> crossover(const ExprTree& a, const ExprTree& b, Rng& rng,
                                        int max_depth = kMaxTreeDepth);

// Replaces a uniformly chosen subtree with a grown random tree of depth <=
// replacement_depth; returns the input when the result would exceed max_depth.
ExprTree mutate(const ExprTree& tree, Rng& rng, int max_depth = kMaxTreeDepth,
                int replacement_depth = 4);
// Same, with the node and replacement chosen by the caller.
ExprTree mutate_at(const ExprTree& tree, std::size_t index, const ExprTree& replacement,
                   int max_depth = kMaxTreeDepth);

// Fitness with a per-run cache keyed by expression text. The attack seed is
// the same for every candidate in a run, so a cached value is exactly what a
// fresh evaluation would return.
class FitnessEvaluator {
 public:
  FitnessEvaluator(const MlpModel& model, Dataset slice, AttackSpec spec, EvalContext probe);

  // Evaluates a population; unique uncached expressions run concurrently.
  std::vector<FitnessResult> evaluate(const std::vector<ExprTree>& population,
                                      const ExecPolicy& exec);
  // Same contract, strictly serial and uncached.
  std::vector<FitnessResult> evaluate_reference(const std::vector<ExprTree>& population) const;

  std::size_t cache_size() const noexcept { return cache_.size(); }
  const Dataset& slice() const noexcept { return slice_; }

 private:
  const MlpModel& model_;
  Dataset slice_;
  AttackSpec spec_;
  EvalContext probe_;
  std::map<std::string, FitnessResult> cache_;
};

struct SearchState {
  int generation = 0;
  std::vector<ExprTree> population;
  std::vector<FitnessResult> fitness;
  ExprTree best = ExprTree::constant(0.0);
  double best_fitness = -1.0;
};

struct GenerationLog {
  int generation = 0;
  double best_fitness = 0.0;  // hall of fame
  double mean_fitness = 0.0;
  std::size_t invalid_count = 0;
  std::string best_expression;
};

struct SearchResult {
  std::vector<GenerationLog> log;
  ExprTree best = ExprTree::constant(0.0);
  double best_fitness = 0.0;
  std::size_t fitness_evaluations = 0;  // uncached
};

using GenerationObserver = std::function<void(const SearchState&)>;

// Draws the per-run fitness slice from the dataset using the master seed.
Dataset fitness_slice(const Dataset& data, std::size_t samples, std::uint64_t seed);

SearchResult run_search(const SearchConfig& config, const MlpModel& model, const Dataset& data,
                        const ExecPolicy& exec = {}, const GenerationObserver& observer = {});

}  // namespace advloss
