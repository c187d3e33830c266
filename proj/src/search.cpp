#include "advloss/search.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "advloss/csv.hpp"
#include "advloss/error.hpp"

namespace advloss {

void SearchConfig::validate() const {
  auto bad = [](const std::string& what) { throw Error(ErrorCode::invalid_argument, what); };
  if (generations < 0) bad("generations must be >= 0");
  if (max_depth < 1 || max_depth > kMaxTreeDepth)
    bad("max_depth must be in [1, " + std::to_string(kMaxTreeDepth) + "]");
  if (population_size < 1) bad("population_size must be >= 1");
  if (tournament_size < 1 || tournament_size > population_size)
    bad("tournament_size must be in [1, population_size]");
  if (!(crossover_rate >= 0.0 && crossover_rate <= 1.0)) bad("crossover_rate must be in [0, 1]");
  if (!(mutation_rate >= 0.0 && mutation_rate <= 1.0)) bad("mutation_rate must be in [0, 1]");
  if (fitness_samples < 1) bad("fitness_samples must be >= 1");
  if (init_min_depth < 1 || init_min_depth > init_max_depth || init_max_depth > max_depth)
    bad("initial depth range must satisfy 1 <= min <= max <= max_depth");
  if (mutation_max_depth < 1 || mutation_max_depth > max_depth)
    bad("mutation depth must be in [1, max_depth]");
  if (probe_rows < 1) bad("probe_rows must be >= 1");
  attack.validate();
}

std::string SearchConfig::header_line() const {
  std::ostringstream ss;
  ss << "# generations=" << generations << ",max_depth=" << max_depth
     << ",population_size=" << population_size << ",tournament_size=" << tournament_size
     << ",crossover_rate=" << format_fixed(crossover_rate)
     << ",mutation_rate=" << format_fixed(mutation_rate)
     << ",fitness_samples=" << fitness_samples << ",norm=" << norm_name(attack.norm)
     << ",eps=" << format_fixed(attack.epsilon) << ",steps=" << attack.steps
     << ",step_size=" << format_fixed(attack.effective_step_size())
     << ",random_start=" << (attack.random_start ? 1 : 0) << ",seed=" << seed;
  return ss.str();
}

EvalContext make_probe_context(std::size_t rows, std::size_t num_classes, std::uint64_t seed) {
  Rng rng(derive_seed(seed, {stream::probe}));
  std::normal_distribution<double> logit(0.0, 5.0);
  std::uniform_int_distribution<std::uint32_t> label(0, static_cast<std::uint32_t>(num_classes - 1));
  BatchMatrix p(rows, num_classes);
  for (double& v : p.values()) v = logit(rng);
  std::vector<std::uint32_t> y(rows);
  for (auto& v : y) v = label(rng);
  return make_context(std::move(p), y);
}

FitnessResult fitness(const ExprTree& tree, const MlpModel& model, const Dataset& slice,
                      const AttackSpec& spec, const EvalContext& probe) {
  try {
    const auto vg =
        value_and_grad(tree, probe, 1.0 / static_cast<double>(probe.p.rows()));
    if (!std::isfinite(scalarize(vg.output)) || !vg.grad_p.all_finite()) return {0.0, true};
    const SurrogateLoss candidate("candidate", tree);
    const RiskReport r =
        approx_risk(model, candidate, slice, spec, ExecPolicy{1, slice.size()});
    return {r.r_double_prime, false};
  } catch (const Error&) {
    return {0.0, true};
  }
}

std::vector<std::size_t> tournament_select(std::span<const double> fitness,
                                           std::size_t winners, std::size_t tournament_size,
                                           Rng& rng) {
  if (fitness.empty() || tournament_size < 1 || tournament_size > fitness.size())
    throw Error(ErrorCode::invalid_argument, "tournament size must be in [1, population size]");
  std::uniform_int_distribution<std::size_t> pick(0, fitness.size() - 1);
  std::vector<std::size_t> out;
  out.reserve(winners);
  for (std::size_t w = 0; w < winners; ++w) {
    std::size_t best = pick(rng);
    for (std::size_t t = 1; t < tournament_size; ++t) {
      const std::size_t c = pick(rng);
      if (fitness[c] > fitness[best] || (fitness[c] == fitness[best] && c < best)) best = c;
    }
    out.push_back(best);
  }
  return out;
}

std::pair<ExprTree, ExprTree> swap_subtrees(const ExprTree& a, std::size_t ia, const ExprTree& b,
                                            std::size_t ib) {
  const ExprTree sa = a.subtree(ia);
  const ExprTree sb = b.subtree(ib);
  return {a.replace_subtree(ia, sb), b.replace_subtree(ib, sa)};
}

std::pair<ExprTree, ExprTree> crossover(const ExprTree& a, const ExprTree& b, Rng& rng,
                                        int max_depth) {
  const std::size_t ia = std::uniform_int_distribution<std::size_t>(0, a.size() - 1)(rng);
  const std::size_t ib = std::uniform_int_distribution<std::size_t>(0, b.size() - 1)(rng);
  auto [c1, c2] = swap_subtrees(a, ia, b, ib);
  return {c1.depth() > max_depth ? a : std::move(c1), c2.depth() > max_depth ? b : std::move(c2)};
}

ExprTree mutate_at(const ExprTree& tree, std::size_t index, const ExprTree& replacement,
                   int max_depth) {
  if (tree.depth_at(index) - 1 + replacement.depth() > max_depth) return tree;
  return tree.replace_subtree(index, replacement);
}

ExprTree mutate(const ExprTree& tree, Rng& rng, int max_depth, int replacement_depth) {
  const std::size_t index = std::uniform_int_distribution<std::size_t>(0, tree.size() - 1)(rng);
  const ExprTree fresh = random_tree(rng, 1, replacement_depth, GenMethod::Grow);
  return mutate_at(tree, index, fresh, max_depth);
}

FitnessEvaluator::FitnessEvaluator(const MlpModel& model, Dataset slice, AttackSpec spec,
                                   EvalContext probe)
    : model_(model), slice_(std::move(slice)), spec_(std::move(spec)), probe_(std::move(probe)) {
  slice_.validate();
  probe_.validate();
}

std::vector<FitnessResult> FitnessEvaluator::evaluate(const std::vector<ExprTree>& population,
                                                      const ExecPolicy& exec) {
  // Dedupe serially so the set of evaluations never depends on scheduling.
  std::vector<std::string> keys(population.size());
  std::vector<std::size_t> pending;
  std::map<std::string, std::size_t> first_pending;
  for (std::size_t i = 0; i < population.size(); ++i) {
    keys[i] = print(population[i]);
    if (cache_.count(keys[i]) || first_pending.count(keys[i])) continue;
    first_pending.emplace(keys[i], pending.size());
    pending.push_back(i);
  }

  std::vector<FitnessResult> fresh(pending.size());
  const auto count = static_cast<std::int64_t>(pending.size());
#pragma omp parallel for schedule(dynamic) num_threads(std::max(1, exec.workers))
  for (std::int64_t k = 0; k < count; ++k)
    fresh[k] = fitness(population[pending[k]], model_, slice_, spec_, probe_);

  for (std::size_t k = 0; k < pending.size(); ++k) cache_.emplace(keys[pending[k]], fresh[k]);
  std::vector<FitnessResult> out(population.size());
  for (std::size_t i = 0; i < population.size(); ++i) out[i] = cache_.at(keys[i]);
  return out;
}

std::vector<FitnessResult> FitnessEvaluator::evaluate_reference(
    const std::vector<ExprTree>& population) const {
  std::vector<FitnessResult> out;
  out.reserve(population.size());
  for (const auto& t : population) out.push_back(fitness(t, model_, slice_, spec_, probe_));
  return out;
}

Dataset fitness_slice(const Dataset& data, std::size_t samples, std::uint64_t seed) {
  data.validate();
  std::vector<std::size_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (samples < data.size()) {
    Rng rng(derive_seed(seed, {stream::fitness_slice}));
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(samples);
    std::sort(idx.begin(), idx.end());
  }
  return data.subset(idx);
}

namespace {

std::vector<ExprTree> ramped_half_and_half(const SearchConfig& config, Rng& rng) {
  std::vector<ExprTree> pop;
  pop.reserve(config.population_size);
  std::uniform_int_distribution<int> height(config.init_min_depth, config.init_max_depth);
  std::bernoulli_distribution use_full(0.5);
  for (std::size_t i = 0; i < config.population_size; ++i) {
    const int h = height(rng);
    const GenMethod method = use_full(rng) ? GenMethod::Full : GenMethod::Grow;
    pop.push_back(random_tree(rng, std::min(config.init_min_depth, h), h, method));
  }
  return pop;
}

GenerationLog record(SearchState& state) {
  GenerationLog entry;
  entry.generation = state.generation;
  double sum = 0.0;
  for (std::size_t i = 0; i < state.population.size(); ++i) {
    const auto& f = state.fitness[i];
    sum += f.fitness;
    if (f.invalid) ++entry.invalid_count;
    if (f.fitness > state.best_fitness) {
      state.best_fitness = f.fitness;
      state.best = state.population[i];
    }
  }
  entry.mean_fitness = sum / static_cast<double>(state.population.size());
  entry.best_fitness = state.best_fitness;
  entry.best_expression = print(state.best);
  return entry;
}

}  // namespace

SearchResult run_search(const SearchConfig& config, const MlpModel& model, const Dataset& data,
                        const ExecPolicy& exec, const GenerationObserver& observer) {
  config.validate();
  if (data.input_dim() != model.input_dim() || data.num_classes != model.num_classes())
    throw Error(ErrorCode::dimension, "dataset does not match the model's input/output sizes");

  AttackSpec spec = config.attack;
  spec.seed = derive_seed(config.seed, {stream::attack});
  FitnessEvaluator evaluator(model, fitness_slice(data, config.fitness_samples, config.seed),
                             spec,
                             make_probe_context(config.probe_rows, model.num_classes(),
                                                config.seed));
  Rng init_rng(derive_seed(config.seed, {stream::init}));
  Rng rng(derive_seed(config.seed, {stream::breeding}));

  SearchState state;
  state.population = ramped_half_and_half(config, init_rng);
  SearchResult result;

  for (int gen = 0;; ++gen) {
    state.generation = gen;
    state.fitness = evaluator.evaluate(state.population, exec);
    result.log.push_back(record(state));
    if (observer) observer(state);
    if (gen == config.generations) break;

    std::vector<double> fit(state.fitness.size());
    for (std::size_t i = 0; i < fit.size(); ++i) fit[i] = state.fitness[i].fitness;
    const auto parents =
        tournament_select(fit, config.population_size, config.tournament_size, rng);
    std::vector<ExprTree> offspring;
    offspring.reserve(parents.size());
    for (auto i : parents) offspring.push_back(state.population[i]);

    std::uniform_real_distribution<double> coin(0.0, 1.0);
    for (std::size_t i = 1; i < offspring.size(); i += 2) {
      if (coin(rng) < config.crossover_rate) {
        auto [a, b] = crossover(offspring[i - 1], offspring[i], rng, config.max_depth);
        offspring[i - 1] = std::move(a);
        offspring[i] = std::move(b);
      }
    }
    for (auto& t : offspring)
      if (coin(rng) < config.mutation_rate)
        t = mutate(t, rng, config.max_depth, config.mutation_max_depth);
    state.population = std::move(offspring);
  }

  result.best = state.best;
  result.best_fitness = state.best_fitness;
  result.fitness_evaluations = evaluator.cache_size();
  return result;
}

}  // namespace advloss
