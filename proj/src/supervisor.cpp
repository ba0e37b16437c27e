#include "navguard/supervisor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "navguard/errors.hpp"

namespace navguard::supervisor {

double fuzzy_radius(double v, const FuzzyParams& p) {
  double dv_low = v - FuzzyParams::kCenterVLow;
  double dv_high = v - FuzzyParams::kCenterVHigh;
  double mu_low = std::exp(-dv_low * dv_low / (2.0 * p.sigma_v_low * p.sigma_v_low));
  double mu_high =
      std::exp(-dv_high * dv_high / (2.0 * p.sigma_v_high * p.sigma_v_high));
  return (mu_low * FuzzyParams::kCenterRSmall +
          mu_high * FuzzyParams::kCenterRBig) /
         (mu_low + mu_high);
}

Policy supervise_step(double obstacle_distance, double v,
                      const FuzzyParams& params, SupervisorState& state) {
  if (obstacle_distance < kCriticalDistance) state.critical_count++;

  Policy choice;
  if (obstacle_distance < kBackoffDistance) {
    // Hard reflex, overrides everything including hysteresis.
    choice = Policy::kBackoff;
  } else {
    Policy desired = obstacle_distance < fuzzy_radius(v, params)
                         ? Policy::kSafe
                         : Policy::kNeural;
    Policy previous = state.active_policy == Policy::kBackoff
                          ? Policy::kSafe  // leaving backoff resumes cautiously
                          : state.active_policy;
    if (state.hysteresis_enabled && state.hysteresis_ticks > 0 &&
        desired != previous) {
      choice = previous;  // debounce: hold the last planner briefly
    } else {
      choice = desired;
    }
  }

  if (choice != Policy::kBackoff) {
    Policy prev_nb = state.active_policy == Policy::kBackoff
                         ? Policy::kSafe
                         : state.active_policy;
    if (choice != prev_nb) {
      state.switch_count++;
      state.hysteresis_ticks = kHysteresisTicks;
    } else if (state.hysteresis_ticks > 0) {
      state.hysteresis_ticks--;
    }
  }
  state.active_policy = choice;
  return choice;
}

FuzzyParams genome_params(const Genome& g) {
  FuzzyParams p;
  p.sigma_v_low = g[0];
  p.sigma_v_high = g[1];
  p.sigma_r_small = g[2];
  p.sigma_r_big = g[3];
  return p;
}

bool dominates(const Objectives& a, const Objectives& b) {
  bool no_worse = a.switches <= b.switches && a.criticals <= b.criticals;
  bool better = a.switches < b.switches || a.criticals < b.criticals;
  return no_worse && better;
}

Objectives evaluate_genome(const Genome& genome, const nn::PolicyBundle& bundle,
                           rl::NavEnv& env, const GenomeEvalConfig& cfg) {
  Objectives total;
  int episodes = 0;
  for (uint64_t seed : cfg.seeds) {
    rl::EvalOptions opt;
    opt.source = rl::PolicySource::kNeuralSupervised;
    opt.n_steps = cfg.episodes_per_seed * cfg.horizon;
    opt.horizon_steps = cfg.horizon;
    opt.action_noise = cfg.action_noise;
    opt.fuzzy = {genome[0], genome[1], genome[2], genome[3]};
    rl::EvalResult res = rl::evaluate_policy(bundle, env, opt, seed);
    // n_steps caps total ticks, so the episode count is bounded; average
    // over the episodes actually run.
    total.switches += res.switches;
    total.criticals += res.criticals;
    episodes += static_cast<int>(res.episodes.size());
  }
  if (episodes > 0) {
    total.switches /= episodes;
    total.criticals /= episodes;
  }
  return total;
}

void non_dominated_sort(std::vector<Individual>& pop) {
  size_t n = pop.size();
  std::vector<std::vector<size_t>> dominated(n);
  std::vector<int> dom_count(n, 0);
  std::vector<size_t> current;
  for (size_t i = 0; i < n; i++) {
    for (size_t j = 0; j < n; j++) {
      if (i == j) continue;
      if (dominates(pop[i].objectives, pop[j].objectives))
        dominated[i].push_back(j);
      else if (dominates(pop[j].objectives, pop[i].objectives))
        dom_count[i]++;
    }
    if (dom_count[i] == 0) {
      pop[i].rank = 0;
      current.push_back(i);
    }
  }
  int rank = 0;
  while (!current.empty()) {
    std::vector<size_t> next;
    for (size_t i : current) {
      for (size_t j : dominated[i]) {
        if (--dom_count[j] == 0) {
          pop[j].rank = rank + 1;
          next.push_back(j);
        }
      }
    }
    rank++;
    current = std::move(next);
  }
}

void crowding_distance(std::vector<Individual*>& front) {
  const double kInf = std::numeric_limits<double>::infinity();
  for (Individual* ind : front) ind->crowding = 0.0;
  size_t n = front.size();
  if (n <= 2) {
    for (Individual* ind : front) ind->crowding = kInf;
    return;
  }
  auto process = [&](auto key) {
    std::sort(front.begin(), front.end(), [&](Individual* a, Individual* b) {
      return key(*a) < key(*b);
    });
    front.front()->crowding = kInf;
    front.back()->crowding = kInf;
    double span = key(*front.back()) - key(*front.front());
    if (span <= 0.0) return;
    for (size_t i = 1; i + 1 < n; i++)
      front[i]->crowding += (key(*front[i + 1]) - key(*front[i - 1])) / span;
  };
  process([](const Individual& i) { return i.objectives.switches; });
  process([](const Individual& i) { return i.objectives.criticals; });
}

namespace {

// Simulated binary crossover, per gene.
std::pair<double, double> sbx(double a, double b, double eta, double lo,
                              double hi, Rng& rng) {
  if (std::abs(a - b) < 1e-14) return {a, b};
  double u = rng.uniform();
  double beta = u <= 0.5 ? std::pow(2.0 * u, 1.0 / (eta + 1.0))
                         : std::pow(1.0 / (2.0 * (1.0 - u)), 1.0 / (eta + 1.0));
  double c1 = 0.5 * ((a + b) - beta * std::abs(b - a));
  double c2 = 0.5 * ((a + b) + beta * std::abs(b - a));
  return {clampd(c1, lo, hi), clampd(c2, lo, hi)};
}

double polynomial_mutation(double x, double eta, double lo, double hi,
                           Rng& rng) {
  double u = rng.uniform();
  double delta;
  if (u < 0.5)
    delta = std::pow(2.0 * u, 1.0 / (eta + 1.0)) - 1.0;
  else
    delta = 1.0 - std::pow(2.0 * (1.0 - u), 1.0 / (eta + 1.0));
  return clampd(x + delta * (hi - lo), lo, hi);
}

const Individual& tournament(const std::vector<Individual>& pop, Rng& rng) {
  const Individual& a = pop[rng.uniform_index(pop.size())];
  const Individual& b = pop[rng.uniform_index(pop.size())];
  if (a.rank != b.rank) return a.rank < b.rank ? a : b;
  return a.crowding >= b.crowding ? a : b;
}

void rank_population(std::vector<Individual>& pop) {
  non_dominated_sort(pop);
  int max_rank = 0;
  for (const Individual& i : pop) max_rank = std::max(max_rank, i.rank);
  for (int r = 0; r <= max_rank; r++) {
    std::vector<Individual*> front;
    for (Individual& i : pop)
      if (i.rank == r) front.push_back(&i);
    crowding_distance(front);
  }
}

GenerationStats stats_of(int gen, const std::vector<Individual>& pop) {
  GenerationStats s;
  s.generation = gen;
  for (const Individual& i : pop) {
    s.switches_mean += i.objectives.switches;
    s.criticals_mean += i.objectives.criticals;
  }
  if (!pop.empty()) {
    s.switches_mean /= pop.size();
    s.criticals_mean /= pop.size();
  }
  s.population = pop;
  return s;
}

}  // namespace

Nsga2Result nsga2_run(const Nsga2Config& cfg, const GenomeEvaluator& eval,
                      uint64_t seed, bool parallel_eval) {
  if (cfg.population_size % 2 != 0)
    throw ConfigError("NSGA-II population size must be even");
  Rng rng(Rng::derive(seed, 0x65A2));

  auto evaluate_all = [&](std::vector<Individual>& group) {
    int n = static_cast<int>(group.size());
    if (parallel_eval) {
#pragma omp parallel for schedule(dynamic)
      for (int i = 0; i < n; i++) group[i].objectives = eval(group[i].genome);
    } else {
      for (int i = 0; i < n; i++) group[i].objectives = eval(group[i].genome);
    }
  };

  std::vector<Individual> pop(cfg.population_size);
  for (int i = 0; i < cfg.population_size; i++) {
    for (double& g : pop[i].genome) g = rng.uniform(cfg.lo, cfg.hi);
  }
  // One seeded mid-range individual.
  pop[0].genome = {0.5, 0.5, 0.5, 0.5};
  evaluate_all(pop);
  rank_population(pop);

  Nsga2Result result;
  result.history.push_back(stats_of(0, pop));

  for (int gen = 1; gen <= cfg.generations; gen++) {
    std::vector<Individual> offspring;
    offspring.reserve(cfg.population_size);
    while (static_cast<int>(offspring.size()) < cfg.population_size) {
      Genome p1 = tournament(pop, rng).genome;
      Genome p2 = tournament(pop, rng).genome;
      Genome c1 = p1, c2 = p2;
      for (size_t g = 0; g < c1.size(); g++) {
        if (rng.uniform() < 0.9) {
          auto [x, y] = sbx(p1[g], p2[g], cfg.eta_crossover, cfg.lo, cfg.hi, rng);
          c1[g] = x;
          c2[g] = y;
        }
        if (rng.uniform() < cfg.mutation_prob)
          c1[g] = polynomial_mutation(c1[g], cfg.eta_mutation, cfg.lo, cfg.hi, rng);
        if (rng.uniform() < cfg.mutation_prob)
          c2[g] = polynomial_mutation(c2[g], cfg.eta_mutation, cfg.lo, cfg.hi, rng);
      }
      offspring.push_back({c1, {}, 0, 0.0});
      offspring.push_back({c2, {}, 0, 0.0});
    }
    evaluate_all(offspring);

    // Elitist environmental selection over the union.
    std::vector<Individual> merged = pop;
    merged.insert(merged.end(), offspring.begin(), offspring.end());
    rank_population(merged);
    std::stable_sort(merged.begin(), merged.end(),
                     [](const Individual& a, const Individual& b) {
                       if (a.rank != b.rank) return a.rank < b.rank;
                       return a.crowding > b.crowding;
                     });
    merged.resize(cfg.population_size);
    pop = std::move(merged);
    rank_population(pop);
    result.history.push_back(stats_of(gen, pop));
  }

  for (const Individual& i : pop)
    if (i.rank == 0) result.front.push_back(i);
  return result;
}

}  // namespace navguard::supervisor
