#pragma once

#include "nbv/core.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace nbv {

// Genome layout for a candidate camera pose.
inline constexpr std::size_t kGenomeSize = 5;
enum Gene : std::size_t { kGeneX = 0, kGeneY = 1, kGeneZ = 2, kGenePitch = 3, kGeneYaw = 4 };

using Genome = std::array<double, kGenomeSize>;

struct Individual {
  Genome genome{};
  std::optional<double> fitness;
};

// Axis-aligned box in genome space. z_min should sit above the scene ground
// so candidate cameras never spawn inside it.
struct PoseBounds {
  Genome lo{};
  Genome hi{};

  bool valid() const {
    for (std::size_t g = 0; g < kGenomeSize; ++g)
      if (!(lo[g] <= hi[g])) return false;
    return true;
  }

  double range(std::size_t gene) const { return hi[gene] - lo[gene]; }

  Genome clamp(Genome g) const {
    for (std::size_t i = 0; i < kGenomeSize; ++i)
      g[i] = std::clamp(g[i], lo[i], hi[i]);
    return g;
  }
};

struct EvolutionConfig {
  int population = 50;
  int generations = 20;
  double crossover_rate = 0.8;
  double mutation_rate = 0.2;
  int tournament_size = 3;
  // Per-gene mutation scale as a fraction of the gene's bound range; ignored
  // when unit_sigma is set, which uses the literal N(0,1) perturbation.
  double sigma_fraction = 0.05;
  bool unit_sigma = false;
  // Probability that each gene of a mutated individual is perturbed.
  double per_gene_mutation_prob = 0.2;
  uint64_t seed = 0;

  bool valid() const {
    return population >= 2 && generations >= 0 && crossover_rate >= 0.0 &&
           crossover_rate <= 1.0 && mutation_rate >= 0.0 && mutation_rate <= 1.0 &&
           tournament_size >= 1;
  }

  Genome sigmas(const PoseBounds& bounds) const {
    Genome s{};
    for (std::size_t g = 0; g < kGenomeSize; ++g)
      s[g] = unit_sigma ? 1.0 : sigma_fraction * bounds.range(g);
    return s;
  }
};

using Rng = std::mt19937_64;

inline std::vector<Individual> initialize(const PoseBounds& bounds,
                                          const EvolutionConfig& cfg, Rng& rng) {
  std::vector<Individual> pop(cfg.population);
  for (Individual& ind : pop) {
    for (std::size_t g = 0; g < kGenomeSize; ++g) {
      std::uniform_real_distribution<double> dist(bounds.lo[g], bounds.hi[g]);
      ind.genome[g] = dist(rng);
    }
  }
  return pop;
}

// Draws `size` members uniformly (with replacement) and returns the fittest.
inline Individual tournament_select(const std::vector<Individual>& pop, int size,
                                    Rng& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, pop.size() - 1);
  std::size_t best = pick(rng);
  if (!pop[best].fitness)
    throw UnevaluatedFitnessError("tournament over unevaluated individual");
  for (int k = 1; k < size; ++k) {
    const std::size_t j = pick(rng);
    if (!pop[j].fitness)
      throw UnevaluatedFitnessError("tournament over unevaluated individual");
    if (*pop[j].fitness > *pop[best].fitness) best = j;
  }
  return pop[best];
}

// Two-point crossover at explicit gene-boundary cuts: genes in [p, q) are
// swapped between the parents.
inline std::pair<Genome, Genome> two_point_crossover(const Genome& a, const Genome& b,
                                                     std::size_t p, std::size_t q) {
  if (p > q || q > kGenomeSize) throw std::invalid_argument("invalid crossover cuts");
  Genome ca = a, cb = b;
  for (std::size_t g = p; g < q; ++g) std::swap(ca[g], cb[g]);
  return {ca, cb};
}

// Cut positions drawn uniformly from the gene boundaries 0..kGenomeSize.
inline std::pair<Genome, Genome> two_point_crossover(const Genome& a, const Genome& b,
                                                     Rng& rng) {
  std::uniform_int_distribution<std::size_t> cut(0, kGenomeSize);
  std::size_t p = cut(rng);
  std::size_t q = cut(rng);
  if (p > q) std::swap(p, q);
  return two_point_crossover(a, b, p, q);
}

// Gaussian mutation: each gene independently perturbed with probability
// `per_gene_prob` by a zero-mean normal with the given per-gene sigma, then
// clamped back into bounds.
inline Genome gaussian_mutate(const Genome& g, const Genome& sigma,
                              double per_gene_prob, const PoseBounds& bounds,
                              Rng& rng) {
  Genome out = g;
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t i = 0; i < kGenomeSize; ++i) {
    if (coin(rng) < per_gene_prob) out[i] += sigma[i] * normal(rng);
  }
  return bounds.clamp(out);
}

struct GenerationStats {
  int generation = 0;
  double max_fitness = 0.0;
  double mean_fitness = 0.0;
  double best_ever = 0.0;
};

struct EvolutionResult {
  Individual best;
  std::vector<GenerationStats> stats;  // one row per generation, 0..N_G
};

// Generational loop: evaluate, tournament-select a full new population, pair
// and crossover with probability rho_c, mutate with probability rho_m.
// Generation 0 is the evaluated random initialization, so `stats` has
// generations + 1 rows. The best-ever individual is tracked outside the
// population (the population itself is not elitist).
template <class FitnessFn>
EvolutionResult evolve(FitnessFn&& fitness, const PoseBounds& bounds,
                       const EvolutionConfig& cfg) {
  if (!bounds.valid()) throw std::invalid_argument("invalid pose bounds");
  if (!cfg.valid()) throw std::invalid_argument("invalid evolution config");

  Rng rng(cfg.seed);
  std::vector<Individual> pop = initialize(bounds, cfg, rng);

  EvolutionResult result;
  result.best.fitness = std::nullopt;

  const Genome sigma = cfg.sigmas(bounds);
  std::uniform_real_distribution<double> coin(0.0, 1.0);

  const auto evaluate_and_record = [&](int generation) {
    // Slots are independent, so parallel evaluation matches the sequential
    // result bit for bit.
    parallel_for(pop.size(), [&](std::size_t i) {
      if (!pop[i].fitness) pop[i].fitness = fitness(pop[i].genome);
    });
    GenerationStats row;
    row.generation = generation;
    row.max_fitness = -std::numeric_limits<double>::infinity();
    double sum = 0.0;
    for (const Individual& ind : pop) {
      row.max_fitness = std::max(row.max_fitness, *ind.fitness);
      sum += *ind.fitness;
      if (!result.best.fitness || *ind.fitness > *result.best.fitness)
        result.best = ind;
    }
    row.mean_fitness = sum / static_cast<double>(pop.size());
    row.best_ever = *result.best.fitness;
    result.stats.push_back(row);
  };

  evaluate_and_record(0);
  for (int gen = 1; gen <= cfg.generations; ++gen) {
    std::vector<Individual> next;
    next.reserve(pop.size());
    for (int i = 0; i < cfg.population; ++i)
      next.push_back(tournament_select(pop, cfg.tournament_size, rng));
    for (std::size_t i = 0; i + 1 < next.size(); i += 2) {
      if (coin(rng) < cfg.crossover_rate) {
        auto [ca, cb] = two_point_crossover(next[i].genome, next[i + 1].genome, rng);
        next[i] = Individual{ca, std::nullopt};
        next[i + 1] = Individual{cb, std::nullopt};
      }
    }
    for (Individual& ind : next) {
      if (coin(rng) < cfg.mutation_rate) {
        ind = Individual{
            gaussian_mutate(ind.genome, sigma, cfg.per_gene_mutation_prob, bounds, rng),
            std::nullopt};
      }
    }
    pop = std::move(next);
    evaluate_and_record(gen);
  }
  return result;
}

// Per-generation stats CSV: generation,max_fitness,mean_fitness
inline void save_generation_stats(const std::string& path,
                                  const std::vector<GenerationStats>& stats) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write stats CSV: " + path);
  out << "generation,max_fitness,mean_fitness\n";
  for (const GenerationStats& s : stats) {
    out << s.generation << ',' << detail::format_double(s.max_fitness) << ','
        << detail::format_double(s.mean_fitness) << '\n';
  }
}

}  // namespace nbv
