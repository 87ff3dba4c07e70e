#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace fractune {

// one independent stream per (seed, generation, slot); schedule independent
std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t generation, std::uint64_t slot);

namespace ga {

using Genes = std::vector<double>;
using Bounds = std::vector<std::pair<double, double>>;
using Objective = std::function<double(const Genes&)>;

struct GAConfig {
    int pop_size = 20;
    int elite_count = 2;
    double crossover_fraction = 0.8;
    double mutation_fraction = 0.2;  // informational: mutation children = the rest
    Bounds bounds;
    Bounds init_bounds;  // empty -> bounds
    std::vector<Genes> initial_population;  // optional seeds, override the first rows
    int max_generations = 100;
    int stall_generations = 20;
    double objective_tolerance = 1e-9;
    double fitness_limit = -std::numeric_limits<double>::infinity();
    double mutation_scale_start = 0.1;
    double mutation_scale_end = 0.01;
    std::uint64_t seed = 0;
    int threads = 1;

    void validate() const;
};

struct Individual {
    Genes genes;
    double raw_objective = std::numeric_limits<double>::infinity();
    double scaled_fitness = 0.0;
};

struct GenerationStats {
    int generation;
    double best;
    double median;
};

struct GAResult {
    Genes best_genes;
    double best_objective;
    std::vector<GenerationStats> history;
    std::vector<Individual> final_population;
    std::string stop_reason;
};

std::vector<double> rank_scale(std::span<const double> raw);
std::vector<std::size_t> select_stochastic_uniform(std::span<const double> fitness, std::size_t n,
                                                   std::mt19937_64& rng);
Genes scattered_crossover(const Genes& p1, const Genes& p2, std::mt19937_64& rng);
Genes scattered_crossover(const Genes& p1, const Genes& p2, const std::vector<bool>& mask);
// σ_i = scale·(hi_i − lo_i) over `span_bounds`, result clipped to `bounds`
Genes gaussian_mutate(const Genes& p, double scale, const Bounds& bounds, std::mt19937_64& rng,
                      const Bounds& span_bounds = {});

double mutation_scale(const GAConfig& cfg, int generation);

// called once per evaluated generation with the whole population
using GenerationObserver = std::function<void(int, const std::vector<Individual>&)>;

GAResult run_ga(const Objective& objective, const GAConfig& cfg, const GenerationObserver& observe = {});

void write_history_csv(const std::string& path, const std::vector<GenerationStats>& h);

}  // namespace ga
}  // namespace fractune
