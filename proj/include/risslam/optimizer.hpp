#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "risslam/channel.hpp"
#include "risslam/rng.hpp"

namespace risslam {

/// Maps a candidate phase configuration to the position CRLB (m^2) of the
/// scene context it was built for. Unobservable geometry returns +inf.
using CrlbEvaluator = std::function<double(const PhaseConfig&)>;

struct Individual {
    std::vector<int> genes;  // levels in {1..H}, length N*M
    double adaptability = -1.0;
    bool evaluated = false;
};

struct GaConfig {
    int population = 32;      // K
    int elites = 4;           // Q; K - Q must be even
    int iterations = 40;      // C^A
    double mutation_p = 0.05; // p_m
    bool warm_start = true;   // reuse the previous cycle's population
    std::uint64_t seed = 1;

    void validate() const;
};

struct GaResult {
    PhaseConfig best;
    double best_adaptability = 0.0;
    std::vector<double> trace;  // best adaptability per iteration (non-decreasing)
};

// Eq.-(11) adaptability: 1 / position CRLB, with failures mapped to 0.
double adaptability(const std::vector<int>& genes, int rows, int cols, int levels,
                    const CrlbEvaluator& eval);

// Top-Q individuals by adaptability; ties broken by lexicographic gene order.
// Returns indices into the population.
std::vector<int> select_elites(const std::vector<Individual>& population, int q);

// Suffix exchange at a crossover point drawn uniformly from [1, MN].
void crossover(const Individual& parent_a, const Individual& parent_b, Rng& rng,
               Individual& child_a, Individual& child_b);

// Each gene independently resampled uniformly over {1..H} with probability p_m.
void mutate(Individual& child, double p_m, int levels, Rng& rng);

// CRLB-GA: Selection -> Gene cross -> Gene mutation with elitism, returning
// the best configuration ever evaluated. `population` persists across calls
// when warm-starting; pass an empty vector for a cold start.
GaResult optimize_phases(int rows, int cols, int levels, const CrlbEvaluator& eval,
                         const GaConfig& cfg, std::vector<Individual>& population);

// Global optimum by enumeration; throws ScenarioError when H^(N*M) > 1e6.
GaResult exhaustive_search(int rows, int cols, int levels, const CrlbEvaluator& eval);

}  // namespace risslam
