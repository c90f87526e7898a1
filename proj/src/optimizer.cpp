#include "risslam/optimizer.hpp"

#include <algorithm>
#include <cmath>

namespace risslam {

void GaConfig::validate() const {
    if (elites <= 0 || elites >= population) {
        throw ScenarioError("GA: need 0 < elites < population");
    }
    if ((population - elites) % 2 != 0) {
        throw ScenarioError("GA: population minus elites must be even");
    }
    if (mutation_p < 0.0 || mutation_p > 1.0) {
        throw ScenarioError("GA: mutation probability out of range");
    }
}

namespace {

PhaseConfig to_config(const std::vector<int>& genes, int rows, int cols, int levels) {
    PhaseConfig c;
    c.rows = rows;
    c.cols = cols;
    c.levels = levels;
    c.h = genes;
    return c;
}

void evaluate(Individual& ind, int rows, int cols, int levels,
              const CrlbEvaluator& eval) {
    if (ind.evaluated) return;
    ind.adaptability = adaptability(ind.genes, rows, cols, levels, eval);
    ind.evaluated = true;
}

// Fitness-proportional index draw via cumulative-sum inversion; uniform when
// the population has zero total fitness.
int sample_parent(const std::vector<Individual>& pop, double total, Rng& rng) {
    if (total <= 0.0) {
        return rng.uniform_int(0, static_cast<int>(pop.size()) - 1);
    }
    const double u = rng.uniform01() * total;
    double acc = 0.0;
    for (int i = 0; i < static_cast<int>(pop.size()); ++i) {
        acc += pop[i].adaptability;
        if (u < acc) return i;
    }
    return static_cast<int>(pop.size()) - 1;
}

}  // namespace

double adaptability(const std::vector<int>& genes, int rows, int cols, int levels,
                    const CrlbEvaluator& eval) {
    const double crlb = eval(to_config(genes, rows, cols, levels));
    if (!std::isfinite(crlb) || crlb <= 0.0) return 0.0;
    return 1.0 / crlb;
}

std::vector<int> select_elites(const std::vector<Individual>& population, int q) {
    std::vector<int> idx(population.size());
    for (int i = 0; i < static_cast<int>(idx.size()); ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](int a, int b) {
        if (population[a].adaptability != population[b].adaptability) {
            return population[a].adaptability > population[b].adaptability;
        }
        return population[a].genes < population[b].genes;
    });
    idx.resize(std::min<std::size_t>(q, idx.size()));
    return idx;
}

void crossover(const Individual& parent_a, const Individual& parent_b, Rng& rng,
               Individual& child_a, Individual& child_b) {
    const int n = static_cast<int>(parent_a.genes.size());
    child_a = parent_a;
    child_b = parent_b;
    child_a.evaluated = false;
    child_b.evaluated = false;
    if (n == 0) return;
    const int i = rng.uniform_int(1, n);  // genes i..MN exchanged (1-based)
    for (int g = i - 1; g < n; ++g) {
        std::swap(child_a.genes[g], child_b.genes[g]);
    }
}

void mutate(Individual& child, double p_m, int levels, Rng& rng) {
    for (int& g : child.genes) {
        if (rng.uniform01() < p_m) {
            g = rng.uniform_int(1, levels);
        }
    }
    child.evaluated = false;
}

GaResult optimize_phases(int rows, int cols, int levels, const CrlbEvaluator& eval,
                         const GaConfig& cfg, std::vector<Individual>& population) {
    cfg.validate();
    const int n_genes = rows * cols;
    Rng rng(mix_seed(cfg.seed, 0x67615f6fULL));

    if (!cfg.warm_start || static_cast<int>(population.size()) != cfg.population ||
        (n_genes > 0 && !population.empty() &&
         static_cast<int>(population.front().genes.size()) != n_genes)) {
        population.clear();
        population.resize(cfg.population);
        for (auto& ind : population) {
            ind.genes.resize(n_genes);
            for (int& g : ind.genes) g = rng.uniform_int(1, levels);
            ind.evaluated = false;
        }
    } else {
        // Warm start: context changed since last cycle, fitness is stale.
        for (auto& ind : population) ind.evaluated = false;
    }

    GaResult result;
    result.best_adaptability = -1.0;
    result.trace.reserve(cfg.iterations);

    for (int it = 0; it < cfg.iterations; ++it) {
        for (auto& ind : population) evaluate(ind, rows, cols, levels, eval);

        double total = 0.0;
        for (const auto& ind : population) total += ind.adaptability;

        const std::vector<int> elite_idx = select_elites(population, cfg.elites);
        const Individual& iter_best = population[elite_idx.front()];
        if (iter_best.adaptability > result.best_adaptability) {
            result.best_adaptability = iter_best.adaptability;
            result.best = to_config(iter_best.genes, rows, cols, levels);
        }
        // Population maximum; elitism makes this non-decreasing.
        result.trace.push_back(iter_best.adaptability);

        std::vector<Individual> next;
        next.reserve(cfg.population);
        for (int e : elite_idx) next.push_back(population[e]);

        const int pairs = (cfg.population - cfg.elites) / 2;
        for (int p = 0; p < pairs; ++p) {
            const int a = sample_parent(population, total, rng);
            const int b = sample_parent(population, total, rng);
            Individual ca, cb;
            crossover(population[a], population[b], rng, ca, cb);
            mutate(ca, cfg.mutation_p, levels, rng);
            mutate(cb, cfg.mutation_p, levels, rng);
            next.push_back(std::move(ca));
            next.push_back(std::move(cb));
        }
        population = std::move(next);
    }

    // Final population sweep so the returned best covers the last generation.
    for (auto& ind : population) evaluate(ind, rows, cols, levels, eval);
    for (const auto& ind : population) {
        if (ind.adaptability > result.best_adaptability) {
            result.best_adaptability = ind.adaptability;
            result.best = to_config(ind.genes, rows, cols, levels);
        }
    }
    if (result.best.h.empty() && n_genes >= 0) {
        result.best = to_config(population.empty() ? std::vector<int>(n_genes, levels)
                                                   : population.front().genes,
                                rows, cols, levels);
    }
    return result;
}

GaResult exhaustive_search(int rows, int cols, int levels, const CrlbEvaluator& eval) {
    const int n = rows * cols;
    double count = std::pow(static_cast<double>(levels), n);
    if (count > 1e6) {
        throw ScenarioError("exhaustive search space exceeds 1e6 configurations");
    }

    GaResult result;
    result.best_adaptability = -1.0;
    std::vector<int> genes(n, 1);
    const long long total = static_cast<long long>(count);
    for (long long idx = 0; idx < total; ++idx) {
        long long v = idx;
        for (int g = 0; g < n; ++g) {
            genes[g] = 1 + static_cast<int>(v % levels);
            v /= levels;
        }
        const double fit = adaptability(genes, rows, cols, levels, eval);
        if (fit > result.best_adaptability ||
            (fit == result.best_adaptability && genes < result.best.h)) {
            result.best_adaptability = fit;
            result.best = to_config(genes, rows, cols, levels);
        }
    }
    result.trace.push_back(result.best_adaptability);
    return result;
}

}  // namespace risslam
