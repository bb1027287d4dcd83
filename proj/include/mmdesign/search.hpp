#pragma once

// Genetic-algorithm search over stimulus sequences, either over all
// sequences of length L or over the cyclic class built from a short design.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <utility>
#include <vector>

#include "criteria.hpp"
#include "design.hpp"
#include "errors.hpp"
#include "glsmodel.hpp"
#include "parallel.hpp"

namespace mmdesign {

enum class SpaceKind { full, restricted };

// The searchable design family. In the restricted family the genome is the
// short design of length ceil(L/Q), expanded by cyclic_design().
struct SearchSpace {
    int q_types = 1;
    std::size_t length = 255;
    double isi = 4.0;
    SpaceKind kind = SpaceKind::full;

    std::size_t genome_length() const {
        return kind == SpaceKind::full ? length : short_length(length, q_types);
    }

    Design expand(const std::vector<int>& genome) const {
        if (kind == SpaceKind::full) return {genome, q_types, isi};
        return cyclic_design(genome, q_types, length, isi);
    }

    // Genome carried by an arbitrary design: its prefix, wrapped if short.
    std::vector<int> genome_of(const Design& d) const {
        std::vector<int> g(genome_length());
        for (std::size_t i = 0; i < g.size(); ++i) g[i] = d.labels[i % d.labels.size()];
        return g;
    }
};

struct GaConfig {
    std::size_t population_size = 20;
    std::size_t elite_count = 1;
    std::size_t crossover_pairs = 9;
    double mutation_rate = 0.01;
    std::size_t immigrant_count = 3;
    std::size_t evaluation_budget = 10000;
    std::size_t max_generations = 0;  // 0: evaluation_budget
    std::uint64_t seed = 1;
    unsigned threads = 1;  // 0: default_thread_count()

    void validate() const {
        if (evaluation_budget == 0) throw ConfigError("GA evaluation budget must be positive");
        if (population_size < elite_count + 1) throw ConfigError("population must exceed the elite count");
        if (!(mutation_rate >= 0.0 && mutation_rate <= 1.0)) throw ConfigError("mutation rate must lie in [0, 1]");
    }
};

struct SearchResult {
    Design best_design;
    double best_objective = 0.0;
    std::vector<double> trace;  // best objective after each generation (0 = initial)
    std::size_t evaluations = 0;
    std::size_t generations = 0;
    double wall_seconds = 0.0;
};

using Objective = std::function<double(const Design&)>;

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

namespace detail {

struct Member {
    std::vector<int> genome;
    double fitness;
};

// Fitness descending, then genome ascending: a total order, so selection does
// not depend on evaluation order.
inline bool ranks_before(const Member& a, const Member& b) {
    if (a.fitness != b.fitness) return a.fitness > b.fitness;
    return a.genome < b.genome;
}

class FitnessCache {
public:
    FitnessCache(const Objective& f, const SearchSpace& space, unsigned threads)
        : f_(f), space_(space), threads_(threads) {}

    // Scores all genomes, evaluating the ones not seen before in parallel.
    std::vector<double> score(const std::vector<std::vector<int>>& genomes) {
        std::vector<std::vector<int>> fresh;
        for (const auto& g : genomes)
            if (!cache_.contains(g) && std::find(fresh.begin(), fresh.end(), g) == fresh.end()) fresh.push_back(g);
        std::vector<double> values(fresh.size());
        parallel_for(fresh.size(), threads_, [&](std::size_t i) { values[i] = f_(space_.expand(fresh[i])); });
        for (std::size_t i = 0; i < fresh.size(); ++i) cache_.emplace(fresh[i], values[i]);
        evaluations_ += fresh.size();
        std::vector<double> out;
        out.reserve(genomes.size());
        for (const auto& g : genomes) out.push_back(cache_.at(g));
        return out;
    }

    std::size_t evaluations() const noexcept { return evaluations_; }

private:
    const Objective& f_;
    const SearchSpace& space_;
    unsigned threads_;
    std::map<std::vector<int>, double> cache_;
    std::size_t evaluations_ = 0;
};

}  // namespace detail

// Maximizes `objective` by selection, single-cut crossover, per-position
// mutation and random immigrants, keeping the best population_size distinct
// designs each generation. `knowledge` designs seed the initial population
// and, cyclically rotated, supply immigrants. Deterministic for a given
// seed; the budget is checked once per generation.
inline SearchResult ga_search(const Objective& objective, const SearchSpace& space, const GaConfig& config,
                              const std::vector<Design>& knowledge = {}) {
    config.validate();
    if (space.q_types < 1 || space.length < 1) throw ConfigError("empty search space");
    const auto start = std::chrono::steady_clock::now();
    const std::size_t len = space.genome_length();
    const std::size_t max_gen = config.max_generations ? config.max_generations : config.evaluation_budget;

    std::mt19937_64 rng(config.seed);
    std::uniform_int_distribution<int> label(0, space.q_types);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto random_genome = [&] {
        std::vector<int> g(len);
        for (int& x : g) x = label(rng);
        return g;
    };
    std::vector<std::vector<int>> seeds;
    for (const auto& d : knowledge) {
        auto g = space.genome_of(d);
        for (int& x : g) x = std::clamp(x, 0, space.q_types);
        seeds.push_back(std::move(g));
    }

    detail::FitnessCache cache(objective, space, config.threads);

    std::vector<std::vector<int>> initial;
    for (const auto& g : seeds)
        if (initial.size() < config.population_size && std::find(initial.begin(), initial.end(), g) == initial.end())
            initial.push_back(g);
    while (initial.size() < config.population_size) initial.push_back(random_genome());

    std::vector<detail::Member> population;
    {
        const auto fit = cache.score(initial);
        for (std::size_t i = 0; i < initial.size(); ++i) population.push_back({initial[i], fit[i]});
    }
    auto select_survivors = [&](std::vector<detail::Member> pool) {
        std::sort(pool.begin(), pool.end(), detail::ranks_before);
        std::vector<detail::Member> next;
        for (auto& m : pool) {
            if (next.size() == config.population_size) break;
            if (!next.empty() && next.back().genome == m.genome) continue;
            next.push_back(std::move(m));
        }
        return next;
    };
    population = select_survivors(std::move(population));

    SearchResult result;
    result.trace.push_back(population.front().fitness);

    std::size_t generation = 0;
    while (cache.evaluations() < config.evaluation_budget && generation < max_gen) {
        ++generation;
        // parent weights proportional to fitness (shifted to be nonnegative)
        double lo = population.back().fitness;
        for (const auto& m : population) lo = std::min(lo, m.fitness);
        std::vector<double> cumulative;
        double total = 0.0;
        for (const auto& m : population) {
            total += std::max(0.0, m.fitness - std::min(lo, 0.0));
            cumulative.push_back(total);
        }
        auto pick = [&]() -> std::size_t {
            if (!(total > 0.0)) return static_cast<std::size_t>(unit(rng) * static_cast<double>(population.size())) %
                                       population.size();
            const double u = unit(rng) * total;
            return static_cast<std::size_t>(std::upper_bound(cumulative.begin(), cumulative.end(), u) -
                                            cumulative.begin()) %
                   population.size();
        };

        std::vector<std::vector<int>> offspring;
        for (std::size_t k = 0; k < config.crossover_pairs; ++k) {
            const std::size_t a = pick();
            std::size_t b = pick();
            for (int retry = 0; retry < 4 && b == a && population.size() > 1; ++retry) b = pick();
            std::vector<int> c1 = population[a].genome, c2 = population[b].genome;
            if (len >= 2) {
                std::uniform_int_distribution<std::size_t> cut_dist(1, len - 1);
                const std::size_t cut = cut_dist(rng);
                std::swap_ranges(c1.begin() + static_cast<std::ptrdiff_t>(cut), c1.end(),
                                 c2.begin() + static_cast<std::ptrdiff_t>(cut));
            }
            offspring.push_back(std::move(c1));
            offspring.push_back(std::move(c2));
        }
        for (auto& g : offspring)
            for (int& x : g)
                if (unit(rng) < config.mutation_rate) x = label(rng);
        for (std::size_t k = 0; k < config.immigrant_count; ++k) {
            if (!seeds.empty() && k % 3 == 0) {
                std::uniform_int_distribution<std::size_t> which(0, seeds.size() - 1);
                std::uniform_int_distribution<std::size_t> shift(0, len - 1);
                std::vector<int> g = seeds[which(rng)];
                std::rotate(g.begin(), g.begin() + static_cast<std::ptrdiff_t>(shift(rng)), g.end());
                offspring.push_back(std::move(g));
            } else {
                offspring.push_back(random_genome());
            }
        }

        const auto fit = cache.score(offspring);
        std::vector<detail::Member> pool = population;
        for (std::size_t i = 0; i < offspring.size(); ++i) pool.push_back({std::move(offspring[i]), fit[i]});
        population = select_survivors(std::move(pool));
        result.trace.push_back(population.front().fitness);
    }

    result.best_design = space.expand(population.front().genome);
    result.best_objective = population.front().fitness;
    result.evaluations = cache.evaluations();
    result.generations = generation;
    result.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return result;
}

// Block design (block size 4) and, when a shipped primitive polynomial
// exists for GF(Q+1), the shortest m-sequence covering L (wrapped to L).
inline std::vector<Design> default_knowledge(int q_types, std::size_t length, double isi) {
    std::vector<Design> out;
    for (int degree = 1; degree <= 16; ++degree) {
        try {
            const auto seq = m_sequence(default_primitive_polynomial(q_types + 1, degree));
            if (seq.size() < length) continue;
            out.emplace_back(std::vector<int>(seq.begin(), seq.begin() + static_cast<std::ptrdiff_t>(length)),
                             q_types, isi);
            break;
        } catch (const ConfigError&) {
        }
    }
    if (out.empty()) {
        // fall back to wrapping the longest shipped sequence
        for (int degree = 16; degree >= 1 && out.empty(); --degree) {
            try {
                out.emplace_back(extend_cyclic(m_sequence(default_primitive_polynomial(q_types + 1, degree)), length),
                                 q_types, isi);
            } catch (const ConfigError&) {
            }
        }
    }
    out.push_back(block_design(q_types, 4, length, isi));
    return out;
}

// Per-point objectives over a fixed evaluator.
inline Objective maximin_objective(const Evaluator& ev, ThetaList thetas) {
    return [&ev, thetas = std::move(thetas)](const Design& d) { return min_phi_a(ev, d, thetas).value; };
}

inline Objective maximin_efficiency_objective(const Evaluator& ev, ThetaList thetas, std::vector<double> denominators) {
    return [&ev, thetas = std::move(thetas), den = std::move(denominators)](const Design& d) {
        return min_re(ev, ev.prepare(d), thetas, den).value;
    };
}

inline Objective local_objective(const Evaluator& ev, ThetaVector theta, std::size_t p_index) {
    return [&ev, theta = std::move(theta), p_index](const Design& d) {
        const PreparedDesign pd = ev.prepare(d);
        return ev.phi_a(pd, ev.moments(pd, p_index), theta, p_index);
    };
}

// Locally optimal designs for every (theta, p) of the grid, one GA per point
// in grid order. Each search is seeded with the knowledge designs, the best
// design of the previous point and any design already stored for the point;
// the result is merged into `table` (larger Phi_A wins).
inline void build_local_opt_table(const Evaluator& ev, const ThetaList& thetas, const SearchSpace& space,
                                  const GaConfig& config, const std::vector<Design>& knowledge, LocalOptTable& table,
                                  const std::function<void(std::size_t, std::size_t)>& progress = {}) {
    const std::size_t total = ev.point_count() * thetas.size();
    std::optional<Design> previous;
    std::size_t index = 0;
    for (std::size_t i = 0; i < ev.point_count(); ++i) {
        for (const auto& theta : thetas) {
            std::vector<Design> seeds = knowledge;
            if (previous) seeds.insert(seeds.begin(), *previous);
            if (const auto* stored = table.find(theta, ev.points()[i]))
                seeds.insert(seeds.begin(), Design(stored->design, space.q_types, space.isi));
            GaConfig local = config;
            local.seed = splitmix64(config.seed ^ splitmix64(index));
            const SearchResult r = ga_search(local_objective(ev, theta, i), space, local, seeds);
            table.merge({theta, ev.points()[i], r.best_objective, r.best_design.labels});
            previous = r.best_design;
            ++index;
            if (progress) progress(index, total);
        }
    }
}

inline LocalOptTable build_local_opt_table(const Evaluator& ev, const ThetaList& thetas, const SearchSpace& space,
                                           const GaConfig& config, const std::vector<Design>& knowledge = {}) {
    LocalOptTable table;
    build_local_opt_table(ev, thetas, space, config, knowledge, table);
    return table;
}

}  // namespace mmdesign
