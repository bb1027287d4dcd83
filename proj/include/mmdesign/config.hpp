#pragma once

// Experiment configuration: one JSON document per experiment. Missing keys
// keep their defaults; unknown keys are rejected.

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "criteria.hpp"
#include "errors.hpp"
#include "glsmodel.hpp"
#include "search.hpp"

namespace mmdesign {

struct ExperimentConfig {
    Experiment experiment;
    GridResolution grid = kSearchGrid;
    std::string grid_name = "search";
    GridResolution eval_grid = kComparisonGrid;  // final evaluation of search results
    std::string eval_grid_name = "comparison";
    bool reduced_theta = false;  // Theta_0 instead of the full hemisphere (Q in {2, 3})
    SpaceKind space = SpaceKind::full;
    GaConfig ga;
    std::vector<std::uint64_t> seeds{1};
    unsigned threads = 0;
    std::string out_dir = ".";

    void validate() const {
        experiment.validate();
        ga.validate();
        for (const auto* g : {&grid, &eval_grid})
            if (!(g->p_step > 0.0) || !(g->phi_step > 0.0)) throw ConfigError("grid steps must be positive");
        if (seeds.empty()) throw ConfigError("at least one seed is required");
        if (reduced_theta && experiment.q_types != 2 && experiment.q_types != 3)
            throw ConfigError("the reduced theta region is defined for Q = 2 and Q = 3 only");
    }

    SearchSpace search_space() const {
        return {experiment.q_types, experiment.length, experiment.isi, space};
    }

    std::vector<hrf::HrfParams> p_points(const GridResolution& g) const { return p_grid(g.p_step); }
    std::vector<hrf::HrfParams> p_points() const { return p_points(grid); }

    ThetaList thetas(const GridResolution& g) const {
        return reduced_theta ? theta0_grid(experiment.q_types, g.phi_step)
                             : full_theta_grid(experiment.q_types, g.phi_step);
    }
    ThetaList thetas() const { return thetas(grid); }
};

inline GridResolution grid_preset(const std::string& name) {
    if (name == "search") return kSearchGrid;
    if (name == "comparison") return kComparisonGrid;
    throw ConfigError("unknown grid preset '" + name + "' (expected search or comparison)");
}

inline SpaceKind space_kind(const std::string& name) {
    if (name == "xi") return SpaceKind::full;
    if (name == "xi0") return SpaceKind::restricted;
    throw ConfigError("unknown design space '" + name + "' (expected xi or xi0)");
}

namespace detail {

inline void check_keys(const nlohmann::json& j, const std::set<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) throw ParseError(where + " must be a JSON object");
    for (const auto& [k, v] : j.items())
        if (!allowed.contains(k)) throw ConfigError("unknown key '" + k + "' in " + where);
}

template <class T>
void read_key(const nlohmann::json& j, const char* key, T& into) {
    if (!j.contains(key)) return;
    try {
        into = j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
    }
}

// A preset name or {"p_step", "phi_step"}.
inline void read_grid(const nlohmann::json& j, const char* key, GridResolution& grid, std::string& name) {
    if (!j.contains(key)) return;
    const auto& g = j.at(key);
    if (g.is_string()) {
        name = g.get<std::string>();
        grid = grid_preset(name);
        return;
    }
    check_keys(g, {"p_step", "phi_step"}, key);
    read_key(g, "p_step", grid.p_step);
    read_key(g, "phi_step", grid.phi_step);
    name = "custom";
}

inline nlohmann::json grid_to_json(const GridResolution& g, const std::string& name) {
    if (name == "search" || name == "comparison") return name;
    return {{"p_step", g.p_step}, {"phi_step", g.phi_step}};
}

}  // namespace detail

// Keys: q, length, isi, tr, rho, drift_order, runs, run_shift, grid and
// eval_grid ("search" | "comparison" | {"p_step", "phi_step"}), theta ("full" |
// "reduced"), space ("xi" | "xi0"), seeds, threads, out, and ga {population,
// elite, crossover_pairs, mutation_rate, immigrants, budget,
// max_generations}.
inline ExperimentConfig config_from_json(const nlohmann::json& j) {
    detail::check_keys(j,
                       {"q", "length", "isi", "tr", "rho", "drift_order", "runs", "run_shift", "grid", "eval_grid", "theta",
                        "space", "seeds", "threads", "out", "ga"},
                       "config");
    ExperimentConfig c;
    auto& ex = c.experiment;
    detail::read_key(j, "q", ex.q_types);
    detail::read_key(j, "length", ex.length);
    detail::read_key(j, "isi", ex.isi);
    detail::read_key(j, "tr", ex.tr);
    detail::read_key(j, "rho", ex.noise.rho);
    detail::read_key(j, "drift_order", ex.drift.order);
    detail::read_key(j, "runs", ex.noise.runs);
    detail::read_key(j, "run_shift", ex.run_shift);
    detail::read_grid(j, "grid", c.grid, c.grid_name);
    detail::read_grid(j, "eval_grid", c.eval_grid, c.eval_grid_name);
    if (j.contains("theta")) {
        std::string t;
        detail::read_key(j, "theta", t);
        if (t != "full" && t != "reduced") throw ConfigError("theta must be 'full' or 'reduced'");
        c.reduced_theta = t == "reduced";
    }
    if (j.contains("space")) {
        std::string s;
        detail::read_key(j, "space", s);
        c.space = space_kind(s);
    }
    detail::read_key(j, "seeds", c.seeds);
    detail::read_key(j, "threads", c.threads);
    detail::read_key(j, "out", c.out_dir);
    if (j.contains("ga")) {
        const auto& g = j.at("ga");
        detail::check_keys(g,
                           {"population", "elite", "crossover_pairs", "mutation_rate", "immigrants", "budget",
                            "max_generations"},
                           "ga");
        detail::read_key(g, "population", c.ga.population_size);
        detail::read_key(g, "elite", c.ga.elite_count);
        detail::read_key(g, "crossover_pairs", c.ga.crossover_pairs);
        detail::read_key(g, "mutation_rate", c.ga.mutation_rate);
        detail::read_key(g, "immigrants", c.ga.immigrant_count);
        detail::read_key(g, "budget", c.ga.evaluation_budget);
        detail::read_key(g, "max_generations", c.ga.max_generations);
    }
    return c;
}

inline ExperimentConfig parse_config(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        int line = 1;
        for (std::size_t i = 0; i < e.byte && i < text.size(); ++i) line += text[i] == '\n';
        throw ParseError(std::string("config: ") + e.what(), line);
    }
    return config_from_json(j);
}

inline nlohmann::json config_to_json(const ExperimentConfig& c) {
    nlohmann::json j;
    const auto& ex = c.experiment;
    j["q"] = ex.q_types;
    j["length"] = ex.length;
    j["isi"] = ex.isi;
    j["tr"] = ex.tr;
    j["rho"] = ex.noise.rho;
    j["drift_order"] = ex.drift.order;
    j["runs"] = ex.noise.runs;
    j["run_shift"] = ex.run_shift;
    j["grid"] = detail::grid_to_json(c.grid, c.grid_name);
    j["eval_grid"] = detail::grid_to_json(c.eval_grid, c.eval_grid_name);
    j["theta"] = c.reduced_theta ? "reduced" : "full";
    j["space"] = c.space == SpaceKind::full ? "xi" : "xi0";
    j["seeds"] = c.seeds;
    j["ga"] = {{"population", c.ga.population_size},   {"elite", c.ga.elite_count},
               {"crossover_pairs", c.ga.crossover_pairs}, {"mutation_rate", c.ga.mutation_rate},
               {"immigrants", c.ga.immigrant_count},    {"budget", c.ga.evaluation_budget},
               {"max_generations", c.ga.max_generations}};
    return j;
}

}  // namespace mmdesign
