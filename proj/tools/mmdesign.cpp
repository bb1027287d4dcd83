// mmdesign: command-line front end for evaluating and searching maximin and
// maximin-efficient event-related fMRI designs.
//
// Exit codes: 0 success, 2 configuration error (including a table that does
// not cover the grid), 3 input parse error, 4 numerical failure.

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "mmdesign/mmdesign.hpp"

namespace fs = std::filesystem;
using namespace mmdesign;
using nlohmann::json;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitParse = 3;
constexpr int kExitNumerical = 4;

// Values of the shared flags; `given` tells whether a flag was on the
// command line (flags override config keys).
struct Flags {
    std::string config;
    std::vector<std::uint64_t> seeds;
    std::string grid, eval_grid, space, theta, table, out;
    unsigned threads = 0;
    int q = 1;
    std::size_t length = 255;
    double isi = 4.0, tr = 2.0, rho = 0.3, run_shift = 1.25;
    int runs = 1, drift_order = 2;
    std::size_t budget = 10000;
    CLI::App* app = nullptr;

    bool given(const std::string& name) const { return app->get_option(name)->count() > 0; }
};

ExperimentConfig resolve_config(const Flags& f, const ExperimentConfig& base) {
    ExperimentConfig c = base;
    if (!f.config.empty()) {
        const std::string text = io::read_file(f.config);
        parse_config(text);  // syntax and key check, with line numbers
        json merged = config_to_json(base);
        merged["threads"] = base.threads;
        merged["out"] = base.out_dir;
        merged.merge_patch(json::parse(text));
        c = config_from_json(merged);
    }
    auto& ex = c.experiment;
    if (f.given("--seed")) c.seeds = f.seeds;
    if (f.given("--grid")) {
        c.grid = grid_preset(f.grid);
        c.grid_name = f.grid;
    }
    if (f.given("--eval-grid")) {
        c.eval_grid = grid_preset(f.eval_grid);
        c.eval_grid_name = f.eval_grid;
    }
    if (f.given("--space")) c.space = space_kind(f.space);
    if (f.given("--theta")) c.reduced_theta = f.theta == "reduced";
    if (f.given("--out")) c.out_dir = f.out;
    if (f.given("--threads")) c.threads = f.threads;
    if (f.given("--q")) ex.q_types = f.q;
    if (f.given("--length")) ex.length = f.length;
    if (f.given("--isi")) ex.isi = f.isi;
    if (f.given("--tr")) ex.tr = f.tr;
    if (f.given("--rho")) ex.noise.rho = f.rho;
    if (f.given("--runs")) ex.noise.runs = f.runs;
    if (f.given("--run-shift")) ex.run_shift = f.run_shift;
    if (f.given("--drift-order")) ex.drift.order = f.drift_order;
    if (f.given("--budget")) c.ga.evaluation_budget = f.budget;
    if (c.threads == 0) c.threads = default_thread_count();
    c.ga.threads = c.threads;
    c.validate();
    return c;
}

// Wall clock, CPU time and start timestamp, written apart from the
// reproducible outputs.
class Metadata {
public:
    explicit Metadata(std::string command)
        : command_(std::move(command)),
          started_(std::chrono::system_clock::now()),
          wall0_(std::chrono::steady_clock::now()),
          cpu0_(std::clock()) {}

    json& extra() { return extra_; }

    void write(const std::string& dir, unsigned threads) const {
        const std::time_t t = std::chrono::system_clock::to_time_t(started_);
        char stamp[32];
        std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
        json j = extra_;
        j["command"] = command_;
        j["started_utc"] = stamp;
        j["wall_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0_).count();
        j["cpu_seconds"] = static_cast<double>(std::clock() - cpu0_) / CLOCKS_PER_SEC;
        j["threads"] = threads;
        io::write_file((fs::path(dir) / "metadata.json").string(), j.dump(2) + "\n");
    }

private:
    std::string command_;
    std::chrono::system_clock::time_point started_;
    std::chrono::steady_clock::time_point wall0_;
    std::clock_t cpu0_;
    json extra_ = json::object();
};

std::string out_path(const ExperimentConfig& c, const std::string& name) {
    return (fs::path(c.out_dir) / name).string();
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw ConfigError("cannot create output directory " + dir + ": " + ec.message());
}

std::string fixed(double x, int digits = 4) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(digits) << x;
    return s.str();
}

json point_json(const Evaluator& ev, const ThetaList& thetas, const GridPoint& at) {
    const auto& p = ev.points()[at.p_index];
    return {{"p", {p.p1, p.p6}}, {"theta", io::theta_to_json(thetas[at.theta_index])}};
}

json stats_json(const SeedStats& s) {
    json j = {{"max", s.max}, {"mean", s.mean}};
    if (s.has_std_err) j["std_err"] = s.std_err;
    return j;
}

// Per-point rows for one design; re is filled when denominators are given.
void add_rows(io::GridCsv& csv, const Evaluator& ev, const ThetaList& thetas, const std::vector<double>& values,
              const std::vector<double>& den) {
    for (std::size_t i = 0; i < ev.point_count(); ++i)
        for (std::size_t t = 0; t < thetas.size(); ++t) {
            const std::size_t k = i * thetas.size() + t;
            csv.row(ev.points()[i], thetas[t], values[k], den.empty() ? 0.0 : values[k] / den[k]);
        }
}

// Concatenated per-design distributions with a leading design column.
class DistributionCsv {
public:
    DistributionCsv(int q_types, bool with_re) : q_(q_types), with_re_(with_re) {}

    void add(const std::string& name, const Evaluator& ev, const ThetaList& thetas, const std::vector<double>& values,
             const std::vector<double>& den) {
        io::GridCsv csv(q_, with_re_);
        add_rows(csv, ev, thetas, values, den);
        std::istringstream lines(csv.str());
        std::string line;
        std::getline(lines, line);
        if (header_.empty()) header_ = "design," + line + "\n";
        while (std::getline(lines, line)) body_ += name + "," + line + "\n";
    }

    std::string str() const { return header_ + body_; }

private:
    int q_;
    bool with_re_;
    std::string header_, body_;
};

void print_seed_table(const std::string& title, const std::string& column, const std::vector<SeedRun>& runs,
                      const std::vector<double>* rg) {
    std::cout << title << "\n";
    std::cout << std::left << std::setw(12) << "seed" << std::setw(14) << column;
    if (rg) std::cout << std::setw(10) << "min-R_g";
    std::cout << std::setw(13) << "evaluations" << "cpu_s\n";
    std::vector<double> values;
    for (std::size_t i = 0; i < runs.size(); ++i) {
        const auto& r = runs[i];
        values.push_back(r.final_value);
        std::cout << std::setw(12) << r.seed << std::setw(14) << fixed(r.final_value);
        if (rg) std::cout << std::setw(10) << fixed((*rg)[i]);
        std::cout << std::setw(13) << r.result.evaluations << fixed(r.cpu_seconds, 2) << "\n";
    }
    const SeedStats s = summarize(values);
    std::cout << std::setw(12) << "Maximum" << fixed(s.max) << "\n";
    std::cout << std::setw(12) << "Mean" << fixed(s.mean) << "\n";
    if (s.has_std_err) std::cout << std::setw(12) << "Std. err." << fixed(s.std_err) << "\n";
    std::cout << std::right;
}

json seed_runs_json(const std::vector<SeedRun>& runs, const char* value_key) {
    json seeds = json::array();
    for (const auto& r : runs)
        seeds.push_back({{"seed", r.seed},
                         {value_key, r.final_value},
                         {"search_objective", r.result.best_objective},
                         {"evaluations", r.result.evaluations},
                         {"generations", r.result.generations},
                         {"design", io::labels_to_string(r.result.best_design.labels)}});
    return seeds;
}

void write_seed_designs(const ExperimentConfig& c, const std::string& prefix, const std::vector<SeedRun>& runs,
                        Metadata& meta) {
    json timing = json::array();
    for (const auto& r : runs) {
        const std::string stem = prefix + "_seed" + std::to_string(r.seed);
        io::write_file(out_path(c, stem + ".txt"), io::design_text(r.result.best_design));
        json sr = io::search_result_to_json(r.result);
        io::write_file(out_path(c, stem + ".json"), sr.dump(2) + "\n");
        timing.push_back({{"seed", r.seed}, {"cpu_seconds", r.cpu_seconds}, {"wall_seconds", r.result.wall_seconds}});
    }
    meta.extra()["seeds"] = timing;
}

std::string space_name(SpaceKind k) { return k == SpaceKind::full ? "xi" : "xi0"; }

// ---------------------------------------------------------------- evaluate

int cmd_evaluate(const ExperimentConfig& base, const std::string& design_path, const std::string& table_path) {
    Metadata meta("evaluate");
    ExperimentConfig c = base;
    const Design d = io::read_design(design_path, c.experiment.q_types, c.experiment.isi);
    c.experiment.q_types = d.q_types;
    c.experiment.length = d.length();
    c.experiment.isi = d.isi;
    c.validate();
    ensure_dir(c.out_dir);

    const Evaluator ev(c.experiment, c.p_points());
    const ThetaList thetas = c.thetas();
    const PreparedDesign pd = ev.prepare(d);
    const auto values = phi_a_values(ev, pd, thetas);
    const GridMin m = grid_min(values, thetas.size());

    json report = {{"design", io::labels_to_string(d.labels)},
                   {"q", d.q_types},
                   {"length", d.length()},
                   {"isi", d.isi},
                   {"grid", {{"p_step", c.grid.p_step}, {"phi_step", c.grid.phi_step}}},
                   {"p_points", ev.point_count()},
                   {"theta_points", thetas.size()},
                   {"min_phi_a", m.value},
                   {"argmin_phi_a", point_json(ev, thetas, m.at)}};

    std::string csv;
    if (!table_path.empty()) {
        const LocalOptTable table = io::read_table(table_path);
        const ThetaList re_thetas = with_zero(thetas, d.q_types);
        const auto den = table_denominators(table, ev, re_thetas);
        const auto re_values = phi_a_values(ev, pd, re_thetas);
        const GridMin r = grid_min(re_values, re_thetas.size(), den);
        report["min_re"] = r.value;
        report["argmin_re"] = point_json(ev, re_thetas, r.at);
        io::GridCsv out(d.q_types, true);
        add_rows(out, ev, re_thetas, re_values, den);
        csv = out.str();
    } else {
        io::GridCsv out(d.q_types, false);
        add_rows(out, ev, thetas, values, {});
        csv = out.str();
    }
    io::write_file(out_path(c, "evaluate.json"), report.dump(2) + "\n");
    io::write_file(out_path(c, "evaluate.csv"), csv);
    meta.write(c.out_dir, c.threads);

    std::cout << "min-Phi_A " << io::format_number(m.value) << "\n";
    if (report.contains("min_re")) std::cout << "min-RE " << io::format_number(report["min_re"].get<double>()) << "\n";
    return 0;
}

// ---------------------------------------------------------- search-maximin

int cmd_search_maximin(const ExperimentConfig& c) {
    Metadata meta("search-maximin");
    ensure_dir(c.out_dir);
    const auto& ex = c.experiment;
    const Evaluator search_ev(ex, c.p_points(c.grid));
    const Evaluator final_ev(ex, c.p_points(c.eval_grid));
    const ThetaList final_thetas = full_theta_grid(ex.q_types, c.eval_grid.phi_step);
    const auto knowledge = default_knowledge(ex.q_types, ex.length, ex.isi);

    const auto runs = run_seeds(maximin_objective(search_ev, c.thetas(c.grid)), c.search_space(), c.ga, c.seeds,
                                knowledge, [&](const Design& d) { return min_phi_a(final_ev, d, final_thetas).value; });

    std::vector<double> values, rg;
    json seeds = seed_runs_json(runs, "min_phi_a");
    for (std::size_t i = 0; i < runs.size(); ++i) {
        values.push_back(runs[i].final_value);
        if (c.reduced_theta) {
            const ThetaList theta0 = theta0_grid(ex.q_types, c.eval_grid.phi_step);
            rg.push_back(min_rg(final_ev, final_ev.prepare(runs[i].result.best_design), theta0));
            seeds[i]["min_rg"] = rg.back();
        }
    }
    const json report = {{"strategy", c.reduced_theta ? "maximin-theta0" : "maximin"},
                         {"config", config_to_json(c)},
                         {"seeds", seeds},
                         {"min_phi_a", stats_json(summarize(values))},
                         {"best_seed", runs[best_run(runs)].seed}};
    io::write_file(out_path(c, "maximin.json"), report.dump(2) + "\n");
    write_seed_designs(c, "maximin", runs, meta);
    meta.write(c.out_dir, c.threads);

    std::ostringstream title;
    title << "maximin search  Q=" << ex.q_types << " L=" << ex.length << " space=" << space_name(c.space)
          << " theta=" << (c.reduced_theta ? "reduced" : "full") << " grid=" << c.grid_name
          << " final=" << c.eval_grid_name;
    print_seed_table(title.str(), "min-Phi_A", runs, c.reduced_theta ? &rg : nullptr);
    return 0;
}

// -------------------------------------------------------------- search-mme

int cmd_search_mme(const ExperimentConfig& c, const std::string& table_path) {
    if (table_path.empty()) throw ConfigError("search-mme needs --table");
    Metadata meta("search-mme");
    ensure_dir(c.out_dir);
    const auto& ex = c.experiment;
    const LocalOptTable table = io::read_table(table_path);
    const Evaluator ev(ex, c.p_points(c.grid));
    const ThetaList thetas = with_zero(c.thetas(c.grid), ex.q_types);
    const auto den = table_denominators(table, ev, thetas);
    const auto knowledge = default_knowledge(ex.q_types, ex.length, ex.isi);

    const auto runs = run_seeds(maximin_efficiency_objective(ev, thetas, den), c.search_space(), c.ga, c.seeds,
                                knowledge,
                                [&](const Design& d) { return min_re(ev, ev.prepare(d), thetas, den).value; });
    std::vector<double> values;
    for (const auto& r : runs) values.push_back(r.final_value);
    const json report = {{"strategy", "maximin-efficiency"},
                         {"config", config_to_json(c)},
                         {"seeds", seed_runs_json(runs, "min_re")},
                         {"min_re", stats_json(summarize(values))},
                         {"best_seed", runs[best_run(runs)].seed}};
    io::write_file(out_path(c, "mme.json"), report.dump(2) + "\n");
    write_seed_designs(c, "mme", runs, meta);
    meta.write(c.out_dir, c.threads);

    std::ostringstream title;
    title << "maximin-efficiency search  Q=" << ex.q_types << " L=" << ex.length << " space=" << space_name(c.space)
          << " grid=" << c.grid_name << " table entries=" << table.size();
    print_seed_table(title.str(), "min-RE", runs, nullptr);
    return 0;
}

// ------------------------------------------------------------- build-table

// Builds (or improves) the table over {0} u Theta x P for the experiment;
// the file is rewritten every `checkpoint` points so long runs can resume.
LocalOptTable build_table(const Experiment& ex, const ExperimentConfig& c, const GaConfig& ga,
                          const std::string& path, bool verbose) {
    LocalOptTable table;
    if (fs::exists(path)) table = io::read_table(path);
    const Evaluator ev(ex, c.p_points(c.grid));
    const ThetaList thetas = with_zero(c.thetas(c.grid), ex.q_types);
    const SearchSpace space{ex.q_types, ex.length, ex.isi, c.space};
    constexpr std::size_t checkpoint = 16;
    build_local_opt_table(ev, thetas, space, ga, default_knowledge(ex.q_types, ex.length, ex.isi), table,
                          [&](std::size_t done, std::size_t total) {
                              if (verbose && (done % checkpoint == 0 || done == total))
                                  std::cerr << "table " << path << ": " << done << "/" << total << "\n";
                              if (done % checkpoint == 0)
                                  io::write_file(path, io::table_to_json(table).dump(1) + "\n");
                          });
    io::write_file(path, io::table_to_json(table).dump(1) + "\n");
    return table;
}

int cmd_build_table(const ExperimentConfig& c, const std::string& table_path) {
    Metadata meta("build-table");
    ensure_dir(c.out_dir);
    const std::string path = table_path.empty() ? out_path(c, "table.json") : table_path;
    GaConfig ga = c.ga;
    ga.seed = c.seeds.front();
    const LocalOptTable table = build_table(c.experiment, c, ga, path, true);
    meta.extra()["table"] = path;
    meta.write(c.out_dir, c.threads);
    std::cout << "wrote " << table.size() << " entries to " << path << "\n";
    return 0;
}

// ---------------------------------------------------------------- generate

struct GenerateArgs {
    std::string kind;
    std::size_t block_size = 4;
    int degree = 0;
    double zero_fraction = 0.5, gap_lo = 4.9, gap_hi = 5.1;
    std::string short_path, file;
    bool as_json = false;
};

int cmd_generate(const ExperimentConfig& c, const GenerateArgs& g, bool length_given) {
    const auto& ex = c.experiment;
    const std::uint64_t seed = c.seeds.front();
    Design d;
    if (g.kind == "block") {
        d = block_design(ex.q_types, g.block_size, ex.length, ex.isi);
    } else if (g.kind == "mseq") {
        if (g.degree < 1) throw ConfigError("mseq needs --degree");
        const FieldPolynomial poly = default_primitive_polynomial(ex.q_types + 1, g.degree);
        const auto seq = m_sequence(poly);  // throws unless the period is q^r - 1
        const std::uint64_t expect = int_pow(static_cast<std::uint64_t>(poly.field_order), g.degree) - 1;
        std::cerr << "field GF(" << poly.field_order << "), degree " << g.degree << ", polynomial "
                  << poly.to_string() << "\n"
                  << "period " << seq.size() << " = " << poly.field_order << "^" << g.degree << " - 1 ("
                  << expect << "): verified\n";
        d = length_given ? wrapped_m_sequence(ex.q_types, g.degree, ex.length, ex.isi)
                         : Design(seq, ex.q_types, ex.isi);
    } else if (g.kind == "random") {
        d = random_design(ex.q_types, ex.length, seed, ex.isi);
    } else if (g.kind == "constrained-random") {
        if (ex.q_types != 1) throw ConfigError("constrained-random designs are defined for Q = 1");
        d = constrained_random(ex.length, g.zero_fraction, g.gap_lo, g.gap_hi, seed, ex.isi);
    } else if (g.kind == "cyclic") {
        if (g.short_path.empty()) throw ConfigError("cyclic needs --short PATH");
        const Design s = io::read_design(g.short_path, ex.q_types, ex.isi);
        d = cyclic_design(s.labels, ex.q_types, ex.length, ex.isi);
    } else {
        throw ConfigError("unknown design kind '" + g.kind + "'");
    }
    const std::string text = g.as_json ? io::design_to_json(d).dump() + "\n" : io::design_text(d);
    if (g.file.empty())
        std::cout << text;
    else
        io::write_file(g.file, text);
    return 0;
}

// ----------------------------------------------------------------- compare

int cmd_compare(const ExperimentConfig& c, const std::vector<std::string>& files, const std::string& table_path,
                bool baselines, std::size_t random_count) {
    Metadata meta("compare");
    ensure_dir(c.out_dir);
    const auto& ex = c.experiment;
    const Evaluator ev(ex, c.p_points());
    const ThetaList thetas = c.thetas();
    const bool with_re = !table_path.empty();
    const ThetaList re_thetas = with_zero(thetas, ex.q_types);
    std::vector<double> den;
    if (with_re) den = table_denominators(io::read_table(table_path), ev, re_thetas);

    auto min_phi = [&](const Design& d) { return min_phi_a(ev, d, thetas).value; };
    auto min_rel = [&](const Design& d) { return min_re(ev, ev.prepare(d), re_thetas, den).value; };

    std::vector<std::pair<std::string, Design>> designs;
    for (const auto& f : files) designs.emplace_back(fs::path(f).stem().string(), io::read_design(f, ex.q_types, ex.isi));
    if (baselines) {
        const auto knowledge = default_knowledge(ex.q_types, ex.length, ex.isi);
        designs.emplace_back("block", knowledge.back());
        if (knowledge.size() > 1) designs.emplace_back("m-sequence", knowledge.front());
        if (random_count > 0) {
            const auto pool = random_designs(ex.q_types, ex.length, ex.isi, random_count);
            designs.emplace_back("random-best-phi", pool[argmax_design(pool, min_phi)]);
            if (with_re) designs.emplace_back("random-best-re", pool[argmax_design(pool, min_rel)]);
        }
    }
    if (designs.empty()) throw ConfigError("nothing to compare: give design files or keep the baselines");

    DistributionCsv csv(ex.q_types, with_re);
    json rows = json::array();
    for (const auto& [name, d] : designs) {
        const PreparedDesign pd = ev.prepare(d);
        json row = {{"name", name}, {"design", io::labels_to_string(d.labels)}};
        const auto values = phi_a_values(ev, pd, thetas);
        row["min_phi_a"] = grid_min(values, thetas.size()).value;
        if (with_re) {
            const auto re_values = phi_a_values(ev, pd, re_thetas);
            row["min_re"] = grid_min(re_values, re_thetas.size(), den).value;
            csv.add(name, ev, re_thetas, re_values, den);
        } else {
            csv.add(name, ev, thetas, values, {});
        }
        rows.push_back(row);
    }
    const json report = {{"config", config_to_json(c)}, {"random_count", random_count}, {"designs", rows}};
    io::write_file(out_path(c, "compare.json"), report.dump(2) + "\n");
    io::write_file(out_path(c, "compare.csv"), csv.str());
    meta.write(c.out_dir, c.threads);

    std::cout << std::left << std::setw(24) << "design" << std::setw(14) << "min-Phi_A" << (with_re ? "min-RE" : "")
              << "\n";
    for (const auto& r : rows) {
        std::cout << std::setw(24) << r["name"].get<std::string>() << std::setw(14)
                  << fixed(r["min_phi_a"].get<double>());
        if (with_re) std::cout << fixed(r["min_re"].get<double>());
        std::cout << "\n";
    }
    return 0;
}

// ----------------------------------------------------------- example-miezin

ExperimentConfig miezin_defaults() {
    ExperimentConfig c;
    auto& ex = c.experiment;
    ex.q_types = 1;
    ex.length = 132;
    ex.isi = 2.5;
    ex.tr = 2.5;
    ex.noise.rho = 0.3;
    ex.noise.runs = 2;
    ex.run_shift = 1.25;
    return c;
}

struct MiezinArgs {
    bool mme = false;
    std::size_t local_budget = 0;  // 0: the GA budget
    std::size_t random_count = 100;
};

int cmd_example_miezin(const ExperimentConfig& c, const MiezinArgs& args) {
    Metadata meta("example-miezin");
    ensure_dir(c.out_dir);
    const auto& ex = c.experiment;
    if (ex.q_types != 1) throw ConfigError("the two-run example is defined for Q = 1");
    const ThetaList ones{ThetaVector::Ones(1)};
    const ThetaList re_thetas = with_zero(ones, 1);
    const SearchSpace space = c.search_space();
    const auto knowledge = default_knowledge(1, ex.length, ex.isi);

    auto with_rho = [&](double rho) {
        Experiment e = ex;
        e.noise.rho = rho;
        return e;
    };
    // maximin designs per rho: search grid for the GA, eval grid for the report
    struct MaximinRun {
        Design best;
        double value = 0.0;
        std::vector<SeedRun> runs;
    };
    auto maximin_for = [&](double rho) {
        const Experiment e = with_rho(rho);
        const Evaluator search_ev(e, c.p_points(c.grid));
        const Evaluator final_ev(e, c.p_points(c.eval_grid));
        MaximinRun out;
        out.runs = run_seeds(maximin_objective(search_ev, ones), space, c.ga, c.seeds, knowledge,
                             [&](const Design& d) { return min_phi_a(final_ev, d, ones).value; });
        const auto& b = out.runs[best_run(out.runs)];
        out.best = b.result.best_design;
        out.value = b.final_value;
        return out;
    };

    const Evaluator final_ev(ex, c.p_points(c.eval_grid));
    auto min_phi = [&](const Design& d) { return min_phi_a(final_ev, d, ones).value; };

    const MaximinRun mm = maximin_for(ex.noise.rho);
    const Design block = block_design(1, 6, ex.length, ex.isi);
    const Design mseq = wrapped_m_sequence(1, 7, ex.length, ex.isi);
    const auto pool = constrained_random_designs(ex.length, ex.isi, args.random_count);
    const Design random_phi = pool[argmax_design(pool, min_phi)];

    std::vector<std::pair<std::string, Design>> competing{
        {"maximin", mm.best}, {"block", block}, {"m-sequence", mseq}, {"random-best-phi", random_phi}};
    DistributionCsv phi_csv(1, false);
    json designs = json::array();
    for (const auto& [name, d] : competing) {
        const auto values = phi_a_values(final_ev, final_ev.prepare(d), ones);
        phi_csv.add(name, final_ev, ones, values, {});
        designs.push_back({{"name", name},
                           {"design", io::labels_to_string(d.labels)},
                           {"min_phi_a", grid_min(values, 1).value}});
    }

    json robustness = json::array();
    const std::vector<std::pair<double, double>> reference{{0.0, 0.951}, {0.5, 0.972}};
    for (const auto& [rho, paper_value] : reference) {
        const Evaluator ev_rho(with_rho(rho), c.p_points(c.eval_grid));
        const MaximinRun matched = maximin_for(rho);
        const double found = min_phi_a(ev_rho, mm.best, ones).value;
        const double best = std::max(matched.value, found);
        robustness.push_back({{"rho", rho},
                              {"criterion", "min_phi_a"},
                              {"found_design_value", found},
                              {"matched_design_value", matched.value},
                              {"matched_design", io::labels_to_string(matched.best.labels)},
                              {"relative", found / best},
                              {"reference", paper_value}});
    }

    json report = {{"config", config_to_json(c)},
                   {"maximin", {{"seeds", seed_runs_json(mm.runs, "min_phi_a")}, {"best", mm.value}}},
                   {"designs", designs},
                   {"random_count", args.random_count},
                   {"robustness", robustness}};
    io::write_file(out_path(c, "miezin_phi.csv"), phi_csv.str());
    io::write_file(out_path(c, "miezin_maximin.txt"), io::design_text(mm.best));

    if (args.mme) {
        // tables on the search grid for the study's rho and each robustness rho
        GaConfig local = c.ga;
        local.seed = c.seeds.front();
        if (args.local_budget > 0) local.evaluation_budget = args.local_budget;
        struct MmeRun {
            Design best;
            double value = 0.0;
            std::vector<SeedRun> runs;
        };
        auto mme_for = [&](double rho, std::vector<double>& den_out) {
            const Experiment e = with_rho(rho);
            const std::string path = out_path(c, "miezin_table_rho" + io::format_number(rho) + ".json");
            const LocalOptTable table = build_table(e, c, local, path, true);
            const Evaluator ev(e, c.p_points(c.grid));
            den_out = table_denominators(table, ev, re_thetas);
            MmeRun out;
            out.runs = run_seeds(maximin_efficiency_objective(ev, re_thetas, den_out), space, c.ga, c.seeds,
                                 knowledge,
                                 [&](const Design& d) { return min_re(ev, ev.prepare(d), re_thetas, den_out).value; });
            const auto& b = out.runs[best_run(out.runs)];
            out.best = b.result.best_design;
            out.value = b.final_value;
            return out;
        };
        std::vector<double> den;
        const MmeRun me = mme_for(ex.noise.rho, den);
        const Evaluator ev(ex, c.p_points(c.grid));
        auto min_rel = [&](const Design& d) { return min_re(ev, ev.prepare(d), re_thetas, den).value; };
        const Design random_re = pool[argmax_design(pool, min_rel)];
        DistributionCsv re_csv(1, true);
        json re_designs = json::array();
        for (const auto& [name, d] : std::vector<std::pair<std::string, Design>>{
                 {"maximin-efficient", me.best}, {"block", block}, {"m-sequence", mseq}, {"random-best-re", random_re}}) {
            const auto values = phi_a_values(ev, ev.prepare(d), re_thetas);
            re_csv.add(name, ev, re_thetas, values, den);
            re_designs.push_back({{"name", name},
                                  {"design", io::labels_to_string(d.labels)},
                                  {"min_re", grid_min(values, re_thetas.size(), den).value}});
        }
        json re_robust = json::array();
        for (const auto& [rho, paper_value] : std::vector<std::pair<double, double>>{{0.0, 0.981}, {0.5, 0.920}}) {
            std::vector<double> den_rho;
            const MmeRun matched = mme_for(rho, den_rho);
            const Evaluator ev_rho(with_rho(rho), c.p_points(c.grid));
            const double found = min_re(ev_rho, ev_rho.prepare(me.best), re_thetas, den_rho).value;
            const double best = std::max(matched.value, found);
            re_robust.push_back({{"rho", rho},
                                 {"criterion", "min_re"},
                                 {"found_design_value", found},
                                 {"matched_design_value", matched.value},
                                 {"matched_design", io::labels_to_string(matched.best.labels)},
                                 {"relative", found / best},
                                 {"reference", paper_value}});
        }
        report["mme"] = {{"seeds", seed_runs_json(me.runs, "min_re")},
                         {"best", me.value},
                         {"designs", re_designs},
                         {"robustness", re_robust}};
        io::write_file(out_path(c, "miezin_re.csv"), re_csv.str());
        io::write_file(out_path(c, "miezin_mme.txt"), io::design_text(me.best));
    }
    io::write_file(out_path(c, "miezin.json"), report.dump(2) + "\n");
    meta.write(c.out_dir, c.threads);

    std::cout << "two-run example  L=" << ex.length << " ISI=" << ex.isi << " TR=" << ex.tr << " rho=" << ex.noise.rho
              << "\n";
    std::cout << std::left;
    for (const auto& d : designs)
        std::cout << "  " << std::setw(20) << d["name"].get<std::string>() << "min-Phi_A "
                  << fixed(d["min_phi_a"].get<double>()) << "\n";
    auto print_robust = [](const json& rows, const char* label) {
        for (const auto& r : rows)
            std::cout << "  rho=" << io::format_number(r["rho"].get<double>()) << ": " << label << " retains "
                      << fixed(100.0 * r["relative"].get<double>(), 1) << "% (reference "
                      << fixed(100.0 * r["reference"].get<double>(), 1) << "%)\n";
    };
    print_robust(robustness, "maximin design");
    if (report.contains("mme")) {
        for (const auto& d : report["mme"]["designs"])
            std::cout << "  " << std::setw(20) << d["name"].get<std::string>() << "min-RE "
                      << fixed(d["min_re"].get<double>()) << "\n";
        print_robust(report["mme"]["robustness"], "maximin-efficient design");
    }
    std::cout << std::right;
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Maximin and maximin-efficient event-related fMRI designs"};
    app.require_subcommand(1);
    app.fallthrough();
    Flags f;
    f.app = &app;

    app.add_option("--config", f.config, "experiment config (JSON)");
    app.add_option("--seed", f.seeds, "GA seed (repeatable)");
    app.add_option("--grid", f.grid, "search / evaluation grid")->check(CLI::IsMember({"search", "comparison"}));
    app.add_option("--eval-grid", f.eval_grid, "grid for the final evaluation of search results")
        ->check(CLI::IsMember({"search", "comparison"}));
    app.add_option("--space", f.space, "design space")->check(CLI::IsMember({"xi", "xi0"}));
    app.add_option("--theta", f.theta, "amplitude directions")->check(CLI::IsMember({"full", "reduced"}));
    app.add_option("--table", f.table, "locally optimal design table (JSON)");
    app.add_option("--out", f.out, "output directory");
    app.add_option("--threads", f.threads, "worker threads (default MMDESIGN_THREADS, else all cores)");
    app.add_option("--q", f.q, "number of stimulus types");
    app.add_option("--length", f.length, "design length L");
    app.add_option("--isi", f.isi, "inter-stimulus interval, seconds");
    app.add_option("--tr", f.tr, "scan repetition time, seconds");
    app.add_option("--rho", f.rho, "AR(1) coefficient");
    app.add_option("--runs", f.runs, "number of runs (1 or 2)");
    app.add_option("--run-shift", f.run_shift, "HRF sampling shift of the second run, seconds");
    app.add_option("--drift-order", f.drift_order, "polynomial drift order");
    app.add_option("--budget", f.budget, "GA evaluation budget");

    std::string design_path;
    auto* evaluate = app.add_subcommand("evaluate", "Phi_A (and RE) of a design over the grid");
    evaluate->add_option("design", design_path, "design file (text or JSON)")->required();

    auto* search_mm = app.add_subcommand("search-maximin", "GA search for maximin designs, one run per seed");
    auto* search_mme = app.add_subcommand("search-mme", "GA search for maximin-efficient designs (needs --table)");
    auto* build = app.add_subcommand("build-table", "locally optimal designs over {0} u Theta x P");

    GenerateArgs gen;
    auto* generate = app.add_subcommand("generate", "write a baseline or structured design");
    generate->add_option("kind", gen.kind, "block | mseq | random | constrained-random | cyclic")
        ->required()
        ->check(CLI::IsMember({"block", "mseq", "random", "constrained-random", "cyclic"}));
    generate->add_option("--block-size", gen.block_size, "block length");
    generate->add_option("--degree", gen.degree, "m-sequence degree");
    generate->add_option("--zero-fraction", gen.zero_fraction, "share of rests (constrained-random)");
    generate->add_option("--gap-lo", gen.gap_lo, "lower mean onset gap, seconds (constrained-random)");
    generate->add_option("--gap-hi", gen.gap_hi, "upper mean onset gap, seconds (constrained-random)");
    generate->add_option("--short", gen.short_path, "short design file (cyclic)");
    generate->add_option("-o,--file", gen.file, "output file (default stdout)");
    generate->add_flag("--json", gen.as_json, "write JSON instead of plain labels");

    MiezinArgs miezin;
    auto* example = app.add_subcommand("example-miezin", "two-run example with baselines and robustness report");
    example->add_flag("--mme", miezin.mme, "also build local tables and run the maximin-efficiency search");
    example->add_option("--local-budget", miezin.local_budget, "GA budget per locally optimal design");
    example->add_option("--random-count", miezin.random_count, "number of constrained random designs");

    std::vector<std::string> compare_files;
    bool no_baselines = false;
    std::size_t random_count = 100;
    auto* compare = app.add_subcommand("compare", "distributions of designs and baselines over the grid");
    compare->add_option("designs", compare_files, "design files");
    compare->add_flag("--no-baselines", no_baselines, "skip the block, m-sequence and random baselines");
    compare->add_option("--random-count", random_count, "number of random designs");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    try {
        if (example->parsed()) return cmd_example_miezin(resolve_config(f, miezin_defaults()), miezin);
        const ExperimentConfig c = resolve_config(f, ExperimentConfig{});
        if (evaluate->parsed()) return cmd_evaluate(c, design_path, f.table);
        if (search_mm->parsed()) return cmd_search_maximin(c);
        if (search_mme->parsed()) return cmd_search_mme(c, f.table);
        if (build->parsed()) return cmd_build_table(c, f.table);
        if (generate->parsed()) return cmd_generate(c, gen, f.given("--length"));
        if (compare->parsed()) return cmd_compare(c, compare_files, f.table, !no_baselines, random_count);
    } catch (const ParseError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return kExitParse;
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const LookupError& e) {
        std::cerr << "table error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const json::exception& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return kExitParse;
    }
    return kExitConfig;
}
