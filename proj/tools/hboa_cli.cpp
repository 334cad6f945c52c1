// Command-line front end: instance generation, exact solving, single runs,
// bias mining, crossvalidation and speedup reports.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hboa/bias_miner.hpp"
#include "hboa/engine.hpp"
#include "hboa/errors.hpp"
#include "hboa/experiment.hpp"
#include "hboa/problems.hpp"

namespace fs = std::filesystem;
using namespace hboa;

namespace {

std::string bits(const BitString& x) {
    std::string s(x.size(), '0');
    for (std::size_t i = 0; i < x.size(); ++i) s[i] = x[i] ? '1' : '0';
    return s;
}

std::string number(double v) {
    std::ostringstream out;
    out.precision(17);
    out << v;
    return out.str();
}

// Writes to `path`, or to stdout when the path is empty or "-".
template <typename Fn>
void emit(const std::string& path, Fn&& body) {
    if (path.empty() || path == "-") {
        body(std::cout);
        return;
    }
    std::ofstream out(path);
    if (!out) throw InputError("cannot write " + path);
    body(out);
}

void write_population_csv(std::ostream& out, const Population& pop) {
    out << "fitness,solution\n";
    for (std::size_t i = 0; i < pop.size(); ++i) out << number(pop.fitness[i]) << ',' << bits(pop.members[i]) << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"hBOA with distance-based model bias"};
    app.require_subcommand(1);

    // gen-nk
    auto* gen_nk = app.add_subcommand("gen-nk", "generate a nearest-neighbor NK landscape");
    NkSpec nk_spec;
    std::string nk_out;
    gen_nk->add_option("--n", nk_spec.n, "number of bits")->required();
    gen_nk->add_option("--k", nk_spec.k, "neighbors per subfunction")->required();
    gen_nk->add_option("--seed", nk_spec.seed, "generator seed")->required();
    gen_nk->add_option("--out", nk_out, "instance file (default stdout)");

    // gen-sg
    auto* gen_sg = app.add_subcommand("gen-sg", "generate a periodic 2D +-J spin glass");
    std::size_t sg_L = 0;
    std::uint64_t sg_seed = 0;
    std::string sg_out;
    gen_sg->add_option("--L", sg_L, "lattice side")->required();
    gen_sg->add_option("--seed", sg_seed, "generator seed")->required();
    gen_sg->add_option("--out", sg_out, "instance file (default stdout)");

    // solve
    auto* solve = app.add_subcommand("solve", "compute the exact optimum of an instance");
    std::string solve_instance, solve_out;
    solve->add_option("--instance", solve_instance, "instance file")->required();
    solve->add_option("--out", solve_out, "CSV output (default stdout)");

    // run
    auto* run_cmd = app.add_subcommand("run", "run hBOA on one instance");
    std::string run_instance, run_mode = "penalty", run_table, run_stats_out, run_pop_out, run_archive_out, run_id;
    double run_kappa = 1.0;
    std::uint64_t run_seed = 1;
    std::size_t run_pop = 0, run_max_iter = 0, run_window = 0, run_runs = 10, run_initial = 32;
    double run_ratio = 1.05;
    bool run_bisect = false, run_no_hc = false;
    std::optional<double> run_optimum;
    run_cmd->add_option("--instance", run_instance, "instance file")->required();
    run_cmd->add_option("--mode", run_mode, "structural prior")->check(CLI::IsMember({"penalty", "bias"}));
    run_cmd->add_option("--bias-table", run_table, "bias table CSV (bias mode)");
    run_cmd->add_option("--kappa", run_kappa, "bias strength (bias mode)");
    run_cmd->add_option("--seed", run_seed, "run seed, or bisection base seed");
    auto* pop_opt = run_cmd->add_option("--pop", run_pop, "population size (even)");
    auto* bis_opt = run_cmd->add_flag("--bisection", run_bisect, "search the minimal population size");
    pop_opt->excludes(bis_opt);
    run_cmd->add_option("--optimum", run_optimum, "known optimum (default: exact solver)");
    run_cmd->add_option("--max-iterations", run_max_iter, "iteration cap (default n)");
    run_cmd->add_option("--rts-window", run_window, "RTS window (default min(n, N/20))");
    run_cmd->add_flag("--no-hc", run_no_hc, "disable hill climbing");
    run_cmd->add_option("--runs", run_runs, "bisection runs per size");
    run_cmd->add_option("--initial", run_initial, "bisection starting size");
    run_cmd->add_option("--ratio", run_ratio, "bisection bracket ratio");
    run_cmd->add_option("--id", run_id, "instance id for CSV rows (default file stem)");
    run_cmd->add_option("--stats-out", run_stats_out, "stats CSV (default stdout)");
    run_cmd->add_option("--population-out", run_pop_out, "final population CSV (single run)");
    run_cmd->add_option("--archive-out", run_archive_out, "append the run's models to this archive");

    // mine
    auto* mine = app.add_subcommand("mine", "build a bias table from model archives");
    std::vector<std::string> mine_archives, mine_exclude;
    std::string mine_instance, mine_out, mine_props;
    bool mine_pooled = false;
    mine->add_option("--archive", mine_archives, "archive file(s)")->required();
    mine->add_option("--instance", mine_instance, "instance defining the distance metric")->required();
    mine->add_option("--exclude", mine_exclude, "instance ids to leave out");
    mine->add_option("--out", mine_out, "bias table CSV (default stdout)");
    mine->add_option("--split-proportions", mine_props, "also write the split-distance proportions CSV");
    mine->add_flag("--pooled", mine_pooled, "pool statistics over target variables");

    // crossvalidate
    auto* cv = app.add_subcommand("crossvalidate", "run a crossvalidation plan");
    std::string cv_plan, cv_dir;
    std::size_t cv_threads = 0;
    bool cv_quiet = false;
    cv->add_option("--plan", cv_plan, "plan file")->required();
    cv->add_option("--out-dir", cv_dir, "override the plan's output directory");
    cv->add_option("--threads", cv_threads, "override the plan's worker count");
    cv->add_flag("--quiet", cv_quiet, "no progress output");

    // report
    auto* report = app.add_subcommand("report", "speedups from stats CSVs");
    std::vector<std::string> report_stats;
    std::string report_dir;
    report->add_option("--stats", report_stats, "stats CSV file(s)")->required();
    report->add_option("--out-dir", report_dir, "write speedups.csv and summary.csv here");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*gen_nk) {
            const Instance inst = make_nk_instance(nk_spec);
            emit(nk_out, [&](std::ostream& o) { write_instance(o, inst); });
        } else if (*gen_sg) {
            const Instance inst = make_spin_glass_instance(make_spin_glass_spec(sg_L, sg_seed));
            emit(sg_out, [&](std::ostream& o) { write_instance(o, inst); });
        } else if (*solve) {
            const Instance inst = load_instance(solve_instance);
            const ExactSolution sol = solve_exact(inst);
            emit(solve_out, [&](std::ostream& o) {
                o << "value,witness\n" << number(sol.value) << ',' << bits(sol.witness) << '\n';
            });
        } else if (*run_cmd) {
            if (!run_bisect && run_pop == 0) throw ConfigError("run needs --pop or --bisection");
            const Instance inst = load_instance(run_instance);
            const std::size_t n = inst.problem.size();
            if (run_id.empty()) run_id = fs::path(run_instance).stem().string();
            EngineConfig engine;
            engine.max_iterations = run_max_iter;
            engine.rts_window = run_window;
            engine.hc_enabled = !run_no_hc;
            engine.population_size = run_pop;
            engine.seed = run_seed;
            if (run_mode == "bias") {
                if (run_table.empty()) throw ConfigError("bias mode needs --bias-table");
                engine.score.mode = PriorMode::distance_bias;
                engine.score.kappa = run_kappa;
                engine.score.bias = std::make_shared<const BiasTable>(load_bias_table(run_table));
            }
            std::optional<double> optimum = run_optimum;
            if (!optimum) {
                try {
                    optimum = solve_exact(inst).value;
                } catch (const CapabilityError&) {
                    if (run_bisect) throw ConfigError("bisection needs --optimum for this instance");
                }
            }
            const double kappa = run_mode == "bias" ? run_kappa : 0.0;
            const std::string node = node_name();
            ArchiveMeta meta{to_string(inst.meta.kind), n, run_mode};
            const std::uint64_t fingerprint = distance_matrix(inst.problem).fingerprint();
            std::vector<ModelRecord> records;
            if (run_bisect) {
                BisectionConfig cfg;
                cfg.base_seed = run_seed;
                cfg.runs = run_runs;
                cfg.initial = run_initial;
                cfg.ratio = run_ratio;
                cfg.keep_models = !run_archive_out.empty();
                BisectionResult res = bisection(inst.problem, engine, *optimum, cfg);
                for (auto& m : res.models)
                    records.push_back({run_id, m.run, m.iteration, fingerprint, std::move(m.model)});
                emit(run_stats_out, [&](std::ostream& o) {
                    write_stats_csv(o, {make_stats_row(run_id, run_mode, kappa, res, n, node)});
                });
            } else {
                ModelObserver observer;
                if (!run_archive_out.empty())
                    observer = [&](std::size_t iteration, const DtBayesNet& model) {
                        records.push_back({run_id, 0, iteration, fingerprint, model});
                    };
                const RunResult res = run(inst.problem, engine, optimum, observer);
                emit(run_stats_out, [&](std::ostream& o) {
                    write_stats_csv(o, {make_stats_row(run_id, run_mode, kappa, res.stats, n, node)});
                });
                if (!run_pop_out.empty())
                    emit(run_pop_out, [&](std::ostream& o) { write_population_csv(o, res.population); });
            }
            if (!run_archive_out.empty()) append_records(run_archive_out, meta, records);
        } else if (*mine) {
            const Instance inst = load_instance(mine_instance);
            const DistanceMatrix distances = distance_matrix(inst.problem);
            const std::set<std::string> exclude(mine_exclude.begin(), mine_exclude.end());
            ModelArchive archive;
            if (mine_archives.empty()) throw InputError("mine needs at least one archive");
            for (const auto& path : mine_archives) {
                ModelArchive part = exclude_instances(load_archive(path), exclude);
                if (archive.records.empty()) archive.meta = part.meta;
                for (auto& r : part.records) archive.records.push_back(std::move(r));
            }
            const BiasTable table = build_bias_table(
                archive, distances, mine_pooled ? BiasAggregation::pooled : BiasAggregation::per_variable);
            emit(mine_out, [&](std::ostream& o) { write_bias_table_csv(o, table); });
            if (!mine_props.empty())
                emit(mine_props, [&](std::ostream& o) {
                    write_split_proportions_csv(o, split_proportions(archive, distances));
                });
        } else if (*cv) {
            ExperimentPlan plan = load_plan(cv_plan);
            if (!cv_dir.empty()) plan.output_dir = cv_dir;
            if (cv_threads) plan.threads = cv_threads;
            ProgressSink progress;
            if (!cv_quiet) progress = [](const std::string& msg) { std::cerr << msg << '\n'; };
            const CrossValidationResult res = crossvalidate(plan, progress);
            write_summary_csv(std::cout, res.summaries);
        } else if (*report) {
            std::vector<StatsRow> base, biased;
            for (const auto& path : report_stats) {
                std::ifstream in(path);
                if (!in) throw InputError("cannot open " + path);
                for (auto& row : read_stats_csv(in)) (row.mode == "bias" ? biased : base).push_back(std::move(row));
            }
            const auto rows = compute_speedups(base, biased);
            const auto summary = summarize_speedups(rows);
            if (!report_dir.empty()) {
                fs::create_directories(report_dir);
                emit((fs::path(report_dir) / "speedups.csv").string(),
                     [&](std::ostream& o) { write_speedups_csv(o, rows); });
                emit((fs::path(report_dir) / "summary.csv").string(),
                     [&](std::ostream& o) { write_summary_csv(o, summary); });
            }
            write_summary_csv(std::cout, summary);
        }
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
