#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "hboa/bias_miner.hpp"
#include "hboa/engine.hpp"
#include "hboa/problems.hpp"

namespace hboa {

/// Crossvalidation plan. Read from an INI-style file with sections
/// [problem], [crossvalidation], [engine], [bisection] and [output].
struct ExperimentPlan {
    ProblemClass problem_class = ProblemClass::nk;
    std::size_t n = 60;  // NK bits
    std::size_t k = 5;   // NK neighbors
    std::size_t L = 8;   // spin glass side
    std::size_t instances = 100;
    std::uint64_t instance_seed = 1;

    std::size_t folds = 10;
    std::uint64_t fold_seed = 2;
    std::vector<double> kappas{5.0};

    EngineConfig engine;  // template; population size and seed are set by bisection
    BisectionConfig bisection;

    std::string output_dir;
    std::size_t threads = 1;
    std::size_t archive_stride = 1;  // keep every s-th iteration's model

    std::size_t variables() const;
    /// Throws ConfigError for an invalid plan.
    void validate() const;
};

ExperimentPlan read_plan(std::istream& in);
ExperimentPlan load_plan(const std::string& path);
void write_plan(std::ostream& out, const ExperimentPlan& plan);

/// Instance i of a plan: id "i0007" and generator seed mix_seed(instance_seed, i).
std::string instance_id(std::size_t index);
Instance make_plan_instance(const ExperimentPlan& plan, std::size_t index);

/// Seeded random partition of 0..count-1 into `folds` equal parts, each
/// sorted. Throws ConfigError unless folds divides count.
std::vector<std::vector<std::size_t>> partition_folds(std::size_t count, std::size_t folds, std::uint64_t seed);

/// One CSV row of bisection statistics. Counters are means over the runs at
/// the returned population size.
struct StatsRow {
    std::string instance_id;
    std::string mode;  // "penalty" or "bias"
    double kappa = 0.0;
    std::size_t population_size = 0;
    double iterations = 0.0;
    double evaluations = 0.0;
    double hc_steps = 0.0;
    double wall_time_s = 0.0;
    bool success = false;
    std::size_t n = 0;
    std::string node;

    bool operator==(const StatsRow&) const = default;
};

StatsRow make_stats_row(const std::string& id, const std::string& mode, double kappa, const BisectionResult& result,
                        std::size_t n, const std::string& node);
StatsRow make_stats_row(const std::string& id, const std::string& mode, double kappa, const RunStats& stats,
                        std::size_t n, const std::string& node);

/// Header: instance,mode,kappa,N,iterations,evaluations,hc_steps,wall_time_s,success,n,node
void write_stats_csv(std::ostream& out, const std::vector<StatsRow>& rows);
std::vector<StatsRow> read_stats_csv(std::istream& in);

struct SpeedupRow {
    std::string instance_id;
    double kappa = 0.0;
    std::size_t n = 0;
    std::optional<double> wall_time;  // absent unless both runs shared a node
    double evaluations = 0.0;
    double hc_steps = 0.0;
    double population_size = 0.0;
};

/// Per-instance base / biased ratios. Throws InputError when a biased row has
/// no base row, when an id repeats, or when a row did not succeed.
std::vector<SpeedupRow> compute_speedups(const std::vector<StatsRow>& base, const std::vector<StatsRow>& biased);

/// Linear-interpolation quantile (p in [0, 1]). Throws InputError when empty.
double quantile(std::vector<double> values, double p);
double median(std::vector<double> values);

struct Spread {
    double q1 = 0.0;
    double median = 0.0;
    double q3 = 0.0;
    double mean = 0.0;
};
Spread spread(const std::vector<double>& values);

struct SpeedupSummary {
    std::size_t n = 0;
    double kappa = 0.0;
    std::size_t count = 0;
    std::optional<Spread> wall_time;
    Spread evaluations;
    Spread hc_steps;
    Spread population_size;
};

/// One summary per (n, kappa), in ascending order.
std::vector<SpeedupSummary> summarize_speedups(const std::vector<SpeedupRow>& rows);

/// Header: instance,n,kappa,wall_time,evaluations,hc_steps,population_size
void write_speedups_csv(std::ostream& out, const std::vector<SpeedupRow>& rows);
std::vector<SpeedupRow> read_speedups_csv(std::istream& in);

/// Header: n,kappa,count, then q1/median/q3/mean for wall_time, evaluations,
/// hc_steps and population_size. Serves both the kappa and the size series.
void write_summary_csv(std::ostream& out, const std::vector<SpeedupSummary>& rows);
std::vector<SpeedupSummary> read_summary_csv(std::istream& in);

/// Header: d,splits,proportion
void write_split_proportions_csv(std::ostream& out, const std::vector<DistanceShare>& shares);
std::vector<DistanceShare> read_split_proportions_csv(std::istream& in);

/// Which instances fed the bias table of a fold.
struct FoldProvenance {
    std::size_t fold = 0;
    std::set<std::string> test_ids;
    std::set<std::string> record_ids;
    std::size_t records = 0;
};

/// Test instances whose models reached the fold's bias table (empty when clean).
std::set<std::string> leaked_instances(const FoldProvenance& provenance);

struct CrossValidationResult {
    std::vector<std::string> instance_ids;
    std::vector<std::vector<std::size_t>> folds;
    std::vector<StatsRow> base;
    std::vector<StatsRow> biased;
    std::vector<SpeedupRow> speedups;
    std::vector<SpeedupSummary> summaries;
    std::vector<FoldProvenance> provenance;
    std::vector<DistanceShare> split_shares;  // over the whole base archive
};

using ProgressSink = std::function<void(const std::string& message)>;

/// Generates and solves the plan's instances, runs base bisection (complexity
/// penalty) once per instance while archiving the models of the returned
/// population size, then per fold builds a bias table from the other folds'
/// records and runs biased bisection for each kappa on the held-out fold.
/// Writes every artifact under plan.output_dir when it is set.
CrossValidationResult crossvalidate(const ExperimentPlan& plan, const ProgressSink& progress = {});

/// Host name used to tag stats rows.
std::string node_name();

}  // namespace hboa
