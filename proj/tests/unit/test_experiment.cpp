#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "hboa/errors.hpp"
#include "hboa/experiment.hpp"
#include "support.hpp"

using namespace hboa;

namespace {

StatsRow row(const std::string& id, const std::string& mode, double kappa, std::size_t N, double evals,
             double steps, double time) {
    StatsRow r;
    r.instance_id = id;
    r.mode = mode;
    r.kappa = kappa;
    r.population_size = N;
    r.iterations = 3;
    r.evaluations = evals;
    r.hc_steps = steps;
    r.wall_time_s = time;
    r.success = true;
    r.n = 60;
    r.node = "host";
    return r;
}

ExperimentPlan tiny_plan() {
    std::istringstream in(R"(
[problem]
class = nk
n = 14
k = 2
instances = 10
seed = 3

[crossvalidation]
folds = 5
seed = 4
kappas = 1, 3

[bisection]
seed = 11
initial = 8
)");
    return read_plan(in);
}

}  // namespace

TEST_SUITE("experiment") {

TEST_CASE("plan parsing and validation") {
    const ExperimentPlan p = tiny_plan();
    CHECK(p.problem_class == ProblemClass::nk);
    CHECK(p.n == 14);
    CHECK(p.kappas == std::vector<double>{1.0, 3.0});
    CHECK(p.folds == 5);
    CHECK(p.bisection.initial == 8);
    CHECK(p.bisection.runs == 10);
    CHECK(p.engine.hc_enabled);

    std::stringstream io;
    write_plan(io, p);
    const ExperimentPlan back = read_plan(io);
    CHECK(back.n == p.n);
    CHECK(back.kappas == p.kappas);
    CHECK(back.instance_seed == p.instance_seed);
    CHECK(back.bisection.base_seed == p.bisection.base_seed);

    auto fails = [](const std::string& text) {
        std::istringstream in(text);
        CHECK_THROWS_AS(read_plan(in), ConfigError);
    };
    fails("[problem]\ninstances = 15\n[crossvalidation]\nfolds = 10\n");  // not divisible
    fails("[crossvalidation]\nkappas = 0\n");                              // kappa must be positive
    fails("[problem]\ncolour = blue\n");                                   // unknown key
    fails("[extras]\nx = 1\n");                                            // unknown section
    fails("[problem]\nn = sixty\n");                                       // bad integer
    fails("[engine]\nhc = maybe\n");                                       // bad boolean
    fails("[problem]\nclass = maxsat\n");                                  // unsupported class
}

TEST_CASE("fold partition is a seeded equal split") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto folds = partition_folds(100, 10, seed);
        REQUIRE(folds.size() == 10);
        std::vector<int> hits(100, 0);
        for (const auto& f : folds) {
            REQUIRE(f.size() == 10);
            for (std::size_t i : f) ++hits[i];
        }
        for (int h : hits) REQUIRE(h == 1);
    }
    CHECK(partition_folds(20, 4, 1) == partition_folds(20, 4, 1));
    CHECK(partition_folds(20, 4, 1) != partition_folds(20, 4, 2));
    CHECK_THROWS_AS(partition_folds(15, 10, 1), ConfigError);
}

TEST_CASE("median and quantiles") {
    CHECK(median({1.0, 2.0, 4.0}) == 2.0);
    CHECK(median({4.0, 1.0}) == 2.5);
    CHECK(quantile({1.0, 2.0, 3.0, 4.0, 5.0}, 0.25) == 2.0);
    CHECK(quantile({1.0, 2.0, 3.0, 4.0, 5.0}, 1.0) == 5.0);
    CHECK_THROWS_AS(median({}), InputError);
    const Spread s = spread({1.0, 2.0, 4.0});
    CHECK(s.mean == doctest::Approx(7.0 / 3.0));
}

TEST_CASE("speedups are base / biased per measure") {
    const auto same = compute_speedups({row("a", "penalty", 0, 64, 100, 50, 2.0)}, {row("a", "bias", 5, 64, 100, 50, 2.0)});
    REQUIRE(same.size() == 1);
    CHECK(same[0].evaluations == 1.0);
    CHECK(same[0].hc_steps == 1.0);
    CHECK(same[0].population_size == 1.0);
    CHECK(*same[0].wall_time == 1.0);

    const auto fast = compute_speedups({row("a", "penalty", 0, 64, 100, 50, 10.0)}, {row("a", "bias", 5, 32, 50, 25, 5.0)});
    CHECK(*fast[0].wall_time == 2.0);
    CHECK(fast[0].evaluations == 2.0);
    CHECK(fast[0].population_size == 2.0);

    StatsRow other_node = row("a", "bias", 5, 32, 50, 25, 5.0);
    other_node.node = "elsewhere";
    CHECK(!compute_speedups({row("a", "penalty", 0, 64, 100, 50, 10.0)}, {other_node})[0].wall_time);

    CHECK_THROWS_AS(compute_speedups({row("a", "penalty", 0, 64, 100, 50, 1)}, {row("b", "bias", 5, 64, 100, 50, 1)}),
                    InputError);
    StatsRow failed = row("a", "bias", 5, 64, 100, 50, 1);
    failed.success = false;
    CHECK_THROWS_AS(compute_speedups({row("a", "penalty", 0, 64, 100, 50, 1)}, {failed}), InputError);
}

TEST_CASE("summaries group by (n, kappa) and ignore instance order") {
    Rng rng(3);
    std::vector<SpeedupRow> rows;
    for (int i = 0; i < 30; ++i)
        rows.push_back({"i" + std::to_string(i), i % 2 ? 1.0 : 5.0, 60, 1.0 + rng.uniform(), 1.0 + rng.uniform(),
                        1.0 + rng.uniform(), 1.0 + rng.uniform()});
    const auto a = summarize_speedups(rows);
    rng.shuffle(std::span<SpeedupRow>(rows));
    const auto b = summarize_speedups(rows);
    REQUIRE(a.size() == 2);
    for (std::size_t i = 0; i < 2; ++i) {
        CHECK(a[i].kappa == b[i].kappa);
        CHECK(a[i].count == 15);
        CHECK(a[i].evaluations.median == b[i].evaluations.median);
        CHECK(a[i].population_size.q1 == b[i].population_size.q1);
        CHECK(a[i].wall_time->q3 == b[i].wall_time->q3);
        CHECK(a[i].hc_steps.mean == doctest::Approx(b[i].hc_steps.mean));
    }
    CHECK(a[0].kappa == 1.0);
}

TEST_CASE("CSV files round-trip through their readers") {
    const std::vector<StatsRow> stats{row("a", "penalty", 0, 64, 100.5, 50, 0.25), row("a", "bias", 5, 32, 50, 25, 0.125)};
    std::stringstream s1;
    write_stats_csv(s1, stats);
    CHECK(read_stats_csv(s1) == stats);

    const auto speedups = compute_speedups({stats[0]}, {stats[1]});
    std::stringstream s2;
    write_speedups_csv(s2, speedups);
    const auto sp = read_speedups_csv(s2);
    REQUIRE(sp.size() == 1);
    CHECK(sp[0].evaluations == speedups[0].evaluations);
    CHECK(sp[0].wall_time == speedups[0].wall_time);

    const auto summary = summarize_speedups(speedups);
    std::stringstream s3;
    write_summary_csv(s3, summary);
    const auto back = read_summary_csv(s3);
    REQUIRE(back.size() == 1);
    CHECK(back[0].evaluations.median == summary[0].evaluations.median);
    CHECK(back[0].wall_time->mean == summary[0].wall_time->mean);

    std::vector<DistanceShare> shares{{1, 30, 0.75}, {2, 10, 0.25}};
    std::stringstream s4;
    write_split_proportions_csv(s4, shares);
    const auto sh = read_split_proportions_csv(s4);
    REQUIRE(sh.size() == 2);
    CHECK(sh[1].splits == 10);
    CHECK(sh[1].proportion == 0.25);

    std::istringstream bad("instance,mode,kappa,N,iterations,evaluations,hc_steps,wall_time_s,success,n,node\na,bias,x,1,1,1,1,1,1,1,h\n");
    try {
        read_stats_csv(bad);
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.line() == 2);
        CHECK(e.field() == "kappa");
    }
}

TEST_CASE("crossvalidation: hygiene, coverage and reproducibility") {
    const auto dir = std::filesystem::temp_directory_path() / "hboa_cv_test";
    std::filesystem::remove_all(dir);
    ExperimentPlan plan = tiny_plan();
    plan.output_dir = dir.string();
    const CrossValidationResult a = crossvalidate(plan);

    REQUIRE(a.base.size() == 10);
    REQUIRE(a.biased.size() == 20);
    REQUIRE(a.speedups.size() == 20);
    REQUIRE(a.provenance.size() == 5);
    std::set<std::string> tested;
    for (const auto& p : a.provenance) {
        CHECK(leaked_instances(p).empty());
        CHECK(p.test_ids.size() == 2);
        // Instances solved before any model was built contribute no records.
        CHECK(p.record_ids.size() <= 8);
        CHECK(p.record_ids.size() > 0);
        CHECK(p.records > 0);
        tested.insert(p.test_ids.begin(), p.test_ids.end());
    }
    CHECK(tested.size() == 10);
    double share_sum = 0.0;
    for (const auto& s : a.split_shares) share_sum += s.proportion;
    CHECK(std::abs(share_sum - 1.0) < 1e-9);

    for (const char* name : {"stats.csv", "speedups.csv", "summary.csv", "split_proportions.csv", "archive.txt",
                             "provenance.csv", "folds.csv", "optima.csv", "plan.ini", "bias_fold0.csv"})
        CHECK(std::filesystem::exists(dir / name));
    std::ifstream stats_in(dir / "stats.csv");
    CHECK(read_stats_csv(stats_in).size() == 30);
    CHECK(load_archive((dir / "archive.txt").string()).size() > 0);

    // Same plan again: identical statistics apart from wall time.
    plan.output_dir.clear();
    const CrossValidationResult b = crossvalidate(plan);
    auto strip = [](std::vector<StatsRow> rows) {
        for (auto& r : rows) r.wall_time_s = 0.0;
        return rows;
    };
    CHECK(strip(a.base) == strip(b.base));
    CHECK(strip(a.biased) == strip(b.biased));
    std::filesystem::remove_all(dir);
}

TEST_CASE("a leaked record is reported") {
    FoldProvenance p;
    p.test_ids = {"i0001", "i0002"};
    p.record_ids = {"i0002", "i0003"};
    CHECK(leaked_instances(p) == std::set<std::string>{"i0002"});
}

TEST_CASE("instance ids and plan instances") {
    CHECK(instance_id(7) == "i0007");
    CHECK(instance_id(12345) == "i12345");
    const ExperimentPlan plan = tiny_plan();
    CHECK(make_plan_instance(plan, 3).problem == make_plan_instance(plan, 3).problem);
    CHECK(!(make_plan_instance(plan, 3).problem == make_plan_instance(plan, 4).problem));
}

}
