// Acceptance suite: one PASS/FAIL line per criterion.
//
//   acceptance [--only 1,2,...] [--cli path/to/hboa_cli] [--work dir] [--threads t]

#include <CLI11.hpp>

#include <algorithm>
#include <boost/math/distributions/chi_squared.hpp>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "hboa/bayesnet.hpp"
#include "hboa/bias_miner.hpp"
#include "hboa/engine.hpp"
#include "hboa/experiment.hpp"
#include "hboa/problems.hpp"

using namespace hboa;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(double v, int digits = 4) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", digits, v);
    return buf;
}

// ---------------------------------------------------------------- oracles

// Maximum over all 2^n strings. Keys are maintained along a Gray code; the
// value is summed afresh in subset order for each string.
double enumerate_max(const AdditiveProblem& p) {
    const std::size_t n = p.size(), m = p.subset_count();
    std::vector<std::vector<std::pair<std::size_t, std::size_t>>> touching(n);  // (subset, key bit)
    for (std::size_t s = 0; s < m; ++s) {
        const auto& vars = p.subset(s);
        for (std::size_t t = 0; t < vars.size(); ++t) touching[vars[t]].push_back({s, vars.size() - 1 - t});
    }
    std::vector<std::size_t> keys(m, 0);
    double best = -1e300;
    for (std::uint64_t i = 0; i < (std::uint64_t{1} << n); ++i) {
        if (i) {
            const std::size_t bit = static_cast<std::size_t>(std::countr_zero(i));
            for (auto [s, b] : touching[bit]) keys[s] ^= std::size_t{1} << b;
        }
        double value = 0.0;
        for (std::size_t s = 0; s < m; ++s) value += p.table(s)[keys[s]];
        best = std::max(best, value);
    }
    return best;
}

// Direct lattice energy, spin +1 for bit 0.
int lattice_energy(std::size_t L, const std::vector<int>& J, std::uint64_t code) {
    auto s = [&](std::size_t r, std::size_t c) { return (code >> ((r % L) * L + c % L)) & 1U ? -1 : 1; };
    int e = 0;
    for (std::size_t r = 0; r < L; ++r)
        for (std::size_t c = 0; c < L; ++c) {
            e -= J[2 * (r * L + c)] * s(r, c) * s(r, c + 1);
            e -= J[2 * (r * L + c) + 1] * s(r, c) * s(r + 1, c);
        }
    return e;
}

double log_factorial(std::int64_t m) {
    double s = 0.0;
    for (std::int64_t i = 2; i <= m; ++i) s += std::log(double(i));
    return s;
}

Population random_population(std::size_t count, std::size_t n, Rng& rng) {
    Population pop;
    for (std::size_t i = 0; i < count; ++i) {
        BitString x(n);
        for (auto& b : x) b = rng.coin();
        pop.members.push_back(std::move(x));
    }
    return pop;
}

// ---------------------------------------------------------------- 1 - 6

Outcome nk_oracle() {
    Rng rng(101);
    std::size_t agree = 0;
    double worst = 0.0;
    for (std::size_t t = 0; t < 50; ++t) {
        const std::size_t n = 12 + t % 9;
        const std::size_t k = 1 + t % 5;
        const AdditiveProblem p = generate_nk({n, k, rng()});
        // The witness is re-evaluated in subset order so both sides sum identically.
        const ExactSolution dp = solve_nk_dp(p);
        agree += evaluate(p, dp.witness) == enumerate_max(p);
        worst = std::max(worst, std::abs(dp.value - evaluate(p, dp.witness)));
    }
    return {agree == 50, std::to_string(agree) + "/50 exact matches, n in [12, 20], k in [1, 5]; DP value rounding " +
                             fmt(worst)};
}

Outcome spin_glass_oracle() {
    std::size_t agree = 0;
    for (std::uint64_t t = 0; t < 50; ++t) {
        const SpinGlassSpec spec = make_spin_glass_spec(4, 500 + t);
        int best = 1 << 30;
        for (std::uint64_t code = 0; code < (1U << 16); ++code) best = std::min(best, lattice_energy(4, spec.couplings, code));
        agree += solve_spin_glass_oracle(generate_spin_glass(spec)).value == -double(best);
    }
    bool ferro = true;
    std::string sides;
    for (std::size_t L = 2; L <= max_oracle_side; L += 2) {
        SpinGlassSpec spec{L, 0, std::vector<int>(2 * L * L, -1)};
        const double e_min = -solve_spin_glass_oracle(generate_spin_glass(spec)).value;
        ferro = ferro && e_min == -2.0 * double(L * L);
        sides += " " + std::to_string(L);
    }
    return {agree == 50 && ferro, std::to_string(agree) + "/50 exact 4x4 matches; all J=-1 gives -2L^2 for L =" + sides +
                                      (ferro ? "" : " (mismatch)")};
}

Outcome bde_closed_form() {
    double worst = 0.0;
    for (std::int64_t m0 = 0; m0 <= 20; ++m0)
        for (std::int64_t m1 = 0; m0 + m1 <= 20; ++m1)
            worst = std::max(worst, std::abs(bde_leaf_logscore(m0, m1) -
                                             (log_factorial(m0) + log_factorial(m1) - log_factorial(m0 + m1 + 1))));
    return {worst <= 1e-9, "max |error| " + fmt(worst) + " over m0 + m1 <= 20"};
}

Outcome penalty_per_split() {
    Rng rng(202);
    double worst = 0.0;
    std::size_t splits = 0;
    for (int t = 0; t < 40; ++t) {
        const std::size_t N = 16 + 2 * rng.below(200);
        const Instance inst = make_nk_instance({20, 3, rng()});
        Population pop = random_population(N, 20, rng);
        for (auto& x : pop.members) x[1] = x[0], x[7] = x[5] ^ x[6], x[12] = x[11] & x[10];
        const DistanceMatrix d = distance_matrix(inst.problem);
        ModelBuilder builder(pop, ScoreConfig{}, d);
        while (true) {
            const auto choice = builder.best_split();
            if (!choice || choice->score.delta() <= 0.0) break;
            const double before = builder.accumulated_score().prior;
            builder.apply_split(choice->tree, choice->leaf, choice->var);
            const double step = builder.accumulated_score().prior - before;
            worst = std::max(worst, std::abs(step + 0.5 * std::log(double(N))));
            ++splits;
        }
        // Full rescoring agrees with one penalty per split on top of the univariate model.
        const double full = log_score(builder.model(), ScoreConfig{}, d, N).prior;
        const double base = log_score(univariate_model(pop), ScoreConfig{}, d, N).prior;
        const double per = (full - base) / std::max<double>(1.0, double(builder.model().split_count()));
        if (builder.model().split_count()) worst = std::max(worst, std::abs(per + 0.5 * std::log(double(N))));
    }
    return {splits > 0 && worst <= 1e-12, std::to_string(splits) + " splits, max |delta prior + 0.5 ln N| " + fmt(worst)};
}

Outcome score_consistency() {
    Rng rng(303);
    double worst = 0.0;
    for (int t = 0; t < 100; ++t) {
        const std::size_t n = 6 + rng.below(10);
        const DistanceMatrix d = distance_matrix(generate_nk({n, 1 + rng.below(3), rng()}));
        const Population pop = random_population(20 + rng.below(80), n, rng);
        ScoreConfig cfg;
        if (t % 2) {
            std::vector<std::vector<double>> seqs(n * n);
            for (auto& s : seqs) s = {0.6 * rng.uniform() + 0.2, 0.3 * rng.uniform() + 0.1};
            cfg.mode = PriorMode::distance_bias;
            cfg.kappa = 1.0 + double(rng.below(5));
            cfg.bias = std::make_shared<const BiasTable>(n, 50, false, std::move(seqs), 1.0 / 52.0);
        }
        ModelBuilder builder(pop, cfg, d);
        for (int step = 0; step < 40; ++step) {
            const std::size_t tree = rng.below(n);
            const auto leaves = builder.model().tree(tree).leaves();
            const std::size_t leaf = leaves[rng.below(leaves.size())];
            const std::size_t var = rng.below(n);
            if (builder.split_delta(tree, leaf, var).accepted()) builder.apply_split(tree, leaf, var);
        }
        worst = std::max(worst, std::abs(log_score(builder.model(), cfg, d, pop.size()).total() -
                                         builder.accumulated_score().total()));
    }
    return {worst <= 1e-9, "max |rescored - accumulated| " + fmt(worst) + " over 100 trajectories"};
}

Outcome sampling_fidelity() {
    // X0 ~ B(0.3); X1 | X0 = 0 ~ B(0.8), X1 | X0 = 1 ~ B(0.1); X2 ~ B(0.5).
    DecisionTree t0(0, 6, 2), t1(1, 9, 7), t2(2, 0, 0);
    t1.split(0, 0, {1, 7}, {8, 0});
    const DtBayesNet model({t0, t1, t2});
    Rng rng(404);
    const std::size_t draws = 100000;
    const Population pop = sample(model, draws, rng);
    std::array<double, 8> observed{};
    for (const auto& x : pop.members) observed[x[0] * 4 + x[1] * 2 + x[2]] += 1.0;
    double chi2 = 0.0;
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b)
            for (int c = 0; c < 2; ++c) {
                const double p1 = a ? 0.1 : 0.8;
                const double expected = draws * (a ? 0.3 : 0.7) * (b ? p1 : 1.0 - p1) * 0.5;
                const double o = observed[a * 4 + b * 2 + c];
                chi2 += (o - expected) * (o - expected) / expected;
            }
    const double critical = boost::math::quantile(boost::math::chi_squared(7), 0.99);
    return {chi2 < critical, "chi2 = " + fmt(chi2) + " < " + fmt(critical) + " (7 dof, 1e5 samples)"};
}

// ---------------------------------------------------------------- 7 - 8

struct SolvingRun {
    Outcome solving;
    ModelArchive nk_archive;
    DistanceMatrix nk_distances;
};

bool in_bracket(const BisectionResult& r, double ratio) {
    if (r.failing_lower == 0) return true;  // smallest size tried already succeeded
    const double lo = double(r.failing_lower), hi = double(r.population_size);
    // Even sizes only: two apart is the tightest bracket available.
    return hi / lo <= ratio || hi - lo <= 2.0;
}

SolvingRun end_to_end() {
    SolvingRun out;
    out.nk_archive.meta = {"NK", 40, "penalty"};
    std::size_t ok_nk = 0, ok_sg = 0;
    std::vector<double> sizes_nk, sizes_sg;
    BisectionConfig cfg;
    cfg.keep_models = true;
    for (std::uint64_t t = 0; t < 20; ++t) {
        const Instance inst = make_nk_instance({40, 5, 7000 + t});
        const double opt = solve_nk_dp(inst.problem).value;
        cfg.base_seed = mix_seed(71, t);
        const BisectionResult r = bisection(inst.problem, EngineConfig{}, opt, cfg);
        const bool all = std::all_of(r.runs.begin(), r.runs.end(), [](const RunStats& s) { return s.success; });
        ok_nk += all && r.runs.size() == 10 && in_bracket(r, cfg.ratio);
        sizes_nk.push_back(double(r.population_size));
        if (t == 0) out.nk_distances = distance_matrix(inst.problem);
        const std::uint64_t fp = out.nk_distances.fingerprint();
        for (const auto& m : r.models)
            out.nk_archive.records.push_back({instance_id(t), m.run, m.iteration, fp, m.model});
    }
    for (std::uint64_t t = 0; t < 20; ++t) {
        const Instance inst = make_spin_glass_instance(make_spin_glass_spec(6, 9000 + t));
        const double opt = solve_spin_glass_oracle(inst.problem).value;
        cfg.base_seed = mix_seed(73, t);
        cfg.keep_models = false;
        const BisectionResult r = bisection(inst.problem, EngineConfig{}, opt, cfg);
        const bool all = std::all_of(r.runs.begin(), r.runs.end(), [](const RunStats& s) { return s.success; });
        ok_sg += all && r.runs.size() == 10 && in_bracket(r, cfg.ratio);
        sizes_sg.push_back(double(r.population_size));
    }
    out.solving = {ok_nk == 20 && ok_sg == 20,
                   "NK n=40 k=5: " + std::to_string(ok_nk) + "/20, median N " + fmt(median(sizes_nk)) +
                       "; SG L=6: " + std::to_string(ok_sg) + "/20, median N " + fmt(median(sizes_sg))};
    return out;
}

Outcome distance_decay(const SolvingRun& runs) {
    const auto shares = split_proportions(runs.nk_archive, runs.nk_distances);
    std::map<std::size_t, double> p;
    for (const auto& s : shares) p[s.distance] = s.proportion;
    auto at = [&](std::size_t d) { return p.count(d) ? p[d] : 0.0; };
    const double near = at(1) + at(2);
    double far = 0.0;
    for (const auto& [d, v] : p)
        if (d >= 10) far = std::max(far, v);
    std::size_t inversions = 0;
    for (std::size_t d = 1; d < 6; ++d) inversions += at(d + 1) > at(d);
    std::string profile;
    for (std::size_t d = 1; d <= 6; ++d) profile += (d > 1 ? " " : "") + fmt(at(d), 3);
    return {near > far && inversions <= 1, "P(d<=2) = " + fmt(near, 3) + " vs max P(d>=10) = " + fmt(far, 3) +
                                               "; P(1..6) = " + profile + "; " + std::to_string(inversions) +
                                               " inversion(s); " + std::to_string(runs.nk_archive.size()) + " models"};
}

// ---------------------------------------------------------------- 9, 10, 12

struct CvRuns {
    CrossValidationResult nk, sg;
};

CvRuns run_crossvalidation(const fs::path& work, std::size_t threads) {
    CvRuns out;
    ExperimentPlan nk;
    nk.problem_class = ProblemClass::nk;
    nk.n = 60;
    nk.k = 5;
    nk.instances = 100;
    nk.instance_seed = 1;
    nk.folds = 10;
    nk.fold_seed = 2;
    nk.kappas = {1.0, 5.0};
    nk.bisection.base_seed = 7;
    nk.threads = threads;
    nk.output_dir = (work / "nk60").string();
    out.nk = crossvalidate(nk);

    ExperimentPlan sg = nk;
    sg.problem_class = ProblemClass::spin_glass;
    sg.L = 8;
    sg.kappas = {3.0};
    sg.output_dir = (work / "sg8").string();
    out.sg = crossvalidate(sg);
    return out;
}

const SpeedupSummary& summary_at(const CrossValidationResult& r, double kappa) {
    for (const auto& s : r.summaries)
        if (s.kappa == kappa) return s;
    throw std::runtime_error("no summary for kappa " + fmt(kappa));
}

Outcome desk_speedup(const CvRuns& cv) {
    const SpeedupSummary& nk = summary_at(cv.nk, 5.0);
    const SpeedupSummary& sg = summary_at(cv.sg, 3.0);
    const bool pass = nk.evaluations.median >= 1.2 && nk.population_size.median >= 1.2 && sg.evaluations.median >= 1.1;
    return {pass, "NK60 k=5: median evaluation speedup " + fmt(nk.evaluations.median) + " (>= 1.2), population " +
                      fmt(nk.population_size.median) + " (>= 1.2); SG8 k=3: evaluation " + fmt(sg.evaluations.median) +
                      " (>= 1.1), population " + fmt(sg.population_size.median)};
}

Outcome kappa_direction(const CvRuns& cv) {
    const double k1 = summary_at(cv.nk, 1.0).evaluations.median;
    const double k5 = summary_at(cv.nk, 5.0).evaluations.median;
    return {k5 >= k1, "NK60 median evaluation speedup: kappa 5 " + fmt(k5) + " vs kappa 1 " + fmt(k1)};
}

Outcome hygiene(const CvRuns& cv) {
    std::size_t folds = 0, leaked = 0, records = 0;
    for (const auto* r : {&cv.nk, &cv.sg})
        for (const auto& p : r->provenance) {
            ++folds;
            leaked += leaked_instances(p).size();
            records += p.records;
        }
    return {folds > 0 && leaked == 0, std::to_string(leaked) + " leaked test instances over " + std::to_string(folds) +
                                          " folds (" + std::to_string(records) + " archive records used)"};
}

// ---------------------------------------------------------------- 11

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::string quote(const fs::path& p) { return "'" + p.string() + "'"; }

void shell(const std::string& cmd) {
    if (std::system((cmd + " >/dev/null").c_str()) != 0) throw std::runtime_error("command failed: " + cmd);
}

std::vector<StatsRow> stats_without_time(const fs::path& p) {
    std::ifstream in(p);
    auto rows = read_stats_csv(in);
    for (auto& r : rows) r.wall_time_s = 0.0;
    return rows;
}

Outcome determinism(const std::string& cli, const fs::path& work) {
    if (cli.empty()) return {false, "no CLI path given (--cli)"};
    const fs::path dir = work / "determinism";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const std::string exe = quote(cli);
    shell(exe + " gen-nk --n 30 --k 4 --seed 5 --out " + quote(dir / "a.txt"));
    shell(exe + " gen-nk --n 30 --k 4 --seed 6 --out " + quote(dir / "b.txt"));
    shell(exe + " run --instance " + quote(dir / "b.txt") + " --pop 100 --no-hc --seed 3 --archive-out " + quote(dir / "arch.txt"));
    shell(exe + " mine --archive " + quote(dir / "arch.txt") + " --instance " + quote(dir / "a.txt") + " --out " +
          quote(dir / "bias.csv"));

    const std::vector<std::string> variants{
        "--pop 120 --seed 11",
        "--pop 120 --seed 11 --mode bias --bias-table " + quote(dir / "bias.csv") + " --kappa 3",
        "--pop 60 --seed 12 --no-hc",
    };
    std::size_t same = 0;
    for (std::size_t v = 0; v < variants.size(); ++v) {
        bool equal = true;
        std::string pops[2];
        std::vector<StatsRow> stats[2];
        for (int rep = 0; rep < 2; ++rep) {
            const fs::path stem = dir / ("v" + std::to_string(v) + "_" + std::to_string(rep));
            shell(exe + " run --instance " + quote(dir / "a.txt") + " " + variants[v] + " --stats-out " +
                  quote(stem.string() + ".csv") + " --population-out " + quote(stem.string() + "_pop.csv"));
            pops[rep] = slurp(stem.string() + "_pop.csv");
            stats[rep] = stats_without_time(stem.string() + ".csv");
        }
        equal = !pops[0].empty() && pops[0] == pops[1] && stats[0] == stats[1];
        same += equal;
    }
    return {same == variants.size(), std::to_string(same) + "/" + std::to_string(variants.size()) +
                                         " run configurations reproduced stats and final population bit-for-bit"};
}

// ---------------------------------------------------------------- driver

std::set<int> parse_only(const std::string& spec) {
    std::set<int> out;
    std::stringstream s(spec);
    std::string item;
    while (std::getline(s, item, ',')) {
        const auto dash = item.find('-');
        if (dash == std::string::npos) {
            out.insert(std::stoi(item));
        } else {
            for (int i = std::stoi(item.substr(0, dash)); i <= std::stoi(item.substr(dash + 1)); ++i) out.insert(i);
        }
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"acceptance criteria"};
    std::string only = "1-12", cli;
    std::string work = (fs::temp_directory_path() / "hboa_acceptance").string();
    std::size_t threads = std::max(1U, std::thread::hardware_concurrency());
    app.add_option("--only", only, "criteria to run, e.g. 1-6,11");
    app.add_option("--cli", cli, "path to hboa_cli (criterion 11)");
    app.add_option("--work", work, "scratch directory");
    app.add_option("--threads", threads, "crossvalidation worker threads");
    CLI11_PARSE(app, argc, argv);

    const std::set<int> selected = parse_only(only);
    fs::create_directories(work);
    bool all_pass = true;

    auto report = [&](int id, const std::string& name, const std::function<Outcome()>& body) {
        if (!selected.count(id)) return;
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = body();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        all_pass = all_pass && o.pass;
        std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << id << " " << name << ": " << o.detail << " ["
                  << fmt(secs, 3) << " s]" << std::endl;
    };

    report(1, "nk-oracle", nk_oracle);
    report(2, "spin-glass-oracle", spin_glass_oracle);
    report(3, "bde-closed-form", bde_closed_form);
    report(4, "penalty-per-split", penalty_per_split);
    report(5, "score-consistency", score_consistency);
    report(6, "sampling-fidelity", sampling_fidelity);

    if (selected.count(7) || selected.count(8)) {
        SolvingRun runs;
        bool ran = false;
        report(7, "end-to-end-solving", [&] {
            runs = end_to_end();
            ran = true;
            return runs.solving;
        });
        report(8, "distance-decay", [&] {
            if (!ran) {
                runs = end_to_end();
                ran = true;
            }
            return distance_decay(runs);
        });
    }

    if (selected.count(9) || selected.count(10) || selected.count(12)) {
        CvRuns cv;
        std::string failure;
        const auto start = std::chrono::steady_clock::now();
        try {
            cv = run_crossvalidation(work, threads);
        } catch (const std::exception& e) {
            failure = e.what();
        }
        std::cout << "crossvalidation finished in "
                  << fmt(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(), 4) << " s ("
                  << threads << " thread(s)); outputs in " << work << std::endl;
        auto guarded = [&](Outcome (*f)(const CvRuns&)) {
            return [&, f] {
                if (!failure.empty()) throw std::runtime_error(failure);
                return f(cv);
            };
        };
        report(9, "desk-speedup", guarded(desk_speedup));
        report(10, "kappa-direction", guarded(kappa_direction));
        report(12, "crossvalidation-hygiene", guarded(hygiene));
    }

    report(11, "determinism", [&] { return determinism(cli, work); });
    return all_pass ? 0 : 1;
}
