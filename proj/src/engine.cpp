#include "hboa/engine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "hboa/errors.hpp"

namespace hboa {

void EngineConfig::validate(std::size_t n) const {
    if (population_size < 2 || population_size % 2 != 0)
        throw ConfigError("population size must be even and >= 2 (got " + std::to_string(population_size) + ")");
    score.validate(n);
}

std::size_t EngineConfig::window(std::size_t n) const noexcept {
    const std::size_t w = rts_window ? rts_window : std::min(n, population_size / 20);
    return std::clamp<std::size_t>(w, 1, std::max<std::size_t>(population_size, 1));
}

std::size_t EngineConfig::iteration_cap(std::size_t n) const noexcept {
    return max_iterations ? max_iterations : n;
}

bool reaches_optimum(double fitness, double optimum) noexcept {
    return fitness >= optimum - 1e-9 * std::max(1.0, std::abs(optimum));
}

Population tournament_select(const Population& pop, Rng& rng) {
    const std::size_t N = pop.size();
    if (N % 2 != 0) throw ConfigError("tournament selection needs an even population");
    if (!pop.evaluated()) throw InputError("tournament selection needs evaluated members");
    Population winners;
    winners.members.reserve(N);
    winners.fitness.reserve(N);
    std::vector<std::size_t> order(N);
    for (int round = 0; round < 2; ++round) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        rng.shuffle(std::span<std::size_t>(order));
        for (std::size_t t = 0; t + 1 < N; t += 2) {
            const std::size_t a = order[t], b = order[t + 1];
            const std::size_t w = pop.fitness[b] > pop.fitness[a] ? b : a;
            winners.members.push_back(pop.members[w]);
            winners.fitness.push_back(pop.fitness[w]);
        }
    }
    return winners;
}

// ---------------------------------------------------------------------------
// Hill climbing

HillClimber::HillClimber(const AdditiveProblem& problem)
    : problem_(&problem),
      neighbors_(problem.size()),
      keys_(problem.subset_count(), 0),
      gains_(problem.size(), 0.0) {
    for (std::size_t v = 0; v < problem.size(); ++v) {
        auto& nb = neighbors_[v];
        nb.push_back(v);
        for (const auto& occ : problem.occurrences(v))
            for (std::size_t u : problem.subset(occ.subset)) nb.push_back(u);
        std::sort(nb.begin(), nb.end());
        nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
    }
}

double HillClimber::gain(std::size_t var) const {
    double g = 0.0;
    for (const auto& occ : problem_->occurrences(var)) {
        const auto& table = problem_->table(occ.subset);
        const std::size_t key = keys_[occ.subset];
        g += table[key ^ occ.mask] - table[key];
    }
    return g;
}

std::size_t HillClimber::operator()(BitString& x) {
    const auto& p = *problem_;
    if (x.size() != p.size()) throw InputError("solution length does not match the problem");
    for (std::size_t s = 0; s < p.subset_count(); ++s) keys_[s] = p.table_index(s, x);
    for (std::size_t v = 0; v < p.size(); ++v) gains_[v] = gain(v);
    std::size_t flips = 0;
    while (true) {
        std::size_t best = 0;
        for (std::size_t v = 1; v < gains_.size(); ++v)
            if (gains_[v] > gains_[best]) best = v;
        if (gains_.empty() || !(gains_[best] > 0.0)) break;
        x[best] ^= 1U;
        for (const auto& occ : p.occurrences(best)) keys_[occ.subset] ^= occ.mask;
        for (std::size_t u : neighbors_[best]) gains_[u] = gain(u);
        ++flips;
    }
    return flips;
}

ClimbResult hill_climb(const AdditiveProblem& problem, BitString x) {
    HillClimber climber(problem);
    const std::size_t flips = climber(x);
    return {std::move(x), flips};
}

// ---------------------------------------------------------------------------
// Replacement

void rts_replace(Population& pop, const Population& offspring, std::size_t window, Rng& rng) {
    const std::size_t N = pop.size();
    if (window < 1 || window > N) throw InputError("RTS window must lie in [1, N]");
    if (!pop.evaluated() || !offspring.evaluated()) throw InputError("RTS needs evaluated populations");
    std::vector<std::size_t> pool(N);
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    for (std::size_t o = 0; o < offspring.size(); ++o) {
        const BitString& child = offspring.members[o];
        std::size_t nearest = 0;
        std::size_t nearest_distance = static_cast<std::size_t>(-1);
        for (std::size_t t = 0; t < window; ++t) {
            const std::size_t r = t + static_cast<std::size_t>(rng.below(N - t));
            std::swap(pool[t], pool[r]);
            const BitString& member = pop.members[pool[t]];
            std::size_t distance = 0;
            for (std::size_t i = 0; i < child.size(); ++i) distance += (member[i] ^ child[i]) & 1U;
            if (distance < nearest_distance) {
                nearest_distance = distance;
                nearest = pool[t];
            }
        }
        if (offspring.fitness[o] > pop.fitness[nearest]) {
            pop.members[nearest] = child;
            pop.fitness[nearest] = offspring.fitness[o];
        }
    }
}

// ---------------------------------------------------------------------------
// The hBOA loop

namespace {

bool all_identical(const Population& pop) {
    for (std::size_t i = 1; i < pop.size(); ++i)
        if (pop.members[i] != pop.members[0]) return false;
    return true;
}

}  // namespace

RunResult run(const AdditiveProblem& problem, const EngineConfig& config, std::optional<double> known_optimum,
              const ModelObserver& observer) {
    return run(problem, distance_matrix(problem), config, known_optimum, observer);
}

RunResult run(const AdditiveProblem& problem, const DistanceMatrix& distances, const EngineConfig& config,
              std::optional<double> known_optimum, const ModelObserver& observer) {
    const std::size_t n = problem.size();
    config.validate(n);
    if (distances.size() != n) throw InputError("distance matrix does not match the problem");
    const auto start = std::chrono::steady_clock::now();
    const std::size_t N = config.population_size;
    const std::size_t window = config.window(n);
    const std::size_t cap = config.iteration_cap(n);

    Rng rng(config.seed);
    HillClimber climber(problem);
    RunResult result;
    RunStats& stats = result.stats;
    stats.population_size = N;

    auto improve_and_evaluate = [&](Population& pop) {
        pop.fitness.resize(pop.size());
        for (std::size_t i = 0; i < pop.size(); ++i) {
            if (config.hc_enabled) stats.hc_steps += climber(pop.members[i]);
            pop.fitness[i] = evaluate(problem, pop.members[i]);
            ++stats.evaluations;
        }
    };

    Population& pop = result.population;
    pop.members.assign(N, BitString(n, 0));
    for (auto& x : pop.members)
        for (auto& bit : x) bit = static_cast<std::uint8_t>(rng() >> 63);
    improve_and_evaluate(pop);
    stats.best_fitness = *std::max_element(pop.fitness.begin(), pop.fitness.end());
    stats.success = known_optimum && reaches_optimum(stats.best_fitness, *known_optimum);
    stats.converged = all_identical(pop);

    while (!stats.success && !stats.converged && stats.iterations < cap) {
        const Population parents = tournament_select(pop, rng);
        const DtBayesNet model = build_model(parents, config.score, distances);
        ++stats.iterations;
        if (observer) observer(stats.iterations, model);
        Population offspring = sample(model, N, rng);
        improve_and_evaluate(offspring);
        rts_replace(pop, offspring, window, rng);
        stats.best_fitness = *std::max_element(pop.fitness.begin(), pop.fitness.end());
        stats.success = known_optimum && reaches_optimum(stats.best_fitness, *known_optimum);
        stats.converged = all_identical(pop);
    }
    stats.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return result;
}

// ---------------------------------------------------------------------------
// Bisection

std::uint64_t bisection_seed(std::uint64_t base_seed, std::size_t N, std::size_t r) noexcept {
    return mix_seed(base_seed, N, r);
}

BisectionResult bisection(const AdditiveProblem& problem, const EngineConfig& engine_template, double known_optimum,
                          const BisectionConfig& config) {
    if (config.initial < 2 || config.initial % 2 != 0) throw ConfigError("initial population size must be even");
    if (config.runs < 1) throw ConfigError("bisection needs at least one run per size");
    if (!(config.ratio > 1.0)) throw ConfigError("bisection ratio must exceed 1");
    const DistanceMatrix distances = distance_matrix(problem);

    BisectionResult result;
    struct Attempt {
        bool ok = true;
        std::vector<RunStats> runs;
        std::vector<ArchivedModel> models;
    };
    auto attempt = [&](std::size_t N) {
        Attempt a;
        EngineConfig cfg = engine_template;
        cfg.population_size = N;
        BisectionTrial trial{N, 0, 0};
        for (std::size_t r = 0; r < config.runs; ++r) {
            cfg.seed = bisection_seed(config.base_seed, N, r);
            ModelObserver observer;
            if (config.keep_models)
                observer = [&a, r](std::size_t iteration, const DtBayesNet& model) {
                    a.models.push_back({r, iteration, model});
                };
            const RunResult res = run(problem, distances, cfg, known_optimum, observer);
            ++trial.runs;
            a.runs.push_back(res.stats);
            if (!res.stats.success) {
                a.ok = false;
                break;
            }
            ++trial.successes;
        }
        result.trials.push_back(trial);
        return a;
    };
    auto accept = [&](std::size_t N, Attempt&& a) {
        result.population_size = N;
        result.runs = std::move(a.runs);
        result.models = std::move(a.models);
    };

    std::size_t N = config.initial;
    std::size_t lower = 0;
    while (true) {
        Attempt a = attempt(N);
        if (a.ok) {
            accept(N, std::move(a));
            break;
        }
        lower = N;
        N *= 2;
        if (N > config.cap)
            throw UnsolvableError("no population size up to " + std::to_string(config.cap) +
                                  " found the optimum in every run");
    }
    std::size_t upper = N;
    while (lower != 0 && double(upper) / double(lower) > config.ratio) {
        std::size_t mid = ((lower + upper) / 2) & ~std::size_t{1};
        if (mid <= lower || mid >= upper) break;
        Attempt a = attempt(mid);
        if (a.ok) {
            upper = mid;
            accept(mid, std::move(a));
        } else {
            lower = mid;
        }
    }
    result.failing_lower = lower;
    return result;
}

}  // namespace hboa
