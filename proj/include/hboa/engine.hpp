#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "hboa/adf.hpp"
#include "hboa/bayesnet.hpp"
#include "hboa/population.hpp"
#include "hboa/rng.hpp"

namespace hboa {

struct EngineConfig {
    std::size_t population_size = 0;
    std::size_t max_iterations = 0;  // 0: the number of bits
    ScoreConfig score;
    std::size_t rts_window = 0;  // 0: min(n, N / 20), at least 1
    bool hc_enabled = true;
    std::uint64_t seed = 0;

    /// Throws ConfigError unless N >= 2 and even, and the score config is valid.
    void validate(std::size_t n) const;
    std::size_t window(std::size_t n) const noexcept;
    std::size_t iteration_cap(std::size_t n) const noexcept;
};

/// Counters for one run. HC flips are counted apart from evaluations.
struct RunStats {
    std::uint64_t evaluations = 0;
    std::uint64_t hc_steps = 0;
    std::size_t iterations = 0;
    bool success = false;
    bool converged = false;
    double wall_time = 0.0;
    std::size_t population_size = 0;
    double best_fitness = 0.0;

    bool operator==(const RunStats&) const = default;
};

struct RunResult {
    RunStats stats;
    Population population;
};

/// Called once per iteration with the model built from the selected parents.
using ModelObserver = std::function<void(std::size_t iteration, const DtBayesNet& model)>;

/// True when `fitness` matches `optimum` up to floating-point summation noise.
bool reaches_optimum(double fitness, double optimum) noexcept;

/// Binary tournaments without replacement: two random permutations, each cut
/// into consecutive pairs; the fitter of each pair (the first on ties) is
/// copied. Returns exactly N winners. Throws ConfigError for odd N.
Population tournament_select(const Population& pop, Rng& rng);

/// Steepest-ascent single-bit-flip hill climbing with incremental gains over
/// the subsets touching each flipped bit. Reusable across solutions of the
/// same problem.
class HillClimber {
public:
    explicit HillClimber(const AdditiveProblem& problem);

    /// Climbs `x` in place to a 1-flip local optimum; returns the flips made.
    /// Ties between equal gains go to the lowest bit index.
    std::size_t operator()(BitString& x);

private:
    double gain(std::size_t var) const;

    const AdditiveProblem* problem_;
    std::vector<std::vector<std::size_t>> neighbors_;
    std::vector<std::size_t> keys_;
    std::vector<double> gains_;
};

struct ClimbResult {
    BitString solution;
    std::size_t flips = 0;
};

ClimbResult hill_climb(const AdditiveProblem& problem, BitString x);

/// Restricted tournament replacement: each offspring is compared with the
/// nearest (Hamming) of w members drawn without replacement (first drawn on
/// ties) and replaces it only if strictly fitter.
void rts_replace(Population& pop, const Population& offspring, std::size_t window, Rng& rng);

/// One hBOA run. Stops when the known optimum is reached, when every member
/// is identical, or after the iteration cap.
RunResult run(const AdditiveProblem& problem, const EngineConfig& config,
              std::optional<double> known_optimum = std::nullopt, const ModelObserver& observer = {});

/// Same, reusing a precomputed distance matrix.
RunResult run(const AdditiveProblem& problem, const DistanceMatrix& distances, const EngineConfig& config,
              std::optional<double> known_optimum, const ModelObserver& observer = {});

struct BisectionConfig {
    std::size_t initial = 32;
    std::size_t runs = 10;
    double ratio = 1.05;
    std::size_t cap = std::size_t{1} << 20;
    std::uint64_t base_seed = 0;
    bool keep_models = false;  // keep the models of the returned size's runs
};

/// Seed for run `r` at population size `N`.
std::uint64_t bisection_seed(std::uint64_t base_seed, std::size_t N, std::size_t r) noexcept;

struct BisectionTrial {
    std::size_t population_size = 0;
    std::size_t runs = 0;  // runs attempted; a size stops at its first failure
    std::size_t successes = 0;
};

struct ArchivedModel {
    std::size_t run = 0;
    std::size_t iteration = 0;
    DtBayesNet model;
};

struct BisectionResult {
    std::size_t population_size = 0;
    std::size_t failing_lower = 0;  // 0 when the initial size already succeeded
    std::vector<RunStats> runs;     // the successful runs at population_size
    std::vector<BisectionTrial> trials;
    std::vector<ArchivedModel> models;
};

/// Doubles N from `initial` until all runs succeed, then bisects between the
/// last failing and first succeeding size until upper / lower <= ratio (or
/// the two even sizes are adjacent). Throws UnsolvableError past the cap.
BisectionResult bisection(const AdditiveProblem& problem, const EngineConfig& engine_template, double known_optimum,
                          const BisectionConfig& config);

}  // namespace hboa
