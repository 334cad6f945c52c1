#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hboa/adf.hpp"
#include "hboa/bias_table.hpp"
#include "hboa/population.hpp"
#include "hboa/rng.hpp"

namespace hboa {

/// One node of a binary decision tree. Internal nodes name a split variable
/// and route value 0 to children[0], value 1 to children[1]; leaves carry the
/// counts of the owner variable being 0 and 1.
struct TreeNode {
    static constexpr std::int32_t none = -1;

    std::int32_t split = none;
    std::array<std::int32_t, 2> children{none, none};
    std::int32_t parent = none;
    std::array<std::uint32_t, 2> counts{0, 0};

    bool is_leaf() const noexcept { return split == none; }
};

/// Conditional distribution of variable `owner` given the variables tested on
/// the path to each leaf. Nodes are stored in creation order; node 0 is the
/// root.
class DecisionTree {
public:
    DecisionTree() = default;
    DecisionTree(std::size_t owner, std::uint32_t zeros, std::uint32_t ones);
    /// Adopts an explicit node list (used when reading models back).
    DecisionTree(std::size_t owner, std::vector<TreeNode> nodes) : owner_(owner), nodes_(std::move(nodes)) {}

    std::size_t owner() const noexcept { return owner_; }
    const std::vector<TreeNode>& nodes() const noexcept { return nodes_; }
    const TreeNode& node(std::size_t i) const { return nodes_[i]; }

    std::size_t leaf_count() const noexcept { return nodes_.size() - split_count(); }
    std::size_t split_count() const noexcept { return (nodes_.size() - 1) / 2; }

    /// Leaves in creation (discovery) order.
    std::vector<std::size_t> leaves() const;
    /// Split variables in node order, one entry per internal node.
    std::vector<std::size_t> split_variables() const;

    bool on_path(std::size_t node, std::size_t var) const;
    std::size_t find_leaf(std::span<const std::uint8_t> x) const;

    /// Prior-smoothed P(owner = 1 | leaf) = (m1 + 1) / (m0 + m1 + 2).
    double probability_one(std::size_t leaf) const;

    /// Replaces `leaf` by an internal node on `var` with two new leaves; the
    /// new leaves get `zero_branch` / `one_branch` counts. Returns the index
    /// of the value-0 child (the value-1 child follows it).
    std::size_t split(std::size_t leaf, std::size_t var, std::array<std::uint32_t, 2> zero_branch,
                      std::array<std::uint32_t, 2> one_branch);


    /// Structural equality on preorder traversals (independent of the order
    /// in which nodes were created).
    bool operator==(const DecisionTree& other) const;

private:
    std::size_t owner_ = 0;
    std::vector<TreeNode> nodes_;
};

/// A Bayesian network with one decision tree per variable. Edge i -> j exists
/// whenever X_i is split on somewhere in tree j.
class DtBayesNet {
public:
    DtBayesNet() = default;
    explicit DtBayesNet(std::vector<DecisionTree> trees);

    std::size_t size() const noexcept { return trees_.size(); }
    const DecisionTree& tree(std::size_t j) const { return trees_[j]; }
    DecisionTree& tree(std::size_t j) { return trees_[j]; }
    const std::vector<DecisionTree>& trees() const noexcept { return trees_; }

    /// Sorted distinct split variables of tree j.
    std::vector<std::size_t> parents(std::size_t j) const;
    std::size_t split_count() const noexcept;
    std::size_t leaf_count() const noexcept;

    /// Ancestral order; throws StructureError if the parent graph is cyclic.
    std::vector<std::size_t> topological_order() const;
    bool acyclic() const;

    bool operator==(const DtBayesNet& other) const { return trees_ == other.trees_; }

private:
    std::vector<DecisionTree> trees_;
};

enum class PriorMode { complexity_penalty, distance_bias };

/// Structural prior used when scoring splits. In distance-bias mode the
/// mined bias replaces the complexity penalty.
struct ScoreConfig {
    PriorMode mode = PriorMode::complexity_penalty;
    double kappa = 1.0;
    std::shared_ptr<const BiasTable> bias;

    /// Throws ConfigError when distance-bias mode lacks a table or kappa <= 0.
    void validate(std::size_t n) const;
};

/// ln[ Gamma(2p) / Gamma(m0 + m1 + 2p) * Gamma(m0 + p) Gamma(m1 + p) / Gamma(p)^2 ],
/// the per-leaf BDe factor with prior count p per value. Throws InputError
/// for negative counts or non-positive prior.
double bde_leaf_logscore(std::int64_t m0, std::int64_t m1, double prior = 1.0);

/// Every tree a single leaf holding the marginal counts. Throws InputError
/// for an empty population.
DtBayesNet univariate_model(const Population& selected);

enum class SplitStatus { ok, owner_split, on_path, creates_cycle, out_of_range };

struct SplitEvaluation {
    SplitStatus status = SplitStatus::ok;
    double likelihood = 0.0;
    double prior = 0.0;

    double delta() const noexcept { return likelihood + prior; }
    bool accepted() const noexcept { return status == SplitStatus::ok; }
};

struct SplitChoice {
    std::size_t tree = 0;
    std::size_t leaf = 0;
    std::size_t var = 0;
    SplitEvaluation score;
};

/// Log-score decomposed into its data and structure parts (natural log).
struct ScoreParts {
    double likelihood = 0.0;
    double prior = 0.0;
    double total() const noexcept { return likelihood + prior; }
};

/// Scores `model` from scratch using the counts stored in its leaves.
ScoreParts log_score(const DtBayesNet& model, const ScoreConfig& config, const DistanceMatrix& distances,
                     std::size_t population_size);

/// Greedy split-by-split construction of a decision-tree network.
///
/// Holds the selected population column-wise as bitsets so each candidate
/// split costs two popcount sweeps over the leaf's members. Each leaf caches
/// its best candidate; executing a split in tree j rescores only the leaves
/// of tree j. Cached candidates elsewhere are re-validated against the
/// acyclicity constraint when they are about to win.
class ModelBuilder {
public:
    ModelBuilder(const Population& selected, ScoreConfig config, const DistanceMatrix& distances);
    ~ModelBuilder();
    ModelBuilder(ModelBuilder&&) noexcept;
    ModelBuilder& operator=(ModelBuilder&&) noexcept;

    const DtBayesNet& model() const noexcept;

    /// Score change of splitting `leaf` of tree `tree` on `var`; rejected
    /// candidates carry a non-ok status and no score.
    SplitEvaluation split_delta(std::size_t tree, std::size_t leaf, std::size_t var) const;

    /// Throws StructureError for a rejected candidate.
    SplitEvaluation apply_split(std::size_t tree, std::size_t leaf, std::size_t var);

    /// Highest-delta admissible split; ties go to the lowest (tree, leaf,
    /// variable). Empty when no admissible candidate remains.
    std::optional<SplitChoice> best_split();

    /// Number of splits in tree `tree` on variables at distance d from its owner.
    std::size_t split_count(std::size_t tree, std::size_t d) const;

    /// Score of the starting univariate model plus every executed delta.
    ScoreParts accumulated_score() const noexcept;

    /// Runs best_split/apply_split until the best delta is <= 0.
    void build();

    DtBayesNet release() &&;

private:
    struct State;
    std::unique_ptr<State> state_;
};

/// Executed splits in order, for auditing the score bookkeeping.
struct BuildTrace {
    ScoreParts initial;
    std::vector<SplitChoice> steps;
    ScoreParts accumulated;
};

/// Greedy model building from univariate_model until no split improves the
/// score. Optional `trace` records every executed split.
DtBayesNet build_model(const Population& selected, const ScoreConfig& config, const DistanceMatrix& distances,
                       BuildTrace* trace = nullptr);

/// Ancestral sampling of `count` solutions.
Population sample(const DtBayesNet& model, std::size_t count, Rng& rng);

/// One line per tree: `T owner nodes token...` with preorder tokens `s<var>`
/// for splits and `l<m0>:<m1>` for leaves.
void write_model(std::ostream& out, const DtBayesNet& model);
std::string model_to_string(const DtBayesNet& model);
/// Reads n tree lines. Throws ParseError (line relative to the stream
/// position) or StructureError for invalid trees.
DtBayesNet read_model(std::istream& in, std::size_t n, std::size_t* lines_read = nullptr);
DtBayesNet model_from_string(const std::string& text, std::size_t n);

}  // namespace hboa
