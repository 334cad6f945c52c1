#include "hboa/bayesnet.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <functional>
#include <istream>
#include <ostream>
#include <queue>
#include <sstream>

#include "hboa/errors.hpp"
#include "text.hpp"

namespace hboa {

// ---------------------------------------------------------------------------
// DecisionTree

DecisionTree::DecisionTree(std::size_t owner, std::uint32_t zeros, std::uint32_t ones) : owner_(owner) {
    TreeNode root;
    root.counts = {zeros, ones};
    nodes_.push_back(root);
}

std::vector<std::size_t> DecisionTree::leaves() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < nodes_.size(); ++i)
        if (nodes_[i].is_leaf()) out.push_back(i);
    return out;
}

std::vector<std::size_t> DecisionTree::split_variables() const {
    std::vector<std::size_t> out;
    for (const auto& node : nodes_)
        if (!node.is_leaf()) out.push_back(static_cast<std::size_t>(node.split));
    return out;
}

bool DecisionTree::on_path(std::size_t node, std::size_t var) const {
    for (std::int32_t at = nodes_[node].parent; at != TreeNode::none; at = nodes_[at].parent)
        if (static_cast<std::size_t>(nodes_[at].split) == var) return true;
    return false;
}

std::size_t DecisionTree::find_leaf(std::span<const std::uint8_t> x) const {
    std::size_t at = 0;
    while (!nodes_[at].is_leaf()) at = nodes_[at].children[x[nodes_[at].split] & 1U];
    return at;
}

double DecisionTree::probability_one(std::size_t leaf) const {
    const auto& c = nodes_[leaf].counts;
    return (double(c[1]) + 1.0) / (double(c[0]) + double(c[1]) + 2.0);
}

std::size_t DecisionTree::split(std::size_t leaf, std::size_t var, std::array<std::uint32_t, 2> zero_branch,
                                std::array<std::uint32_t, 2> one_branch) {
    const auto first = static_cast<std::int32_t>(nodes_.size());
    TreeNode zero, one;
    zero.parent = one.parent = static_cast<std::int32_t>(leaf);
    zero.counts = zero_branch;
    one.counts = one_branch;
    nodes_.push_back(zero);
    nodes_.push_back(one);
    auto& parent = nodes_[leaf];
    parent.split = static_cast<std::int32_t>(var);
    parent.children = {first, first + 1};
    parent.counts = {zero_branch[0] + one_branch[0], zero_branch[1] + one_branch[1]};
    return static_cast<std::size_t>(first);
}

bool DecisionTree::operator==(const DecisionTree& other) const {
    if (owner_ != other.owner_ || nodes_.size() != other.nodes_.size()) return false;
    std::function<bool(std::size_t, std::size_t)> same = [&](std::size_t a, std::size_t b) {
        const auto& x = nodes_[a];
        const auto& y = other.nodes_[b];
        if (x.split != y.split) return false;
        if (x.is_leaf()) return x.counts == y.counts;
        return same(x.children[0], y.children[0]) && same(x.children[1], y.children[1]);
    };
    return same(0, 0);
}

// ---------------------------------------------------------------------------
// DtBayesNet

DtBayesNet::DtBayesNet(std::vector<DecisionTree> trees) : trees_(std::move(trees)) {
    for (std::size_t j = 0; j < trees_.size(); ++j)
        if (trees_[j].owner() != j) throw InputError("tree " + std::to_string(j) + " has the wrong owner");
}

std::vector<std::size_t> DtBayesNet::parents(std::size_t j) const {
    auto vars = trees_[j].split_variables();
    std::sort(vars.begin(), vars.end());
    vars.erase(std::unique(vars.begin(), vars.end()), vars.end());
    return vars;
}

std::size_t DtBayesNet::split_count() const noexcept {
    std::size_t total = 0;
    for (const auto& t : trees_) total += t.split_count();
    return total;
}

std::size_t DtBayesNet::leaf_count() const noexcept {
    std::size_t total = 0;
    for (const auto& t : trees_) total += t.leaf_count();
    return total;
}

std::vector<std::size_t> DtBayesNet::topological_order() const {
    const std::size_t n = trees_.size();
    std::vector<std::vector<std::size_t>> children(n);
    std::vector<std::size_t> indegree(n, 0);
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t i : parents(j)) {
            children[i].push_back(j);
            ++indegree[j];
        }
    std::priority_queue<std::size_t, std::vector<std::size_t>, std::greater<>> ready;
    for (std::size_t j = 0; j < n; ++j)
        if (indegree[j] == 0) ready.push(j);
    std::vector<std::size_t> order;
    order.reserve(n);
    while (!ready.empty()) {
        const std::size_t u = ready.top();
        ready.pop();
        order.push_back(u);
        for (std::size_t v : children[u])
            if (--indegree[v] == 0) ready.push(v);
    }
    if (order.size() != n) throw StructureError("model parent graph contains a cycle");
    return order;
}

bool DtBayesNet::acyclic() const {
    try {
        topological_order();
        return true;
    } catch (const StructureError&) {
        return false;
    }
}

// ---------------------------------------------------------------------------
// Scoring

void ScoreConfig::validate(std::size_t n) const {
    if (mode != PriorMode::distance_bias) return;
    if (!(kappa > 0.0)) throw ConfigError("kappa must be > 0 in distance-bias mode");
    if (!bias) throw ConfigError("distance-bias mode requires a bias table");
    if (!bias->pooled() && bias->size() != n)
        throw ConfigError("bias table built for n=" + std::to_string(bias->size()) + ", problem has n=" +
                          std::to_string(n));
}

double bde_leaf_logscore(std::int64_t m0, std::int64_t m1, double prior) {
    if (m0 < 0 || m1 < 0) throw InputError("leaf counts must be non-negative");
    if (!(prior > 0.0)) throw InputError("prior count must be positive");
    const double a = static_cast<double>(m0);
    const double b = static_cast<double>(m1);
    return std::lgamma(2.0 * prior) - std::lgamma(a + b + 2.0 * prior) + std::lgamma(a + prior) +
           std::lgamma(b + prior) - 2.0 * std::lgamma(prior);
}

DtBayesNet univariate_model(const Population& selected) {
    if (selected.empty()) throw InputError("cannot build a model from an empty population");
    const std::size_t n = selected.length();
    std::vector<std::uint32_t> ones(n, 0);
    for (const auto& x : selected.members) {
        if (x.size() != n) throw InputError("population members differ in length");
        for (std::size_t i = 0; i < n; ++i) ones[i] += x[i] & 1U;
    }
    const auto N = static_cast<std::uint32_t>(selected.size());
    std::vector<DecisionTree> trees;
    trees.reserve(n);
    for (std::size_t j = 0; j < n; ++j) trees.emplace_back(j, N - ones[j], ones[j]);
    return DtBayesNet(std::move(trees));
}

ScoreParts log_score(const DtBayesNet& model, const ScoreConfig& config, const DistanceMatrix& distances,
                     std::size_t population_size) {
    ScoreParts parts;
    for (const auto& tree : model.trees())
        for (const auto& node : tree.nodes())
            if (node.is_leaf()) parts.likelihood += bde_leaf_logscore(node.counts[0], node.counts[1]);

    if (config.mode == PriorMode::complexity_penalty) {
        parts.prior = -0.5 * std::log(double(population_size)) * double(model.leaf_count());
        return parts;
    }
    config.validate(model.size());
    for (std::size_t j = 0; j < model.size(); ++j) {
        std::vector<std::size_t> per_distance(distances.size() + 1, 0);
        for (std::size_t i : model.tree(j).split_variables()) ++per_distance[distances(i, j)];
        for (std::size_t d = 1; d < per_distance.size(); ++d)
            for (std::size_t k = 1; k <= per_distance[d]; ++k)
                parts.prior += log_prior_increment(*config.bias, d, j, k, config.kappa);
    }
    return parts;
}

// ---------------------------------------------------------------------------
// ModelBuilder

namespace {

using Bits = std::vector<std::uint64_t>;

bool test_bit(const Bits& bits, std::size_t i) { return (bits[i >> 6] >> (i & 63)) & 1U; }
void set_bit(Bits& bits, std::size_t i) { bits[i >> 6] |= std::uint64_t{1} << (i & 63); }

}  // namespace

struct ModelBuilder::State {
    struct Cached {
        std::int32_t var = TreeNode::none;
        SplitEvaluation score;
    };

    ScoreConfig config;
    DistanceMatrix distances;
    std::size_t n = 0;
    std::size_t N = 0;
    std::size_t words = 0;
    std::vector<Bits> columns;              // [var] membership of X_var = 1
    std::vector<double> log_factorial;      // lgamma(k + 1)
    double penalty = 0.0;                   // -0.5 ln N
    DtBayesNet model;
    std::vector<std::vector<Bits>> masks;   // [tree][node] leaf membership
    std::vector<Bits> descendants;          // [var] reachable set in the parent graph
    std::vector<std::vector<std::uint8_t>> is_parent;  // [tree][var]
    std::vector<std::vector<std::uint32_t>> at_distance;  // [tree][d] split counts
    std::vector<std::vector<Cached>> cache;  // [tree][node]
    ScoreParts accumulated;

    double leaf_score(std::uint64_t m0, std::uint64_t m1) const {
        return log_factorial[m0] + log_factorial[m1] - log_factorial[m0 + m1 + 1];
    }

    SplitStatus admissible(std::size_t j, std::size_t leaf, std::size_t i) const {
        if (i == j) return SplitStatus::owner_split;
        if (model.tree(j).on_path(leaf, i)) return SplitStatus::on_path;
        if (!is_parent[j][i] && test_bit(descendants[j], i)) return SplitStatus::creates_cycle;
        return SplitStatus::ok;
    }

    double prior_delta(std::size_t j, std::size_t i) const {
        if (config.mode == PriorMode::complexity_penalty) return penalty;
        const std::size_t d = distances(i, j);
        return log_prior_increment(*config.bias, d, j, at_distance[j][d] + 1, config.kappa);
    }

    // Counts of (X_i = 1) and (X_i = 1, X_j = 1) among the leaf's members.
    SplitEvaluation score(std::size_t j, std::size_t leaf, std::size_t i, const Bits& owner_ones) const {
        const auto& node = model.tree(j).node(leaf);
        const Bits& mask = masks[j][leaf];
        const Bits& col = columns[i];
        std::uint64_t ones_i = 0, ones_ij = 0;
        for (std::size_t w = 0; w < words; ++w) {
            ones_i += std::popcount(mask[w] & col[w]);
            ones_ij += std::popcount(owner_ones[w] & col[w]);
        }
        const std::uint64_t m0 = node.counts[0], m1 = node.counts[1];
        const std::uint64_t one0 = ones_i - ones_ij, one1 = ones_ij;
        const std::uint64_t zero0 = m0 - one0, zero1 = m1 - one1;
        SplitEvaluation eval;
        eval.likelihood = leaf_score(zero0, zero1) + leaf_score(one0, one1) - leaf_score(m0, m1);
        eval.prior = prior_delta(j, i);
        return eval;
    }

    Bits owner_ones(std::size_t j, std::size_t leaf) const {
        Bits out(words);
        const Bits& mask = masks[j][leaf];
        for (std::size_t w = 0; w < words; ++w) out[w] = mask[w] & columns[j][w];
        return out;
    }

    void refresh_leaf(std::size_t j, std::size_t leaf) {
        Cached best;
        const Bits ones = owner_ones(j, leaf);
        for (std::size_t i = 0; i < n; ++i) {
            if (admissible(j, leaf, i) != SplitStatus::ok) continue;
            const SplitEvaluation eval = score(j, leaf, i, ones);
            if (best.var == TreeNode::none || eval.delta() > best.score.delta()) {
                best.var = static_cast<std::int32_t>(i);
                best.score = eval;
            }
        }
        cache[j][leaf] = best;
    }

    void refresh_tree(std::size_t j) {
        const auto& nodes = model.tree(j).nodes();
        cache[j].resize(nodes.size());
        for (std::size_t l = 0; l < nodes.size(); ++l)
            if (nodes[l].is_leaf()) refresh_leaf(j, l);
    }
};

ModelBuilder::ModelBuilder(const Population& selected, ScoreConfig config, const DistanceMatrix& distances)
    : state_(std::make_unique<State>()) {
    auto& s = *state_;
    s.model = univariate_model(selected);
    s.n = selected.length();
    s.N = selected.size();
    if (distances.size() != s.n) throw InputError("distance matrix does not match the population length");
    config.validate(s.n);
    s.config = std::move(config);
    s.distances = distances;
    s.words = (s.N + 63) / 64;

    s.columns.assign(s.n, Bits(s.words, 0));
    for (std::size_t r = 0; r < s.N; ++r)
        for (std::size_t i = 0; i < s.n; ++i)
            if (selected.members[r][i] & 1U) set_bit(s.columns[i], r);

    s.log_factorial.resize(s.N + 2);
    for (std::size_t k = 0; k < s.log_factorial.size(); ++k) s.log_factorial[k] = std::lgamma(double(k) + 1.0);
    s.penalty = -0.5 * std::log(double(s.N));

    Bits all(s.words, ~std::uint64_t{0});
    if (s.N % 64 != 0) all.back() = (std::uint64_t{1} << (s.N % 64)) - 1;
    s.masks.assign(s.n, std::vector<Bits>(1, all));
    s.descendants.assign(s.n, Bits((s.n + 63) / 64, 0));
    s.is_parent.assign(s.n, std::vector<std::uint8_t>(s.n, 0));
    s.at_distance.assign(s.n, std::vector<std::uint32_t>(s.n + 1, 0));
    s.cache.assign(s.n, {});
    s.accumulated = log_score(s.model, s.config, distances, s.N);
    for (std::size_t j = 0; j < s.n; ++j) s.refresh_tree(j);
}

ModelBuilder::~ModelBuilder() = default;
ModelBuilder::ModelBuilder(ModelBuilder&&) noexcept = default;
ModelBuilder& ModelBuilder::operator=(ModelBuilder&&) noexcept = default;

const DtBayesNet& ModelBuilder::model() const noexcept { return state_->model; }

SplitEvaluation ModelBuilder::split_delta(std::size_t tree, std::size_t leaf, std::size_t var) const {
    const auto& s = *state_;
    SplitEvaluation eval;
    if (tree >= s.n || var >= s.n || leaf >= s.model.tree(tree).nodes().size() ||
        !s.model.tree(tree).node(leaf).is_leaf()) {
        eval.status = SplitStatus::out_of_range;
        return eval;
    }
    eval.status = s.admissible(tree, leaf, var);
    if (!eval.accepted()) return eval;
    return s.score(tree, leaf, var, s.owner_ones(tree, leaf));
}

SplitEvaluation ModelBuilder::apply_split(std::size_t tree, std::size_t leaf, std::size_t var) {
    const SplitEvaluation eval = split_delta(tree, leaf, var);
    if (!eval.accepted()) throw StructureError("split rejected");
    auto& s = *state_;
    const std::size_t j = tree, i = var;

    Bits zero(s.words), one(s.words);
    std::array<std::uint32_t, 2> zero_counts{0, 0}, one_counts{0, 0};
    {
        const Bits& mask = s.masks[j][leaf];
        for (std::size_t w = 0; w < s.words; ++w) {
            zero[w] = mask[w] & ~s.columns[i][w];
            one[w] = mask[w] & s.columns[i][w];
            zero_counts[1] += std::popcount(zero[w] & s.columns[j][w]);
            one_counts[1] += std::popcount(one[w] & s.columns[j][w]);
            zero_counts[0] += std::popcount(zero[w]);
            one_counts[0] += std::popcount(one[w]);
        }
        zero_counts[0] -= zero_counts[1];
        one_counts[0] -= one_counts[1];
    }
    s.model.tree(j).split(leaf, i, zero_counts, one_counts);
    auto& masks = s.masks[j];
    masks[leaf].clear();
    masks[leaf].shrink_to_fit();
    masks.push_back(std::move(zero));
    masks.push_back(std::move(one));

    if (!s.is_parent[j][i]) {
        s.is_parent[j][i] = 1;
        // Everything that reaches i (and i itself) now reaches j and below.
        Bits gained = s.descendants[j];
        set_bit(gained, j);
        for (std::size_t a = 0; a < s.n; ++a)
            if (a == i || test_bit(s.descendants[a], i))
                for (std::size_t w = 0; w < gained.size(); ++w) s.descendants[a][w] |= gained[w];
    }
    ++s.at_distance[j][s.distances(i, j)];
    s.accumulated.likelihood += eval.likelihood;
    s.accumulated.prior += eval.prior;
    s.refresh_tree(j);
    return eval;
}

std::optional<SplitChoice> ModelBuilder::best_split() {
    auto& s = *state_;
    std::optional<SplitChoice> best;
    for (std::size_t j = 0; j < s.n; ++j) {
        const auto& nodes = s.model.tree(j).nodes();
        for (std::size_t l = 0; l < nodes.size(); ++l) {
            if (!nodes[l].is_leaf()) continue;
            auto* cached = &s.cache[j][l];
            if (cached->var == TreeNode::none) continue;
            const auto var = static_cast<std::size_t>(cached->var);
            if (!s.is_parent[j][var] && test_bit(s.descendants[j], var)) {
                s.refresh_leaf(j, l);
                cached = &s.cache[j][l];
                if (cached->var == TreeNode::none) continue;
            }
            if (!best || cached->score.delta() > best->score.delta())
                best = SplitChoice{j, l, static_cast<std::size_t>(cached->var), cached->score};
        }
    }
    return best;
}

std::size_t ModelBuilder::split_count(std::size_t tree, std::size_t d) const {
    return state_->at_distance.at(tree).at(d);
}

ScoreParts ModelBuilder::accumulated_score() const noexcept { return state_->accumulated; }

void ModelBuilder::build() {
    while (true) {
        const auto choice = best_split();
        if (!choice || choice->score.delta() <= 0.0) break;
        apply_split(choice->tree, choice->leaf, choice->var);
    }
}

DtBayesNet ModelBuilder::release() && { return std::move(state_->model); }

DtBayesNet build_model(const Population& selected, const ScoreConfig& config, const DistanceMatrix& distances,
                       BuildTrace* trace) {
    ModelBuilder builder(selected, config, distances);
    if (trace) {
        trace->initial = builder.accumulated_score();
        trace->steps.clear();
    }
    while (true) {
        const auto choice = builder.best_split();
        if (!choice || choice->score.delta() <= 0.0) break;
        builder.apply_split(choice->tree, choice->leaf, choice->var);
        if (trace) trace->steps.push_back(*choice);
    }
    if (trace) trace->accumulated = builder.accumulated_score();
    return std::move(builder).release();
}

// ---------------------------------------------------------------------------
// Sampling

Population sample(const DtBayesNet& model, std::size_t count, Rng& rng) {
    if (count < 1) throw InputError("sample count must be >= 1");
    const auto order = model.topological_order();
    std::vector<std::vector<double>> p_one(model.size());
    for (std::size_t j = 0; j < model.size(); ++j) {
        const auto& tree = model.tree(j);
        p_one[j].resize(tree.nodes().size(), 0.0);
        for (std::size_t l = 0; l < tree.nodes().size(); ++l)
            if (tree.node(l).is_leaf()) p_one[j][l] = tree.probability_one(l);
    }
    Population out;
    out.members.assign(count, BitString(model.size(), 0));
    for (auto& x : out.members)
        for (std::size_t j : order) {
            const std::size_t leaf = model.tree(j).find_leaf(x);
            x[j] = rng.uniform() < p_one[j][leaf] ? 1 : 0;
        }
    return out;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

void write_subtree(std::ostream& out, const DecisionTree& tree, std::size_t at) {
    const auto& node = tree.node(at);
    if (node.is_leaf()) {
        out << " l" << node.counts[0] << ':' << node.counts[1];
        return;
    }
    out << " s" << node.split;
    write_subtree(out, tree, node.children[0]);
    write_subtree(out, tree, node.children[1]);
}

}  // namespace

void write_model(std::ostream& out, const DtBayesNet& model) {
    for (const auto& tree : model.trees()) {
        out << "T " << tree.owner() << ' ' << tree.nodes().size();
        write_subtree(out, tree, 0);
        out << '\n';
    }
}

std::string model_to_string(const DtBayesNet& model) {
    std::ostringstream out;
    write_model(out, model);
    return out.str();
}

DtBayesNet read_model(std::istream& in, std::size_t n, std::size_t* lines_read) {
    std::vector<DecisionTree> trees;
    trees.reserve(n);
    std::string line;
    std::size_t line_no = 0;
    for (std::size_t j = 0; j < n; ++j) {
        if (!std::getline(in, line))
            throw ParseError("expected " + std::to_string(n) + " trees, got " + std::to_string(j), line_no + 1,
                             "tree " + std::to_string(j));
        ++line_no;
        const auto tokens = text::split(line);
        if (tokens.size() < 4 || tokens[0] != "T") throw ParseError("malformed tree line", line_no, "tree");
        const auto owner = text::parse_int<std::size_t>(tokens[1]);
        const auto count = text::parse_int<std::size_t>(tokens[2]);
        if (!owner || *owner != j)
            throw ParseError("tree owner must be " + std::to_string(j), line_no, "owner");
        if (!count || *count % 2 == 0 || *count != tokens.size() - 3)
            throw ParseError("node count does not match the node list", line_no, "nodes");

        std::vector<TreeNode> nodes;
        std::size_t pos = 3;
        std::vector<std::uint8_t> on_path(n, 0);
        std::function<std::int32_t(std::int32_t)> parse = [&](std::int32_t parent) -> std::int32_t {
            if (pos >= tokens.size()) throw ParseError("truncated preorder node list", line_no, "nodes");
            const std::string_view tok = tokens[pos++];
            TreeNode node;
            node.parent = parent;
            const auto index = static_cast<std::int32_t>(nodes.size());
            if (tok.size() >= 2 && tok[0] == 's') {
                const auto var = text::parse_int<std::size_t>(tok.substr(1));
                if (!var || *var >= n) throw ParseError("bad split variable '" + std::string(tok) + "'", line_no, "split");
                if (*var == j) throw StructureError("tree " + std::to_string(j) + " splits on its own variable");
                if (on_path[*var]) throw StructureError("variable repeated on a path in tree " + std::to_string(j));
                node.split = static_cast<std::int32_t>(*var);
                nodes.push_back(node);
                on_path[*var] = 1;
                const std::int32_t zero = parse(index);
                const std::int32_t one = parse(index);
                on_path[*var] = 0;
                nodes[index].children = {zero, one};
                for (int b = 0; b < 2; ++b)
                    nodes[index].counts[b] = nodes[zero].counts[b] + nodes[one].counts[b];
            } else if (tok.size() >= 4 && tok[0] == 'l') {
                const auto colon = tok.find(':');
                if (colon == std::string_view::npos) throw ParseError("bad leaf '" + std::string(tok) + "'", line_no, "leaf");
                const auto m0 = text::parse_int<std::uint32_t>(tok.substr(1, colon - 1));
                const auto m1 = text::parse_int<std::uint32_t>(tok.substr(colon + 1));
                if (!m0 || !m1) throw ParseError("bad leaf counts '" + std::string(tok) + "'", line_no, "leaf");
                node.counts = {*m0, *m1};
                nodes.push_back(node);
            } else {
                throw ParseError("unknown node token '" + std::string(tok) + "'", line_no, "nodes");
            }
            return index;
        };
        parse(TreeNode::none);
        if (pos != tokens.size()) throw ParseError("extra tokens after tree", line_no, "nodes");
        trees.emplace_back(j, std::move(nodes));
    }
    if (lines_read) *lines_read = line_no;
    DtBayesNet model(std::move(trees));
    if (!model.acyclic()) throw StructureError("model parent graph contains a cycle");
    return model;
}

DtBayesNet model_from_string(const std::string& text, std::size_t n) {
    std::istringstream in(text);
    return read_model(in, n);
}

}  // namespace hboa
