#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace hboa {

using BitString = std::vector<std::uint8_t>;

/// A maximization objective f(x) = sum_i table_i[x restricted to subset_i].
///
/// Table keys are formed from the subset's bits in listed order, the first
/// listed variable being the most significant bit. Immutable once built.
class AdditiveProblem {
public:
    /// Position of one variable inside one subset: `mask` is the bit the
    /// variable contributes to that subset's table index.
    struct Occurrence {
        std::size_t subset;
        std::size_t mask;
    };

    AdditiveProblem() = default;

    /// Throws InputError if any invariant is violated (empty or duplicate
    /// subset, index >= n, table size != 2^|subset|).
    AdditiveProblem(std::size_t n, std::vector<std::vector<std::size_t>> subsets,
                    std::vector<std::vector<double>> tables);

    std::size_t size() const noexcept { return n_; }
    std::size_t subset_count() const noexcept { return subsets_.size(); }

    const std::vector<std::size_t>& subset(std::size_t i) const { return subsets_[i]; }
    const std::vector<double>& table(std::size_t i) const { return tables_[i]; }
    const std::vector<std::vector<std::size_t>>& subsets() const noexcept { return subsets_; }
    const std::vector<std::vector<double>>& tables() const noexcept { return tables_; }

    /// Subsets in which `var` appears, with its bit mask in each table index.
    const std::vector<Occurrence>& occurrences(std::size_t var) const { return occurrences_[var]; }

    std::size_t table_index(std::size_t subset, std::span<const std::uint8_t> x) const noexcept {
        std::size_t key = 0;
        for (std::size_t v : subsets_[subset]) key = (key << 1) | (x[v] & 1U);
        return key;
    }

    bool operator==(const AdditiveProblem& other) const {
        return n_ == other.n_ && subsets_ == other.subsets_ && tables_ == other.tables_;
    }

private:
    std::size_t n_ = 0;
    std::vector<std::vector<std::size_t>> subsets_;
    std::vector<std::vector<double>> tables_;
    std::vector<std::vector<Occurrence>> occurrences_;
};

/// Sum of all subfunction lookups. Throws InputError if |x| != n.
double evaluate(const AdditiveProblem& problem, std::span<const std::uint8_t> x);

/// All-pairs shortest-path distances in the interaction graph, where two
/// variables are adjacent when they share a subset. Unreachable pairs get n.
class DistanceMatrix {
public:
    DistanceMatrix() = default;
    DistanceMatrix(std::size_t n, std::vector<std::uint32_t> distances);

    std::size_t size() const noexcept { return n_; }
    std::uint32_t operator()(std::size_t i, std::size_t j) const noexcept { return d_[i * n_ + j]; }
    std::uint32_t max_distance() const noexcept;

    /// Stable 64-bit hash of n and every entry; archives use it to check that
    /// models were mined against the same interaction structure.
    std::uint64_t fingerprint() const noexcept;

    bool operator==(const DistanceMatrix&) const = default;

private:
    std::size_t n_ = 0;
    std::vector<std::uint32_t> d_;
};

DistanceMatrix distance_matrix(const AdditiveProblem& problem);

}  // namespace hboa
