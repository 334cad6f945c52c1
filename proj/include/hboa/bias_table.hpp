#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace hboa {

/// Conditional split probabilities P_k(d, j) mined from a model archive: the
/// chance that tree j receives a k-th split on a variable at distance d given
/// that it already holds k-1 such splits.
///
/// Every stored probability is clamped below by p_floor. Queries past the end
/// of a stored sequence return p_floor. A pooled table ignores j and holds a
/// single sequence per distance, which lets it be queried for any n.
/// Immutable after construction.
class BiasTable {
public:
    BiasTable() = default;

    /// `sequences[(d - 1) * width + j]` holds P_1, P_2, ... for distance d,
    /// with width = 1 when pooled and n otherwise.
    BiasTable(std::size_t n, std::size_t observations, bool pooled,
              std::vector<std::vector<double>> sequences, double p_floor);

    std::size_t size() const noexcept { return n_; }
    bool pooled() const noexcept { return pooled_; }
    /// Number of (model) or, when pooled, (model, tree) observations mined.
    std::size_t observations() const noexcept { return observations_; }
    double p_floor() const noexcept { return p_floor_; }

    /// Stored P_1.. for (d, j). Throws InputError for d outside [1, n] or
    /// j outside [0, n).
    std::span<const double> sequence(std::size_t d, std::size_t j) const;

    /// P_k(d, j) for k >= 1, with the floor fallback past the stored sequence.
    double probability(std::size_t d, std::size_t j, std::size_t k) const;
    double log_probability(std::size_t d, std::size_t j, std::size_t k) const;

    bool operator==(const BiasTable&) const = default;

private:
    std::size_t slot(std::size_t d, std::size_t j) const;

    std::size_t n_ = 0;
    std::size_t observations_ = 0;
    bool pooled_ = false;
    double p_floor_ = 1.0;
    double log_floor_ = 0.0;
    std::vector<std::vector<double>> sequences_;
    std::vector<std::vector<double>> logs_;
};

/// kappa * ln P_k(d, j); the prior change for the k-th split at (d, j).
double log_prior_increment(const BiasTable& table, std::size_t d, std::size_t j, std::size_t k,
                           double kappa);

}  // namespace hboa
