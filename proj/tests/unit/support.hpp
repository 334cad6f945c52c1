#pragma once

// Independent reference implementations used as test oracles. They share no
// code with the library beyond the data types.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <queue>
#include <vector>

#include "hboa/adf.hpp"
#include "hboa/population.hpp"
#include "hboa/problems.hpp"
#include "hboa/rng.hpp"

namespace testing {

using hboa::AdditiveProblem;
using hboa::BitString;

inline BitString bits_of(std::uint64_t code, std::size_t n) {
    BitString x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = static_cast<std::uint8_t>((code >> i) & 1U);
    return x;
}

/// Direct sum over subsets, keys built from scratch.
inline double naive_value(const AdditiveProblem& p, const BitString& x) {
    double total = 0.0;
    for (std::size_t s = 0; s < p.subset_count(); ++s) {
        std::size_t key = 0;
        const auto& vars = p.subset(s);
        for (std::size_t t = 0; t < vars.size(); ++t)
            if (x[vars[t]]) key |= std::size_t{1} << (vars.size() - 1 - t);
        total += p.table(s)[key];
    }
    return total;
}

/// Maximum over all 2^n strings.
inline double brute_force_max(const AdditiveProblem& p) {
    double best = -std::numeric_limits<double>::infinity();
    for (std::uint64_t code = 0; code < (std::uint64_t{1} << p.size()); ++code)
        best = std::max(best, naive_value(p, bits_of(code, p.size())));
    return best;
}

/// Periodic L x L energy E = -sum J s_i s_j straight from the couplings.
inline double ising_energy(std::size_t L, const std::vector<int>& couplings, const BitString& x) {
    auto spin = [&](std::size_t r, std::size_t c) { return x[(r % L) * L + (c % L)] ? -1 : 1; };
    double e = 0.0;
    for (std::size_t r = 0; r < L; ++r)
        for (std::size_t c = 0; c < L; ++c) {
            const std::size_t node = r * L + c;
            e -= couplings[2 * node] * spin(r, c) * spin(r, c + 1);
            e -= couplings[2 * node + 1] * spin(r, c) * spin(r + 1, c);
        }
    return e;
}

/// Floyd-Warshall on the subset co-membership graph; unreachable pairs get n.
inline std::vector<std::uint32_t> floyd_distances(const AdditiveProblem& p) {
    const std::size_t n = p.size();
    const std::uint32_t inf = std::numeric_limits<std::uint32_t>::max() / 4;
    std::vector<std::uint32_t> d(n * n, inf);
    for (std::size_t i = 0; i < n; ++i) d[i * n + i] = 0;
    for (const auto& s : p.subsets())
        for (std::size_t a : s)
            for (std::size_t b : s)
                if (a != b) d[a * n + b] = 1;
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                d[i * n + j] = std::min(d[i * n + j], d[i * n + k] + d[k * n + j]);
    for (auto& v : d)
        if (v >= inf) v = static_cast<std::uint32_t>(n);
    return d;
}

/// Steepest ascent re-evaluating every neighbor in full at each step.
inline std::size_t reference_climb(const AdditiveProblem& p, BitString& x) {
    std::size_t flips = 0;
    while (true) {
        const double here = naive_value(p, x);
        double best_gain = 0.0;
        std::size_t best = x.size();
        for (std::size_t i = 0; i < x.size(); ++i) {
            x[i] ^= 1U;
            const double gain = naive_value(p, x) - here;
            x[i] ^= 1U;
            if (gain > best_gain) {
                best_gain = gain;
                best = i;
            }
        }
        if (best == x.size()) return flips;
        x[best] ^= 1U;
        ++flips;
    }
}

/// Random ADF with `m` subsets of size 1..max_order over n variables.
inline AdditiveProblem random_adf(std::size_t n, std::size_t m, std::size_t max_order, hboa::Rng& rng) {
    std::vector<std::vector<std::size_t>> subsets;
    std::vector<std::vector<double>> tables;
    for (std::size_t s = 0; s < m; ++s) {
        const std::size_t order = 1 + rng.below(std::min(max_order, n));
        std::vector<std::size_t> vars(n);
        for (std::size_t i = 0; i < n; ++i) vars[i] = i;
        rng.shuffle(std::span<std::size_t>(vars));
        vars.resize(order);
        std::vector<double> table(std::size_t{1} << order);
        for (auto& v : table) v = std::round(rng.uniform() * 8.0) - 3.0;
        subsets.push_back(vars);
        tables.push_back(table);
    }
    return AdditiveProblem(n, subsets, tables);
}

inline hboa::Population random_population(std::size_t count, std::size_t n, hboa::Rng& rng) {
    hboa::Population pop;
    for (std::size_t i = 0; i < count; ++i) {
        BitString x(n);
        for (auto& b : x) b = rng.coin();
        pop.members.push_back(x);
    }
    return pop;
}

}  // namespace testing
