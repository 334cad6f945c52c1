#include "hboa/adf.hpp"

#include <algorithm>
#include <string>
#include <utility>

#include "hboa/errors.hpp"
#include "hboa/rng.hpp"

namespace hboa {

AdditiveProblem::AdditiveProblem(std::size_t n, std::vector<std::vector<std::size_t>> subsets,
                                 std::vector<std::vector<double>> tables)
    : n_(n), subsets_(std::move(subsets)), tables_(std::move(tables)), occurrences_(n) {
    if (subsets_.size() != tables_.size())
        throw InputError("subset count " + std::to_string(subsets_.size()) +
                         " does not match table count " + std::to_string(tables_.size()));
    for (std::size_t i = 0; i < subsets_.size(); ++i) {
        const auto& s = subsets_[i];
        if (s.empty()) throw InputError("subset " + std::to_string(i) + " is empty");
        if (s.size() >= 8 * sizeof(std::size_t))
            throw InputError("subset " + std::to_string(i) + " is too large");
        for (std::size_t a = 0; a < s.size(); ++a) {
            if (s[a] >= n)
                throw InputError("subset " + std::to_string(i) + " references variable " +
                                 std::to_string(s[a]) + " >= n");
            for (std::size_t b = 0; b < a; ++b)
                if (s[a] == s[b])
                    throw InputError("subset " + std::to_string(i) + " repeats variable " +
                                     std::to_string(s[a]));
        }
        if (tables_[i].size() != (std::size_t{1} << s.size()))
            throw InputError("table " + std::to_string(i) + " has " +
                             std::to_string(tables_[i].size()) + " entries, expected " +
                             std::to_string(std::size_t{1} << s.size()));
        for (std::size_t a = 0; a < s.size(); ++a)
            occurrences_[s[a]].push_back({i, std::size_t{1} << (s.size() - 1 - a)});
    }
}

double evaluate(const AdditiveProblem& problem, std::span<const std::uint8_t> x) {
    if (x.size() != problem.size())
        throw InputError("solution has " + std::to_string(x.size()) + " bits, problem has " +
                         std::to_string(problem.size()));
    double total = 0.0;
    for (std::size_t i = 0; i < problem.subset_count(); ++i)
        total += problem.table(i)[problem.table_index(i, x)];
    return total;
}

DistanceMatrix::DistanceMatrix(std::size_t n, std::vector<std::uint32_t> distances)
    : n_(n), d_(std::move(distances)) {
    if (d_.size() != n * n) throw InputError("distance matrix must hold n*n entries");
}

std::uint32_t DistanceMatrix::max_distance() const noexcept {
    return d_.empty() ? 0 : *std::max_element(d_.begin(), d_.end());
}

std::uint64_t DistanceMatrix::fingerprint() const noexcept {
    std::uint64_t h = mix_seed(0x5eedULL, n_);
    for (std::uint32_t v : d_) h = mix_seed(h, v);
    return h;
}

DistanceMatrix distance_matrix(const AdditiveProblem& problem) {
    const std::size_t n = problem.size();
    std::vector<std::vector<std::size_t>> adjacency(n);
    for (const auto& s : problem.subsets())
        for (std::size_t a : s)
            for (std::size_t b : s)
                if (a != b) adjacency[a].push_back(b);
    for (auto& row : adjacency) {
        std::sort(row.begin(), row.end());
        row.erase(std::unique(row.begin(), row.end()), row.end());
    }

    const auto unreachable = static_cast<std::uint32_t>(n);
    std::vector<std::uint32_t> d(n * n, unreachable);
    std::vector<std::size_t> queue;
    queue.reserve(n);
    for (std::size_t src = 0; src < n; ++src) {
        std::uint32_t* row = d.data() + src * n;
        row[src] = 0;
        queue.assign(1, src);
        for (std::size_t head = 0; head < queue.size(); ++head) {
            const std::size_t u = queue[head];
            for (std::size_t v : adjacency[u]) {
                if (row[v] == unreachable && v != src) {
                    row[v] = row[u] + 1;
                    queue.push_back(v);
                }
            }
        }
    }
    return DistanceMatrix(n, std::move(d));
}

}  // namespace hboa
