#include "hboa/bias_table.hpp"

#include <cmath>
#include <string>

#include "hboa/errors.hpp"

namespace hboa {

BiasTable::BiasTable(std::size_t n, std::size_t observations, bool pooled,
                     std::vector<std::vector<double>> sequences, double p_floor)
    : n_(n),
      observations_(observations),
      pooled_(pooled),
      p_floor_(p_floor),
      log_floor_(std::log(p_floor)),
      sequences_(std::move(sequences)) {
    if (!(p_floor > 0.0 && p_floor <= 1.0)) throw InputError("p_floor must lie in (0, 1]");
    const std::size_t width = pooled_ ? 1 : n_;
    if (sequences_.size() != n_ * width)
        throw InputError("bias table needs " + std::to_string(n_ * width) + " sequences");
    logs_.reserve(sequences_.size());
    for (const auto& seq : sequences_) {
        auto& logs = logs_.emplace_back();
        logs.reserve(seq.size());
        for (double p : seq) {
            if (!(p >= p_floor_ && p <= 1.0))
                throw InputError("bias probability " + std::to_string(p) + " outside [p_floor, 1]");
            logs.push_back(std::log(p));
        }
    }
}

std::size_t BiasTable::slot(std::size_t d, std::size_t j) const {
    if (d < 1 || d > n_) throw InputError("distance " + std::to_string(d) + " outside [1, n]");
    if (pooled_) return d - 1;
    if (j >= n_) throw InputError("variable " + std::to_string(j) + " outside [0, n)");
    return (d - 1) * n_ + j;
}

std::span<const double> BiasTable::sequence(std::size_t d, std::size_t j) const {
    return sequences_[slot(d, j)];
}

double BiasTable::probability(std::size_t d, std::size_t j, std::size_t k) const {
    if (k < 1) throw InputError("split ordinal k must be >= 1");
    if (pooled_ && d > n_ && d >= 1) return p_floor_;
    const auto& seq = sequences_[slot(d, j)];
    return k <= seq.size() ? seq[k - 1] : p_floor_;
}

double BiasTable::log_probability(std::size_t d, std::size_t j, std::size_t k) const {
    if (k < 1) throw InputError("split ordinal k must be >= 1");
    if (pooled_ && d > n_ && d >= 1) return log_floor_;
    const auto& logs = logs_[slot(d, j)];
    return k <= logs.size() ? logs[k - 1] : log_floor_;
}

double log_prior_increment(const BiasTable& table, std::size_t d, std::size_t j, std::size_t k,
                           double kappa) {
    return kappa * table.log_probability(d, j, k);
}

}  // namespace hboa
