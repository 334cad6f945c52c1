#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hboa/adf.hpp"
#include "hboa/bayesnet.hpp"
#include "hboa/bias_table.hpp"

namespace hboa {

/// s(m, d, j): splits in tree j on variables at distance d from X_j, for one
/// model. Sparse; absent keys are zero.
struct SplitCounts {
    std::map<std::pair<std::size_t, std::size_t>, std::size_t> counts;  // (d, j) -> s

    std::size_t at(std::size_t d, std::size_t j) const {
        auto it = counts.find({d, j});
        return it == counts.end() ? 0 : it->second;
    }
    std::size_t total() const noexcept {
        std::size_t sum = 0;
        for (const auto& [key, s] : counts) sum += s;
        return sum;
    }
};

/// Walks every tree; each internal node of tree j splitting on X_i adds one
/// to (d(i, j), j). Throws InputError when sizes differ.
SplitCounts extract_counts(const DtBayesNet& model, const DistanceMatrix& distances);

struct ModelRecord {
    std::string instance_id;
    std::size_t run = 0;
    std::size_t iteration = 0;
    std::uint64_t fingerprint = 0;  // DistanceMatrix::fingerprint of the instance
    DtBayesNet model;
};

struct ArchiveMeta {
    std::string problem_class;
    std::size_t n = 0;
    std::string config;
};

/// Models gathered from earlier runs. All records share n.
struct ModelArchive {
    ArchiveMeta meta;
    std::vector<ModelRecord> records;

    std::size_t size() const noexcept { return records.size(); }
    bool empty() const noexcept { return records.empty(); }
    std::set<std::string> instance_ids() const;
};

/// Copy of `archive` without records whose instance id is in `exclude`.
ModelArchive exclude_instances(const ModelArchive& archive, const std::set<std::string>& exclude);

/// Archive files: a header line `HBOA-ARCHIVE 1 class=<c> n=<n> config=<c>`
/// followed by records, each a line `M <instance> <run> <iteration> <n>
/// <fingerprint>` and then the model's n tree lines.
void write_archive_header(std::ostream& out, const ArchiveMeta& meta);
void write_record(std::ostream& out, const ModelRecord& record);
void write_archive(std::ostream& out, const ModelArchive& archive);

/// Appends records to `path`, writing the header first if the file is new
/// or empty.
void append_records(const std::string& path, const ArchiveMeta& meta, std::span<const ModelRecord> records);

/// Reads every record whose instance id is not excluded. Throws ParseError
/// naming the record index for malformed records and InputError when no
/// record survives the exclusion.
ModelArchive read_archive(std::istream& in, const std::set<std::string>& exclude = {});
ModelArchive load_archive(const std::string& path, const std::set<std::string>& exclude = {});

enum class BiasAggregation {
    per_variable,  // P_k(d, j)
    pooled,        // P_k(d): every (model, tree) pair is one observation
};

/// Survival-ratio estimate P_k = c_k / c_{k-1}, c_k = #{models with s >= k},
/// clamped below by p_floor = 1 / (observations + 2). Throws InputError for
/// an empty archive, mismatched n, or records mined on a different
/// interaction structure (fingerprint mismatch).
BiasTable build_bias_table(const ModelArchive& archive, const DistanceMatrix& distances,
                           BiasAggregation aggregation = BiasAggregation::per_variable);

/// Share of all archived splits falling at each distance.
struct DistanceShare {
    std::size_t distance = 0;
    std::size_t splits = 0;
    double proportion = 0.0;
};

/// One entry per distance 1..max distance of `distances`.
std::vector<DistanceShare> split_proportions(const ModelArchive& archive, const DistanceMatrix& distances);

/// CSV export `d,j,k,P` preceded by a `# n=.. observations=.. pooled=..
/// p_floor=..` line. Values round-trip exactly.
void write_bias_table_csv(std::ostream& out, const BiasTable& table);
BiasTable read_bias_table_csv(std::istream& in);
void save_bias_table(const std::string& path, const BiasTable& table);
BiasTable load_bias_table(const std::string& path);

}  // namespace hboa
