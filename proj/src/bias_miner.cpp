#include "hboa/bias_miner.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "hboa/errors.hpp"
#include "text.hpp"

namespace hboa {

SplitCounts extract_counts(const DtBayesNet& model, const DistanceMatrix& distances) {
    if (model.size() != distances.size())
        throw InputError("model has " + std::to_string(model.size()) + " variables, distance matrix " +
                         std::to_string(distances.size()));
    SplitCounts out;
    for (std::size_t j = 0; j < model.size(); ++j)
        for (std::size_t i : model.tree(j).split_variables()) ++out.counts[{distances(i, j), j}];
    return out;
}

std::set<std::string> ModelArchive::instance_ids() const {
    std::set<std::string> ids;
    for (const auto& r : records) ids.insert(r.instance_id);
    return ids;
}

ModelArchive exclude_instances(const ModelArchive& archive, const std::set<std::string>& exclude) {
    ModelArchive out{archive.meta, {}};
    for (const auto& r : archive.records)
        if (!exclude.contains(r.instance_id)) out.records.push_back(r);
    return out;
}

// ---------------------------------------------------------------------------
// Archive files

namespace {

constexpr std::string_view archive_magic = "HBOA-ARCHIVE";

std::string hex64(std::uint64_t v) {
    std::ostringstream s;
    s << std::hex << v;
    return s.str();
}

}  // namespace

void write_archive_header(std::ostream& out, const ArchiveMeta& meta) {
    std::string config = meta.config.empty() ? "-" : meta.config;
    std::replace(config.begin(), config.end(), ' ', '_');
    out << archive_magic << " 1 class=" << (meta.problem_class.empty() ? "-" : meta.problem_class)
        << " n=" << meta.n << " config=" << config << '\n';
}

void write_record(std::ostream& out, const ModelRecord& record) {
    out << "M " << record.instance_id << ' ' << record.run << ' ' << record.iteration << ' '
        << record.model.size() << ' ' << hex64(record.fingerprint) << '\n';
    write_model(out, record.model);
}

void write_archive(std::ostream& out, const ModelArchive& archive) {
    write_archive_header(out, archive.meta);
    for (const auto& r : archive.records) write_record(out, r);
}

void append_records(const std::string& path, const ArchiveMeta& meta, std::span<const ModelRecord> records) {
    bool fresh = true;
    {
        std::ifstream probe(path, std::ios::binary | std::ios::ate);
        fresh = !probe || probe.tellg() == 0;
    }
    std::ofstream out(path, std::ios::app);
    if (!out) throw std::runtime_error("cannot open archive " + path);
    if (fresh) write_archive_header(out, meta);
    for (const auto& r : records) write_record(out, r);
    if (!out) throw std::runtime_error("failed writing archive " + path);
}

ModelArchive read_archive(std::istream& in, const std::set<std::string>& exclude) {
    ModelArchive archive;
    std::string line;
    std::size_t line_no = 0;
    if (!std::getline(in, line)) throw ParseError("empty archive file", 1, "header");
    ++line_no;
    const auto header = text::split(line);
    if (header.size() < 2 || header[0] != archive_magic || header[1] != "1")
        throw ParseError("missing archive header", line_no, "header");
    for (std::size_t t = 2; t < header.size(); ++t) {
        const auto tok = header[t];
        const auto eq = tok.find('=');
        if (eq == std::string_view::npos) throw ParseError("bad header field", line_no, std::string(tok));
        const auto key = tok.substr(0, eq), value = tok.substr(eq + 1);
        if (key == "class") archive.meta.problem_class = std::string(value);
        else if (key == "config") archive.meta.config = std::string(value);
        else if (key == "n") {
            auto v = text::parse_int<std::size_t>(value);
            if (!v) throw ParseError("bad n", line_no, "n");
            archive.meta.n = *v;
        }
    }

    std::size_t record = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto tokens = text::split(line);
        if (tokens.empty()) continue;
        if (tokens.size() != 6 || tokens[0] != "M")
            throw ParseError("expected record header 'M instance run iteration n fingerprint'", line_no, "record",
                             record);
        ModelRecord r;
        r.instance_id = std::string(tokens[1]);
        const auto run = text::parse_int<std::size_t>(tokens[2]);
        const auto iteration = text::parse_int<std::size_t>(tokens[3]);
        const auto n = text::parse_int<std::size_t>(tokens[4]);
        std::uint64_t fingerprint = 0;
        const auto [ptr, ec] = std::from_chars(tokens[5].data(), tokens[5].data() + tokens[5].size(), fingerprint, 16);
        if (!run || !iteration || !n || ec != std::errc{} || ptr != tokens[5].data() + tokens[5].size())
            throw ParseError("bad record header fields", line_no, "record", record);
        if (archive.meta.n != 0 && *n != archive.meta.n)
            throw ParseError("record n differs from archive n", line_no, "n", record);
        r.run = *run;
        r.iteration = *iteration;
        r.fingerprint = fingerprint;
        std::size_t consumed = 0;
        try {
            r.model = read_model(in, *n, &consumed);
        } catch (const ParseError& e) {
            throw ParseError(e.what(), line_no + e.line(), "model", record);
        } catch (const std::exception& e) {
            throw ParseError(e.what(), line_no, "model", record);
        }
        line_no += consumed;
        if (!exclude.contains(r.instance_id)) archive.records.push_back(std::move(r));
        ++record;
    }
    if (archive.records.empty())
        throw InputError(record == 0 ? "archive holds no records" : "every archive record was excluded");
    return archive;
}

ModelArchive load_archive(const std::string& path, const std::set<std::string>& exclude) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open archive " + path);
    return read_archive(in, exclude);
}

// ---------------------------------------------------------------------------
// Bias tables

BiasTable build_bias_table(const ModelArchive& archive, const DistanceMatrix& distances,
                           BiasAggregation aggregation) {
    if (archive.empty()) throw InputError("cannot build a bias table from an empty archive");
    const std::size_t n = distances.size();
    const bool pooled = aggregation == BiasAggregation::pooled;
    const std::size_t width = pooled ? 1 : n;
    const std::uint64_t fingerprint = distances.fingerprint();

    // histogram[slot][s] = number of observations with exactly s splits (s >= 1).
    std::vector<std::vector<std::size_t>> histogram(n * width);
    for (std::size_t m = 0; m < archive.size(); ++m) {
        const auto& rec = archive.records[m];
        if (rec.model.size() != n)
            throw InputError("record " + std::to_string(m) + " has n=" + std::to_string(rec.model.size()) +
                             ", expected " + std::to_string(n));
        if (rec.fingerprint != fingerprint)
            throw InputError("record " + std::to_string(m) + " was mined on a different interaction structure");
        const SplitCounts counts = extract_counts(rec.model, distances);
        for (const auto& [key, s] : counts.counts) {
            const auto [d, j] = key;
            auto& h = histogram[(d - 1) * width + (pooled ? 0 : j)];
            if (h.size() <= s) h.resize(s + 1, 0);
            ++h[s];
        }
    }

    const std::size_t observations = archive.size() * (pooled ? n : 1);
    const double p_floor = 1.0 / (double(observations) + 2.0);
    std::vector<std::vector<double>> sequences(n * width);
    for (std::size_t slot = 0; slot < sequences.size(); ++slot) {
        const auto& h = histogram[slot];
        const std::size_t max_s = h.empty() ? 0 : h.size() - 1;
        // survival[k] = #observations with s >= k; survival[0] = observations.
        std::vector<std::size_t> survival(max_s + 2, 0);
        for (std::size_t s = max_s; s >= 1; --s) survival[s] = survival[s + 1] + h[s];
        survival[0] = observations;
        auto& seq = sequences[slot];
        for (std::size_t k = 1; k <= max_s + 1; ++k)
            seq.push_back(std::max(p_floor, double(survival[k]) / double(survival[k - 1])));
    }
    return BiasTable(n, observations, pooled, std::move(sequences), p_floor);
}

std::vector<DistanceShare> split_proportions(const ModelArchive& archive, const DistanceMatrix& distances) {
    std::vector<DistanceShare> out(distances.max_distance());
    for (std::size_t d = 0; d < out.size(); ++d) out[d].distance = d + 1;
    std::size_t total = 0;
    for (const auto& rec : archive.records) {
        for (const auto& [key, s] : extract_counts(rec.model, distances).counts) {
            out[key.first - 1].splits += s;
            total += s;
        }
    }
    for (auto& share : out) share.proportion = total ? double(share.splits) / double(total) : 0.0;
    return out;
}

void write_bias_table_csv(std::ostream& out, const BiasTable& table) {
    out << "# n=" << table.size() << " observations=" << table.observations() << " pooled=" << table.pooled()
        << " p_floor=" << text::format_double(table.p_floor()) << '\n';
    out << "d,j,k,P\n";
    const std::size_t width = table.pooled() ? 1 : table.size();
    for (std::size_t d = 1; d <= table.size(); ++d)
        for (std::size_t j = 0; j < width; ++j) {
            const auto seq = table.sequence(d, j);
            for (std::size_t k = 1; k <= seq.size(); ++k)
                out << d << ',' << j << ',' << k << ',' << text::format_double(seq[k - 1]) << '\n';
        }
}

BiasTable read_bias_table_csv(std::istream& in) {
    std::string line;
    std::size_t line_no = 1;
    if (!std::getline(in, line) || line.rfind("# ", 0) != 0) throw ParseError("missing metadata line", 1, "header");
    std::size_t n = 0, observations = 0;
    bool pooled = false;
    double p_floor = 0.0;
    bool seen[4] = {false, false, false, false};
    for (const auto tok : text::split(std::string_view(line).substr(2))) {
        const auto eq = tok.find('=');
        if (eq == std::string_view::npos) throw ParseError("bad metadata field", 1, std::string(tok));
        const auto key = tok.substr(0, eq), value = tok.substr(eq + 1);
        if (key == "n") {
            auto v = text::parse_int<std::size_t>(value);
            if (!v) throw ParseError("bad n", 1, "n");
            n = *v;
            seen[0] = true;
        } else if (key == "observations") {
            auto v = text::parse_int<std::size_t>(value);
            if (!v) throw ParseError("bad observations", 1, "observations");
            observations = *v;
            seen[1] = true;
        } else if (key == "pooled") {
            pooled = value == "1";
            seen[2] = true;
        } else if (key == "p_floor") {
            auto v = text::parse_double(value);
            if (!v) throw ParseError("bad p_floor", 1, "p_floor");
            p_floor = *v;
            seen[3] = true;
        }
    }
    if (!(seen[0] && seen[1] && seen[2] && seen[3])) throw ParseError("incomplete metadata line", 1, "header");
    ++line_no;
    if (!std::getline(in, line) || text::split(line, ',') != std::vector<std::string_view>{"d", "j", "k", "P"})
        throw ParseError("expected column header d,j,k,P", line_no, "header");

    const std::size_t width = pooled ? 1 : n;
    std::vector<std::vector<double>> sequences(n * width);
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto f = text::split(line, ',');
        if (f.size() != 4) throw ParseError("expected 4 fields", line_no, "row");
        const auto d = text::parse_int<std::size_t>(f[0]);
        const auto j = text::parse_int<std::size_t>(f[1]);
        const auto k = text::parse_int<std::size_t>(f[2]);
        const auto p = text::parse_double(f[3]);
        if (!d || !j || !k || !p) throw ParseError("bad numeric field", line_no, "row");
        if (*d < 1 || *d > n || *j >= width) throw ParseError("(d, j) out of range", line_no, "row");
        auto& seq = sequences[(*d - 1) * width + *j];
        if (*k != seq.size() + 1) throw ParseError("k values must be consecutive from 1", line_no, "k");
        seq.push_back(*p);
    }
    try {
        return BiasTable(n, observations, pooled, std::move(sequences), p_floor);
    } catch (const InputError& e) {
        throw ParseError(e.what(), 0, "table");
    }
}

void save_bias_table(const std::string& path, const BiasTable& table) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    write_bias_table_csv(out, table);
}

BiasTable load_bias_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    return read_bias_table_csv(in);
}

}  // namespace hboa
