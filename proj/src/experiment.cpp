#include "hboa/experiment.hpp"

#include <unistd.h>

#include <algorithm>
#include <cctype>
#include <exception>
#include <filesystem>
#include <fstream>
#include <istream>
#include <iterator>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>
#include <tuple>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "hboa/errors.hpp"
#include "hboa/rng.hpp"
#include "text.hpp"

namespace hboa {

namespace fs = std::filesystem;
namespace pt = boost::property_tree;

// ---------------------------------------------------------------------------
// Plan

std::size_t ExperimentPlan::variables() const {
    return problem_class == ProblemClass::spin_glass ? L * L : n;
}

void ExperimentPlan::validate() const {
    if (problem_class == ProblemClass::generic) throw ConfigError("plan problem class must be nk or spin_glass");
    if (problem_class == ProblemClass::nk && (n < 1 || k >= n))
        throw ConfigError("NK plans need n >= 1 and k < n");
    if (problem_class == ProblemClass::spin_glass && L < 2) throw ConfigError("spin glass plans need L >= 2");
    if (folds < 2) throw ConfigError("crossvalidation needs at least 2 folds");
    if (instances == 0 || instances % folds != 0)
        throw ConfigError("instance count (" + std::to_string(instances) + ") must be a positive multiple of the fold count (" +
                          std::to_string(folds) + ")");
    if (kappas.empty()) throw ConfigError("plan needs at least one kappa");
    for (double kappa : kappas)
        if (!(kappa > 0.0)) throw ConfigError("kappa values must be positive");
    if (threads < 1) throw ConfigError("threads must be >= 1");
    if (archive_stride < 1) throw ConfigError("archive_stride must be >= 1");
    if (bisection.initial < 2 || bisection.initial % 2 != 0)
        throw ConfigError("bisection initial size must be even and >= 2");
    if (bisection.runs < 1) throw ConfigError("bisection runs must be >= 1");
    if (!(bisection.ratio > 1.0)) throw ConfigError("bisection ratio must exceed 1");
}

namespace {

const std::set<std::string>& known_keys(const std::string& section) {
    static const std::map<std::string, std::set<std::string>> keys{
        {"problem", {"class", "n", "k", "L", "instances", "seed"}},
        {"crossvalidation", {"folds", "seed", "kappas"}},
        {"engine", {"hc", "rts_window", "max_iterations"}},
        {"bisection", {"seed", "initial", "runs", "ratio", "cap"}},
        {"output", {"dir", "threads", "archive_stride"}},
    };
    auto it = keys.find(section);
    if (it == keys.end()) throw ConfigError("unknown plan section [" + section + "]");
    return it->second;
}

template <typename T>
T plan_value(const pt::ptree& tree, const std::string& path, T fallback) {
    auto node = tree.get_child_optional(pt::ptree::path_type(path, '.'));
    if (!node) return fallback;
    const std::string raw = node->data();
    if constexpr (std::is_same_v<T, std::string>) {
        return raw;
    } else if constexpr (std::is_same_v<T, bool>) {
        if (raw == "true" || raw == "1" || raw == "on" || raw == "yes") return true;
        if (raw == "false" || raw == "0" || raw == "off" || raw == "no") return false;
        throw ConfigError("plan key " + path + " expects a boolean, got '" + raw + "'");
    } else if constexpr (std::is_floating_point_v<T>) {
        auto v = text::parse_double(raw);
        if (!v) throw ConfigError("plan key " + path + " expects a number, got '" + raw + "'");
        return static_cast<T>(*v);
    } else {
        auto v = text::parse_int<T>(raw);
        if (!v) throw ConfigError("plan key " + path + " expects an integer, got '" + raw + "'");
        return *v;
    }
}

ProblemClass parse_class(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    if (s == "nk") return ProblemClass::nk;
    if (s == "spin_glass" || s == "sg") return ProblemClass::spin_glass;
    throw ConfigError("unknown problem class '" + s + "'");
}

}  // namespace

ExperimentPlan read_plan(std::istream& in) {
    pt::ptree tree;
    try {
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(std::string("plan file: ") + e.what());
    }
    for (const auto& [section, body] : tree) {
        if (body.empty() && !body.data().empty()) throw ConfigError("plan key '" + section + "' is outside a section");
        const auto& allowed = known_keys(section);
        for (const auto& [key, value] : body)
            if (!allowed.count(key)) throw ConfigError("unknown plan key " + section + "." + key);
    }

    ExperimentPlan plan;
    plan.problem_class = parse_class(plan_value<std::string>(tree, "problem.class", "nk"));
    plan.n = plan_value<std::size_t>(tree, "problem.n", plan.n);
    plan.k = plan_value<std::size_t>(tree, "problem.k", plan.k);
    plan.L = plan_value<std::size_t>(tree, "problem.L", plan.L);
    plan.instances = plan_value<std::size_t>(tree, "problem.instances", plan.instances);
    plan.instance_seed = plan_value<std::uint64_t>(tree, "problem.seed", plan.instance_seed);

    plan.folds = plan_value<std::size_t>(tree, "crossvalidation.folds", plan.folds);
    plan.fold_seed = plan_value<std::uint64_t>(tree, "crossvalidation.seed", plan.fold_seed);
    if (auto raw = tree.get_optional<std::string>("crossvalidation.kappas")) {
        plan.kappas.clear();
        std::string list = *raw;
        std::replace(list.begin(), list.end(), ',', ' ');
        for (auto token : text::split(list)) {
            auto v = text::parse_double(token);
            if (!v) throw ConfigError("bad kappa '" + std::string(token) + "'");
            plan.kappas.push_back(*v);
        }
    }

    plan.engine.hc_enabled = plan_value<bool>(tree, "engine.hc", true);
    plan.engine.rts_window = plan_value<std::size_t>(tree, "engine.rts_window", 0);
    plan.engine.max_iterations = plan_value<std::size_t>(tree, "engine.max_iterations", 0);

    plan.bisection.base_seed = plan_value<std::uint64_t>(tree, "bisection.seed", plan.bisection.base_seed);
    plan.bisection.initial = plan_value<std::size_t>(tree, "bisection.initial", plan.bisection.initial);
    plan.bisection.runs = plan_value<std::size_t>(tree, "bisection.runs", plan.bisection.runs);
    plan.bisection.ratio = plan_value<double>(tree, "bisection.ratio", plan.bisection.ratio);
    plan.bisection.cap = plan_value<std::size_t>(tree, "bisection.cap", plan.bisection.cap);

    plan.output_dir = plan_value<std::string>(tree, "output.dir", "");
    plan.threads = plan_value<std::size_t>(tree, "output.threads", plan.threads);
    plan.archive_stride = plan_value<std::size_t>(tree, "output.archive_stride", plan.archive_stride);
    plan.validate();
    return plan;
}

ExperimentPlan load_plan(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open plan file " + path);
    return read_plan(in);
}

void write_plan(std::ostream& out, const ExperimentPlan& plan) {
    out << "[problem]\nclass = " << to_string(plan.problem_class) << '\n';
    if (plan.problem_class == ProblemClass::spin_glass)
        out << "L = " << plan.L << '\n';
    else
        out << "n = " << plan.n << "\nk = " << plan.k << '\n';
    out << "instances = " << plan.instances << "\nseed = " << plan.instance_seed << "\n\n";
    out << "[crossvalidation]\nfolds = " << plan.folds << "\nseed = " << plan.fold_seed << "\nkappas =";
    for (double kappa : plan.kappas) out << ' ' << text::format_double(kappa);
    out << "\n\n[engine]\nhc = " << (plan.engine.hc_enabled ? "true" : "false")
        << "\nrts_window = " << plan.engine.rts_window << "\nmax_iterations = " << plan.engine.max_iterations << "\n\n";
    out << "[bisection]\nseed = " << plan.bisection.base_seed << "\ninitial = " << plan.bisection.initial
        << "\nruns = " << plan.bisection.runs << "\nratio = " << text::format_double(plan.bisection.ratio)
        << "\ncap = " << plan.bisection.cap << "\n\n";
    out << "[output]\n";
    if (!plan.output_dir.empty()) out << "dir = " << plan.output_dir << '\n';
    out << "threads = " << plan.threads << "\narchive_stride = " << plan.archive_stride << '\n';
}

std::string instance_id(std::size_t index) {
    std::string digits = std::to_string(index);
    if (digits.size() < 4) digits.insert(0, 4 - digits.size(), '0');
    return "i" + digits;
}

Instance make_plan_instance(const ExperimentPlan& plan, std::size_t index) {
    const std::uint64_t seed = mix_seed(plan.instance_seed, index);
    if (plan.problem_class == ProblemClass::spin_glass) return make_spin_glass_instance(make_spin_glass_spec(plan.L, seed));
    return make_nk_instance(NkSpec{plan.n, plan.k, seed});
}

std::vector<std::vector<std::size_t>> partition_folds(std::size_t count, std::size_t folds, std::uint64_t seed) {
    if (folds == 0 || count % folds != 0) throw ConfigError("fold count must divide the instance count");
    std::vector<std::size_t> order(count);
    for (std::size_t i = 0; i < count; ++i) order[i] = i;
    Rng rng(seed);
    rng.shuffle(std::span<std::size_t>(order));
    const std::size_t size = count / folds;
    std::vector<std::vector<std::size_t>> out(folds);
    for (std::size_t f = 0; f < folds; ++f) {
        out[f].assign(order.begin() + f * size, order.begin() + (f + 1) * size);
        std::sort(out[f].begin(), out[f].end());
    }
    return out;
}

// ---------------------------------------------------------------------------
// Stats rows

StatsRow make_stats_row(const std::string& id, const std::string& mode, double kappa, const BisectionResult& result,
                        std::size_t n, const std::string& node) {
    StatsRow row;
    row.instance_id = id;
    row.mode = mode;
    row.kappa = kappa;
    row.population_size = result.population_size;
    row.n = n;
    row.node = node;
    row.success = !result.runs.empty();
    for (const auto& s : result.runs) {
        row.iterations += double(s.iterations);
        row.evaluations += double(s.evaluations);
        row.hc_steps += double(s.hc_steps);
        row.wall_time_s += s.wall_time;
        row.success = row.success && s.success;
    }
    if (!result.runs.empty()) {
        const double runs = double(result.runs.size());
        row.iterations /= runs;
        row.evaluations /= runs;
        row.hc_steps /= runs;
        row.wall_time_s /= runs;
    }
    return row;
}

StatsRow make_stats_row(const std::string& id, const std::string& mode, double kappa, const RunStats& stats,
                        std::size_t n, const std::string& node) {
    StatsRow row;
    row.instance_id = id;
    row.mode = mode;
    row.kappa = kappa;
    row.population_size = stats.population_size;
    row.iterations = double(stats.iterations);
    row.evaluations = double(stats.evaluations);
    row.hc_steps = double(stats.hc_steps);
    row.wall_time_s = stats.wall_time;
    row.success = stats.success;
    row.n = n;
    row.node = node;
    return row;
}

namespace {

constexpr const char* stats_header = "instance,mode,kappa,N,iterations,evaluations,hc_steps,wall_time_s,success,n,node";

std::string fmt(double v) { return text::format_double(v); }

std::string fmt(const std::optional<double>& v) { return v ? text::format_double(*v) : std::string(); }

// Line-oriented CSV reader with a fixed header and field-level errors.
class CsvReader {
public:
    CsvReader(std::istream& in, std::string header) : in_(in), header_(std::move(header)) {}

    bool next(std::vector<std::string_view>& fields) {
        while (std::getline(in_, line_)) {
            ++line_no_;
            if (!line_.empty() && line_.back() == '\r') line_.pop_back();
            if (line_.empty() || line_[0] == '#') continue;
            if (!seen_header_) {
                if (line_ != header_) throw ParseError("expected header '" + header_ + "'", line_no_);
                seen_header_ = true;
                continue;
            }
            fields = text::split(line_, ',');
            if (fields.size() != columns()) {
                fields.resize(columns());
                throw ParseError("expected " + std::to_string(columns()) + " fields", line_no_);
            }
            return true;
        }
        if (!seen_header_) throw ParseError("missing header '" + header_ + "'", line_no_);
        return false;
    }

    std::size_t columns() const { return text::split(header_, ',').size(); }

    double number(std::string_view s, const char* field) const {
        auto v = text::parse_double(s);
        if (!v) throw ParseError("bad number '" + std::string(s) + "'", line_no_, field);
        return *v;
    }
    std::optional<double> optional_number(std::string_view s, const char* field) const {
        if (s.empty()) return std::nullopt;
        return number(s, field);
    }
    std::size_t count(std::string_view s, const char* field) const {
        auto v = text::parse_int<std::size_t>(s);
        if (!v) throw ParseError("bad count '" + std::string(s) + "'", line_no_, field);
        return *v;
    }
    std::size_t line() const { return line_no_; }

private:
    std::istream& in_;
    std::string header_;
    std::string line_;
    std::size_t line_no_ = 0;
    bool seen_header_ = false;
};

}  // namespace

void write_stats_csv(std::ostream& out, const std::vector<StatsRow>& rows) {
    out << stats_header << '\n';
    for (const auto& r : rows)
        out << r.instance_id << ',' << r.mode << ',' << fmt(r.kappa) << ',' << r.population_size << ','
            << fmt(r.iterations) << ',' << fmt(r.evaluations) << ',' << fmt(r.hc_steps) << ',' << fmt(r.wall_time_s)
            << ',' << (r.success ? 1 : 0) << ',' << r.n << ',' << r.node << '\n';
}

std::vector<StatsRow> read_stats_csv(std::istream& in) {
    CsvReader csv(in, stats_header);
    std::vector<StatsRow> rows;
    std::vector<std::string_view> f;
    while (csv.next(f)) {
        StatsRow r;
        r.instance_id = std::string(f[0]);
        r.mode = std::string(f[1]);
        if (r.mode != "penalty" && r.mode != "bias") throw ParseError("mode must be penalty or bias", csv.line(), "mode");
        r.kappa = csv.number(f[2], "kappa");
        r.population_size = csv.count(f[3], "N");
        r.iterations = csv.number(f[4], "iterations");
        r.evaluations = csv.number(f[5], "evaluations");
        r.hc_steps = csv.number(f[6], "hc_steps");
        r.wall_time_s = csv.number(f[7], "wall_time_s");
        if (f[8] != "0" && f[8] != "1") throw ParseError("success must be 0 or 1", csv.line(), "success");
        r.success = f[8] == "1";
        r.n = csv.count(f[9], "n");
        r.node = std::string(f[10]);
        rows.push_back(std::move(r));
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Speedups

std::vector<SpeedupRow> compute_speedups(const std::vector<StatsRow>& base, const std::vector<StatsRow>& biased) {
    std::map<std::string, const StatsRow*> by_id;
    for (const auto& row : base) {
        if (!row.success) throw InputError("base row for " + row.instance_id + " did not succeed");
        if (!by_id.emplace(row.instance_id, &row).second)
            throw InputError("duplicate base row for " + row.instance_id);
    }
    std::set<std::pair<std::string, double>> seen;
    std::vector<SpeedupRow> out;
    for (const auto& row : biased) {
        auto it = by_id.find(row.instance_id);
        if (it == by_id.end()) throw InputError("no base row for instance " + row.instance_id);
        if (!row.success) throw InputError("biased row for " + row.instance_id + " did not succeed");
        if (!seen.emplace(row.instance_id, row.kappa).second)
            throw InputError("duplicate biased row for " + row.instance_id + " at kappa " + fmt(row.kappa));
        const StatsRow& b = *it->second;
        SpeedupRow s;
        s.instance_id = row.instance_id;
        s.kappa = row.kappa;
        s.n = row.n ? row.n : b.n;
        if (!b.node.empty() && b.node == row.node && row.wall_time_s > 0.0 && b.wall_time_s > 0.0)
            s.wall_time = b.wall_time_s / row.wall_time_s;
        s.evaluations = b.evaluations / row.evaluations;
        if (row.hc_steps > 0.0)
            s.hc_steps = b.hc_steps / row.hc_steps;
        else
            s.hc_steps = b.hc_steps > 0.0 ? std::numeric_limits<double>::infinity() : 1.0;
        s.population_size = double(b.population_size) / double(row.population_size);
        out.push_back(std::move(s));
    }
    return out;
}

double quantile(std::vector<double> values, double p) {
    if (values.empty()) throw InputError("quantile of an empty sample");
    if (!(p >= 0.0 && p <= 1.0)) throw InputError("quantile level must lie in [0, 1]");
    std::sort(values.begin(), values.end());
    const double pos = p * double(values.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (pos - double(lo)) * (values[hi] - values[lo]);
}

double median(std::vector<double> values) { return quantile(std::move(values), 0.5); }

Spread spread(const std::vector<double>& values) {
    Spread s;
    s.q1 = quantile(values, 0.25);
    s.median = quantile(values, 0.5);
    s.q3 = quantile(values, 0.75);
    double sum = 0.0;
    for (double v : values) sum += v;
    s.mean = sum / double(values.size());
    return s;
}

std::vector<SpeedupSummary> summarize_speedups(const std::vector<SpeedupRow>& rows) {
    std::map<std::pair<std::size_t, double>, std::vector<const SpeedupRow*>> groups;
    for (const auto& r : rows) groups[{r.n, r.kappa}].push_back(&r);
    std::vector<SpeedupSummary> out;
    for (const auto& [key, group] : groups) {
        SpeedupSummary s;
        s.n = key.first;
        s.kappa = key.second;
        s.count = group.size();
        std::vector<double> time, evals, steps, pop;
        bool all_timed = true;
        for (const SpeedupRow* r : group) {
            if (r->wall_time)
                time.push_back(*r->wall_time);
            else
                all_timed = false;
            evals.push_back(r->evaluations);
            steps.push_back(r->hc_steps);
            pop.push_back(r->population_size);
        }
        if (all_timed) s.wall_time = spread(time);
        s.evaluations = spread(evals);
        s.hc_steps = spread(steps);
        s.population_size = spread(pop);
        out.push_back(s);
    }
    return out;
}

namespace {
constexpr const char* speedup_header = "instance,n,kappa,wall_time,evaluations,hc_steps,population_size";
constexpr const char* summary_header =
    "n,kappa,count,"
    "wall_time_q1,wall_time_median,wall_time_q3,wall_time_mean,"
    "evaluations_q1,evaluations_median,evaluations_q3,evaluations_mean,"
    "hc_steps_q1,hc_steps_median,hc_steps_q3,hc_steps_mean,"
    "population_size_q1,population_size_median,population_size_q3,population_size_mean";
constexpr const char* shares_header = "d,splits,proportion";

void write_spread(std::ostream& out, const std::optional<Spread>& s) {
    if (s)
        out << ',' << fmt(s->q1) << ',' << fmt(s->median) << ',' << fmt(s->q3) << ',' << fmt(s->mean);
    else
        out << ",,,,";
}

}  // namespace

void write_speedups_csv(std::ostream& out, const std::vector<SpeedupRow>& rows) {
    out << speedup_header << '\n';
    for (const auto& r : rows)
        out << r.instance_id << ',' << r.n << ',' << fmt(r.kappa) << ',' << fmt(r.wall_time) << ','
            << fmt(r.evaluations) << ',' << fmt(r.hc_steps) << ',' << fmt(r.population_size) << '\n';
}

std::vector<SpeedupRow> read_speedups_csv(std::istream& in) {
    CsvReader csv(in, speedup_header);
    std::vector<SpeedupRow> rows;
    std::vector<std::string_view> f;
    while (csv.next(f)) {
        SpeedupRow r;
        r.instance_id = std::string(f[0]);
        r.n = csv.count(f[1], "n");
        r.kappa = csv.number(f[2], "kappa");
        r.wall_time = csv.optional_number(f[3], "wall_time");
        r.evaluations = csv.number(f[4], "evaluations");
        r.hc_steps = csv.number(f[5], "hc_steps");
        r.population_size = csv.number(f[6], "population_size");
        rows.push_back(std::move(r));
    }
    return rows;
}

void write_summary_csv(std::ostream& out, const std::vector<SpeedupSummary>& rows) {
    out << summary_header << '\n';
    for (const auto& r : rows) {
        out << r.n << ',' << fmt(r.kappa) << ',' << r.count;
        write_spread(out, r.wall_time);
        write_spread(out, r.evaluations);
        write_spread(out, r.hc_steps);
        write_spread(out, r.population_size);
        out << '\n';
    }
}

std::vector<SpeedupSummary> read_summary_csv(std::istream& in) {
    CsvReader csv(in, summary_header);
    std::vector<SpeedupSummary> rows;
    std::vector<std::string_view> f;
    while (csv.next(f)) {
        SpeedupSummary r;
        r.n = csv.count(f[0], "n");
        r.kappa = csv.number(f[1], "kappa");
        r.count = csv.count(f[2], "count");
        auto read_spread = [&](std::size_t at, const char* field) -> std::optional<Spread> {
            if (f[at].empty() && f[at + 1].empty() && f[at + 2].empty() && f[at + 3].empty()) return std::nullopt;
            return Spread{csv.number(f[at], field), csv.number(f[at + 1], field), csv.number(f[at + 2], field),
                          csv.number(f[at + 3], field)};
        };
        r.wall_time = read_spread(3, "wall_time");
        auto need = [&](std::size_t at, const char* field) {
            auto s = read_spread(at, field);
            if (!s) throw ParseError(std::string(field) + " statistics are required", csv.line(), field);
            return *s;
        };
        r.evaluations = need(7, "evaluations");
        r.hc_steps = need(11, "hc_steps");
        r.population_size = need(15, "population_size");
        rows.push_back(r);
    }
    return rows;
}

void write_split_proportions_csv(std::ostream& out, const std::vector<DistanceShare>& shares) {
    out << shares_header << '\n';
    for (const auto& s : shares) out << s.distance << ',' << s.splits << ',' << fmt(s.proportion) << '\n';
}

std::vector<DistanceShare> read_split_proportions_csv(std::istream& in) {
    CsvReader csv(in, shares_header);
    std::vector<DistanceShare> rows;
    std::vector<std::string_view> f;
    while (csv.next(f))
        rows.push_back({csv.count(f[0], "d"), csv.count(f[1], "splits"), csv.number(f[2], "proportion")});
    return rows;
}

std::set<std::string> leaked_instances(const FoldProvenance& provenance) {
    std::set<std::string> out;
    std::set_intersection(provenance.test_ids.begin(), provenance.test_ids.end(), provenance.record_ids.begin(),
                          provenance.record_ids.end(), std::inserter(out, out.end()));
    return out;
}

std::string node_name() {
    char buf[256] = {};
    if (gethostname(buf, sizeof buf - 1) != 0) return "localhost";
    return buf;
}

// ---------------------------------------------------------------------------
// Crossvalidation

namespace {

// Static round-robin assignment keeps every instance on the same worker in
// each phase, so base and biased runs of one instance share a thread.
template <typename Fn>
void for_each_instance(const std::vector<std::size_t>& items, std::size_t threads, Fn&& fn) {
    if (threads <= 1 || items.size() <= 1) {
        for (std::size_t i : items) fn(i);
        return;
    }
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> workers;
    for (std::size_t w = 0; w < threads; ++w) {
        workers.emplace_back([&, w] {
            for (std::size_t i : items) {
                if (i % threads != w) continue;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) error = std::current_exception();
                    return;
                }
            }
        });
    }
    for (auto& t : workers) t.join();
    if (error) std::rethrow_exception(error);
}

void write_file(const fs::path& path, const std::function<void(std::ostream&)>& body) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write " + path.string());
    body(out);
    if (!out) throw InputError("error writing " + path.string());
}

}  // namespace

CrossValidationResult crossvalidate(const ExperimentPlan& plan, const ProgressSink& progress) {
    plan.validate();
    std::mutex log_mutex;
    auto log = [&](const std::string& msg) {
        if (!progress) return;
        std::lock_guard lock(log_mutex);
        progress(msg);
    };
    const std::string node = node_name();
    const std::size_t count = plan.instances;
    const std::size_t n = plan.variables();

    CrossValidationResult result;
    std::vector<Instance> instances;
    std::vector<ExactSolution> optima;
    for (std::size_t i = 0; i < count; ++i) {
        result.instance_ids.push_back(instance_id(i));
        instances.push_back(make_plan_instance(plan, i));
        try {
            optima.push_back(solve_exact(instances.back()));
        } catch (const CapabilityError& e) {
            throw ConfigError("no exact optimum for " + result.instance_ids.back() + ": " + e.what());
        }
    }
    log("generated and solved " + std::to_string(count) + " instances");
    result.folds = partition_folds(count, plan.folds, plan.fold_seed);
    const DistanceMatrix distances = distance_matrix(instances.front().problem);
    for (const auto& inst : instances)
        if (distance_matrix(inst.problem) != distances)
            throw ConfigError("plan instances do not share one interaction structure");
    const std::uint64_t fingerprint = distances.fingerprint();

    fs::path out_dir;
    if (!plan.output_dir.empty()) {
        out_dir = plan.output_dir;
        fs::create_directories(out_dir / "instances");
        write_file(out_dir / "plan.ini", [&](std::ostream& o) { write_plan(o, plan); });
        write_file(out_dir / "optima.csv", [&](std::ostream& o) {
            o << "instance,value\n";
            for (std::size_t i = 0; i < count; ++i)
                o << result.instance_ids[i] << ',' << text::format_hex(optima[i].value) << '\n';
        });
        for (std::size_t i = 0; i < count; ++i)
            save_instance((out_dir / "instances" / (result.instance_ids[i] + ".txt")).string(), instances[i]);
        write_file(out_dir / "folds.csv", [&](std::ostream& o) {
            o << "instance,fold\n";
            for (std::size_t f = 0; f < result.folds.size(); ++f)
                for (std::size_t i : result.folds[f]) o << result.instance_ids[i] << ',' << f << '\n';
        });
    }

    // Base runs: complexity penalty, models archived from the returned size.
    std::vector<std::size_t> all(count);
    for (std::size_t i = 0; i < count; ++i) all[i] = i;
    std::vector<StatsRow> base_rows(count);
    std::vector<std::vector<ModelRecord>> base_records(count);
    for_each_instance(all, plan.threads, [&](std::size_t i) {
        EngineConfig engine = plan.engine;
        engine.score = ScoreConfig{};
        BisectionConfig cfg = plan.bisection;
        cfg.keep_models = true;
        BisectionResult res = bisection(instances[i].problem, engine, optima[i].value, cfg);
        for (auto& m : res.models)
            if ((m.iteration - 1) % plan.archive_stride == 0)
                base_records[i].push_back({result.instance_ids[i], m.run, m.iteration, fingerprint, std::move(m.model)});
        res.models.clear();
        base_rows[i] = make_stats_row(result.instance_ids[i], "penalty", 0.0, res, n, node);
        log("base " + result.instance_ids[i] + " N=" + std::to_string(res.population_size) + " models=" +
            std::to_string(base_records[i].size()));
    });
    result.base = base_rows;

    ModelArchive archive;
    archive.meta.problem_class = to_string(plan.problem_class);
    archive.meta.n = n;
    {
        std::ostringstream cfg;
        cfg << (plan.problem_class == ProblemClass::spin_glass ? "L" + std::to_string(plan.L)
                                                               : "n" + std::to_string(plan.n) + "k" + std::to_string(plan.k))
            << ";seed=" << plan.instance_seed << ";bisection_seed=" << plan.bisection.base_seed;
        archive.meta.config = cfg.str();
    }
    for (auto& recs : base_records)
        for (auto& r : recs) archive.records.push_back(std::move(r));
    base_records.clear();
    result.split_shares = split_proportions(archive, distances);
    if (!out_dir.empty()) {
        write_file(out_dir / "archive.txt", [&](std::ostream& o) { write_archive(o, archive); });
        write_file(out_dir / "split_proportions.csv",
                   [&](std::ostream& o) { write_split_proportions_csv(o, result.split_shares); });
    }

    // Biased runs on each held-out fold.
    std::vector<StatsRow> biased;
    for (std::size_t f = 0; f < result.folds.size(); ++f) {
        FoldProvenance prov;
        prov.fold = f;
        for (std::size_t i : result.folds[f]) prov.test_ids.insert(result.instance_ids[i]);
        const ModelArchive training = exclude_instances(archive, prov.test_ids);
        prov.record_ids = training.instance_ids();
        prov.records = training.size();
        const auto table = std::make_shared<const BiasTable>(build_bias_table(training, distances));
        if (!out_dir.empty())
            save_bias_table((out_dir / ("bias_fold" + std::to_string(f) + ".csv")).string(), *table);
        log("fold " + std::to_string(f) + ": bias table from " + std::to_string(prov.records) + " records of " +
            std::to_string(prov.record_ids.size()) + " instances");

        std::vector<std::vector<StatsRow>> fold_rows(count);
        for_each_instance(result.folds[f], plan.threads, [&](std::size_t i) {
            for (double kappa : plan.kappas) {
                EngineConfig engine = plan.engine;
                engine.score.mode = PriorMode::distance_bias;
                engine.score.kappa = kappa;
                engine.score.bias = table;
                BisectionConfig cfg = plan.bisection;
                cfg.keep_models = false;
                const BisectionResult res = bisection(instances[i].problem, engine, optima[i].value, cfg);
                fold_rows[i].push_back(make_stats_row(result.instance_ids[i], "bias", kappa, res, n, node));
                log("bias " + result.instance_ids[i] + " kappa=" + text::format_double(kappa) +
                    " N=" + std::to_string(res.population_size));
            }
        });
        for (std::size_t i : result.folds[f])
            for (auto& row : fold_rows[i]) biased.push_back(std::move(row));
        result.provenance.push_back(std::move(prov));
    }
    std::sort(biased.begin(), biased.end(), [](const StatsRow& a, const StatsRow& b) {
        return std::tie(a.kappa, a.instance_id) < std::tie(b.kappa, b.instance_id);
    });
    result.biased = std::move(biased);
    result.speedups = compute_speedups(result.base, result.biased);
    result.summaries = summarize_speedups(result.speedups);

    if (!out_dir.empty()) {
        write_file(out_dir / "stats.csv", [&](std::ostream& o) {
            std::vector<StatsRow> rows = result.base;
            rows.insert(rows.end(), result.biased.begin(), result.biased.end());
            write_stats_csv(o, rows);
        });
        write_file(out_dir / "provenance.csv", [&](std::ostream& o) {
            o << "fold,instance,role\n";
            for (const auto& p : result.provenance) {
                for (const auto& id : p.test_ids) o << p.fold << ',' << id << ",test\n";
                for (const auto& id : p.record_ids) o << p.fold << ',' << id << ",archive\n";
            }
        });
        write_file(out_dir / "speedups.csv", [&](std::ostream& o) { write_speedups_csv(o, result.speedups); });
        write_file(out_dir / "summary.csv", [&](std::ostream& o) { write_summary_csv(o, result.summaries); });
    }
    return result;
}

}  // namespace hboa
