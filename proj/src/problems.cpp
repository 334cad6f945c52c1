#include "hboa/problems.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "hboa/errors.hpp"
#include "hboa/rng.hpp"
#include "text.hpp"

namespace hboa {

namespace {

std::size_t wrap(std::size_t i, std::size_t n) { return i % n; }

}  // namespace

AdditiveProblem generate_nk(const NkSpec& spec) {
    if (spec.k < 1 || spec.k >= spec.n)
        throw InputError("NK requires 1 <= k < n (n=" + std::to_string(spec.n) +
                         ", k=" + std::to_string(spec.k) + ")");
    if (spec.k > 20) throw InputError("NK k too large for explicit tables");
    Rng rng(spec.seed);
    const std::size_t entries = std::size_t{1} << (spec.k + 1);
    std::vector<std::vector<std::size_t>> subsets(spec.n);
    std::vector<std::vector<double>> tables(spec.n);
    for (std::size_t i = 0; i < spec.n; ++i) {
        for (std::size_t t = 0; t <= spec.k; ++t) subsets[i].push_back(wrap(i + t, spec.n));
        tables[i].resize(entries);
        for (double& v : tables[i]) v = rng.uniform();
    }
    return AdditiveProblem(spec.n, std::move(subsets), std::move(tables));
}

ExactSolution solve_nk_dp(const AdditiveProblem& problem) {
    const std::size_t n = problem.size();
    if (n < 2 || problem.subset_count() != n)
        throw StructureError("not a nearest-neighbor NK problem: need one subset per bit");
    const std::size_t k = problem.subset(0).size() - 1;
    if (k < 1 || k >= n) throw StructureError("not a nearest-neighbor NK problem: bad k");
    for (std::size_t i = 0; i < n; ++i) {
        const auto& s = problem.subset(i);
        if (s.size() != k + 1)
            throw StructureError("subset " + std::to_string(i) + " has the wrong order");
        for (std::size_t t = 0; t <= k; ++t)
            if (s[t] != wrap(i + t, n))
                throw StructureError("subset " + std::to_string(i) +
                                     " is not the circular neighborhood of bit " + std::to_string(i));
    }
    if (k > 12) throw CapabilityError("NK dynamic programming limited to k <= 12");

    // A state holds the last k assigned bits, oldest bit most significant.
    const std::size_t states = std::size_t{1} << k;
    const std::size_t state_mask = states - 1;
    const std::size_t window_mask = (std::size_t{1} << (k + 1)) - 1;
    const double neg_inf = -std::numeric_limits<double>::infinity();

    double best_value = neg_inf;
    BitString best_witness(n, 0);

    std::vector<double> value(states), next(states);
    // came_from[t][s]: previous state's oldest bit for state s after bit t.
    std::vector<std::vector<std::uint8_t>> came_from(n, std::vector<std::uint8_t>(states));

    for (std::size_t prefix = 0; prefix < states; ++prefix) {
        std::fill(value.begin(), value.end(), neg_inf);
        value[prefix] = 0.0;
        for (std::size_t t = k; t < n; ++t) {
            std::fill(next.begin(), next.end(), neg_inf);
            const auto& table = problem.table(t - k);
            for (std::size_t s = 0; s < states; ++s) {
                if (value[s] == neg_inf) continue;
                for (std::size_t bit = 0; bit < 2; ++bit) {
                    const std::size_t window = ((s << 1) | bit) & window_mask;
                    const std::size_t ns = window & state_mask;
                    const double v = value[s] + table[window];
                    if (v > next[ns]) {
                        next[ns] = v;
                        came_from[t][ns] = static_cast<std::uint8_t>(s >> (k - 1));
                    }
                }
            }
            value.swap(next);
        }
        // Close the cycle: subsets n-k .. n-1 read the last k bits then the prefix.
        for (std::size_t s = 0; s < states; ++s) {
            if (value[s] == neg_inf) continue;
            const std::size_t joined = (s << k) | prefix;
            double v = value[s];
            for (std::size_t r = 0; r < k; ++r)
                v += problem.table(n - k + r)[(joined >> (k - 1 - r)) & window_mask];
            if (v > best_value) {
                best_value = v;
                BitString x(n, 0);
                for (std::size_t t = 0; t < k; ++t) x[t] = (prefix >> (k - 1 - t)) & 1U;
                std::size_t state = s;
                for (std::size_t t = n - 1; t >= k; --t) {
                    x[t] = state & 1U;
                    state = (state >> 1) | (std::size_t{came_from[t][state]} << (k - 1));
                }
                best_witness = std::move(x);
            }
        }
    }
    return {evaluate(problem, best_witness), std::move(best_witness)};
}

SpinGlassSpec make_spin_glass_spec(std::size_t L, std::uint64_t seed) {
    if (L < 2) throw InputError("spin glass requires L >= 2");
    Rng rng(seed);
    SpinGlassSpec spec{L, seed, std::vector<int>(2 * L * L)};
    for (int& j : spec.couplings) j = rng.coin() ? -1 : 1;
    return spec;
}

AdditiveProblem generate_spin_glass(const SpinGlassSpec& spec) {
    const std::size_t L = spec.L;
    if (L < 2) throw InputError("spin glass requires L >= 2");
    if (spec.couplings.size() != 2 * L * L)
        throw InputError("spin glass needs 2L^2 = " + std::to_string(2 * L * L) + " couplings");
    std::vector<std::vector<std::size_t>> subsets;
    std::vector<std::vector<double>> tables;
    subsets.reserve(2 * L * L);
    tables.reserve(2 * L * L);
    for (std::size_t r = 0; r < L; ++r) {
        for (std::size_t c = 0; c < L; ++c) {
            const std::size_t node = r * L + c;
            const std::size_t neighbor[2] = {r * L + wrap(c + 1, L), wrap(r + 1, L) * L + c};
            for (std::size_t dir = 0; dir < 2; ++dir) {
                const int J = spec.couplings[2 * node + dir];
                if (J != 1 && J != -1) throw InputError("couplings must be +1 or -1");
                subsets.push_back({node, neighbor[dir]});
                tables.push_back({double(J), double(-J), double(-J), double(J)});
            }
        }
    }
    return AdditiveProblem(L * L, std::move(subsets), std::move(tables));
}

SpinGlassSpec spin_glass_structure(const AdditiveProblem& problem) {
    const std::size_t n = problem.size();
    const auto L = static_cast<std::size_t>(std::llround(std::sqrt(double(n))));
    if (L < 2 || L * L != n || problem.subset_count() != 2 * n)
        throw StructureError("not a periodic square-lattice spin glass");
    SpinGlassSpec spec{L, 0, std::vector<int>(2 * n)};
    for (std::size_t r = 0; r < L; ++r) {
        for (std::size_t c = 0; c < L; ++c) {
            const std::size_t node = r * L + c;
            const std::size_t neighbor[2] = {r * L + wrap(c + 1, L), wrap(r + 1, L) * L + c};
            for (std::size_t dir = 0; dir < 2; ++dir) {
                const std::size_t i = 2 * node + dir;
                const auto& s = problem.subset(i);
                const auto& t = problem.table(i);
                if (s.size() != 2 || s[0] != node || s[1] != neighbor[dir])
                    throw StructureError("subset " + std::to_string(i) + " is not a lattice coupling");
                const double J = t[0];
                if ((J != 1.0 && J != -1.0) || t[1] != -J || t[2] != -J || t[3] != J)
                    throw StructureError("table " + std::to_string(i) + " is not a +-J coupling");
                spec.couplings[i] = J > 0 ? 1 : -1;
            }
        }
    }
    return spec;
}

ExactSolution solve_spin_glass_oracle(const AdditiveProblem& problem) {
    const SpinGlassSpec spec = spin_glass_structure(problem);
    const std::size_t L = spec.L;
    if (L > max_oracle_side)
        throw CapabilityError("spin glass oracle limited to L <= " + std::to_string(max_oracle_side) +
                              " (got L=" + std::to_string(L) + ")");

    const std::size_t rows = std::size_t{1} << L;
    auto coupling = [&](std::size_t r, std::size_t c, std::size_t dir) {
        return spec.couplings[2 * (r * L + c) + dir];
    };

    // Row states: bit c is the bit of column c. Fitness counts +J for each
    // agreeing coupled pair and -J otherwise.
    std::vector<std::vector<int>> horizontal(L, std::vector<int>(rows));
    for (std::size_t r = 0; r < L; ++r)
        for (std::size_t a = 0; a < rows; ++a) {
            int h = 0;
            for (std::size_t c = 0; c < L; ++c) {
                const bool agree = ((a >> c) & 1U) == ((a >> wrap(c + 1, L)) & 1U);
                h += agree ? coupling(r, c, 0) : -coupling(r, c, 0);
            }
            horizontal[r][a] = h;
        }
    // Vertical couplings from row r to row r+1 (mod L).
    std::vector<unsigned> positive(L, 0), negative(L, 0);
    std::vector<int> vertical_sum(L, 0);
    for (std::size_t r = 0; r < L; ++r)
        for (std::size_t c = 0; c < L; ++c) {
            const int J = coupling(r, c, 1);
            vertical_sum[r] += J;
            (J > 0 ? positive[r] : negative[r]) |= 1U << c;
        }
    auto vertical = [&](std::size_t r, unsigned upper, unsigned lower) {
        const unsigned diff = upper ^ lower;
        return vertical_sum[r] - 2 * (std::popcount(diff & positive[r]) - std::popcount(diff & negative[r]));
    };

    int best = std::numeric_limits<int>::min();
    std::vector<unsigned> best_rows(L);
    std::vector<int> value(rows), next(rows);
    std::vector<std::vector<unsigned>> parent(L, std::vector<unsigned>(rows));

    for (unsigned first = 0; first < rows; ++first) {
        for (unsigned b = 0; b < rows; ++b) {
            value[b] = horizontal[0][first] + vertical(0, first, b) + horizontal[1][b];
            parent[1][b] = first;
        }
        for (std::size_t r = 2; r < L; ++r) {
            for (unsigned b = 0; b < rows; ++b) {
                int top = std::numeric_limits<int>::min();
                unsigned arg = 0;
                for (unsigned a = 0; a < rows; ++a) {
                    const int v = value[a] + vertical(r - 1, a, b);
                    if (v > top) {
                        top = v;
                        arg = a;
                    }
                }
                next[b] = top + horizontal[r][b];
                parent[r][b] = arg;
            }
            value.swap(next);
        }
        for (unsigned b = 0; b < rows; ++b) {
            const int v = value[b] + vertical(L - 1, b, first);
            if (v > best) {
                best = v;
                best_rows[L - 1] = b;
                for (std::size_t r = L - 1; r >= 1; --r) best_rows[r - 1] = parent[r][best_rows[r]];
            }
        }
    }

    BitString witness(L * L);
    for (std::size_t r = 0; r < L; ++r)
        for (std::size_t c = 0; c < L; ++c) witness[r * L + c] = (best_rows[r] >> c) & 1U;
    return {static_cast<double>(best), std::move(witness)};
}

ExactSolution solve_exhaustive(const AdditiveProblem& problem) {
    const std::size_t n = problem.size();
    if (n > 30) throw CapabilityError("exhaustive search limited to n <= 30");
    ExactSolution best{-std::numeric_limits<double>::infinity(), BitString(n, 0)};
    BitString x(n, 0);
    for (std::uint64_t code = 0; code < (std::uint64_t{1} << n); ++code) {
        for (std::size_t i = 0; i < n; ++i) x[i] = (code >> i) & 1U;
        const double f = evaluate(problem, x);
        if (f > best.value) best = {f, x};
    }
    return best;
}

ExactSolution solve_exact(const Instance& instance) {
    switch (instance.meta.kind) {
        case ProblemClass::nk: return solve_nk_dp(instance.problem);
        case ProblemClass::spin_glass: return solve_spin_glass_oracle(instance.problem);
        case ProblemClass::generic: return solve_exhaustive(instance.problem);
    }
    throw StructureError("unknown problem class");
}

Instance make_nk_instance(const NkSpec& spec) {
    return {generate_nk(spec), {ProblemClass::nk, spec.n, spec.k, 0, spec.seed}};
}

Instance make_spin_glass_instance(const SpinGlassSpec& spec) {
    return {generate_spin_glass(spec), {ProblemClass::spin_glass, spec.L * spec.L, 0, spec.L, spec.seed}};
}

std::string to_string(ProblemClass kind) {
    switch (kind) {
        case ProblemClass::nk: return "NK";
        case ProblemClass::spin_glass: return "SG";
        case ProblemClass::generic: return "ADF";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// Instance files

void write_instance(std::ostream& out, const Instance& instance) {
    const auto& meta = instance.meta;
    const auto& p = instance.problem;
    switch (meta.kind) {
        case ProblemClass::nk: out << "NK " << p.size() << ' ' << meta.k << ' ' << meta.seed << '\n'; break;
        case ProblemClass::spin_glass: out << "SG " << meta.L << ' ' << meta.seed << '\n'; break;
        case ProblemClass::generic: out << "ADF " << p.size() << ' ' << p.subset_count() << '\n'; break;
    }
    for (std::size_t i = 0; i < p.subset_count(); ++i) {
        if (meta.kind == ProblemClass::generic) out << p.subset(i).size() << ' ';
        for (std::size_t v : p.subset(i)) out << v << ' ';
        const auto& t = p.table(i);
        for (std::size_t e = 0; e < t.size(); ++e) out << text::format_hex(t[e]) << (e + 1 < t.size() ? " " : "");
        out << '\n';
    }
    if (!out) throw std::runtime_error("failed to write instance");
}

Instance read_instance(std::istream& in) {
    std::string line;
    std::size_t line_no = 0;
    auto next_line = [&]() -> bool {
        while (std::getline(in, line)) {
            ++line_no;
            auto tokens = text::split(line);
            if (!tokens.empty() && tokens[0].front() != '#') return true;
        }
        return false;
    };
    auto need_size = [&](std::string_view tok, const char* field) {
        auto v = text::parse_int<std::size_t>(tok);
        if (!v) throw ParseError("expected non-negative integer, got '" + std::string(tok) + "'", line_no, field);
        return *v;
    };

    if (!next_line()) throw ParseError("empty instance file", 0, "header");
    const auto header = text::split(line);
    Instance inst;
    std::size_t n = 0, m = 0, order = 0;
    if (header[0] == "NK") {
        if (header.size() != 4) throw ParseError("NK header needs n k seed", line_no, "header");
        n = need_size(header[1], "n");
        inst.meta.k = need_size(header[2], "k");
        auto seed = text::parse_int<std::uint64_t>(header[3]);
        if (!seed) throw ParseError("bad seed", line_no, "seed");
        inst.meta.kind = ProblemClass::nk;
        inst.meta.seed = *seed;
        if (inst.meta.k < 1 || inst.meta.k >= n) throw ParseError("NK needs 1 <= k < n", line_no, "k");
        m = n;
        order = inst.meta.k + 1;
    } else if (header[0] == "SG") {
        if (header.size() != 3) throw ParseError("SG header needs L seed", line_no, "header");
        inst.meta.L = need_size(header[1], "L");
        auto seed = text::parse_int<std::uint64_t>(header[2]);
        if (!seed) throw ParseError("bad seed", line_no, "seed");
        if (inst.meta.L < 2) throw ParseError("SG needs L >= 2", line_no, "L");
        inst.meta.kind = ProblemClass::spin_glass;
        inst.meta.seed = *seed;
        n = inst.meta.L * inst.meta.L;
        m = 2 * n;
        order = 2;
    } else if (header[0] == "ADF") {
        if (header.size() != 3) throw ParseError("ADF header needs n m", line_no, "header");
        inst.meta.kind = ProblemClass::generic;
        n = need_size(header[1], "n");
        m = need_size(header[2], "m");
    } else {
        throw ParseError("unknown instance type '" + std::string(header[0]) + "'", line_no, "header");
    }
    inst.meta.n = n;

    std::vector<std::vector<std::size_t>> subsets(m);
    std::vector<std::vector<double>> tables(m);
    for (std::size_t i = 0; i < m; ++i) {
        if (!next_line())
            throw ParseError("truncated file: expected " + std::to_string(m) + " subset lines, got " +
                                 std::to_string(i),
                             line_no + 1, "subset " + std::to_string(i));
        const auto tokens = text::split(line);
        std::size_t pos = 0;
        std::size_t size = order;
        if (inst.meta.kind == ProblemClass::generic) {
            size = need_size(tokens[0], "subset size");
            pos = 1;
            if (size == 0 || size > 24) throw ParseError("subset size out of range", line_no, "subset size");
        }
        const std::size_t entries = std::size_t{1} << size;
        if (tokens.size() != pos + size + entries)
            throw ParseError("expected " + std::to_string(size) + " indices and " + std::to_string(entries) +
                                 " table entries, got " + std::to_string(tokens.size() - pos) + " fields",
                             line_no, "subset " + std::to_string(i));
        for (std::size_t a = 0; a < size; ++a) {
            const std::size_t v = need_size(tokens[pos + a], "index");
            if (v >= n) throw ParseError("variable index " + std::to_string(v) + " >= n", line_no, "index");
            if (inst.meta.kind == ProblemClass::nk && v != (i + a) % n)
                throw ParseError("NK subset " + std::to_string(i) + " must list bits " + std::to_string(i) + ".." +
                                     std::to_string((i + size - 1) % n) + " in order",
                                 line_no, "index");
            subsets[i].push_back(v);
        }
        pos += size;
        for (std::size_t e = 0; e < entries; ++e) {
            auto value = text::parse_double(tokens[pos + e]);
            if (!value)
                throw ParseError("bad table entry '" + std::string(tokens[pos + e]) + "'", line_no,
                                 "table " + std::to_string(i) + " entry " + std::to_string(e));
            tables[i].push_back(*value);
        }
    }
    if (next_line()) throw ParseError("trailing content after last subset", line_no, "trailer");

    try {
        inst.problem = AdditiveProblem(n, std::move(subsets), std::move(tables));
    } catch (const InputError& e) {
        throw ParseError(e.what(), 0, "problem");
    }
    if (inst.meta.kind == ProblemClass::spin_glass) {
        try {
            spin_glass_structure(inst.problem);
        } catch (const StructureError& e) {
            throw ParseError(e.what(), 0, "couplings");
        }
    }
    return inst;
}

void save_instance(const std::string& path, const Instance& instance) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    write_instance(out, instance);
}

Instance load_instance(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    return read_instance(in);
}

}  // namespace hboa
