#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "hboa/adf.hpp"

namespace hboa {

/// Nearest-neighbor NK landscape: bit i interacts with the k bits that follow
/// it, wrapping around the end of the string.
struct NkSpec {
    std::size_t n = 0;
    std::size_t k = 0;
    std::uint64_t seed = 0;
};

/// L x L periodic +-J spin glass. couplings[2 * node + dir] with dir 0 for the
/// right neighbor and 1 for the neighbor below; node = row * L + column.
struct SpinGlassSpec {
    std::size_t L = 0;
    std::uint64_t seed = 0;
    std::vector<int> couplings;
};

struct ExactSolution {
    double value = 0.0;
    BitString witness;
};

enum class ProblemClass { nk, spin_glass, generic };

/// Header information carried by instance files.
struct InstanceMeta {
    ProblemClass kind = ProblemClass::generic;
    std::size_t n = 0;
    std::size_t k = 0;  // NK only
    std::size_t L = 0;  // spin glass only
    std::uint64_t seed = 0;
};

struct Instance {
    AdditiveProblem problem;
    InstanceMeta meta;
};

/// m = n subsets S_i = {i, i+1, ..., i+k} (mod n); table entries uniform in
/// [0, 1) drawn in subset order. Throws InputError unless 1 <= k < n.
AdditiveProblem generate_nk(const NkSpec& spec);

/// Exact maximum of a nearest-neighbor NK problem: for each assignment of the
/// first k bits, a left-to-right DP over the last k bits closes the cycle
/// against the fixed prefix. O(n 4^k). Throws StructureError if the subsets
/// are not the circular chain produced by generate_nk.
ExactSolution solve_nk_dp(const AdditiveProblem& problem);

/// Draws 2L^2 couplings, each +1 or -1 with equal probability.
SpinGlassSpec make_spin_glass_spec(std::size_t L, std::uint64_t seed);

/// One two-variable subset per coupling. A subset scores +J when its spins
/// agree and -J otherwise, so fitness is the negated energy. Bit 0 encodes
/// spin +1. Throws InputError if L < 2 or couplings are malformed.
AdditiveProblem generate_spin_glass(const SpinGlassSpec& spec);

/// Recovers L and the couplings from a problem built by generate_spin_glass.
SpinGlassSpec spin_glass_structure(const AdditiveProblem& problem);

/// Largest lattice side accepted by solve_spin_glass_oracle.
inline constexpr std::size_t max_oracle_side = 8;

/// Exact ground state by a row transfer-matrix DP with row 0 fixed in an
/// outer loop. Throws StructureError for non-spin-glass problems and
/// CapabilityError for L > max_oracle_side.
ExactSolution solve_spin_glass_oracle(const AdditiveProblem& problem);

/// Enumerates all 2^n assignments. Throws CapabilityError for n > 30.
ExactSolution solve_exhaustive(const AdditiveProblem& problem);

/// Dispatches on the instance class.
ExactSolution solve_exact(const Instance& instance);

Instance make_nk_instance(const NkSpec& spec);
Instance make_spin_glass_instance(const SpinGlassSpec& spec);

/// Plain-text instance files. Header `NK n k seed`, `SG L seed` or
/// `ADF n m`, then one line per subset: its indices followed by its table
/// entries as hex floats (ADF lines start with the subset size).
void write_instance(std::ostream& out, const Instance& instance);
Instance read_instance(std::istream& in);
void save_instance(const std::string& path, const Instance& instance);
Instance load_instance(const std::string& path);

std::string to_string(ProblemClass kind);

}  // namespace hboa
