#pragma once

#include <cstddef>
#include <vector>

#include "hboa/adf.hpp"

namespace hboa {

/// Fixed-length binary solutions with their cached fitness values.
/// `fitness` is either empty (not evaluated) or parallel to `members`.
struct Population {
    std::vector<BitString> members;
    std::vector<double> fitness;

    std::size_t size() const noexcept { return members.size(); }
    bool empty() const noexcept { return members.empty(); }
    std::size_t length() const noexcept { return members.empty() ? 0 : members.front().size(); }
    bool evaluated() const noexcept { return fitness.size() == members.size(); }

    bool operator==(const Population&) const = default;
};

}  // namespace hboa
