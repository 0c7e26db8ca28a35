#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <ostream>

namespace kgagent {

/// Opaque integer identifier, distinct per Tag so node and skill ids cannot be mixed up.
template <class Tag>
struct Id {
    std::uint32_t value = 0;

    constexpr Id() = default;
    constexpr explicit Id(std::uint32_t v) : value(v) {}

    friend constexpr auto operator<=>(Id, Id) = default;
    friend std::ostream& operator<<(std::ostream& os, Id id) { return os << id.value; }
};

using NodeId = Id<struct NodeTag>;
using SkillId = Id<struct SkillTag>;
using ClusterId = Id<struct ClusterTag>;

/// UI element identifier as reported by the perception layer (e.g. 11, 24).
using ObjectId = std::int32_t;

} // namespace kgagent

template <class Tag>
struct std::hash<kgagent::Id<Tag>> {
    std::size_t operator()(kgagent::Id<Tag> id) const noexcept { return std::hash<std::uint32_t>{}(id.value); }
};
