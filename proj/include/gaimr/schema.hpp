#pragma once

#include "gaimr/errors.hpp"

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace gaimr {

/// One level index per attribute.
using Outcome = std::vector<int>;

/// Sorted, duplicate-free list of attribute indices.
using AttributeSet = std::vector<std::size_t>;

struct Attribute {
    std::string name;
    std::vector<std::string> levels;
};

/// Attributes with their finite ordered domains plus the three distinguished
/// full outcomes: the reference outcome and the declared global best/worst.
struct AttributeSchema {
    std::vector<Attribute> attributes;
    Outcome reference;
    Outcome best;
    Outcome worst;

    std::size_t size() const noexcept { return attributes.size(); }

    int domain_size(std::size_t attribute) const {
        return static_cast<int>(attributes.at(attribute).levels.size());
    }

    bool contains(const Outcome& x) const {
        if (x.size() != attributes.size()) return false;
        for (std::size_t a = 0; a < x.size(); ++a)
            if (x[a] < 0 || x[a] >= domain_size(a)) return false;
        return true;
    }

    /// Number of full outcomes, saturating at UINT64_MAX.
    std::uint64_t outcome_count() const {
        std::uint64_t count = 1;
        for (const auto& attribute : attributes) {
            const auto d = static_cast<std::uint64_t>(attribute.levels.size());
            if (d != 0 && count > UINT64_MAX / d) return UINT64_MAX;
            count *= d;
        }
        return count;
    }

    std::size_t index_of(const std::string& name) const {
        for (std::size_t a = 0; a < attributes.size(); ++a)
            if (attributes[a].name == name) return a;
        throw SchemaError("unknown attribute '" + name + "'");
    }

    void validate() const {
        if (attributes.empty()) throw SchemaError("schema has no attributes");
        if (attributes.size() > 64) throw SchemaError("at most 64 attributes are supported");
        for (const auto& attribute : attributes)
            if (attribute.levels.size() < 2)
                throw SchemaError("attribute '" + attribute.name + "' needs at least 2 levels");
        if (!contains(reference)) throw SchemaError("reference outcome does not fit the schema");
        if (!contains(best)) throw SchemaError("global best outcome does not fit the schema");
        if (!contains(worst)) throw SchemaError("global worst outcome does not fit the schema");
    }
};

/// x[I]: attributes outside `attributes` are set to their reference level.
inline Outcome project(const Outcome& x, const AttributeSet& attributes, const Outcome& reference) {
    Outcome out = reference;
    for (auto a : attributes) out[a] = x[a];
    return out;
}

/// Calls `visit` on every full outcome in lexicographic order (attribute 0 most significant).
inline void for_each_outcome(const AttributeSchema& schema, const std::function<void(const Outcome&)>& visit) {
    const std::size_t n = schema.size();
    Outcome x(n, 0);
    while (true) {
        visit(x);
        std::size_t a = n;
        while (true) {
            if (a == 0) return;
            --a;
            if (++x[a] < schema.domain_size(a)) break;
            x[a] = 0;
        }
    }
}

inline bool lexicographically_less(const Outcome& a, const Outcome& b) {
    return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

} // namespace gaimr
