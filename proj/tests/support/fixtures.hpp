#pragma once

#include "gaimr/gai_model.hpp"

#include <memory>
#include <string>
#include <vector>

namespace gaimr::fixture {

/// Schema with `domains[a]` levels per attribute, reference/best/worst at 0.
inline AttributeSchema make_schema(const std::vector<int>& domains) {
    AttributeSchema schema;
    for (std::size_t a = 0; a < domains.size(); ++a) {
        Attribute attr;
        attr.name = "a" + std::to_string(a);
        for (int l = 0; l < domains[a]; ++l) attr.levels.push_back("l" + std::to_string(l));
        schema.attributes.push_back(attr);
    }
    schema.reference.assign(domains.size(), 0);
    schema.best.assign(domains.size(), 0);
    schema.worst.assign(domains.size(), 0);
    return schema;
}

/// Factors from attribute lists; local top is the last local index, bottom 0.
inline std::vector<Factor> make_factors(const AttributeSchema& schema, const std::vector<AttributeSet>& sets) {
    std::vector<Factor> out;
    for (const auto& set : sets) {
        std::size_t n = 1;
        for (auto a : set) n *= static_cast<std::size_t>(schema.domain_size(a));
        out.push_back({set, n - 1, 0});
    }
    return out;
}

inline StructurePtr make_structure(const std::vector<int>& domains, const std::vector<AttributeSet>& sets) {
    auto schema = make_schema(domains);
    auto factors = make_factors(schema, sets);
    return std::make_shared<const GaiStructure>(std::move(schema), std::move(factors));
}

} // namespace gaimr::fixture
