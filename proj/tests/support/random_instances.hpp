#pragma once

#include "gaimr/config_search.hpp"
#include "gaimr/gai_model.hpp"
#include "gaimr/utility_space.hpp"

#include <algorithm>
#include <memory>
#include <optional>
#include <random>
#include <vector>

namespace gaimr::fixture {

struct StructureShape {
    std::size_t min_attributes = 3;
    std::size_t max_attributes = 6;
    int max_domain = 3;
    std::size_t max_factor_size = 3;
    std::size_t max_factors = 4;
    std::uint64_t max_outcomes = 4096;
    /// Upper bound on N_j, so per-factor oracles stay small.
    std::size_t max_local_size = 9;
};

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline std::size_t pick(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

inline AttributeSchema random_schema(std::mt19937_64& rng, const StructureShape& shape) {
    while (true) {
        AttributeSchema schema;
        const auto n = pick(rng, shape.min_attributes, shape.max_attributes);
        for (std::size_t a = 0; a < n; ++a) {
            Attribute attr;
            attr.name = "a" + std::to_string(a);
            const auto d = pick(rng, 2, static_cast<std::size_t>(shape.max_domain));
            for (std::size_t l = 0; l < d; ++l) attr.levels.push_back("l" + std::to_string(l));
            schema.attributes.push_back(attr);
        }
        if (schema.outcome_count() > shape.max_outcomes) continue;
        for (std::size_t a = 0; a < n; ++a) {
            schema.reference.push_back(static_cast<int>(pick(rng, 0, schema.attributes[a].levels.size() - 1)));
            schema.best.push_back(static_cast<int>(pick(rng, 0, schema.attributes[a].levels.size() - 1)));
            schema.worst.push_back(static_cast<int>(pick(rng, 0, schema.attributes[a].levels.size() - 1)));
        }
        return schema;
    }
}

/// Overlapping factors: random windows over a shuffled attribute order, plus
/// occasional extra random factors. Every attribute is covered. Empty when the
/// shape limits could not be met in a bounded number of attempts.
inline std::optional<std::vector<Factor>> random_factors(std::mt19937_64& rng, const AttributeSchema& schema,
                                                         const StructureShape& shape) {
    const auto n = schema.size();
    for (int attempt = 0; attempt < 500; ++attempt) {
        std::vector<std::size_t> order(n);
        for (std::size_t a = 0; a < n; ++a) order[a] = a;
        std::shuffle(order.begin(), order.end(), rng);

        std::vector<Factor> factors;
        std::size_t start = 0;
        while (start < n && factors.size() < shape.max_factors) {
            const auto size = pick(rng, 1, shape.max_factor_size);
            Factor f;
            const std::size_t begin = start == 0 ? 0 : start - pick(rng, 0, std::min<std::size_t>(1, start));
            for (std::size_t p = begin; p < std::min(n, begin + size); ++p) f.attributes.push_back(order[p]);
            start = std::max(start + 1, begin + size);
            std::sort(f.attributes.begin(), f.attributes.end());
            f.attributes.erase(std::unique(f.attributes.begin(), f.attributes.end()), f.attributes.end());
            factors.push_back(f);
        }
        if (start < n) continue;
        while (factors.size() < shape.max_factors && pick(rng, 0, 2) == 0) {
            Factor f;
            const auto size = pick(rng, 1, std::min(n, shape.max_factor_size));
            while (f.attributes.size() < size) {
                const auto a = pick(rng, 0, n - 1);
                if (std::find(f.attributes.begin(), f.attributes.end(), a) == f.attributes.end()) f.attributes.push_back(a);
            }
            std::sort(f.attributes.begin(), f.attributes.end());
            factors.push_back(f);
        }
        // A factor inside a preceding one has an identically zero canonical subutility.
        bool ok = true;
        for (std::size_t j = 0; j < factors.size(); ++j)
            for (std::size_t i = 0; i < j; ++i)
                if (std::includes(factors[i].attributes.begin(), factors[i].attributes.end(),
                                  factors[j].attributes.begin(), factors[j].attributes.end()))
                    ok = false;
        for (auto& f : factors) {
            std::size_t local = 1;
            for (auto a : f.attributes) local *= schema.attributes[a].levels.size();
            if (local > shape.max_local_size) ok = false;
            f.top = pick(rng, 0, local - 1);
            do f.bottom = pick(rng, 0, local - 1);
            while (f.bottom == f.top);
        }
        if (ok) return factors;
    }
    return std::nullopt;
}

inline StructurePtr random_structure(std::mt19937_64& rng, const StructureShape& shape = {}) {
    while (true) {
        auto schema = random_schema(rng, shape);
        auto factors = random_factors(rng, schema, shape);
        if (factors) return std::make_shared<const GaiStructure>(std::move(schema), std::move(*factors));
    }
}

inline GaiModel random_model(std::mt19937_64& rng, StructurePtr s) {
    GaiModel model;
    model.structure = s;
    for (std::size_t j = 0; j < s->factor_count(); ++j) {
        std::vector<double> v(s->local_size(j));
        for (auto& x : v) x = uniform(rng, 0.0, 1.0);
        v[s->factor(j).top] = 1.0;
        v[s->factor(j).bottom] = 0.0;
        model.lvf.push_back(v);
        const double bottom = uniform(rng, -0.5, 0.5);
        model.anchors.push_back({bottom + uniform(rng, 0.1, 1.0), bottom});
    }
    return model;
}

/// Random priors with a hidden model strictly inside them; `answers` random
/// bound/comparison constraints consistent with the hidden model are asserted.
struct RandomSpace {
    UtilitySpace space;
    GaiModel hidden;
};

inline RandomSpace random_space(std::mt19937_64& rng, StructurePtr s, std::size_t answers = 0,
                                bool anchor_comparisons = true) {
    const auto m = s->factor_count();
    GaiModel hidden = random_model(rng, s);
    Priors priors;
    priors.lvf.resize(m);
    for (std::size_t j = 0; j < m; ++j) {
        for (std::size_t i = 0; i < s->local_size(j); ++i) {
            const double v = hidden.lvf[j][i];
            priors.lvf[j].push_back({std::max(0.0, v - uniform(rng, 0.0, 0.6)), std::min(1.0, v + uniform(rng, 0.0, 0.6))});
        }
        const auto& a = hidden.anchors[j];
        priors.anchor_top.push_back({a.top - uniform(rng, 0.0, 0.5), a.top + uniform(rng, 0.0, 0.5)});
        priors.anchor_bottom.push_back({a.bottom - uniform(rng, 0.0, 0.5), a.bottom + uniform(rng, 0.0, 0.5)});
    }
    UtilitySpace space(s, priors);

    auto value = [&](const ParamRef& p) {
        switch (p.kind) {
        case ParamKind::LocalValue: return hidden.lvf[p.factor][p.index];
        case ParamKind::AnchorTop: return hidden.anchors[p.factor].top;
        case ParamKind::AnchorBottom: return hidden.anchors[p.factor].bottom;
        }
        return 0.0;
    };
    auto random_param = [&](std::size_t j, bool anchor) {
        if (anchor) return pick(rng, 0, 1) == 0 ? ParamRef::top(j) : ParamRef::bottom(j);
        return ParamRef::local(j, pick(rng, 0, s->local_size(j) - 1));
    };
    for (std::size_t k = 0; k < answers; ++k) {
        const auto j = pick(rng, 0, m - 1);
        const auto kind = pick(rng, 0, 3);
        if (kind <= 1) {
            const bool anchor = kind == 1;
            const auto p = random_param(j, anchor);
            const auto box = space.interval(p);
            const double t = uniform(rng, box.lo, box.hi);
            space.assert_constraint(BoundConstraint{p, value(p) >= t, t});
        } else if (kind == 2) {
            const auto a = random_param(j, false), b = random_param(j, false);
            if (a == b) continue;
            if (value(a) >= value(b))
                space.assert_constraint(CompareConstraint{a, b});
            else
                space.assert_constraint(CompareConstraint{b, a});
        } else if (anchor_comparisons) {
            const auto a = ParamRef::top(j), b = ParamRef::bottom(pick(rng, 0, m - 1));
            if (value(a) >= value(b))
                space.assert_constraint(CompareConstraint{a, b});
            else
                space.assert_constraint(CompareConstraint{b, a});
        }
    }
    return {std::move(space), std::move(hidden)};
}

inline FeasibilitySpec random_nogoods(std::mt19937_64& rng, const AttributeSchema& schema, std::size_t count) {
    std::vector<Nogood> nogoods;
    for (std::size_t k = 0; k < count; ++k) {
        Nogood ng;
        const auto size = pick(rng, 1, std::min<std::size_t>(3, schema.size()));
        std::vector<std::size_t> attrs(schema.size());
        for (std::size_t a = 0; a < attrs.size(); ++a) attrs[a] = a;
        std::shuffle(attrs.begin(), attrs.end(), rng);
        for (std::size_t p = 0; p < size; ++p)
            ng.assignment.emplace_back(attrs[p], static_cast<int>(pick(rng, 0, schema.attributes[attrs[p]].levels.size() - 1)));
        // Single-attribute nogoods on binary attributes remove half the space; prefer pairs.
        if (size == 1 && schema.attributes[attrs[0]].levels.size() == 2 && schema.size() > 1)
            ng.assignment.emplace_back(attrs[1], static_cast<int>(pick(rng, 0, schema.attributes[attrs[1]].levels.size() - 1)));
        nogoods.push_back(ng);
    }
    return FeasibilitySpec::constraints(std::move(nogoods));
}

} // namespace gaimr::fixture
