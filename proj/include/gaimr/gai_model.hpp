#pragma once

#include "gaimr/errors.hpp"
#include "gaimr/schema.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace gaimr {

/// One GAI factor: its attribute set plus the declared best and worst local
/// configurations (local indices) under the local value condition.
struct Factor {
    AttributeSet attributes;
    std::size_t top = 0;
    std::size_t bottom = 0;
};

/// One entry C^i of an unscaled subutility's linear form.
struct CoefficientTerm {
    std::size_t index = 0;
    int coefficient = 0;

    friend bool operator==(const CoefficientTerm&, const CoefficientTerm&) = default;
};

/// [factor][input local index] -> sparse terms, sorted by index, no zeros.
using CoefficientTable = std::vector<std::vector<std::vector<CoefficientTerm>>>;

namespace detail {

inline std::uint64_t attribute_mask(const AttributeSet& attributes) {
    std::uint64_t mask = 0;
    for (auto a : attributes) mask |= std::uint64_t{1} << a;
    return mask;
}

inline void check_factors(const AttributeSchema& schema, const std::vector<Factor>& factors) {
    if (factors.empty()) throw SchemaError("structure has no factors");
    std::vector<bool> covered(schema.size(), false);
    for (std::size_t j = 0; j < factors.size(); ++j) {
        const auto& attrs = factors[j].attributes;
        if (attrs.empty()) throw SchemaError("factor " + std::to_string(j) + " has no attributes");
        for (std::size_t p = 0; p < attrs.size(); ++p) {
            if (attrs[p] >= schema.size())
                throw SchemaError("factor " + std::to_string(j) + " names attribute index " +
                                  std::to_string(attrs[p]) + " outside the schema");
            if (p > 0 && attrs[p] <= attrs[p - 1])
                throw SchemaError("factor " + std::to_string(j) + " attributes must be sorted and distinct");
            covered[attrs[p]] = true;
        }
    }
    for (std::size_t a = 0; a < schema.size(); ++a)
        if (!covered[a])
            throw SchemaError("attribute '" + schema.attributes[a].name + "' is not covered by any factor");
}

} // namespace detail

/// K_j: every attribute outside I_j that shares a factor with an attribute of I_j.
inline std::vector<AttributeSet> build_conditioning_sets(const AttributeSchema& schema,
                                                         const std::vector<Factor>& factors) {
    detail::check_factors(schema, factors);
    std::vector<std::uint64_t> masks;
    masks.reserve(factors.size());
    for (const auto& f : factors) masks.push_back(detail::attribute_mask(f.attributes));

    std::vector<AttributeSet> out(factors.size());
    for (std::size_t j = 0; j < factors.size(); ++j) {
        std::uint64_t k = 0;
        for (std::size_t i = 0; i < factors.size(); ++i)
            if (i != j && (masks[i] & masks[j]) != 0) k |= masks[i];
        k &= ~masks[j];
        for (std::size_t a = 0; a < schema.size(); ++a)
            if ((k >> a) & 1U) out[j].push_back(a);
    }
    return out;
}

/// Integer coefficients of the canonical unscaled subutilities.
///
/// For factor j the signed intersections S = (I_{i1} ∩ ... ∩ I_{ik}) ∩ I_j over
/// preceding factors are accumulated as a weight per distinct S (sign (-1)^k),
/// dropping empty intersections. Each input configuration then receives the
/// weight of S at the local index of its projection onto S.
inline CoefficientTable compute_coefficients(const AttributeSchema& schema, const std::vector<Factor>& factors) {
    detail::check_factors(schema, factors);
    CoefficientTable table(factors.size());

    for (std::size_t j = 0; j < factors.size(); ++j) {
        const auto& attrs = factors[j].attributes;
        const std::uint64_t own = detail::attribute_mask(attrs);

        std::map<std::uint64_t, long long> weights{{own, 1}};
        for (std::size_t i = 0; i < j; ++i) {
            const std::uint64_t other = detail::attribute_mask(factors[i].attributes);
            if ((other & own) == 0) continue;
            const auto snapshot = weights;
            for (const auto& [mask, w] : snapshot) {
                const std::uint64_t meet = mask & other;
                if (meet == 0) continue;
                auto& slot = weights[meet];
                slot -= w;
                if (slot == 0) weights.erase(meet);
            }
        }

        std::vector<std::size_t> strides(attrs.size());
        std::size_t size = 1;
        for (std::size_t p = attrs.size(); p-- > 0;) {
            strides[p] = size;
            size *= static_cast<std::size_t>(schema.domain_size(attrs[p]));
        }

        table[j].resize(size);
        std::vector<int> levels(attrs.size());
        for (std::size_t input = 0; input < size; ++input) {
            std::size_t rest = input;
            for (std::size_t p = 0; p < attrs.size(); ++p) {
                levels[p] = static_cast<int>(rest / strides[p]);
                rest %= strides[p];
            }
            std::map<std::size_t, long long> acc;
            for (const auto& [mask, w] : weights) {
                std::size_t index = 0;
                for (std::size_t p = 0; p < attrs.size(); ++p) {
                    const int level = ((mask >> attrs[p]) & 1U) ? levels[p] : schema.reference[attrs[p]];
                    index += static_cast<std::size_t>(level) * strides[p];
                }
                acc[index] += w;
            }
            auto& terms = table[j][input];
            for (const auto& [index, c] : acc)
                if (c != 0) terms.push_back({index, static_cast<int>(c)});
        }
    }
    return table;
}

/// Attribute schema plus an ordered GAI factor structure with its precomputed
/// local indexing, conditioning sets, and coefficient table. Immutable.
///
/// Canonical coefficients are relative to the factor order given here.
class GaiStructure {
public:
    GaiStructure(AttributeSchema schema, std::vector<Factor> factors)
        : schema_(std::move(schema)), factors_(std::move(factors)) {
        schema_.validate();
        conditioning_ = build_conditioning_sets(schema_, factors_);
        strides_.resize(factors_.size());
        sizes_.resize(factors_.size());
        for (std::size_t j = 0; j < factors_.size(); ++j) {
            const auto& attrs = factors_[j].attributes;
            strides_[j].resize(attrs.size());
            std::size_t size = 1;
            for (std::size_t p = attrs.size(); p-- > 0;) {
                strides_[j][p] = size;
                size *= static_cast<std::size_t>(schema_.domain_size(attrs[p]));
            }
            sizes_[j] = size;
            if (factors_[j].top >= size || factors_[j].bottom >= size)
                throw SchemaError("factor " + std::to_string(j) + " top/bottom outside its local configurations");
            if (factors_[j].top == factors_[j].bottom)
                throw SchemaError("factor " + std::to_string(j) + " has identical local top and bottom");
        }
        coefficients_ = compute_coefficients(schema_, factors_);
    }

    const AttributeSchema& schema() const noexcept { return schema_; }
    std::size_t attribute_count() const noexcept { return schema_.size(); }
    std::size_t factor_count() const noexcept { return factors_.size(); }
    const Factor& factor(std::size_t j) const { return factors_.at(j); }
    const std::vector<Factor>& factors() const noexcept { return factors_; }
    const AttributeSet& conditioning_set(std::size_t j) const { return conditioning_.at(j); }

    /// N_j, the number of local configurations of factor j.
    std::size_t local_size(std::size_t j) const { return sizes_.at(j); }

    /// Σ N_j + 2m: LVF parameters plus two anchors per factor.
    std::size_t parameter_count() const {
        std::size_t total = 2 * factors_.size();
        for (auto n : sizes_) total += n;
        return total;
    }

    /// Local index of the restriction of full outcome x to factor j.
    std::size_t local_index(std::size_t j, const Outcome& x) const {
        const auto& attrs = factors_[j].attributes;
        std::size_t index = 0;
        for (std::size_t p = 0; p < attrs.size(); ++p)
            index += static_cast<std::size_t>(x[attrs[p]]) * strides_[j][p];
        return index;
    }

    /// Level tuple of local configuration `index`, in factor attribute order.
    std::vector<int> local_levels(std::size_t j, std::size_t index) const {
        const auto& attrs = factors_[j].attributes;
        std::vector<int> levels(attrs.size());
        for (std::size_t p = 0; p < attrs.size(); ++p) {
            levels[p] = static_cast<int>(index / strides_[j][p]);
            index %= strides_[j][p];
        }
        return levels;
    }

    /// Full outcome with factor j at local configuration `index`, everything else at reference.
    Outcome expand(std::size_t j, std::size_t index) const {
        Outcome x = schema_.reference;
        const auto levels = local_levels(j, index);
        const auto& attrs = factors_[j].attributes;
        for (std::size_t p = 0; p < attrs.size(); ++p) x[attrs[p]] = levels[p];
        return x;
    }

    std::span<const CoefficientTerm> coefficients(std::size_t j, std::size_t input) const {
        return coefficients_[j][input];
    }

    const CoefficientTable& coefficient_table() const noexcept { return coefficients_; }

    /// Stride of position p inside factor j's mixed-radix local index.
    std::size_t stride(std::size_t j, std::size_t p) const { return strides_[j][p]; }

private:
    AttributeSchema schema_;
    std::vector<Factor> factors_;
    std::vector<AttributeSet> conditioning_;
    std::vector<std::vector<std::size_t>> strides_;
    std::vector<std::size_t> sizes_;
    CoefficientTable coefficients_;
};

using StructurePtr = std::shared_ptr<const GaiStructure>;

struct AnchorPair {
    double top = 1.0;
    double bottom = 0.0;

    double weight() const noexcept { return top - bottom; }
};

/// A fully specified canonical GAI utility:
///   u(x) = offset + Σ_j (u_j⊤ − u_j⊥) Σ_i C^i_{x_j} v_j^i
///
/// `offset` is the additive constant the canonical form leaves implicit; it is
/// zero for hand-built models and set by canonical_from_oracle so that the
/// model reproduces the normalized source utility exactly.
struct GaiModel {
    StructurePtr structure;
    std::vector<std::vector<double>> lvf;
    std::vector<AnchorPair> anchors;
    double offset = 0.0;

    double unscaled_subutility(std::size_t j, std::size_t input) const {
        double sum = 0.0;
        for (const auto& term : structure->coefficients(j, input)) sum += term.coefficient * lvf[j][term.index];
        return sum;
    }

    double evaluate(const Outcome& x) const {
        double u = offset;
        for (std::size_t j = 0; j < structure->factor_count(); ++j)
            u += anchors[j].weight() * unscaled_subutility(j, structure->local_index(j, x));
        return u;
    }

    void validate(double tolerance = 1e-12) const {
        if (!structure) throw SchemaError("model has no structure");
        const auto m = structure->factor_count();
        if (lvf.size() != m || anchors.size() != m) throw SchemaError("model parameter blocks do not match factors");
        for (std::size_t j = 0; j < m; ++j) {
            if (lvf[j].size() != structure->local_size(j))
                throw SchemaError("factor " + std::to_string(j) + " has the wrong number of local values");
            const auto& f = structure->factor(j);
            if (std::abs(lvf[j][f.top] - 1.0) > tolerance || std::abs(lvf[j][f.bottom]) > tolerance)
                throw SchemaError("factor " + std::to_string(j) + " local values are not normalized");
            if (anchors[j].top < anchors[j].bottom - tolerance)
                throw SchemaError("factor " + std::to_string(j) + " has top anchor below bottom anchor");
        }
    }
};

struct CanonicalResult {
    GaiModel model;
    /// Largest |evaluate(model, x) − û(x)| over all outcomes.
    double max_error = 0.0;
    bool verified = false;
};

/// Recovers the canonical GAI model of a black-box utility by enumeration.
///
/// The utility is first normalized to û with û(x⊤) = 1, û(x⊥) = 0. Local values
/// are read off under the local value condition (everything outside I_j at
/// reference), local tops/bottoms and the global best/worst are found by
/// enumeration (first in index order on ties). A non-GAI utility is reported
/// through `verified == false` rather than thrown.
inline CanonicalResult canonical_from_oracle(const std::function<double(const Outcome&)>& utility,
                                             AttributeSchema schema, std::vector<Factor> factors,
                                             double tolerance = 1e-9) {
    schema.validate();
    detail::check_factors(schema, factors);

    double best_value = -INFINITY, worst_value = INFINITY;
    Outcome best, worst;
    for_each_outcome(schema, [&](const Outcome& x) {
        const double u = utility(x);
        if (u > best_value) best_value = u, best = x;
        if (u < worst_value) worst_value = u, worst = x;
    });
    const double span = best_value - worst_value;
    if (!(span > 0.0)) throw DegenerateFactorError("utility is constant over all outcomes");
    auto normalized = [&](const Outcome& x) { return (utility(x) - worst_value) / span; };
    schema.best = best;
    schema.worst = worst;

    // Factor tops are only known after enumeration; seed distinct placeholders.
    for (auto& f : factors) f.top = 0, f.bottom = 1;
    auto provisional = std::make_shared<const GaiStructure>(schema, factors);

    std::vector<std::vector<double>> local(factors.size());
    std::vector<AnchorPair> anchors(factors.size());
    for (std::size_t j = 0; j < factors.size(); ++j) {
        const auto n = provisional->local_size(j);
        std::vector<double> values(n);
        for (std::size_t i = 0; i < n; ++i) values[i] = normalized(provisional->expand(j, i));
        const auto top = static_cast<std::size_t>(std::max_element(values.begin(), values.end()) - values.begin());
        const auto bottom = static_cast<std::size_t>(std::min_element(values.begin(), values.end()) - values.begin());
        const double width = values[top] - values[bottom];
        if (!(width > 1e-12)) throw DegenerateFactorError("factor " + std::to_string(j) + " is locally constant");
        factors[j].top = top;
        factors[j].bottom = bottom;
        anchors[j] = {values[top], values[bottom]};
        local[j].resize(n);
        for (std::size_t i = 0; i < n; ++i) local[j][i] = (values[i] - values[bottom]) / width;
        local[j][top] = 1.0;
        local[j][bottom] = 0.0;
    }

    CanonicalResult result;
    result.model.structure = std::make_shared<const GaiStructure>(std::move(schema), std::move(factors));
    result.model.lvf = std::move(local);
    result.model.anchors = std::move(anchors);

    const auto& reference = result.model.structure->schema().reference;
    result.model.offset = normalized(reference) - result.model.evaluate(reference);

    for_each_outcome(result.model.structure->schema(), [&](const Outcome& x) {
        result.max_error = std::max(result.max_error, std::abs(result.model.evaluate(x) - normalized(x)));
    });
    result.verified = result.max_error <= tolerance;
    return result;
}

} // namespace gaimr
