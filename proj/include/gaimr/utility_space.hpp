#pragma once

#include "gaimr/errors.hpp"
#include "gaimr/gai_model.hpp"
#include "gaimr/linear_block.hpp"

#include <atomic>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace gaimr {

enum class ParamKind { LocalValue, AnchorTop, AnchorBottom };

/// Names one utility parameter: v_j^i, u_j⊤ or u_j⊥.
struct ParamRef {
    ParamKind kind = ParamKind::LocalValue;
    std::size_t factor = 0;
    std::size_t index = 0;

    static ParamRef local(std::size_t j, std::size_t i) { return {ParamKind::LocalValue, j, i}; }
    static ParamRef top(std::size_t j) { return {ParamKind::AnchorTop, j, 0}; }
    static ParamRef bottom(std::size_t j) { return {ParamKind::AnchorBottom, j, 0}; }

    bool is_anchor() const noexcept { return kind != ParamKind::LocalValue; }

    friend bool operator==(const ParamRef&, const ParamRef&) = default;
};

inline std::string to_string(const ParamRef& p) {
    switch (p.kind) {
    case ParamKind::LocalValue:
        return "v[" + std::to_string(p.factor) + "][" + std::to_string(p.index) + "]";
    case ParamKind::AnchorTop:
        return "top[" + std::to_string(p.factor) + "]";
    case ParamKind::AnchorBottom:
        return "bottom[" + std::to_string(p.factor) + "]";
    }
    return "?";
}

/// param >= threshold (at_least) or param <= threshold.
struct BoundConstraint {
    ParamRef param;
    bool at_least = true;
    double threshold = 0.0;
};

/// greater >= lesser; both in the same factor's LVF block, or both anchors.
struct CompareConstraint {
    ParamRef greater;
    ParamRef lesser;
};

using Constraint = std::variant<BoundConstraint, CompareConstraint>;

/// Which parameter block an operation addresses.
struct BlockId {
    static constexpr std::size_t anchor_block = std::numeric_limits<std::size_t>::max();

    std::size_t factor = anchor_block;

    static BlockId anchors() { return {}; }
    static BlockId local(std::size_t j) { return {j}; }
    bool is_anchors() const noexcept { return factor == anchor_block; }
};

/// Prior intervals; empty vectors mean defaults ([0,1] for local values, the
/// configured default interval for anchors).
struct Priors {
    std::vector<std::vector<Interval>> lvf;
    std::vector<Interval> anchor_top;
    std::vector<Interval> anchor_bottom;
    Interval default_anchor{0.0, 1.0};
};

/// The feasible utility polytope U. LVF constraints are local per factor; the
/// anchor block holds every u_j⊤, u_j⊥ (index 2j and 2j+1) and may carry
/// cross-factor comparisons.
///
/// Assertions either succeed or leave the space untouched. Every block has a
/// version counter bumped when it changes, so caches can invalidate per factor.
class UtilitySpace {
public:
    UtilitySpace() = default;

    UtilitySpace(StructurePtr structure, const Priors& priors) : structure_(std::move(structure)) {
        if (!structure_) throw SchemaError("utility space needs a structure");
        const auto m = structure_->factor_count();
        if (!priors.lvf.empty() && priors.lvf.size() != m) throw SchemaError("LVF priors do not match factors");

        factors_.reserve(m);
        for (std::size_t j = 0; j < m; ++j) {
            const auto n = structure_->local_size(j);
            std::vector<Interval> bounds(n, Interval{0.0, 1.0});
            if (!priors.lvf.empty()) {
                if (priors.lvf[j].size() != n)
                    throw SchemaError("LVF priors for factor " + std::to_string(j) + " have the wrong size");
                bounds = priors.lvf[j];
            }
            const auto& f = structure_->factor(j);
            if (!bounds[f.top].contains(1.0) || !bounds[f.bottom].contains(0.0))
                throw InconsistentConstraintError("priors of factor " + std::to_string(j) +
                                                  " exclude the normalized local top/bottom");
            bounds[f.top] = {1.0, 1.0};
            bounds[f.bottom] = {0.0, 0.0};
            for (auto& iv : bounds) iv.lo = std::max(iv.lo, 0.0), iv.hi = std::min(iv.hi, 1.0);
            factors_.emplace_back(std::move(bounds));
        }

        std::vector<Interval> anchor_bounds(2 * m, priors.default_anchor);
        if (!priors.anchor_top.empty()) {
            if (priors.anchor_top.size() != m) throw SchemaError("top anchor priors do not match factors");
            for (std::size_t j = 0; j < m; ++j) anchor_bounds[2 * j] = priors.anchor_top[j];
        }
        if (!priors.anchor_bottom.empty()) {
            if (priors.anchor_bottom.size() != m) throw SchemaError("bottom anchor priors do not match factors");
            for (std::size_t j = 0; j < m; ++j) anchor_bounds[2 * j + 1] = priors.anchor_bottom[j];
        }
        DifferenceBlock anchors(std::move(anchor_bounds));
        for (std::size_t j = 0; j < m; ++j) anchors = anchors.with_comparison(2 * j, 2 * j + 1);
        anchors_ = std::move(anchors);
        versions_.resize(m + 1);
        for (auto& v : versions_) v = next_stamp();
    }

    const StructurePtr& structure() const noexcept { return structure_; }
    std::size_t factor_count() const noexcept { return factors_.size(); }

    const DifferenceBlock& block(BlockId id) const {
        return id.is_anchors() ? anchors_ : factors_.at(id.factor);
    }
    const DifferenceBlock& lvf_block(std::size_t j) const { return factors_.at(j); }
    const DifferenceBlock& anchor_block() const noexcept { return anchors_; }

    std::uint64_t version(BlockId id) const {
        return id.is_anchors() ? versions_.back() : versions_.at(id.factor);
    }

    static std::size_t anchor_slot(const ParamRef& p) {
        return 2 * p.factor + (p.kind == ParamKind::AnchorBottom ? 1 : 0);
    }

    /// Adds one constraint. Throws InconsistentConstraintError (space unchanged)
    /// when the polytope would become empty.
    void assert_constraint(const Constraint& c) {
        if (const auto* bound = std::get_if<BoundConstraint>(&c)) {
            check(bound->param);
            if (bound->param.is_anchor()) {
                anchors_ = anchors_.with_bound(anchor_slot(bound->param), bound->at_least, bound->threshold);
                versions_.back() = next_stamp();
            } else {
                auto& blk = factors_[bound->param.factor];
                blk = blk.with_bound(bound->param.index, bound->at_least, bound->threshold);
                versions_[bound->param.factor] = next_stamp();
            }
            return;
        }
        const auto& cmp = std::get<CompareConstraint>(c);
        check(cmp.greater);
        check(cmp.lesser);
        if (cmp.greater.is_anchor() != cmp.lesser.is_anchor())
            throw Error("cannot compare an anchor with a local value");
        if (cmp.greater.is_anchor()) {
            anchors_ = anchors_.with_comparison(anchor_slot(cmp.greater), anchor_slot(cmp.lesser));
            versions_.back() = next_stamp();
        } else {
            if (cmp.greater.factor != cmp.lesser.factor)
                throw Error("local value comparisons must stay within one factor");
            auto& blk = factors_[cmp.greater.factor];
            blk = blk.with_comparison(cmp.greater.index, cmp.lesser.index);
            versions_[cmp.greater.factor] = next_stamp();
        }
    }

    /// True if `c` could be asserted without emptying the polytope.
    bool is_consistent(const Constraint& c) const {
        try {
            UtilitySpace copy = *this;
            copy.assert_constraint(c);
            return true;
        } catch (const InconsistentConstraintError&) {
            return false;
        }
    }

    const std::vector<Interval>& bounding_box(BlockId id) const { return block(id).box(); }

    Interval interval(const ParamRef& p) const {
        check(p);
        return p.is_anchor() ? anchors_.box()[anchor_slot(p)] : factors_[p.factor].box()[p.index];
    }

    /// a vs b within one block; Unknown unless implied by comparisons or boxes.
    Relation known_relation(const ParamRef& a, const ParamRef& b) const {
        check(a);
        check(b);
        if (a.is_anchor() && b.is_anchor()) return anchors_.known_relation(anchor_slot(a), anchor_slot(b));
        if (a.is_anchor() || b.is_anchor() || a.factor != b.factor)
            throw Error("known_relation needs two parameters of the same block");
        return factors_[a.factor].known_relation(a.index, b.index);
    }

    LinearMax maximize_linear(BlockId id, std::span<const double> objective) const {
        return block(id).maximize(objective);
    }

    /// Max over the anchor polytope of Σ_j (u_j⊤ − u_j⊥) w_j.
    LinearMax maximize_weighted_anchors(std::span<const double> weights) const {
        std::vector<double> objective(2 * factors_.size());
        for (std::size_t j = 0; j < factors_.size(); ++j) objective[2 * j] = weights[j], objective[2 * j + 1] = -weights[j];
        return anchors_.maximize(objective);
    }

    /// Range of λ_j = u_j⊤ − u_j⊥ implied by the anchor bounding box alone.
    Interval weight_range(std::size_t j) const {
        const auto& box = anchors_.box();
        return {std::max(0.0, box[2 * j].lo - box[2 * j + 1].hi), box[2 * j].hi - box[2 * j + 1].lo};
    }

    /// True if the anchor block carries only the per-factor u⊤ >= u⊥ constraints.
    bool anchors_separable() const {
        for (const auto& [g, l] : anchors_.comparisons())
            if (g / 2 != l / 2) return false;
        return true;
    }

    /// True if every local value and anchor is pinned to a single value.
    bool is_singleton(double tol = 0.0) const {
        for (const auto& blk : factors_)
            for (const auto& iv : blk.box())
                if (iv.width() > tol) return false;
        for (const auto& iv : anchors_.box())
            if (iv.width() > tol) return false;
        return true;
    }

private:
    // Stamps are unique process-wide, so a cache keyed on them never confuses
    // two spaces that diverged from a common copy.
    static std::uint64_t next_stamp() {
        static std::atomic<std::uint64_t> counter{0};
        return ++counter;
    }

    void check(const ParamRef& p) const {
        if (p.factor >= factors_.size()) throw Error("parameter " + to_string(p) + " names an unknown factor");
        if (!p.is_anchor() && p.index >= factors_[p.factor].size())
            throw Error("parameter " + to_string(p) + " is outside the factor's local configurations");
    }

    StructurePtr structure_;
    std::vector<DifferenceBlock> factors_;
    DifferenceBlock anchors_;
    std::vector<std::uint64_t> versions_;
};

} // namespace gaimr
