#pragma once

#include "gaimr/errors.hpp"
#include "gaimr/gai_model.hpp"
#include "gaimr/utility_space.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace gaimr {

/// A forbidden partial assignment: (attribute, level) pairs sorted by attribute.
struct Nogood {
    std::vector<std::pair<std::size_t, int>> assignment;

    bool violated_by(const Outcome& x) const {
        for (const auto& [a, level] : assignment)
            if (x[a] != level) return false;
        return true;
    }
};

/// The feasible set: all outcomes avoiding every nogood, or an explicit catalog.
class FeasibilitySpec {
public:
    FeasibilitySpec() = default;

    static FeasibilitySpec constraints(std::vector<Nogood> nogoods) {
        FeasibilitySpec spec;
        for (auto& ng : nogoods) std::sort(ng.assignment.begin(), ng.assignment.end());
        spec.nogoods_ = std::move(nogoods);
        return spec;
    }

    static FeasibilitySpec catalog(std::vector<Outcome> items) {
        FeasibilitySpec spec;
        spec.catalog_ = true;
        spec.items_ = std::move(items);
        return spec;
    }

    bool is_catalog() const noexcept { return catalog_; }
    const std::vector<Nogood>& nogoods() const noexcept { return nogoods_; }
    const std::vector<Outcome>& items() const noexcept { return items_; }

    void validate(const AttributeSchema& schema) const {
        for (std::size_t k = 0; k < nogoods_.size(); ++k) {
            const auto& ng = nogoods_[k];
            if (ng.assignment.empty()) throw SchemaError("nogood " + std::to_string(k) + " assigns no attribute");
            for (std::size_t p = 0; p < ng.assignment.size(); ++p) {
                const auto& [a, level] = ng.assignment[p];
                if (a >= schema.size() || level < 0 || level >= schema.domain_size(a))
                    throw SchemaError("nogood " + std::to_string(k) + " is outside the schema");
                if (p > 0 && ng.assignment[p - 1].first == a)
                    throw SchemaError("nogood " + std::to_string(k) + " assigns an attribute twice");
            }
        }
        for (std::size_t k = 0; k < items_.size(); ++k)
            if (!schema.contains(items_[k]))
                throw SchemaError("catalog item " + std::to_string(k) + " does not fit the schema");
    }

private:
    bool catalog_ = false;
    std::vector<Nogood> nogoods_;
    std::vector<Outcome> items_;
};

inline bool is_feasible(const FeasibilitySpec& feas, const Outcome& x) {
    if (feas.is_catalog()) return std::find(feas.items().begin(), feas.items().end(), x) != feas.items().end();
    for (const auto& ng : feas.nogoods())
        if (ng.violated_by(x)) return false;
    return true;
}

/// Per factor, per local index value of one objective term.
using FactorTables = std::vector<std::vector<double>>;

/// One generated master-problem row: the weighted local regrets
/// x_j ↦ λ_j^t r̄_j[x_j, x'^t_j] of adversary x'^t at anchor point t.
struct Scenario {
    FactorTables table;
    Outcome adversary;
    std::vector<double> weights;
};

struct AdversaryResult {
    Outcome config;
    LinearMax anchors;
    double value = 0.0;
    std::uint64_t nodes = 0;
};

struct MasterResult {
    Outcome config;
    double value = 0.0;
    std::uint64_t nodes = 0;
};

struct AdditiveResult {
    Outcome config;
    double value = 0.0;
};

namespace detail {

inline constexpr double search_tolerance = 1e-12;

inline double table_sum(const GaiStructure& s, const FactorTables& t, const Outcome& x) {
    double v = 0.0;
    for (std::size_t j = 0; j < s.factor_count(); ++j) v += t[j][s.local_index(j, x)];
    return v;
}

/// Depth-first attribute order. Greedily picks the attribute that completes
/// the most factors, then the one touching the most started factors, so that
/// factor tables collapse to single entries early.
inline std::vector<std::size_t> factor_completing_order(const GaiStructure& s) {
    const auto n = s.attribute_count();
    const auto m = s.factor_count();
    std::vector<std::vector<std::size_t>> touching(n);
    std::vector<std::size_t> remaining(m);
    for (std::size_t j = 0; j < m; ++j) {
        remaining[j] = s.factor(j).attributes.size();
        for (auto a : s.factor(j).attributes) touching[a].push_back(j);
    }
    std::vector<bool> used(n, false);
    std::vector<std::size_t> order;
    for (std::size_t step = 0; step < n; ++step) {
        std::size_t pick = n;
        std::pair<std::size_t, std::size_t> best{0, 0};
        for (std::size_t a = 0; a < n; ++a) {
            if (used[a]) continue;
            std::pair<std::size_t, std::size_t> key{0, 0};
            for (auto j : touching[a]) {
                if (remaining[j] == 1) ++key.first;
                if (remaining[j] < s.factor(j).attributes.size()) ++key.second;
            }
            if (pick == n || key > best) pick = a, best = key;
        }
        used[pick] = true;
        order.push_back(pick);
        for (auto j : touching[pick]) --remaining[j];
    }
    return order;
}

/// Search order plus everything derived from it: per factor, the mapping from
/// codes in search order back to local indices, and the nogoods that become
/// decidable at each attribute.
class SearchPlan {
public:
    SearchPlan(const GaiStructure& s, const FeasibilitySpec& feas, bool schema_order = false) : s_(s) {
        const auto n = s.attribute_count();
        const auto m = s.factor_count();
        if (schema_order) {
            order_.resize(n);
            for (std::size_t a = 0; a < n; ++a) order_[a] = a;
        } else {
            order_ = factor_completing_order(s);
        }
        rank_.resize(n);
        for (std::size_t k = 0; k < n; ++k) rank_[order_[k]] = k;

        touching_.resize(n);
        to_local_.resize(m);
        domains_.resize(m);
        for (std::size_t j = 0; j < m; ++j) {
            const auto& attrs = s.factor(j).attributes;
            std::vector<std::size_t> pos(attrs.size());
            for (std::size_t p = 0; p < attrs.size(); ++p) pos[p] = p;
            std::sort(pos.begin(), pos.end(), [&](auto x, auto y) { return rank_[attrs[x]] < rank_[attrs[y]]; });
            for (auto p : pos) {
                touching_[attrs[p]].push_back(j);
                domains_[j].push_back(static_cast<std::size_t>(s.schema().domain_size(attrs[p])));
            }
            std::vector<std::size_t> stride(attrs.size(), 1);
            for (std::size_t p = attrs.size(); p-- > 1;)
                stride[p - 1] = stride[p] * static_cast<std::size_t>(s.schema().domain_size(attrs[p]));
            const auto size = s.local_size(j);
            to_local_[j].resize(size);
            for (std::size_t code = 0; code < size; ++code) {
                std::size_t rest = code, local = 0;
                for (std::size_t k = pos.size(); k-- > 0;) {
                    local += (rest % domains_[j][k]) * stride[pos[k]];
                    rest /= domains_[j][k];
                }
                to_local_[j][code] = local;
            }
        }
        closing_.resize(n);
        for (const auto& ng : feas.nogoods()) {
            std::size_t last = ng.assignment.front().first;
            for (const auto& [a, level] : ng.assignment)
                if (rank_[a] > rank_[last]) last = a;
            closing_[last].push_back(&ng);
        }
    }

    const GaiStructure& structure() const noexcept { return s_; }
    const std::vector<std::size_t>& order() const noexcept { return order_; }
    const std::vector<std::size_t>& touching(std::size_t a) const { return touching_[a]; }
    const std::vector<const Nogood*>& closing(std::size_t a) const { return closing_[a]; }
    const std::vector<std::size_t>& domains(std::size_t j) const { return domains_[j]; }
    std::size_t local(std::size_t j, std::size_t code) const { return to_local_[j][code]; }

    /// A factor table re-indexed by search-order codes.
    std::vector<double> permute(std::size_t j, const std::vector<double>& table) const {
        std::vector<double> out(table.size());
        for (std::size_t code = 0; code < table.size(); ++code) out[code] = table[to_local_[j][code]];
        return out;
    }

private:
    const GaiStructure& s_;
    std::vector<std::size_t> order_;
    std::vector<std::size_t> rank_;
    std::vector<std::vector<std::size_t>> touching_;
    std::vector<std::vector<const Nogood*>> closing_;
    std::vector<std::vector<std::size_t>> to_local_;
    std::vector<std::vector<std::size_t>> domains_;
};

/// Max (or min) of a factor table over every block of codes that share the
/// first k digits (in search order), for k = 0..|I_j|.
class PrefixExtrema {
public:
    PrefixExtrema(const std::vector<std::size_t>& domains, std::vector<double> table, bool maximum) {
        levels_.resize(domains.size() + 1);
        levels_[domains.size()] = std::move(table);
        for (std::size_t k = domains.size(); k-- > 0;) {
            const auto d = domains[k];
            const auto& child = levels_[k + 1];
            auto& parent = levels_[k];
            parent.assign(child.size() / d, 0.0);
            for (std::size_t code = 0; code < parent.size(); ++code) {
                double v = child[code * d];
                for (std::size_t c = 1; c < d; ++c)
                    v = maximum ? std::max(v, child[code * d + c]) : std::min(v, child[code * d + c]);
                parent[code] = v;
            }
        }
    }

    double at(std::size_t depth, std::size_t code) const { return levels_[depth][code]; }

private:
    std::vector<std::vector<double>> levels_;
};

/// Partial assignment along a SearchPlan: per factor, how many of its
/// attributes are set and the search-order code of their levels.
class Walker {
public:
    explicit Walker(const SearchPlan& plan)
        : plan_(plan), levels_(plan.structure().attribute_count(), 0), depth_(plan.structure().factor_count(), 0),
          code_(plan.structure().factor_count(), 0) {}

    std::size_t depth(std::size_t j) const { return depth_[j]; }
    std::size_t code(std::size_t j) const { return code_[j]; }
    std::size_t local(std::size_t j) const { return plan_.local(j, code_[j]); }
    const Outcome& levels() const noexcept { return levels_; }

    /// Sets attribute a; false if a nogood becomes violated.
    bool assign(std::size_t a, int level) {
        levels_[a] = level;
        const auto d = static_cast<std::size_t>(plan_.structure().schema().domain_size(a));
        for (auto j : plan_.touching(a)) {
            code_[j] = code_[j] * d + static_cast<std::size_t>(level);
            ++depth_[j];
        }
        for (const auto* ng : plan_.closing(a))
            if (ng->violated_by(levels_)) return false;
        return true;
    }

    void unassign(std::size_t a) {
        const auto d = static_cast<std::size_t>(plan_.structure().schema().domain_size(a));
        for (auto j : plan_.touching(a)) {
            code_[j] /= d;
            --depth_[j];
        }
        levels_[a] = 0;
    }

private:
    const SearchPlan& plan_;
    Outcome levels_;
    std::vector<std::size_t> depth_;
    std::vector<std::size_t> code_;
};

/// Branch and bound maximizing P's objective along a SearchPlan.
///
/// P supplies push/pop (update per-factor bound terms after an attribute is
/// set or before it is cleared), bound() (an upper bound on every completion)
/// and leaf() (exact value of a full assignment).
///
/// Without a target, returns the first maximum found up to the tolerance.
/// With a target, returns the first completion whose value reaches it.
template <class P>
class OrderedSearch {
public:
    OrderedSearch(const SearchPlan& plan, P& problem) : plan_(plan), p_(problem), walker_(plan) {}

    struct Hit {
        Outcome config;
        double value;
    };

    std::optional<Hit> run(const std::vector<int>& fixed, std::optional<double> target) {
        fixed_ = &fixed;
        target_ = target;
        have_ = false;
        dive(0);
        if (!have_) return std::nullopt;
        return Hit{best_config_, best_};
    }

    std::uint64_t nodes = 0;

private:
    bool promising(double bound) const {
        if (target_) return bound >= *target_;
        return !have_ || bound > best_ + search_tolerance;
    }

    bool done() const { return target_ && have_; }

    void dive(std::size_t k) {
        ++nodes;
        const auto& order = plan_.order();
        if (k == order.size()) {
            const double v = p_.leaf(walker_);
            if (target_ ? v >= *target_ : (!have_ || v > best_ + search_tolerance)) {
                best_ = v;
                best_config_ = walker_.levels();
                have_ = true;
            }
            return;
        }
        const auto a = order[k];
        const int pinned = (*fixed_)[a];
        const int lo = pinned >= 0 ? pinned : 0;
        const int hi = pinned >= 0 ? pinned : plan_.structure().schema().domain_size(a) - 1;
        for (int level = lo; level <= hi && !done(); ++level) {
            if (walker_.assign(a, level)) {
                p_.push(a, walker_);
                if (promising(p_.bound())) dive(k + 1);
                p_.pop(a, walker_);
            }
            walker_.unassign(a);
        }
    }

    const SearchPlan& plan_;
    P& p_;
    Walker walker_;
    const std::vector<int>* fixed_ = nullptr;
    std::optional<double> target_;
    bool have_ = false;
    double best_ = 0.0;
    Outcome best_config_;
};

/// Maximum of P, then the lexicographically smallest (schema order) feasible
/// configuration within the tolerance of it: attribute by attribute, try each
/// lower level with a target search and keep the first that still reaches
/// the optimum.
template <class P>
std::optional<std::pair<Outcome, double>> maximize_lexicographic(const SearchPlan& plan, P& problem,
                                                                 std::uint64_t& nodes) {
    const auto n = plan.structure().attribute_count();
    OrderedSearch<P> search(plan, problem);
    std::vector<int> fixed(n, -1);
    auto first = search.run(fixed, std::nullopt);
    if (!first) {
        nodes += search.nodes;
        return std::nullopt;
    }
    Outcome x = first->config;
    const double target = first->value - search_tolerance;
    for (std::size_t a = 0; a < n; ++a) {
        for (int level = 0; level < x[a]; ++level) {
            fixed[a] = level;
            if (auto hit = search.run(fixed, target)) {
                x = hit->config;
                break;
            }
        }
        fixed[a] = x[a];
    }
    nodes += search.nodes;
    return std::make_pair(std::move(x), first->value);
}

/// Σ_j table_j[x_j] with optional per-factor weight ranges applied to each
/// term (w.hi·r for r ≥ 0, w.lo·r otherwise).
class WeightedTableBound {
public:
    WeightedTableBound(const SearchPlan& plan, const FactorTables& tables, const std::vector<Interval>* weights)
        : plan_(plan), weights_(weights) {
        const auto m = plan.structure().factor_count();
        extrema_.reserve(m);
        contribution_.resize(m);
        for (std::size_t j = 0; j < m; ++j) {
            extrema_.emplace_back(plan.domains(j), plan.permute(j, tables[j]), true);
            bound_ += contribution_[j] = term(j, extrema_[j].at(0, 0));
        }
    }

    void push(std::size_t a, const Walker& w) {
        bounds_.push_back(bound_);
        for (auto j : plan_.touching(a)) {
            saved_.push_back(contribution_[j]);
            const double c = term(j, extrema_[j].at(w.depth(j), w.code(j)));
            bound_ += c - contribution_[j];
            contribution_[j] = c;
        }
    }

    void pop(std::size_t a, const Walker&) {
        const auto& t = plan_.touching(a);
        for (std::size_t k = t.size(); k-- > 0;) {
            contribution_[t[k]] = saved_.back();
            saved_.pop_back();
        }
        bound_ = bounds_.back();
        bounds_.pop_back();
    }

    double bound() const { return bound_; }

    /// Exact weighted sum at a full assignment.
    double exact(const Walker& w) const {
        double v = 0.0;
        for (std::size_t j = 0; j < contribution_.size(); ++j)
            v += term(j, extrema_[j].at(w.depth(j), w.code(j)));
        return v;
    }

private:
    double term(std::size_t j, double r) const {
        if (!weights_) return r;
        return r >= 0.0 ? (*weights_)[j].hi * r : (*weights_)[j].lo * r;
    }

    const SearchPlan& plan_;
    const std::vector<Interval>* weights_;
    std::vector<PrefixExtrema> extrema_;
    std::vector<double> contribution_;
    double bound_ = 0.0;
    std::vector<double> saved_;
    std::vector<double> bounds_;
};

/// −max_t Σ_j table^t_j[x_j]; the bound uses per-scenario minimal completions.
class ScenarioBound {
public:
    ScenarioBound(const SearchPlan& plan, const std::vector<Scenario>& scenarios) : plan_(plan) {
        const auto m = plan.structure().factor_count();
        count_ = scenarios.size();
        extrema_.resize(m);
        contribution_.assign(m * count_, 0.0);
        sums_.assign(count_, 0.0);
        for (std::size_t j = 0; j < m; ++j)
            for (std::size_t t = 0; t < count_; ++t) {
                extrema_[j].emplace_back(plan.domains(j), plan.permute(j, scenarios[t].table[j]), false);
                sums_[t] += contribution_[j * count_ + t] = extrema_[j][t].at(0, 0);
            }
    }

    void push(std::size_t a, const Walker& w) {
        saved_sums_.insert(saved_sums_.end(), sums_.begin(), sums_.end());
        for (auto j : plan_.touching(a)) {
            const auto depth = w.depth(j), code = w.code(j);
            double* row = &contribution_[j * count_];
            saved_.insert(saved_.end(), row, row + count_);
            for (std::size_t t = 0; t < count_; ++t) {
                const double c = extrema_[j][t].at(depth, code);
                sums_[t] += c - row[t];
                row[t] = c;
            }
        }
    }

    void pop(std::size_t a, const Walker&) {
        const auto& t = plan_.touching(a);
        for (std::size_t k = t.size(); k-- > 0;) {
            std::copy(saved_.end() - static_cast<std::ptrdiff_t>(count_), saved_.end(), &contribution_[t[k] * count_]);
            saved_.resize(saved_.size() - count_);
        }
        std::copy(saved_sums_.end() - static_cast<std::ptrdiff_t>(count_), saved_sums_.end(), sums_.begin());
        saved_sums_.resize(saved_sums_.size() - count_);
    }

    double bound() const { return -*std::max_element(sums_.begin(), sums_.end()); }

    double leaf(const Walker& w) const {
        double worst = -INFINITY;
        for (std::size_t t = 0; t < count_; ++t) {
            double v = 0.0;
            for (std::size_t j = 0; j < extrema_.size(); ++j) v += extrema_[j][t].at(w.depth(j), w.code(j));
            worst = std::max(worst, v);
        }
        return -worst;
    }

private:
    const SearchPlan& plan_;
    std::size_t count_ = 0;
    std::vector<std::vector<PrefixExtrema>> extrema_;
    std::vector<double> contribution_;
    std::vector<double> sums_;
    std::vector<double> saved_;
    std::vector<double> saved_sums_;
};

} // namespace detail

/// Lexicographically smallest feasible outcome (or first catalog item).
inline std::optional<Outcome> first_feasible(const GaiStructure& s, const FeasibilitySpec& feas) {
    if (feas.is_catalog()) {
        if (feas.items().empty()) return std::nullopt;
        return feas.items().front();
    }
    detail::SearchPlan plan(s, feas, true);
    detail::Walker walker(plan);
    const auto n = s.attribute_count();
    std::optional<Outcome> found;
    std::function<bool(std::size_t)> dive = [&](std::size_t a) -> bool {
        if (a == n) {
            found = walker.levels();
            return true;
        }
        for (int v = 0; v < s.schema().domain_size(a); ++v) {
            const bool ok = walker.assign(a, v);
            if (ok && dive(a + 1)) return true;
            walker.unassign(a);
        }
        return false;
    };
    dive(0);
    return found;
}

/// Feasible x' and anchor point maximizing Σ_j (u_j⊤ − u_j⊥) row_j[x'_j].
///
/// Branch and bound along a factor-completing attribute order. The bound
/// replaces each factor's table by its best completion and the anchors by the
/// per-factor weight range, which is admissible because weights are
/// non-negative. When the anchor block is separable that bound is exact at the
/// leaves; otherwise leaves are solved exactly over the anchor polytope. Among
/// values within 1e-12 of the optimum the lexicographically smallest
/// configuration is returned.
inline AdversaryResult maximize_adversary(const GaiStructure& s, const FeasibilitySpec& feas,
                                          const UtilitySpace& space, const FactorTables& row) {
    const auto m = s.factor_count();
    auto exact_value = [&](const Outcome& x, LinearMax* anchors) {
        std::vector<double> weights(m);
        for (std::size_t j = 0; j < m; ++j) weights[j] = row[j][s.local_index(j, x)];
        auto lm = space.maximize_weighted_anchors(weights);
        const double v = lm.value;
        if (anchors) *anchors = std::move(lm);
        return v;
    };

    AdversaryResult result;
    if (feas.is_catalog()) {
        if (feas.items().empty()) throw DomainError("catalog is empty");
        std::vector<double> values;
        values.reserve(feas.items().size());
        for (const auto& item : feas.items()) values.push_back(exact_value(item, nullptr));
        result.nodes = values.size();
        const double best = *std::max_element(values.begin(), values.end());
        const Outcome* pick = nullptr;
        for (std::size_t k = 0; k < values.size(); ++k)
            if (values[k] >= best - detail::search_tolerance && (!pick || lexicographically_less(feas.items()[k], *pick)))
                pick = &feas.items()[k];
        result.config = *pick;
        result.value = exact_value(result.config, &result.anchors);
        return result;
    }

    std::vector<Interval> weight_range(m);
    for (std::size_t j = 0; j < m; ++j) weight_range[j] = space.weight_range(j);
    const bool separable = space.anchors_separable();

    detail::SearchPlan plan(s, feas);
    struct Problem : detail::WeightedTableBound {
        using WeightedTableBound::WeightedTableBound;
        std::function<double(const detail::Walker&)> exact_leaf;
        double leaf(const detail::Walker& w) const { return exact_leaf ? exact_leaf(w) : exact(w); }
    } problem(plan, row, &weight_range);
    if (!separable)
        problem.exact_leaf = [&](const detail::Walker& w) { return exact_value(w.levels(), nullptr); };

    auto best = detail::maximize_lexicographic(plan, problem, result.nodes);
    if (!best) throw DomainError("no feasible configuration");
    result.config = std::move(best->first);
    result.value = exact_value(result.config, &result.anchors);
    return result;
}

/// Feasible x minimizing max_t Σ_j table^t_j[x_j]. Branch and bound with the
/// lower bound max_t Σ_j (min over consistent completions of table^t_j); same
/// tie-break as maximize_adversary.
inline MasterResult minimize_max_scenarios(const GaiStructure& s, const FeasibilitySpec& feas,
                                           const std::vector<Scenario>& scenarios) {
    if (scenarios.empty()) throw Error("minimize_max_scenarios needs at least one scenario");
    auto evaluate = [&](const Outcome& x) {
        double worst = -INFINITY;
        for (const auto& sc : scenarios) worst = std::max(worst, detail::table_sum(s, sc.table, x));
        return worst;
    };

    MasterResult result;
    if (feas.is_catalog()) {
        if (feas.items().empty()) throw DomainError("catalog is empty");
        std::vector<double> values;
        values.reserve(feas.items().size());
        for (const auto& item : feas.items()) values.push_back(evaluate(item));
        result.nodes = values.size();
        const double best = *std::min_element(values.begin(), values.end());
        const Outcome* pick = nullptr;
        for (std::size_t k = 0; k < values.size(); ++k)
            if (values[k] <= best + detail::search_tolerance && (!pick || lexicographically_less(feas.items()[k], *pick)))
                pick = &feas.items()[k];
        result.config = *pick;
        result.value = evaluate(result.config);
        return result;
    }

    detail::SearchPlan plan(s, feas);
    detail::ScenarioBound problem(plan, scenarios);
    auto best = detail::maximize_lexicographic(plan, problem, result.nodes);
    if (!best) throw DomainError("no feasible configuration");
    result.config = std::move(best->first);
    result.value = evaluate(result.config);
    return result;
}

/// Feasible x maximizing Σ_j table_j[x_j] (fixed weights), by branch and bound.
inline AdditiveResult maximize_additive(const GaiStructure& s, const FeasibilitySpec& feas, const FactorTables& tables) {
    AdditiveResult result;
    if (feas.is_catalog()) {
        if (feas.items().empty()) throw DomainError("catalog is empty");
        bool have = false;
        for (const auto& item : feas.items()) {
            const double v = detail::table_sum(s, tables, item);
            if (!have || v > result.value + detail::search_tolerance) result = {item, v}, have = true;
        }
        return result;
    }
    detail::SearchPlan plan(s, feas);
    struct Problem : detail::WeightedTableBound {
        using WeightedTableBound::WeightedTableBound;
        double leaf(const detail::Walker& w) const { return exact(w); }
    } problem(plan, tables, nullptr);
    std::uint64_t nodes = 0;
    auto best = detail::maximize_lexicographic(plan, problem, nodes);
    if (!best) throw DomainError("no feasible configuration");
    result.config = std::move(best->first);
    result.value = detail::table_sum(s, tables, result.config);
    return result;
}

/// Plain enumeration reference paths; same semantics and tie-breaks as above.
namespace reference {

inline void for_each_feasible(const GaiStructure& s, const FeasibilitySpec& feas,
                              const std::function<void(const Outcome&)>& visit) {
    if (feas.is_catalog()) {
        for (const auto& item : feas.items()) visit(item);
        return;
    }
    for_each_outcome(s.schema(), [&](const Outcome& x) {
        if (is_feasible(feas, x)) visit(x);
    });
}

/// Index of the lexicographically smallest outcome whose value is within the
/// tolerance of the best (largest when `maximum`).
inline std::size_t lexicographic_optimum(const std::vector<Outcome>& xs, const std::vector<double>& values,
                                         bool maximum) {
    if (xs.empty()) throw DomainError("no feasible configuration");
    const double best = maximum ? *std::max_element(values.begin(), values.end())
                                : *std::min_element(values.begin(), values.end());
    std::size_t pick = xs.size();
    for (std::size_t k = 0; k < xs.size(); ++k) {
        const bool near = maximum ? values[k] >= best - detail::search_tolerance
                                  : values[k] <= best + detail::search_tolerance;
        if (near && (pick == xs.size() || lexicographically_less(xs[k], xs[pick]))) pick = k;
    }
    return pick;
}

inline AdversaryResult maximize_adversary(const GaiStructure& s, const FeasibilitySpec& feas,
                                          const UtilitySpace& space, const FactorTables& row) {
    std::vector<Outcome> xs;
    std::vector<double> values;
    std::vector<LinearMax> anchors;
    for_each_feasible(s, feas, [&](const Outcome& x) {
        std::vector<double> weights(s.factor_count());
        for (std::size_t j = 0; j < s.factor_count(); ++j) weights[j] = row[j][s.local_index(j, x)];
        auto lm = space.maximize_weighted_anchors(weights);
        xs.push_back(x);
        values.push_back(lm.value);
        anchors.push_back(std::move(lm));
    });
    const auto k = lexicographic_optimum(xs, values, true);
    AdversaryResult result;
    result.nodes = xs.size();
    result.config = xs[k];
    result.value = values[k];
    result.anchors = anchors[k];
    return result;
}

inline MasterResult minimize_max_scenarios(const GaiStructure& s, const FeasibilitySpec& feas,
                                           const std::vector<Scenario>& scenarios) {
    std::vector<Outcome> xs;
    std::vector<double> values;
    for_each_feasible(s, feas, [&](const Outcome& x) {
        double v = -INFINITY;
        for (const auto& sc : scenarios) v = std::max(v, detail::table_sum(s, sc.table, x));
        xs.push_back(x);
        values.push_back(v);
    });
    const auto k = lexicographic_optimum(xs, values, false);
    MasterResult result;
    result.nodes = xs.size();
    result.config = xs[k];
    result.value = values[k];
    return result;
}

} // namespace reference

} // namespace gaimr
