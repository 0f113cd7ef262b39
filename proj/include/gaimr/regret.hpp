#pragma once

#include "gaimr/config_search.hpp"
#include "gaimr/errors.hpp"
#include "gaimr/gai_model.hpp"
#include "gaimr/utility_space.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <mutex>
#include <queue>
#include <unordered_map>
#include <utility>
#include <vector>

namespace gaimr {

/// One assignment of every utility parameter.
struct UtilityPoint {
    std::vector<std::vector<double>> lvf;
    std::vector<AnchorPair> anchors;
};

struct PairwiseRegret {
    double value = 0.0;
    UtilityPoint params;
};

struct MaxRegret {
    double value = 0.0;
    Outcome witness;
    UtilityPoint params;
};

/// One round of constraint generation: the incumbent, its adversary and the
/// anchor point that became the new master row.
struct GenerationStep {
    Outcome incumbent;
    Outcome adversary;
    std::vector<AnchorPair> anchors;
    double master_value = 0.0;
    double max_regret = 0.0;
};

struct MinimaxResult {
    Outcome x_star;
    Outcome witness;
    double value = 0.0;
    UtilityPoint params;
    std::vector<GenerationStep> trace;
    /// Pairwise regret evaluations (database path) or search nodes (configuration path).
    std::uint64_t evaluations = 0;
    std::size_t adversaries = 0;
};

class IterationLimitError : public Error {
public:
    IterationLimitError(std::string what, MinimaxResult best) : Error(std::move(what)), best_(std::move(best)) {}
    const MinimaxResult& best() const noexcept { return best_; }

private:
    MinimaxResult best_;
};

struct RegretOptions {
    /// Constraint generation stops once max regret exceeds the master value by no more than this.
    double epsilon = 1e-9;
    std::size_t max_iterations = 1000;
    /// Catalog search: add the first item that beats the candidate instead of
    /// scanning the candidate's whole row for the most violating one.
    bool first_violator = true;
};

/// Dense objective C_{to} − C_{from} over factor j's local values.
inline std::vector<double> regret_objective(const GaiStructure& s, std::size_t j, std::size_t from, std::size_t to) {
    std::vector<double> c(s.local_size(j), 0.0);
    for (const auto& t : s.coefficients(j, to)) c[t.index] += t.coefficient;
    for (const auto& t : s.coefficients(j, from)) c[t.index] -= t.coefficient;
    return c;
}

/// r̄_j[from, to]: max over factor j's polytope of Σ_i (C^i_to − C^i_from) v_j^i.
inline double local_regret(const UtilitySpace& space, std::size_t j, std::size_t from, std::size_t to) {
    if (from == to) return 0.0;
    const auto& s = *space.structure();
    const auto& blk = space.lvf_block(j);
    if (!blk.has_comparisons()) {
        // Box only: every coefficient independently takes its best endpoint.
        const auto& box = blk.box();
        auto a = s.coefficients(j, to);
        auto b = s.coefficients(j, from);
        double sum = 0.0;
        std::size_t p = 0, q = 0;
        auto add = [&](std::size_t i, double c) { sum += c > 0.0 ? c * box[i].hi : c * box[i].lo; };
        while (p < a.size() || q < b.size()) {
            if (q == b.size() || (p < a.size() && a[p].index < b[q].index)) {
                add(a[p].index, a[p].coefficient);
                ++p;
            } else if (p == a.size() || b[q].index < a[p].index) {
                add(b[q].index, -b[q].coefficient);
                ++q;
            } else {
                add(a[p].index, a[p].coefficient - b[q].coefficient);
                ++p, ++q;
            }
        }
        return sum;
    }
    return blk.maximize(regret_objective(s, j, from, to)).value;
}

/// Lazily filled r̄_j tables, invalidated per factor when the space's block
/// stamp changes. Factors with at most `dense_limit` configurations are
/// materialized in full on first touch; larger ones cache individual entries.
class LocalRegretTables {
public:
    explicit LocalRegretTables(std::size_t dense_limit = 64) : dense_limit_(dense_limit) {}

    LocalRegretTables(const LocalRegretTables& other) : dense_limit_(other.dense_limit_) {
        std::lock_guard lock(other.mutex_);
        tables_ = other.tables_;
    }

    LocalRegretTables& operator=(const LocalRegretTables& other) {
        if (this != &other) {
            std::scoped_lock lock(mutex_, other.mutex_);
            dense_limit_ = other.dense_limit_;
            tables_ = other.tables_;
        }
        return *this;
    }

    double entry(const UtilitySpace& space, std::size_t j, std::size_t from, std::size_t to) {
        std::lock_guard lock(mutex_);
        return entry_locked(space, j, from, to);
    }

    /// to ↦ r̄_j[from, to]
    std::vector<double> row(const UtilitySpace& space, std::size_t j, std::size_t from) {
        std::lock_guard lock(mutex_);
        const auto n = space.structure()->local_size(j);
        std::vector<double> out(n);
        for (std::size_t to = 0; to < n; ++to) out[to] = entry_locked(space, j, from, to);
        return out;
    }

    /// from ↦ r̄_j[from, to]
    std::vector<double> column(const UtilitySpace& space, std::size_t j, std::size_t to) {
        std::lock_guard lock(mutex_);
        const auto n = space.structure()->local_size(j);
        std::vector<double> out(n);
        for (std::size_t from = 0; from < n; ++from) out[from] = entry_locked(space, j, from, to);
        return out;
    }

    /// Number of local regrets actually solved since construction.
    std::uint64_t solved() const {
        std::lock_guard lock(mutex_);
        return solved_;
    }

private:
    struct Table {
        std::uint64_t stamp = 0;
        std::vector<double> dense;
        std::vector<bool> known;
        std::unordered_map<std::uint64_t, double> sparse;
    };

    double entry_locked(const UtilitySpace& space, std::size_t j, std::size_t from, std::size_t to) {
        if (tables_.size() != space.factor_count()) tables_.assign(space.factor_count(), Table{});
        auto& t = tables_[j];
        const auto stamp = space.version(BlockId::local(j));
        const auto n = space.structure()->local_size(j);
        if (t.stamp != stamp) {
            t = Table{};
            t.stamp = stamp;
            if (n <= dense_limit_) {
                t.dense.resize(n * n);
                for (std::size_t a = 0; a < n; ++a)
                    for (std::size_t b = 0; b < n; ++b) t.dense[a * n + b] = local_regret(space, j, a, b);
                solved_ += n * n;
            }
        }
        if (!t.dense.empty()) return t.dense[from * n + to];
        const std::uint64_t key = static_cast<std::uint64_t>(from) * n + to;
        if (auto it = t.sparse.find(key); it != t.sparse.end()) return it->second;
        const double v = local_regret(space, j, from, to);
        ++solved_;
        t.sparse.emplace(key, v);
        return v;
    }

    std::size_t dense_limit_;
    std::vector<Table> tables_;
    std::uint64_t solved_ = 0;
    mutable std::mutex mutex_;
};

/// Regret computations over one utility space snapshot.
class RegretEngine {
public:
    RegretEngine(const UtilitySpace& space, LocalRegretTables& tables, RegretOptions options = {})
        : space_(space), tables_(tables), options_(options) {}

    const UtilitySpace& space() const noexcept { return space_; }

    double local_regret(std::size_t j, std::size_t from, std::size_t to) const {
        return tables_.entry(space_, j, from, to);
    }

    /// R(x, x') with the maximizing anchor and local-value assignment.
    PairwiseRegret pairwise_regret(const Outcome& x, const Outcome& other) const {
        const auto& s = *space_.structure();
        const auto m = s.factor_count();
        std::vector<double> weights(m);
        for (std::size_t j = 0; j < m; ++j)
            weights[j] = local_regret(j, s.local_index(j, x), s.local_index(j, other));
        auto anchors = space_.maximize_weighted_anchors(weights);
        PairwiseRegret out;
        out.value = anchors.value;
        out.params = assemble(x, other, anchors.point);
        return out;
    }

    /// MR(x) over the feasible set, with its witness.
    MaxRegret max_regret(const Outcome& x, const FeasibilitySpec& feas) const {
        const auto adv = maximize_adversary(*space_.structure(), feas, space_, regret_row(x));
        MaxRegret out;
        out.value = adv.value;
        out.witness = adv.config;
        out.params = assemble(x, adv.config, adv.anchors.point);
        return out;
    }

    /// Per factor, to ↦ r̄_j[x_j, to].
    FactorTables regret_row(const Outcome& x) const {
        const auto& s = *space_.structure();
        FactorTables row(s.factor_count());
        for (std::size_t j = 0; j < s.factor_count(); ++j) row[j] = tables_.row(space_, j, s.local_index(j, x));
        return row;
    }

    /// Minimax regret by constraint generation: the master picks the
    /// configuration minimizing the worst generated scenario, the max-regret
    /// search returns the most violated scenario, until no scenario beats the
    /// master value by more than epsilon.
    MinimaxResult minimax_regret(const FeasibilitySpec& feas) const {
        const auto& s = *space_.structure();
        const auto m = s.factor_count();
        auto start = first_feasible(s, feas);
        if (!start) throw DomainError("no feasible configuration");

        Outcome x = *start;
        double master_value = -std::numeric_limits<double>::infinity();
        std::vector<Scenario> scenarios;
        MinimaxResult best;
        bool have_best = false;

        for (std::size_t iter = 0; iter < options_.max_iterations; ++iter) {
            const auto adv = maximize_adversary(s, feas, space_, regret_row(x));

            GenerationStep step;
            step.incumbent = x;
            step.adversary = adv.config;
            step.anchors = anchor_pairs(adv.anchors.point);
            step.master_value = master_value;
            step.max_regret = adv.value;

            if (!have_best || adv.value < best.value) {
                best.x_star = x;
                best.witness = adv.config;
                best.value = adv.value;
                best.params = assemble(x, adv.config, adv.anchors.point);
                have_best = true;
            }
            best.trace.push_back(step);
            best.evaluations += adv.nodes;

            if (adv.value <= master_value + options_.epsilon) return best;

            Scenario sc;
            sc.adversary = adv.config;
            sc.weights.resize(m);
            sc.table.resize(m);
            for (std::size_t j = 0; j < m; ++j) {
                sc.weights[j] = step.anchors[j].weight();
                sc.table[j] = tables_.column(space_, j, s.local_index(j, adv.config));
                for (auto& v : sc.table[j]) v *= sc.weights[j];
            }
            scenarios.push_back(std::move(sc));
            best.adversaries = scenarios.size();

            const auto master = minimize_max_scenarios(s, feas, scenarios);
            best.evaluations += master.nodes;
            x = master.config;
            master_value = master.value;
        }
        throw IterationLimitError("constraint generation hit the iteration cap", best);
    }

    /// Max regret of `item` against every catalog entry.
    MaxRegret db_max_regret(const Outcome& item, const std::vector<Outcome>& catalog) const {
        if (catalog.empty()) throw DomainError("catalog is empty");
        return max_regret(item, FeasibilitySpec::catalog(catalog));
    }

    /// Minimax over a catalog by adversary-set generation. Candidates are found
    /// lazily: each item keeps a lower bound (its max over the adversaries
    /// evaluated so far) and is only brought up to date when it reaches the
    /// front of the queue.
    MinimaxResult db_minimax(const std::vector<Outcome>& catalog) const {
        if (catalog.empty()) throw DomainError("catalog is empty");
        const std::size_t n = catalog.size();

        std::vector<std::size_t> order(n);
        for (std::size_t i = 0; i < n; ++i) order[i] = i;
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return lexicographically_less(catalog[a], catalog[b]); });
        std::vector<std::size_t> rank(n);
        for (std::size_t r = 0; r < n; ++r) rank[order[r]] = r;

        MinimaxResult result;
        std::map<std::pair<std::size_t, std::size_t>, double> memo;
        auto pr = [&](std::size_t a, std::size_t b) {
            auto [it, fresh] = memo.try_emplace({a, b}, 0.0);
            if (fresh) {
                it->second = a == b ? 0.0 : pairwise_value(catalog[a], catalog[b]);
                ++result.evaluations;
            }
            return it->second;
        };

        std::vector<std::size_t> adversaries{order.front()};
        std::vector<double> lower(n, -std::numeric_limits<double>::infinity());
        std::vector<std::size_t> seen(n, 0);

        for (std::size_t iter = 0; iter < std::max<std::size_t>(options_.max_iterations, n + 1); ++iter) {
            using Entry = std::pair<double, std::size_t>; // (lower bound, lexicographic rank)
            std::priority_queue<Entry, std::vector<Entry>, std::greater<>> queue;
            for (std::size_t i = 0; i < n; ++i) queue.emplace(lower[i], rank[i]);
            std::size_t candidate = n;
            while (!queue.empty()) {
                const auto [bound, r] = queue.top();
                queue.pop();
                const auto i = order[r];
                if (seen[i] == adversaries.size()) {
                    candidate = i;
                    break;
                }
                for (; seen[i] < adversaries.size(); ++seen[i]) lower[i] = std::max(lower[i], pr(i, adversaries[seen[i]]));
                queue.emplace(lower[i], r);
            }

            const double candidate_value = lower[candidate];
            double worst = -std::numeric_limits<double>::infinity();
            std::size_t witness = candidate;
            for (auto y : order) {
                const double v = pr(candidate, y);
                if (v > worst + detail::search_tolerance) worst = v, witness = y;
                if (options_.first_violator && worst > candidate_value + options_.epsilon) break;
            }

            GenerationStep step;
            step.incumbent = catalog[candidate];
            step.adversary = catalog[witness];
            step.master_value = candidate_value;
            step.max_regret = worst;
            result.trace.push_back(std::move(step));

            if (worst <= candidate_value + options_.epsilon) {
                const auto full = pairwise_regret(catalog[candidate], catalog[witness]);
                result.x_star = catalog[candidate];
                result.witness = catalog[witness];
                result.value = full.value;
                result.params = full.params;
                result.adversaries = adversaries.size();
                return result;
            }
            adversaries.push_back(witness);
        }
        throw IterationLimitError("adversary generation did not converge", result);
    }

private:
    double pairwise_value(const Outcome& x, const Outcome& other) const {
        const auto& s = *space_.structure();
        std::vector<double> weights(s.factor_count());
        for (std::size_t j = 0; j < s.factor_count(); ++j)
            weights[j] = local_regret(j, s.local_index(j, x), s.local_index(j, other));
        return space_.maximize_weighted_anchors(weights).value;
    }

    static std::vector<AnchorPair> anchor_pairs(const std::vector<double>& point) {
        std::vector<AnchorPair> out(point.size() / 2);
        for (std::size_t j = 0; j < out.size(); ++j) out[j] = {point[2 * j], point[2 * j + 1]};
        return out;
    }

    UtilityPoint assemble(const Outcome& x, const Outcome& other, const std::vector<double>& anchor_point) const {
        const auto& s = *space_.structure();
        UtilityPoint p;
        p.anchors = anchor_pairs(anchor_point);
        p.lvf.resize(s.factor_count());
        for (std::size_t j = 0; j < s.factor_count(); ++j) {
            const auto objective = regret_objective(s, j, s.local_index(j, x), s.local_index(j, other));
            p.lvf[j] = space_.lvf_block(j).maximize(objective).point;
        }
        return p;
    }

    const UtilitySpace& space_;
    LocalRegretTables& tables_;
    RegretOptions options_;
};

/// u(x') − u(x) at a fixed parameter assignment.
inline double regret_at(const GaiStructure& s, const UtilityPoint& p, const Outcome& x, const Outcome& other) {
    double total = 0.0;
    for (std::size_t j = 0; j < s.factor_count(); ++j) {
        double local = 0.0;
        for (const auto& t : s.coefficients(j, s.local_index(j, other))) local += t.coefficient * p.lvf[j][t.index];
        for (const auto& t : s.coefficients(j, s.local_index(j, x))) local -= t.coefficient * p.lvf[j][t.index];
        total += p.anchors[j].weight() * local;
    }
    return total;
}

} // namespace gaimr
