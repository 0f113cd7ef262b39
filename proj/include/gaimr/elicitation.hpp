#pragma once

#include "gaimr/config_search.hpp"
#include "gaimr/errors.hpp"
#include "gaimr/regret.hpp"
#include "gaimr/utility_space.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace gaimr {

enum class QueryType { LocalBound, LocalComparison, AnchorBound, AnchorComparison };

inline std::string to_string(QueryType t) {
    switch (t) {
    case QueryType::LocalBound: return "LB";
    case QueryType::LocalComparison: return "LC";
    case QueryType::AnchorBound: return "AB";
    case QueryType::AnchorComparison: return "AC";
    }
    return "?";
}

inline QueryType parse_query_type(const std::string& s) {
    if (s == "LB") return QueryType::LocalBound;
    if (s == "LC") return QueryType::LocalComparison;
    if (s == "AB") return QueryType::AnchorBound;
    if (s == "AC") return QueryType::AnchorComparison;
    throw ParseError("unknown query type '" + s + "'");
}

/// One yes/no question.
///   LB: v[factor][index] >= threshold?
///   LC: v[factor][index] >= v[factor][other]?
///   AB: top[factor] (or bottom, when !top) >= threshold?
///   AC: top[factor] >= bottom[other]?
struct Query {
    QueryType type = QueryType::LocalBound;
    std::size_t factor = 0;
    std::size_t index = 0;
    std::size_t other = 0;
    bool top = true;
    double threshold = 0.0;

    friend bool operator==(const Query&, const Query&) = default;
};

/// Constraint asserted by a response. "No" answers store the complement as a
/// non-strict inequality.
inline Constraint implied_constraint(const Query& q, bool yes) {
    switch (q.type) {
    case QueryType::LocalBound:
        return BoundConstraint{ParamRef::local(q.factor, q.index), yes, q.threshold};
    case QueryType::LocalComparison: {
        const auto a = ParamRef::local(q.factor, q.index), b = ParamRef::local(q.factor, q.other);
        return yes ? CompareConstraint{a, b} : CompareConstraint{b, a};
    }
    case QueryType::AnchorBound:
        return BoundConstraint{q.top ? ParamRef::top(q.factor) : ParamRef::bottom(q.factor), yes, q.threshold};
    case QueryType::AnchorComparison: {
        const auto a = ParamRef::top(q.factor), b = ParamRef::bottom(q.other);
        return yes ? CompareConstraint{a, b} : CompareConstraint{b, a};
    }
    }
    throw Error("unknown query type");
}

inline void validate_query(const GaiStructure& s, const Query& q) {
    const auto m = s.factor_count();
    if (q.factor >= m) throw Error("query names unknown factor " + std::to_string(q.factor));
    switch (q.type) {
    case QueryType::LocalBound:
        if (q.index >= s.local_size(q.factor)) throw Error("LB query index out of range");
        if (!(q.threshold >= 0.0 && q.threshold <= 1.0)) throw Error("LB threshold must lie in [0,1]");
        break;
    case QueryType::LocalComparison:
        if (q.index >= s.local_size(q.factor) || q.other >= s.local_size(q.factor))
            throw Error("LC query index out of range");
        if (q.index == q.other) throw Error("LC query compares a parameter with itself");
        break;
    case QueryType::AnchorBound:
        if (!std::isfinite(q.threshold)) throw Error("AB threshold must be finite");
        break;
    case QueryType::AnchorComparison:
        if (q.other >= m) throw Error("AC query names unknown factor " + std::to_string(q.other));
        break;
    }
}

namespace detail {

inline std::string describe_levels(const GaiStructure& s, const AttributeSet& attrs, const Outcome& x) {
    std::string out;
    for (auto a : attrs) {
        if (!out.empty()) out += ", ";
        out += s.schema().attributes[a].name + "=" + s.schema().attributes[a].levels[static_cast<std::size_t>(x[a])];
    }
    return "(" + out + ")";
}

inline std::string describe_full(const GaiStructure& s, const Outcome& x) {
    AttributeSet all(s.attribute_count());
    for (std::size_t a = 0; a < all.size(); ++a) all[a] = a;
    return describe_levels(s, all, x);
}

inline std::string describe_local(const GaiStructure& s, std::size_t j, std::size_t index) {
    return describe_levels(s, s.factor(j).attributes, s.expand(j, index));
}

inline std::string conditioning_clause(const GaiStructure& s, std::size_t j) {
    const auto& k = s.conditioning_set(j);
    if (k.empty()) return "";
    std::string names;
    for (auto a : k) names += (names.empty() ? "" : ", ") + s.schema().attributes[a].name;
    return "Assume that the attributes in K_" + std::to_string(j + 1) + " {" + names +
           "} are fixed at reference levels. ";
}

inline std::string number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

/// Full outcome with factor j at a local configuration, everything else at reference.
inline Outcome anchor_outcome(const GaiStructure& s, std::size_t j, bool top) {
    return s.expand(j, top ? s.factor(j).top : s.factor(j).bottom);
}

} // namespace detail

/// Natural-language form of a query with concrete outcomes substituted.
inline std::string render(const GaiStructure& s, const Query& q) {
    using namespace detail;
    switch (q.type) {
    case QueryType::LocalBound:
        return conditioning_clause(s, q.factor) + "Would you prefer the partial outcome " +
               describe_local(s, q.factor, q.index) + " to a lottery <" +
               describe_local(s, q.factor, s.factor(q.factor).top) + ", " + number(q.threshold) + "; " +
               describe_local(s, q.factor, s.factor(q.factor).bottom) + ", " + number(1.0 - q.threshold) +
               ">, assuming that the remaining attributes are fixed at same levels (ceteris paribus)?";
    case QueryType::LocalComparison:
        return conditioning_clause(s, q.factor) + "Would you prefer partial outcome " +
               describe_local(s, q.factor, q.index) + " to partial outcome " + describe_local(s, q.factor, q.other) +
               ", ceteris paribus?";
    case QueryType::AnchorBound:
        return "Consider a full outcome " + describe_full(s, anchor_outcome(s, q.factor, q.top)) +
               ", where attributes in factor " + std::to_string(q.factor + 1) + " are set to their " +
               (q.top ? "best" : "worst") +
               " values, and other attributes are fixed at reference levels. Do you prefer it to a lottery <" +
               describe_full(s, s.schema().best) + ", " + number(q.threshold) + "; " +
               describe_full(s, s.schema().worst) + ", " + number(1.0 - q.threshold) + ">?";
    case QueryType::AnchorComparison:
        return "Do you prefer global outcome " + describe_full(s, anchor_outcome(s, q.factor, true)) + " to " +
               describe_full(s, anchor_outcome(s, q.other, false)) + "?";
    }
    return "";
}

struct ScoredQuery {
    Query query;
    double score = 0.0;
};

/// C_j = C_{x^w_j} − C_{x*_j} for every factor, dense.
inline std::vector<std::vector<double>> solution_coefficients(const GaiStructure& s, const MinimaxResult& current) {
    std::vector<std::vector<double>> c(s.factor_count());
    for (std::size_t j = 0; j < s.factor_count(); ++j)
        c[j] = regret_objective(s, j, s.local_index(j, current.x_star), s.local_index(j, current.witness));
    return c;
}

inline double solution_weight(const MinimaxResult& current, std::size_t j) {
    return current.params.anchors.at(j).weight();
}

/// S(v_j^i) = λ̂_j |C_j^i| gap / 2, asking at the gap midpoint.
inline ScoredQuery score_local_bound(const UtilitySpace& space, const MinimaxResult& current,
                                     const std::vector<std::vector<double>>& c, std::size_t j, std::size_t i) {
    const auto box = space.interval(ParamRef::local(j, i));
    ScoredQuery out;
    out.query = {QueryType::LocalBound, j, i, 0, true, box.midpoint()};
    out.score = solution_weight(current, j) * std::abs(c[j][i]) * box.width() / 2.0;
    return out;
}

/// Pair passes the three eligibility filters for comparison scoring.
inline bool comparison_eligible(const UtilitySpace& space, const std::vector<std::vector<double>>& c, std::size_t j,
                                std::size_t i, std::size_t k) {
    if (i == k || c[j][i] == 0.0 || c[j][k] == 0.0) return false;
    const auto a = space.interval(ParamRef::local(j, i)), b = space.interval(ParamRef::local(j, k));
    if (!(a.hi >= b.lo && b.hi >= a.lo)) return false;
    return space.known_relation(ParamRef::local(j, i), ParamRef::local(j, k)) == Relation::Unknown;
}

/// λ̂_j · r with r = C_i v̂_i + C_k v̂_k − max over the two diagonal
/// intersections of the projected box; clamped at 0.
inline ScoredQuery score_local_comparison(const UtilitySpace& space, const MinimaxResult& current,
                                          const std::vector<std::vector<double>>& c, std::size_t j, std::size_t i,
                                          std::size_t k) {
    const auto a = space.interval(ParamRef::local(j, i)), b = space.interval(ParamRef::local(j, k));
    const double t1 = std::max(a.lo, b.lo), t2 = std::min(a.hi, b.hi);
    const double ci = c[j][i], ck = c[j][k];
    const auto& v = current.params.lvf.at(j);
    const double r = ci * v[i] + ck * v[k] - std::max((ci + ck) * t1, (ci + ck) * t2);
    ScoredQuery out;
    out.query = {QueryType::LocalComparison, j, i, k, true, 0.0};
    out.score = std::max(0.0, solution_weight(current, j) * r);
    return out;
}

/// |Σ_i C_j^i v̂_j^i| · gap(anchor) / 2, asking at the anchor-box midpoint.
inline ScoredQuery score_anchor_bound(const UtilitySpace& space, const MinimaxResult& current,
                                      const std::vector<std::vector<double>>& c, std::size_t j, bool top) {
    double local = 0.0;
    const auto& v = current.params.lvf.at(j);
    for (std::size_t i = 0; i < c[j].size(); ++i) local += c[j][i] * v[i];
    const auto box = space.interval(top ? ParamRef::top(j) : ParamRef::bottom(j));
    ScoredQuery out;
    out.query = {QueryType::AnchorBound, j, 0, 0, top, box.midpoint()};
    out.score = std::abs(local) * box.width() / 2.0;
    return out;
}

enum class Strategy { LC, LC_LB, LB, LC_PLUS_LB, AB_PLUS_LB, AB_PLUS_LC_PLUS_LB, Random };

inline std::string to_string(Strategy s) {
    switch (s) {
    case Strategy::LC: return "LC";
    case Strategy::LC_LB: return "LC(LB)";
    case Strategy::LB: return "LB";
    case Strategy::LC_PLUS_LB: return "LC+LB";
    case Strategy::AB_PLUS_LB: return "AB+LB";
    case Strategy::AB_PLUS_LC_PLUS_LB: return "AB+LC+LB";
    case Strategy::Random: return "random";
    }
    return "?";
}

inline Strategy parse_strategy(const std::string& s) {
    for (auto v : {Strategy::LC, Strategy::LC_LB, Strategy::LB, Strategy::LC_PLUS_LB, Strategy::AB_PLUS_LB,
                   Strategy::AB_PLUS_LC_PLUS_LB, Strategy::Random})
        if (to_string(v) == s) return v;
    throw ParseError("unknown strategy '" + s + "'");
}

inline const std::vector<Strategy>& scoring_strategies() {
    static const std::vector<Strategy> all{Strategy::LC,         Strategy::LC_LB,      Strategy::LB,
                                           Strategy::LC_PLUS_LB, Strategy::AB_PLUS_LB, Strategy::AB_PLUS_LC_PLUS_LB};
    return all;
}

/// Optional per-type multipliers applied to scores before comparison.
struct CostWeights {
    double lb = 1.0;
    double lc = 1.0;
    double ab = 1.0;
};

namespace detail {

inline int type_rank(QueryType t) {
    switch (t) {
    case QueryType::LocalBound: return 0;
    case QueryType::LocalComparison: return 1;
    case QueryType::AnchorBound: return 2;
    case QueryType::AnchorComparison: return 3;
    }
    return 4;
}

/// Higher score first, then factor, parameter index, second index, type, top before bottom.
inline bool better(const ScoredQuery& a, const ScoredQuery& b) {
    if (a.score != b.score) return a.score > b.score;
    const auto& p = a.query;
    const auto& q = b.query;
    if (p.factor != q.factor) return p.factor < q.factor;
    if (p.index != q.index) return p.index < q.index;
    if (p.other != q.other) return p.other < q.other;
    if (p.type != q.type) return type_rank(p.type) < type_rank(q.type);
    return p.top && !q.top;
}

} // namespace detail

/// Scored candidates of the requested types; zero scores are dropped.
struct CandidateSet {
    std::vector<ScoredQuery> lb, lc, ab;
};

inline CandidateSet score_candidates(const UtilitySpace& space, const MinimaxResult& current, bool want_lb,
                                     bool want_lc, bool want_ab, const CostWeights& weights = {}) {
    const auto& s = *space.structure();
    const auto c = solution_coefficients(s, current);
    CandidateSet out;
    for (std::size_t j = 0; j < s.factor_count(); ++j) {
        std::vector<std::size_t> nonzero;
        for (std::size_t i = 0; i < c[j].size(); ++i)
            if (c[j][i] != 0.0) nonzero.push_back(i);
        if (want_lb)
            for (auto i : nonzero) {
                auto q = score_local_bound(space, current, c, j, i);
                q.score *= weights.lb;
                if (q.score > 0.0) out.lb.push_back(q);
            }
        if (want_lc)
            for (std::size_t p = 0; p < nonzero.size(); ++p)
                for (std::size_t r = p + 1; r < nonzero.size(); ++r) {
                    if (!comparison_eligible(space, c, j, nonzero[p], nonzero[r])) continue;
                    auto q = score_local_comparison(space, current, c, j, nonzero[p], nonzero[r]);
                    q.score *= weights.lc;
                    if (q.score > 0.0) out.lc.push_back(q);
                }
        if (want_ab)
            for (bool top : {true, false}) {
                auto q = score_anchor_bound(space, current, c, j, top);
                q.score *= weights.ab;
                if (q.score > 0.0) out.ab.push_back(q);
            }
    }
    return out;
}

inline std::optional<ScoredQuery> best_of(std::initializer_list<const std::vector<ScoredQuery>*> lists) {
    std::optional<ScoredQuery> best;
    for (const auto* list : lists)
        for (const auto& q : *list)
            if (!best || detail::better(q, *best)) best = q;
    return best;
}

/// Every comparison pair (i < k) whose relation is not yet known.
inline std::vector<Query> unknown_comparisons(const UtilitySpace& space) {
    const auto& s = *space.structure();
    std::vector<Query> out;
    for (std::size_t j = 0; j < s.factor_count(); ++j)
        for (std::size_t i = 0; i < s.local_size(j); ++i)
            for (std::size_t k = i + 1; k < s.local_size(j); ++k)
                if (space.known_relation(ParamRef::local(j, i), ParamRef::local(j, k)) == Relation::Unknown)
                    out.push_back({QueryType::LocalComparison, j, i, k, true, 0.0});
    return out;
}

/// Every bound, comparison and anchor-bound query that could still change the space.
inline std::vector<Query> open_queries(const UtilitySpace& space) {
    const auto& s = *space.structure();
    std::vector<Query> out;
    for (std::size_t j = 0; j < s.factor_count(); ++j)
        for (std::size_t i = 0; i < s.local_size(j); ++i) {
            const auto box = space.interval(ParamRef::local(j, i));
            if (box.width() > 0.0) out.push_back({QueryType::LocalBound, j, i, 0, true, box.midpoint()});
        }
    auto lc = unknown_comparisons(space);
    out.insert(out.end(), lc.begin(), lc.end());
    for (std::size_t j = 0; j < s.factor_count(); ++j)
        for (bool top : {true, false}) {
            const auto box = space.interval(top ? ParamRef::top(j) : ParamRef::bottom(j));
            if (box.width() > 0.0) out.push_back({QueryType::AnchorBound, j, 0, 0, top, box.midpoint()});
        }
    return out;
}

/// Next query under `strategy`, or nothing when the strategy has no useful
/// question left. `rng` feeds the LC fallback and the random baseline.
inline std::optional<Query> select_query(const UtilitySpace& space, const MinimaxResult& current, Strategy strategy,
                                         std::mt19937_64& rng, const CostWeights& weights = {}) {
    auto pick = [&](const std::vector<Query>& pool) -> std::optional<Query> {
        if (pool.empty()) return std::nullopt;
        return pool[std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(rng)];
    };
    auto unwrap = [](const std::optional<ScoredQuery>& q) -> std::optional<Query> {
        if (!q) return std::nullopt;
        return q->query;
    };

    switch (strategy) {
    case Strategy::LC: {
        auto cs = score_candidates(space, current, false, true, false, weights);
        if (auto q = best_of({&cs.lc})) return q->query;
        return pick(unknown_comparisons(space));
    }
    case Strategy::LC_LB: {
        auto cs = score_candidates(space, current, true, true, false, weights);
        if (auto q = best_of({&cs.lc})) return q->query;
        return unwrap(best_of({&cs.lb}));
    }
    case Strategy::LB: {
        auto cs = score_candidates(space, current, true, false, false, weights);
        return unwrap(best_of({&cs.lb}));
    }
    case Strategy::LC_PLUS_LB: {
        auto cs = score_candidates(space, current, true, true, false, weights);
        return unwrap(best_of({&cs.lb, &cs.lc}));
    }
    case Strategy::AB_PLUS_LB: {
        auto cs = score_candidates(space, current, true, false, true, weights);
        return unwrap(best_of({&cs.lb, &cs.ab}));
    }
    case Strategy::AB_PLUS_LC_PLUS_LB: {
        auto cs = score_candidates(space, current, true, true, true, weights);
        return unwrap(best_of({&cs.lb, &cs.lc, &cs.ab}));
    }
    case Strategy::Random:
        return pick(open_queries(space));
    }
    return std::nullopt;
}

struct Termination {
    /// Stop once MMR is at or below this (raw utility units).
    double regret_threshold = 0.0;
    std::size_t max_queries = 100;
};

struct HistoryEntry {
    Query query;
    bool yes = false;
};

/// One elicitation session: the current space, its minimax solution, and the
/// answered queries. The RNG for step k is derived from (seed, k), so replaying
/// the history reproduces the session exactly.
class Session {
public:
    Session(UtilitySpace space, FeasibilitySpec feasibility, Strategy strategy, std::uint64_t seed = 0,
            RegretOptions options = {}, CostWeights weights = {})
        : space_(std::move(space)), feasibility_(std::move(feasibility)), strategy_(strategy), seed_(seed),
          options_(options), weights_(weights) {
        feasibility_.validate(space_.structure()->schema());
        current_ = solve(space_);
        trace_.push_back(current_.value);
    }

    const UtilitySpace& space() const noexcept { return space_; }
    const FeasibilitySpec& feasibility() const noexcept { return feasibility_; }
    const MinimaxResult& current() const noexcept { return current_; }
    Strategy strategy() const noexcept { return strategy_; }
    std::uint64_t seed() const noexcept { return seed_; }
    const std::vector<HistoryEntry>& history() const noexcept { return history_; }
    /// MMR after 0, 1, 2, ... answered queries.
    const std::vector<double>& mmr_trace() const noexcept { return trace_; }
    std::size_t query_count() const noexcept { return history_.size(); }

    /// Query the strategy proposes now; stable until the next answer.
    std::optional<Query> next_query() {
        if (!pending_ready_) {
            std::mt19937_64 rng(step_seed(seed_, history_.size()));
            pending_ = select_query(space_, current_, strategy_, rng, weights_);
            pending_ready_ = true;
        }
        return pending_;
    }

    /// Asserts the response and re-solves. Throws InconsistentConstraintError
    /// (session unchanged) when the answer contradicts earlier ones.
    void apply(const Query& q, bool yes) {
        validate_query(*space_.structure(), q);
        UtilitySpace next = space_;
        next.assert_constraint(implied_constraint(q, yes));
        auto result = solve(next);
        space_ = std::move(next);
        current_ = std::move(result);
        history_.push_back({q, yes});
        trace_.push_back(current_.value);
        pending_ready_ = false;
        pending_.reset();
    }

    bool done(const Termination& t) {
        return current_.value <= t.regret_threshold || history_.size() >= t.max_queries || !next_query();
    }

    static std::uint64_t step_seed(std::uint64_t seed, std::size_t step) {
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(step), static_cast<std::uint32_t>(std::uint64_t(step) >> 32)};
        std::uint64_t out;
        std::uint32_t parts[2];
        seq.generate(parts, parts + 2);
        out = (std::uint64_t(parts[0]) << 32) | parts[1];
        return out;
    }

private:
    MinimaxResult solve(const UtilitySpace& space) {
        RegretEngine engine(space, tables_, options_);
        if (feasibility_.is_catalog()) return engine.db_minimax(feasibility_.items());
        return engine.minimax_regret(feasibility_);
    }

    UtilitySpace space_;
    FeasibilitySpec feasibility_;
    Strategy strategy_;
    std::uint64_t seed_;
    RegretOptions options_;
    CostWeights weights_;
    LocalRegretTables tables_;
    MinimaxResult current_;
    std::vector<HistoryEntry> history_;
    std::vector<double> trace_;
    std::optional<Query> pending_;
    bool pending_ready_ = false;
};

using Answerer = std::function<bool(const Query&)>;

struct SessionOutcome {
    MinimaxResult final;
    std::vector<double> mmr_trace;
    std::vector<HistoryEntry> history;
};

/// select → ask → apply until MMR <= threshold, the query budget is spent, or
/// the strategy has nothing left to ask.
inline SessionOutcome run_session(Session& session, const Answerer& answer, const Termination& termination) {
    while (!session.done(termination)) {
        const auto q = *session.next_query();
        session.apply(q, answer(q));
    }
    return {session.current(), session.mmr_trace(), session.history()};
}

} // namespace gaimr
