#pragma once

#include "gaimr/config_search.hpp"
#include "gaimr/elicitation.hpp"
#include "gaimr/problem_io.hpp"
#include "gaimr/regret.hpp"
#include "gaimr/utility_space.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <mutex>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <thread>
#include <vector>

namespace gaimr {

/// Ranges prior intervals are drawn from.
struct PriorSpec {
    Interval anchor_top{1.0, 50.0};
    Interval anchor_bottom{-50.0, -1.0};
    Interval lvf{0.0, 1.0};

    void validate() const {
        for (const auto* iv : {&anchor_top, &anchor_bottom, &lvf})
            if (!(iv->lo <= iv->hi)) throw Error("prior range with lo > hi");
        if (lvf.lo < 0.0 || lvf.hi > 1.0) throw Error("LVF prior range must lie in [0,1]");
    }
};

/// Deterministic seed for sub-stream `index` of `seed`.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) { return Session::step_seed(seed, index); }

namespace detail {

inline Interval ordered_draw(std::mt19937_64& rng, const Interval& range) {
    std::uniform_real_distribution<double> d(range.lo, range.hi);
    double a = range.lo == range.hi ? range.lo : d(rng);
    double b = range.lo == range.hi ? range.lo : d(rng);
    if (a > b) std::swap(a, b);
    return {a, b};
}

inline double draw(std::mt19937_64& rng, const Interval& iv) {
    if (iv.lo == iv.hi) return iv.lo;
    return std::uniform_real_distribution<double>(iv.lo, iv.hi)(rng);
}

} // namespace detail

/// Per parameter: two ordered draws from its range. Local tops and bottoms
/// stay pinned at 1 and 0.
inline Priors sample_prior(const GaiStructure& s, const PriorSpec& spec, std::mt19937_64& rng) {
    spec.validate();
    Priors p;
    for (std::size_t j = 0; j < s.factor_count(); ++j) {
        std::vector<Interval> block;
        for (std::size_t i = 0; i < s.local_size(j); ++i) block.push_back(detail::ordered_draw(rng, spec.lvf));
        block[s.factor(j).top] = {1.0, 1.0};
        block[s.factor(j).bottom] = {0.0, 0.0};
        p.lvf.push_back(std::move(block));
    }
    for (std::size_t j = 0; j < s.factor_count(); ++j) {
        p.anchor_top.push_back(detail::ordered_draw(rng, spec.anchor_top));
        p.anchor_bottom.push_back(detail::ordered_draw(rng, spec.anchor_bottom));
    }
    return p;
}

/// Uniform point of the space: per block, uniform in the bounding box with
/// rejection until every comparison holds.
inline GaiModel sample_true_utility(const UtilitySpace& space, std::mt19937_64& rng,
                                    std::size_t max_attempts = 100000) {
    auto sample_block = [&](const DifferenceBlock& blk) {
        std::vector<double> x(blk.size());
        for (std::size_t attempt = 0; attempt < max_attempts; ++attempt) {
            for (std::size_t i = 0; i < x.size(); ++i) x[i] = detail::draw(rng, blk.box()[i]);
            if (blk.contains(x, 0.0)) return x;
        }
        throw Error("true-utility rejection budget exceeded");
    };
    const auto& s = *space.structure();
    GaiModel m;
    m.structure = space.structure();
    for (std::size_t j = 0; j < s.factor_count(); ++j) m.lvf.push_back(sample_block(space.lvf_block(j)));
    const auto anchors = sample_block(space.anchor_block());
    for (std::size_t j = 0; j < s.factor_count(); ++j) m.anchors.push_back({anchors[2 * j], anchors[2 * j + 1]});
    return m;
}

/// Truthful response of a user whose utility is `truth`. Anchor bounds compare
/// the raw anchor value, in the units of the prior.
inline bool simulate_answer(const GaiModel& truth, const Query& q) {
    switch (q.type) {
    case QueryType::LocalBound: return truth.lvf.at(q.factor).at(q.index) >= q.threshold;
    case QueryType::LocalComparison: return truth.lvf.at(q.factor).at(q.index) >= truth.lvf.at(q.factor).at(q.other);
    case QueryType::AnchorBound:
        return (q.top ? truth.anchors.at(q.factor).top : truth.anchors.at(q.factor).bottom) >= q.threshold;
    case QueryType::AnchorComparison: return truth.anchors.at(q.factor).top >= truth.anchors.at(q.other).bottom;
    }
    return false;
}

/// Width between the largest Σ u⊤ and the smallest Σ u⊥ over the initial
/// anchor boxes; MMR divided by this is the reported normalized regret.
inline double regret_scale(const UtilitySpace& initial) {
    double top = 0.0, bottom = 0.0;
    for (std::size_t j = 0; j < initial.factor_count(); ++j) {
        top += initial.interval(ParamRef::top(j)).hi;
        bottom += initial.interval(ParamRef::bottom(j)).lo;
    }
    const double w = top - bottom;
    return w > 0.0 ? w : 1.0;
}

/// max over feasible y of u(y) − u(x), by enumeration.
inline double true_regret(const GaiModel& truth, const FeasibilitySpec& feas, const Outcome& x) {
    double best = -INFINITY;
    reference::for_each_feasible(*truth.structure, feas, [&](const Outcome& y) { best = std::max(best, truth.evaluate(y)); });
    return best - truth.evaluate(x);
}

/// Synthetic problem shape. Factors are windows over a position sequence;
/// positions are mapped to attributes by a seeded random permutation, so the
/// shape (and parameter count) is fixed while the attribute order is random.
struct GeneratorSpec {
    std::string name = "synthetic";
    std::vector<int> domains;
    /// Explicit factor position sets; when empty, windows of `window` every `stride`.
    std::vector<std::vector<std::size_t>> factors;
    std::size_t window = 3;
    std::size_t stride = 2;
    bool cyclic = true;
    std::size_t nogoods = 0;
    std::size_t nogood_size = 2;
    /// > 0 selects catalog mode with this many distinct items.
    std::size_t catalog = 0;
    std::uint64_t seed = 1;

    void validate() const {
        if (domains.empty()) throw Error("generator needs at least one attribute");
        for (int d : domains)
            if (d < 2) throw Error("generator domains need at least 2 levels");
        if (factors.empty() && (window == 0 || stride == 0)) throw Error("window and stride must be positive");
        for (const auto& f : factors)
            for (auto p : f)
                if (p >= domains.size()) throw Error("factor position out of range");
        if (nogood_size == 0 || nogood_size > domains.size()) throw Error("nogood size out of range");
    }
};

/// Named shapes. `apartment-shape`: 8 attributes, 5 factors, 156 parameters,
/// 186-item catalog. `car-rental-shape`: 26 attributes, 13 factors, 378
/// parameters, 10 nogoods. `ten-attribute`: 10 attributes, 5 cyclic factors.
inline GeneratorSpec preset(const std::string& name, std::uint64_t seed = 1) {
    GeneratorSpec g;
    g.name = name;
    g.seed = seed;
    if (name == "apartment-shape") {
        g.domains = {33, 4, 5, 5, 5, 2, 3, 3};
        g.factors = {{0}, {1, 2}, {2, 3}, {3, 4, 5}, {5, 6, 7}};
        g.catalog = 186;
    } else if (name == "car-rental-shape") {
        g.domains = {2, 2, 6, 2, 2, 2, 2, 2, 2, 3, 9, 2, 3, 4, 3, 2, 2, 2, 2, 2, 2, 3, 9, 3, 2, 2};
        g.window = 3;
        g.stride = 2;
        g.nogoods = 10;
    } else if (name == "ten-attribute") {
        g.domains = {2, 3, 2, 2, 3, 2, 2, 3, 2, 2};
        g.window = 3;
        g.stride = 2;
        g.nogoods = 4;
    } else {
        throw Error("unknown preset '" + name + "'");
    }
    return g;
}

inline std::size_t parameter_count(const GaiStructure& s) {
    std::size_t n = 2 * s.factor_count();
    for (std::size_t j = 0; j < s.factor_count(); ++j) n += s.local_size(j);
    return n;
}

namespace detail {

inline std::vector<std::vector<std::size_t>> window_positions(const GeneratorSpec& g) {
    if (!g.factors.empty()) return g.factors;
    const auto n = g.domains.size();
    std::vector<std::vector<std::size_t>> out;
    for (std::size_t start = 0; start < n; start += g.stride) {
        if (!g.cyclic && start + g.window > n) {
            std::vector<std::size_t> tail;
            for (std::size_t p = start; p < n; ++p) tail.push_back(p);
            if (!tail.empty()) out.push_back(tail);
            break;
        }
        std::vector<std::size_t> f;
        for (std::size_t k = 0; k < std::min(g.window, n); ++k) f.push_back((start + k) % n);
        out.push_back(f);
        if (!g.cyclic && start + g.window == n) break;
    }
    return out;
}

} // namespace detail

/// Deterministic given the spec. Retries nogood draws (bounded) when they
/// empty the feasible set.
inline ProblemDocument generate_problem(const GeneratorSpec& g) {
    g.validate();
    std::mt19937_64 rng(g.seed);
    const auto n = g.domains.size();

    std::vector<std::size_t> attr_of(n);
    std::iota(attr_of.begin(), attr_of.end(), 0);
    std::shuffle(attr_of.begin(), attr_of.end(), rng);

    ProblemDocument doc;
    doc.name = g.name;
    doc.schema.attributes.resize(n);
    for (std::size_t p = 0; p < n; ++p) {
        auto& attr = doc.schema.attributes[attr_of[p]];
        attr.name = "a" + std::to_string(attr_of[p]);
        for (int l = 0; l < g.domains[p]; ++l) attr.levels.push_back("l" + std::to_string(l));
    }
    doc.schema.best.resize(n);
    doc.schema.worst.resize(n);
    for (std::size_t a = 0; a < n; ++a) {
        const auto d = static_cast<std::size_t>(doc.schema.domain_size(a));
        const auto best = std::uniform_int_distribution<std::size_t>(0, d - 1)(rng);
        auto worst = std::uniform_int_distribution<std::size_t>(0, d - 2)(rng);
        if (worst >= best) ++worst;
        doc.schema.best[a] = static_cast<int>(best);
        doc.schema.worst[a] = static_cast<int>(worst);
    }
    doc.schema.reference = doc.schema.worst;

    for (const auto& positions : detail::window_positions(g)) {
        Factor f;
        for (auto p : positions) f.attributes.push_back(attr_of[p]);
        std::sort(f.attributes.begin(), f.attributes.end());
        f.attributes.erase(std::unique(f.attributes.begin(), f.attributes.end()), f.attributes.end());
        std::vector<int> top, bottom;
        for (auto a : f.attributes) top.push_back(doc.schema.best[a]), bottom.push_back(doc.schema.worst[a]);
        f.top = detail::local_index_of(doc.schema, f.attributes, top);
        f.bottom = detail::local_index_of(doc.schema, f.attributes, bottom);
        doc.factors.push_back(std::move(f));
    }
    const GaiStructure structure(doc.schema, doc.factors);

    auto random_outcome = [&] {
        Outcome x(n);
        for (std::size_t a = 0; a < n; ++a)
            x[a] = std::uniform_int_distribution<int>(0, doc.schema.domain_size(a) - 1)(rng);
        return x;
    };

    if (g.catalog > 0) {
        if (static_cast<double>(g.catalog) > static_cast<double>(doc.schema.outcome_count()))
            throw Error("catalog larger than the outcome space");
        std::vector<Outcome> items;
        std::set<Outcome> seen;
        while (items.size() < g.catalog) {
            auto x = random_outcome();
            if (seen.insert(x).second) items.push_back(std::move(x));
        }
        doc.feasibility = FeasibilitySpec::catalog(std::move(items));
        return doc;
    }

    for (int attempt = 0; attempt < 100; ++attempt) {
        std::vector<Nogood> nogoods;
        for (std::size_t k = 0; k < g.nogoods; ++k) {
            std::vector<std::size_t> attrs(n);
            std::iota(attrs.begin(), attrs.end(), 0);
            std::shuffle(attrs.begin(), attrs.end(), rng);
            Nogood ng;
            for (std::size_t p = 0; p < g.nogood_size; ++p)
                ng.assignment.emplace_back(attrs[p], std::uniform_int_distribution<int>(
                                                         0, doc.schema.domain_size(attrs[p]) - 1)(rng));
            nogoods.push_back(std::move(ng));
        }
        auto feas = FeasibilitySpec::constraints(std::move(nogoods));
        if (first_feasible(structure, feas)) {
            doc.feasibility = std::move(feas);
            return doc;
        }
    }
    throw DomainError("could not draw nogoods leaving a feasible outcome");
}

struct ExperimentSpec {
    GeneratorSpec problem;
    std::vector<Strategy> strategies = scoring_strategies();
    std::size_t runs = 20;
    std::size_t max_queries = 50;
    /// Normalized MMR at which a session stops.
    double threshold = 0.0;
    std::uint64_t seed = 1;
    PriorSpec prior;
    /// Check true regret ≤ MMR at every step (enumerates the feasible set).
    bool check_true_regret = false;
    /// 0 = hardware concurrency.
    unsigned threads = 0;

    void validate() const {
        if (runs == 0) throw Error("experiment needs at least one run");
        if (strategies.empty()) throw Error("experiment needs at least one strategy");
        prior.validate();
    }
};

struct ExperimentResult {
    std::vector<Strategy> strategies;
    std::size_t runs = 0;
    std::size_t max_queries = 0;
    /// [strategy][run][query] normalized MMR, padded with the final value.
    std::vector<std::vector<std::vector<double>>> traces;
    /// [strategy][run] queries actually asked.
    std::vector<std::vector<std::size_t>> asked;
    /// Largest (true regret − MMR) seen, in raw utility units; only with check_true_regret.
    double worst_bound_gap = -INFINITY;

    double mean(std::size_t s, std::size_t q) const {
        double sum = 0.0;
        for (const auto& run : traces[s]) sum += run[q];
        return sum / static_cast<double>(runs);
    }

    double stddev(std::size_t s, std::size_t q) const {
        const double m = mean(s, q);
        double sum = 0.0;
        for (const auto& run : traces[s]) sum += (run[q] - m) * (run[q] - m);
        return std::sqrt(sum / static_cast<double>(runs));
    }
};

/// One prior/truth pair per run, shared by every strategy.
inline ExperimentResult run_experiment(const ExperimentSpec& spec, const ProblemDocument& problem) {
    spec.validate();
    const auto structure = problem.structure();
    const auto ns = spec.strategies.size();

    ExperimentResult out;
    out.strategies = spec.strategies;
    out.runs = spec.runs;
    out.max_queries = spec.max_queries;
    out.traces.assign(ns, std::vector<std::vector<double>>(spec.runs));
    out.asked.assign(ns, std::vector<std::size_t>(spec.runs, 0));
    std::vector<double> gaps(spec.runs, -INFINITY);

    auto run_one = [&](std::size_t run) {
        const auto run_seed = derive_seed(spec.seed, run);
        std::mt19937_64 rng(run_seed);
        const UtilitySpace space(structure, sample_prior(*structure, spec.prior, rng));
        const auto truth = sample_true_utility(space, rng);
        const double scale = regret_scale(space);
        for (std::size_t k = 0; k < ns; ++k) {
            Session session(space, problem.feasibility, spec.strategies[k], derive_seed(run_seed, k + 1));
            const Termination stop{spec.threshold * scale, spec.max_queries};
            auto check = [&] {
                if (!spec.check_true_regret) return;
                const double gap = true_regret(truth, problem.feasibility, session.current().x_star) -
                                   session.current().value;
                gaps[run] = std::max(gaps[run], gap);
            };
            check();
            while (!session.done(stop)) {
                const auto q = *session.next_query();
                session.apply(q, simulate_answer(truth, q));
                check();
            }
            auto trace = session.mmr_trace();
            out.asked[k][run] = session.query_count();
            trace.resize(spec.max_queries + 1, trace.back());
            for (auto& v : trace) v /= scale;
            out.traces[k][run] = std::move(trace);
        }
    };

    unsigned threads = spec.threads ? spec.threads : std::max(1u, std::thread::hardware_concurrency());
    threads = std::min<unsigned>(threads, static_cast<unsigned>(spec.runs));
    if (threads <= 1) {
        for (std::size_t r = 0; r < spec.runs; ++r) run_one(r);
    } else {
        std::atomic<std::size_t> next{0};
        std::exception_ptr failure;
        std::mutex failure_mutex;
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < threads; ++t)
            pool.emplace_back([&] {
                for (std::size_t r; (r = next++) < spec.runs;) {
                    try {
                        run_one(r);
                    } catch (...) {
                        std::lock_guard lock(failure_mutex);
                        if (!failure) failure = std::current_exception();
                    }
                }
            });
        for (auto& t : pool) t.join();
        if (failure) std::rethrow_exception(failure);
    }
    for (double g : gaps) out.worst_bound_gap = std::max(out.worst_bound_gap, g);
    return out;
}

inline ExperimentResult run_experiment(const ExperimentSpec& spec) {
    return run_experiment(spec, generate_problem(spec.problem));
}

inline constexpr const char* trace_csv_header = "strategy,queryIndex,meanMMR,stddev,runs\n";

inline std::string csv_row(const std::string& strategy, std::size_t q, double mean, double sd, std::size_t runs) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%s,%zu,%.10g,%.10g,%zu\n", strategy.c_str(), q, mean, sd, runs);
    return buf;
}

inline std::string to_csv(const ExperimentResult& r) {
    std::string out = trace_csv_header;
    for (std::size_t s = 0; s < r.strategies.size(); ++s)
        for (std::size_t q = 0; q <= r.max_queries; ++q)
            out += csv_row(to_string(r.strategies[s]), q, r.mean(s, q), r.stddev(s, q), r.runs);
    return out;
}

/// Single-session trace in the experiment CSV layout (stddev 0, runs 1).
inline std::string trace_csv(Strategy strategy, const std::vector<double>& trace) {
    std::string out = trace_csv_header;
    for (std::size_t q = 0; q < trace.size(); ++q) out += csv_row(to_string(strategy), q, trace[q], 0.0, 1);
    return out;
}

// ---- experiment spec files ----
//
// {"version": "1", "preset": "ten-attribute" | "generator": {...},
//  "strategies": ["AB+LB", ...], "runs": 20, "maxQueries": 50,
//  "threshold": 0, "seed": 1,
//  "prior": {"anchorTop": [1, 50], "anchorBottom": [-50, -1], "lvf": [0, 1]}}

inline Json to_json(const GeneratorSpec& g) {
    return {{"name", g.name},         {"domains", g.domains}, {"factors", g.factors},
            {"window", g.window},     {"stride", g.stride},   {"cyclic", g.cyclic},
            {"nogoods", g.nogoods},   {"nogoodSize", g.nogood_size},
            {"catalog", g.catalog},   {"seed", g.seed}};
}

inline Json to_json(const ExperimentSpec& e) {
    Json strategies = Json::array();
    for (auto s : e.strategies) strategies.push_back(to_string(s));
    return {{"version", document_version},
            {"generator", to_json(e.problem)},
            {"strategies", strategies},
            {"runs", e.runs},
            {"maxQueries", e.max_queries},
            {"threshold", e.threshold},
            {"seed", e.seed},
            {"prior",
             {{"anchorTop", interval_json(e.prior.anchor_top)},
              {"anchorBottom", interval_json(e.prior.anchor_bottom)},
              {"lvf", interval_json(e.prior.lvf)}}}};
}

inline ExperimentSpec experiment_from_json(const Json& j) {
    detail::DocumentReader r;
    ExperimentSpec e;
    if (!j.is_object()) throw ValidationError({"(root): expected an object"});
    if (auto v = r.string(r.field(j, "", "version"), "version"); v && *v != document_version)
        r.fail("version", "unsupported version '" + *v + "'");
    auto seed = r.integer(r.field(j, "", "seed", false), "seed");
    if (seed) e.seed = static_cast<std::uint64_t>(*seed);

    if (auto p = r.string(r.field(j, "", "preset", false), "preset")) {
        try {
            e.problem = preset(*p, e.seed);
        } catch (const Error& err) {
            r.fail("preset", err.what());
        }
    } else if (const auto* g = r.field(j, "", "generator", false)) {
        try {
            e.problem = GeneratorSpec{};
            e.problem.seed = e.seed;
            if (g->contains("name")) e.problem.name = g->at("name").get<std::string>();
            e.problem.domains = g->at("domains").get<std::vector<int>>();
            if (g->contains("factors")) e.problem.factors = g->at("factors").get<std::vector<std::vector<std::size_t>>>();
            if (g->contains("window")) e.problem.window = g->at("window").get<std::size_t>();
            if (g->contains("stride")) e.problem.stride = g->at("stride").get<std::size_t>();
            if (g->contains("cyclic")) e.problem.cyclic = g->at("cyclic").get<bool>();
            if (g->contains("nogoods")) e.problem.nogoods = g->at("nogoods").get<std::size_t>();
            if (g->contains("nogoodSize")) e.problem.nogood_size = g->at("nogoodSize").get<std::size_t>();
            if (g->contains("catalog")) e.problem.catalog = g->at("catalog").get<std::size_t>();
            if (g->contains("seed")) e.problem.seed = g->at("seed").get<std::uint64_t>();
            e.problem.validate();
        } catch (const std::exception& err) {
            r.fail("generator", err.what());
        }
    } else {
        r.fail("(root)", "one of 'preset' or 'generator' is required");
    }

    if (const auto* s = r.array(r.field(j, "", "strategies", false), "strategies")) {
        e.strategies.clear();
        for (std::size_t k = 0; k < s->size(); ++k) {
            const auto path = detail::DocumentReader::at("strategies", k);
            if (auto name = r.string(&(*s)[k], path)) {
                try {
                    e.strategies.push_back(parse_strategy(*name));
                } catch (const Error& err) {
                    r.fail(path, err.what());
                }
            }
        }
    }
    if (auto v = r.integer(r.field(j, "", "runs", false), "runs")) {
        if (*v < 1) r.fail("runs", "must be at least 1");
        else e.runs = static_cast<std::size_t>(*v);
    }
    if (auto v = r.integer(r.field(j, "", "maxQueries", false), "maxQueries")) {
        if (*v < 0) r.fail("maxQueries", "must be non-negative");
        else e.max_queries = static_cast<std::size_t>(*v);
    }
    if (auto v = r.number(r.field(j, "", "threshold", false), "threshold")) e.threshold = *v;
    if (const auto* p = r.field(j, "", "prior", false)) {
        if (auto iv = r.interval(r.field(*p, "prior", "anchorTop", false), "prior.anchorTop")) e.prior.anchor_top = *iv;
        if (auto iv = r.interval(r.field(*p, "prior", "anchorBottom", false), "prior.anchorBottom"))
            e.prior.anchor_bottom = *iv;
        if (auto iv = r.interval(r.field(*p, "prior", "lvf", false), "prior.lvf")) {
            if (iv->lo < 0.0 || iv->hi > 1.0) r.fail("prior.lvf", "must lie in [0,1]");
            else e.prior.lvf = *iv;
        }
    }
    if (!r.violations.empty()) throw ValidationError(r.violations);
    return e;
}

} // namespace gaimr
