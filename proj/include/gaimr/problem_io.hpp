#pragma once

#include "gaimr/config_search.hpp"
#include "gaimr/elicitation.hpp"
#include "gaimr/errors.hpp"
#include "gaimr/gai_model.hpp"
#include "gaimr/utility_space.hpp"

#include <json.hpp>

#include <fstream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace gaimr {

using Json = nlohmann::json;

inline constexpr const char* document_version = "1";

/// A complete elicitation problem: schema, ordered factors, optional priors and
/// the feasible set.
struct ProblemDocument {
    std::string name;
    std::string version = document_version;
    AttributeSchema schema;
    std::vector<Factor> factors;
    Priors priors;
    FeasibilitySpec feasibility;

    StructurePtr structure() const { return std::make_shared<const GaiStructure>(schema, factors); }
    UtilitySpace space(StructurePtr s) const { return UtilitySpace(std::move(s), priors); }
};

/// Sorted keys, two-space indent, trailing newline.
inline std::string canonical_dump(const Json& j) { return j.dump(2) + "\n"; }

inline Json interval_json(const Interval& iv) { return Json::array({iv.lo, iv.hi}); }

inline Json outcome_json(const Outcome& x) { return Json(x); }

/// Level names of an outcome, keyed by attribute name.
inline Json outcome_labels(const AttributeSchema& s, const Outcome& x) {
    Json out = Json::object();
    for (std::size_t a = 0; a < x.size() && a < s.size(); ++a)
        out[s.attributes[a].name] = s.attributes[a].levels.at(static_cast<std::size_t>(x[a]));
    return out;
}

inline Json to_json(const ProblemDocument& doc) {
    Json j;
    j["version"] = doc.version;
    j["name"] = doc.name;
    Json attrs = Json::array();
    for (const auto& a : doc.schema.attributes) attrs.push_back({{"name", a.name}, {"levels", a.levels}});
    j["attributes"] = attrs;
    j["reference"] = outcome_json(doc.schema.reference);
    j["best"] = outcome_json(doc.schema.best);
    j["worst"] = outcome_json(doc.schema.worst);

    GaiStructure s(doc.schema, doc.factors);
    Json factors = Json::array();
    for (std::size_t f = 0; f < doc.factors.size(); ++f) {
        const auto& fac = doc.factors[f];
        factors.push_back({{"attributes", fac.attributes},
                           {"top", s.local_levels(f, fac.top)},
                           {"bottom", s.local_levels(f, fac.bottom)}});
    }
    j["factors"] = factors;

    Json priors;
    priors["defaultAnchor"] = interval_json(doc.priors.default_anchor);
    if (!doc.priors.lvf.empty()) {
        Json lvf = Json::array();
        for (const auto& block : doc.priors.lvf) {
            Json row = Json::array();
            for (const auto& iv : block) row.push_back(interval_json(iv));
            lvf.push_back(row);
        }
        priors["lvf"] = lvf;
    }
    auto intervals = [](const std::vector<Interval>& v) {
        Json out = Json::array();
        for (const auto& iv : v) out.push_back(interval_json(iv));
        return out;
    };
    if (!doc.priors.anchor_top.empty()) priors["anchorTop"] = intervals(doc.priors.anchor_top);
    if (!doc.priors.anchor_bottom.empty()) priors["anchorBottom"] = intervals(doc.priors.anchor_bottom);
    j["priors"] = priors;

    Json feas;
    if (doc.feasibility.is_catalog()) {
        feas["mode"] = "catalog";
        feas["items"] = doc.feasibility.items();
    } else {
        feas["mode"] = "constraints";
        Json nogoods = Json::array();
        for (const auto& ng : doc.feasibility.nogoods()) {
            Json row = Json::array();
            for (const auto& [a, level] : ng.assignment) row.push_back({a, level});
            nogoods.push_back(row);
        }
        feas["nogoods"] = nogoods;
    }
    j["feasibility"] = feas;
    return j;
}

namespace detail {

/// Collects every violation with its field path instead of stopping at the first.
class DocumentReader {
public:
    std::vector<std::string> violations;

    void fail(const std::string& path, const std::string& what) { violations.push_back(path + ": " + what); }

    const Json* field(const Json& obj, const std::string& path, const char* key, bool required = true) {
        if (!obj.is_object()) return nullptr;
        auto it = obj.find(key);
        if (it == obj.end()) {
            if (required) fail(join(path, key), "missing");
            return nullptr;
        }
        return &*it;
    }

    static std::string join(const std::string& path, const std::string& key) {
        return path.empty() ? key : path + "." + key;
    }
    static std::string at(const std::string& path, std::size_t i) { return path + "[" + std::to_string(i) + "]"; }

    std::optional<std::string> string(const Json* j, const std::string& path) {
        if (!j) return std::nullopt;
        if (!j->is_string()) {
            fail(path, "expected a string");
            return std::nullopt;
        }
        return j->get<std::string>();
    }

    std::optional<long long> integer(const Json* j, const std::string& path) {
        if (!j) return std::nullopt;
        if (!j->is_number_integer()) {
            fail(path, "expected an integer");
            return std::nullopt;
        }
        return j->get<long long>();
    }

    std::optional<double> number(const Json* j, const std::string& path) {
        if (!j) return std::nullopt;
        if (!j->is_number()) {
            fail(path, "expected a number");
            return std::nullopt;
        }
        return j->get<double>();
    }

    const Json* array(const Json* j, const std::string& path) {
        if (!j) return nullptr;
        if (!j->is_array()) {
            fail(path, "expected an array");
            return nullptr;
        }
        return j;
    }

    std::optional<Interval> interval(const Json* j, const std::string& path) {
        if (!j) return std::nullopt;
        if (!j->is_array() || j->size() != 2 || !(*j)[0].is_number() || !(*j)[1].is_number()) {
            fail(path, "expected [lo, hi]");
            return std::nullopt;
        }
        Interval iv{(*j)[0].get<double>(), (*j)[1].get<double>()};
        if (!(iv.lo <= iv.hi)) {
            fail(path, "lo exceeds hi");
            return std::nullopt;
        }
        return iv;
    }

    /// A level given by index or by name.
    std::optional<int> level(const Json& j, const std::string& path, const Attribute* attr) {
        if (j.is_number_integer()) {
            const auto v = j.get<long long>();
            if (attr && (v < 0 || v >= static_cast<long long>(attr->levels.size()))) {
                fail(path, "level " + std::to_string(v) + " outside the domain of '" + attr->name + "'");
                return std::nullopt;
            }
            return static_cast<int>(v);
        }
        if (j.is_string() && attr) {
            const auto name = j.get<std::string>();
            for (std::size_t l = 0; l < attr->levels.size(); ++l)
                if (attr->levels[l] == name) return static_cast<int>(l);
            fail(path, "'" + name + "' is not a level of '" + attr->name + "'");
            return std::nullopt;
        }
        fail(path, "expected a level index or name");
        return std::nullopt;
    }

    std::optional<Outcome> outcome(const Json* j, const std::string& path, const AttributeSchema& schema) {
        if (!array(j, path)) return std::nullopt;
        if (j->size() != schema.size()) {
            fail(path, "expected " + std::to_string(schema.size()) + " levels, got " + std::to_string(j->size()));
            return std::nullopt;
        }
        Outcome x(schema.size());
        bool ok = true;
        for (std::size_t a = 0; a < schema.size(); ++a) {
            auto l = level((*j)[a], at(path, a), &schema.attributes[a]);
            if (l) x[a] = *l;
            else ok = false;
        }
        if (!ok) return std::nullopt;
        return x;
    }
};

inline std::size_t local_index_of(const AttributeSchema& schema, const AttributeSet& attrs,
                                  const std::vector<int>& levels) {
    std::size_t index = 0;
    for (std::size_t p = 0; p < attrs.size(); ++p)
        index = index * static_cast<std::size_t>(schema.domain_size(attrs[p])) + static_cast<std::size_t>(levels[p]);
    return index;
}

} // namespace detail

/// Parses and fully validates a problem document. Throws ValidationError
/// listing every violation with its field path.
inline ProblemDocument problem_from_json(const Json& j) {
    detail::DocumentReader r;
    ProblemDocument doc;
    if (!j.is_object()) throw ValidationError({"(root): expected an object"});

    if (auto v = r.string(r.field(j, "", "version"), "version")) {
        doc.version = *v;
        if (*v != document_version) r.fail("version", "unsupported version '" + *v + "'");
    }
    if (auto n = r.string(r.field(j, "", "name", false), "name")) doc.name = *n;

    bool schema_ok = true;
    if (const auto* attrs = r.array(r.field(j, "", "attributes"), "attributes")) {
        if (attrs->empty()) r.fail("attributes", "at least one attribute is required");
        if (attrs->size() > 64) r.fail("attributes", "at most 64 attributes are supported");
        for (std::size_t a = 0; a < attrs->size(); ++a) {
            const auto path = detail::DocumentReader::at("attributes", a);
            const auto& aj = (*attrs)[a];
            Attribute attr;
            if (auto name = r.string(r.field(aj, path, "name"), path + ".name")) attr.name = *name;
            else schema_ok = false;
            if (const auto* levels = r.array(r.field(aj, path, "levels"), path + ".levels")) {
                for (std::size_t l = 0; l < levels->size(); ++l) {
                    if (auto s = r.string(&(*levels)[l], detail::DocumentReader::at(path + ".levels", l)))
                        attr.levels.push_back(*s);
                    else schema_ok = false;
                }
                if (levels->size() < 2) r.fail(path + ".levels", "at least 2 levels are required"), schema_ok = false;
            } else {
                schema_ok = false;
            }
            for (std::size_t b = 0; b < a; ++b)
                if (doc.schema.attributes[b].name == attr.name && !attr.name.empty())
                    r.fail(path + ".name", "duplicate attribute name '" + attr.name + "'");
            doc.schema.attributes.push_back(std::move(attr));
        }
    } else {
        schema_ok = false;
    }
    if (!schema_ok) throw ValidationError(r.violations);

    const auto& schema = doc.schema;
    const auto n = schema.size();
    if (auto x = r.outcome(r.field(j, "", "reference"), "reference", schema)) doc.schema.reference = *x;
    if (auto x = r.outcome(r.field(j, "", "best"), "best", schema)) doc.schema.best = *x;
    if (auto x = r.outcome(r.field(j, "", "worst"), "worst", schema)) doc.schema.worst = *x;

    // by index or by name
    auto attribute_of = [&](const Json& e, const std::string& path) -> std::optional<long long> {
        if (e.is_string()) {
            const auto name = e.get<std::string>();
            for (std::size_t a = 0; a < n; ++a)
                if (schema.attributes[a].name == name) return static_cast<long long>(a);
            r.fail(path, "unknown attribute '" + name + "'");
            return std::nullopt;
        }
        auto idx = r.integer(&e, path);
        if (idx && (*idx < 0 || *idx >= static_cast<long long>(n))) {
            r.fail(path, "attribute index out of range");
            return std::nullopt;
        }
        return idx;
    };

    bool factors_ok = true;
    if (const auto* factors = r.array(r.field(j, "", "factors"), "factors")) {
        if (factors->empty()) r.fail("factors", "at least one factor is required"), factors_ok = false;
        std::vector<bool> covered(n, false);
        for (std::size_t f = 0; f < factors->size(); ++f) {
            const auto path = detail::DocumentReader::at("factors", f);
            const auto& fj = (*factors)[f];
            Factor fac;
            bool ok = true;
            if (const auto* attrs = r.array(r.field(fj, path, "attributes"), path + ".attributes")) {
                if (attrs->empty()) r.fail(path + ".attributes", "factor has no attributes"), ok = false;
                for (std::size_t p = 0; p < attrs->size(); ++p) {
                    const auto ap = detail::DocumentReader::at(path + ".attributes", p);
                    const auto& e = (*attrs)[p];
                    auto idx = attribute_of(e, ap);
                    if (!idx) {
                        ok = false;
                        continue;
                    }
                    const auto a = static_cast<std::size_t>(*idx);
                    if (!fac.attributes.empty() && a <= fac.attributes.back())
                        r.fail(ap, "attributes must be strictly increasing"), ok = false;
                    fac.attributes.push_back(a);
                    covered[a] = true;
                }
            } else {
                ok = false;
            }
            auto suboutcome = [&](const char* key) -> std::optional<std::size_t> {
                const auto sp = path + "." + key;
                const auto* sj = r.array(r.field(fj, path, key), sp);
                if (!sj || !ok) return std::nullopt;
                if (sj->size() != fac.attributes.size()) {
                    r.fail(sp, "expected one level per factor attribute");
                    return std::nullopt;
                }
                std::vector<int> levels;
                for (std::size_t p = 0; p < sj->size(); ++p) {
                    auto l = r.level((*sj)[p], detail::DocumentReader::at(sp, p), &schema.attributes[fac.attributes[p]]);
                    if (!l) return std::nullopt;
                    levels.push_back(*l);
                }
                return detail::local_index_of(schema, fac.attributes, levels);
            };
            auto top = suboutcome("top");
            auto bottom = suboutcome("bottom");
            if (top && bottom && *top == *bottom) r.fail(path, "local top and bottom coincide"), ok = false;
            if (!top || !bottom) ok = false;
            if (ok) {
                fac.top = *top;
                fac.bottom = *bottom;
            }
            factors_ok = factors_ok && ok;
            doc.factors.push_back(std::move(fac));
        }
        for (std::size_t a = 0; a < n; ++a)
            if (!covered[a]) r.fail("factors", "attribute '" + schema.attributes[a].name + "' is not covered by any factor");
    } else {
        factors_ok = false;
    }

    std::optional<GaiStructure> structure;
    if (factors_ok && r.violations.empty()) {
        try {
            structure.emplace(doc.schema, doc.factors);
        } catch (const Error& e) {
            r.fail("factors", e.what());
        }
    }

    if (const auto* pj = r.field(j, "", "priors", false)) {
        if (!pj->is_object()) {
            r.fail("priors", "expected an object");
        } else {
            if (const auto* d = r.field(*pj, "priors", "defaultAnchor", false))
                if (auto iv = r.interval(d, "priors.defaultAnchor")) doc.priors.default_anchor = *iv;
            if (const auto* lvf = r.array(r.field(*pj, "priors", "lvf", false), "priors.lvf")) {
                if (structure && lvf->size() != structure->factor_count())
                    r.fail("priors.lvf", "expected one block per factor");
                for (std::size_t f = 0; f < lvf->size(); ++f) {
                    const auto path = detail::DocumentReader::at("priors.lvf", f);
                    std::vector<Interval> block;
                    if (const auto* bj = r.array(&(*lvf)[f], path)) {
                        if (structure && f < structure->factor_count() && bj->size() != structure->local_size(f))
                            r.fail(path, "expected " + std::to_string(structure->local_size(f)) + " intervals");
                        for (std::size_t i = 0; i < bj->size(); ++i) {
                            const auto ip = detail::DocumentReader::at(path, i);
                            if (auto iv = r.interval(&(*bj)[i], ip)) {
                                if (iv->lo < 0.0 || iv->hi > 1.0) r.fail(ip, "local values lie in [0,1]");
                                block.push_back(*iv);
                            }
                        }
                    }
                    doc.priors.lvf.push_back(std::move(block));
                }
            }
            auto anchors = [&](const char* key, std::vector<Interval>& out) {
                const auto path = std::string("priors.") + key;
                if (const auto* aj = r.array(r.field(*pj, "priors", key, false), path)) {
                    if (structure && aj->size() != structure->factor_count())
                        r.fail(path, "expected one interval per factor");
                    for (std::size_t f = 0; f < aj->size(); ++f)
                        if (auto iv = r.interval(&(*aj)[f], detail::DocumentReader::at(path, f))) out.push_back(*iv);
                }
            };
            anchors("anchorTop", doc.priors.anchor_top);
            anchors("anchorBottom", doc.priors.anchor_bottom);
        }
    }

    if (const auto* fj = r.field(j, "", "feasibility", false)) {
        const auto mode = r.string(r.field(*fj, "feasibility", "mode"), "feasibility.mode");
        if (mode == "catalog") {
            std::vector<Outcome> items;
            if (const auto* ij = r.array(r.field(*fj, "feasibility", "items"), "feasibility.items")) {
                if (ij->empty()) r.fail("feasibility.items", "catalog is empty");
                for (std::size_t k = 0; k < ij->size(); ++k)
                    if (auto x = r.outcome(&(*ij)[k], detail::DocumentReader::at("feasibility.items", k), schema))
                        items.push_back(*x);
            }
            doc.feasibility = FeasibilitySpec::catalog(std::move(items));
        } else if (mode == "constraints") {
            std::vector<Nogood> nogoods;
            if (const auto* nj = r.array(r.field(*fj, "feasibility", "nogoods", false), "feasibility.nogoods")) {
                for (std::size_t k = 0; k < nj->size(); ++k) {
                    const auto path = detail::DocumentReader::at("feasibility.nogoods", k);
                    const auto* gj = r.array(&(*nj)[k], path);
                    if (!gj) continue;
                    if (gj->empty()) r.fail(path, "nogood assigns no attribute");
                    Nogood ng;
                    for (std::size_t p = 0; p < gj->size(); ++p) {
                        const auto pp = detail::DocumentReader::at(path, p);
                        const auto& e = (*gj)[p];
                        if (!e.is_array() || e.size() != 2) {
                            r.fail(pp, "expected [attribute, level]");
                            continue;
                        }
                        const auto a = attribute_of(e[0], pp);
                        if (!a) continue;
                        if (auto l = r.level(e[1], pp, &schema.attributes[static_cast<std::size_t>(*a)]))
                            ng.assignment.emplace_back(static_cast<std::size_t>(*a), *l);
                    }
                    nogoods.push_back(std::move(ng));
                }
            }
            doc.feasibility = FeasibilitySpec::constraints(std::move(nogoods));
        } else if (mode) {
            r.fail("feasibility.mode", "expected 'constraints' or 'catalog'");
        }
    }

    if (r.violations.empty() && structure) {
        try {
            UtilitySpace(std::make_shared<const GaiStructure>(*structure), doc.priors);
        } catch (const Error& e) {
            r.fail("priors", e.what());
        }
    }
    if (!r.violations.empty()) throw ValidationError(r.violations);
    return doc;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write '" + path + "'");
    out << text;
    if (!out.flush()) throw Error("failed writing '" + path + "'");
}

inline Json parse_json(const std::string& text, const std::string& what) {
    try {
        return Json::parse(text);
    } catch (const Json::parse_error& e) {
        throw ParseError(what + ": " + e.what());
    }
}

inline ProblemDocument load_problem(const std::string& path) {
    return problem_from_json(parse_json(read_file(path), path));
}

inline void save_problem(const std::string& path, const ProblemDocument& doc) {
    write_file(path, canonical_dump(to_json(doc)));
}

// ---- queries and answers ----

inline Json to_json(const Query& q) {
    Json j{{"type", to_string(q.type)}, {"factor", q.factor}};
    switch (q.type) {
    case QueryType::LocalBound: j["index"] = q.index, j["threshold"] = q.threshold; break;
    case QueryType::LocalComparison: j["index"] = q.index, j["other"] = q.other; break;
    case QueryType::AnchorBound: j["top"] = q.top, j["threshold"] = q.threshold; break;
    case QueryType::AnchorComparison: j["other"] = q.other; break;
    }
    return j;
}

inline Query query_from_json(const Json& j) {
    try {
        Query q;
        q.type = parse_query_type(j.at("type").get<std::string>());
        q.factor = j.at("factor").get<std::size_t>();
        switch (q.type) {
        case QueryType::LocalBound:
            q.index = j.at("index").get<std::size_t>();
            q.threshold = j.at("threshold").get<double>();
            break;
        case QueryType::LocalComparison:
            q.index = j.at("index").get<std::size_t>();
            q.other = j.at("other").get<std::size_t>();
            break;
        case QueryType::AnchorBound:
            q.top = j.at("top").get<bool>();
            q.threshold = j.at("threshold").get<double>();
            break;
        case QueryType::AnchorComparison: q.other = j.at("other").get<std::size_t>(); break;
        }
        return q;
    } catch (const Json::exception& e) {
        throw ParseError(std::string("malformed query: ") + e.what());
    }
}

inline bool answer_from_json(const Json& j) {
    if (j.is_boolean()) return j.get<bool>();
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "yes") return true;
        if (s == "no") return false;
    }
    throw ParseError("answer must be \"yes\" or \"no\"");
}

/// Answered queries applied on top of a problem's priors:
///   {"version": "1", "answers": [{"query": {...}, "answer": "yes"}, ...]}
inline std::vector<HistoryEntry> answers_from_json(const Json& j) {
    if (!j.is_object() || !j.contains("answers") || !j["answers"].is_array())
        throw ParseError("answer file needs an 'answers' array");
    std::vector<HistoryEntry> out;
    for (const auto& e : j["answers"]) {
        if (!e.is_object() || !e.contains("query") || !e.contains("answer"))
            throw ParseError("each answer needs 'query' and 'answer'");
        out.push_back({query_from_json(e["query"]), answer_from_json(e["answer"])});
    }
    return out;
}

inline Json answers_to_json(const std::vector<HistoryEntry>& history) {
    Json arr = Json::array();
    for (const auto& h : history) arr.push_back({{"query", to_json(h.query)}, {"answer", h.yes ? "yes" : "no"}});
    return {{"version", document_version}, {"answers", arr}};
}

/// Applies answers in order; the error names the offending entry.
inline void apply_answers(UtilitySpace& space, const std::vector<HistoryEntry>& answers) {
    for (std::size_t k = 0; k < answers.size(); ++k) {
        try {
            validate_query(*space.structure(), answers[k].query);
            space.assert_constraint(implied_constraint(answers[k].query, answers[k].yes));
        } catch (const InconsistentConstraintError& e) {
            throw InconsistentConstraintError("answers[" + std::to_string(k) + "]: " + e.what());
        } catch (const Error& e) {
            throw Error("answers[" + std::to_string(k) + "]: " + e.what());
        }
    }
}

inline Json result_to_json(const AttributeSchema& s, const MinimaxResult& r) {
    return {{"xStar", outcome_json(r.x_star)},
            {"xStarLevels", outcome_labels(s, r.x_star)},
            {"witness", outcome_json(r.witness)},
            {"witnessLevels", outcome_labels(s, r.witness)},
            {"mmr", r.value}};
}

} // namespace gaimr
