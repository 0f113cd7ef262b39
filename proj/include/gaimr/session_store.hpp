#pragma once

#include "gaimr/elicitation.hpp"
#include "gaimr/errors.hpp"
#include "gaimr/problem_io.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace gaimr {

// Session logs are JSONL, one file per session, one event per line:
//   {"event": "created", "id", "time", "problem", "strategy", "seed", "termination"}
//   {"event": "query-issued", "time", "queryId", "query"}
//   {"event": "answer", "time", "queryId", "query", "answer"}
//   {"event": "recommendation", "time", "step", "xStar", "witness", "mmr"}
// A line is only complete once its newline is written, so a crash can leave
// at most one partial line at the end; replay drops it.

/// UTC, millisecond resolution, e.g. 2026-01-31T09:15:02.031Z.
inline std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const auto t = std::chrono::system_clock::to_time_t(now);
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32], frac[8];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
    std::snprintf(frac, sizeof frac, ".%03dZ", static_cast<int>(ms));
    return std::string(buf) + frac;
}

inline Json to_json(const Termination& t) {
    return {{"maxQueries", t.max_queries}, {"regretThreshold", t.regret_threshold}};
}

inline Termination termination_from_json(const Json& j) {
    Termination t;
    if (j.is_null()) return t;
    if (!j.is_object()) throw ParseError("termination: expected an object");
    try {
        if (j.contains("maxQueries")) t.max_queries = j.at("maxQueries").get<std::size_t>();
        if (j.contains("regretThreshold")) t.regret_threshold = j.at("regretThreshold").get<double>();
    } catch (const Json::exception& e) {
        throw ParseError(std::string("termination: ") + e.what());
    }
    if (!std::isfinite(t.regret_threshold) || t.regret_threshold < 0.0)
        throw ParseError("termination.regretThreshold: expected a finite value >= 0");
    return t;
}

/// Everything a session log reconstructs.
struct SessionState {
    std::string id;
    std::string created;
    ProblemDocument problem;
    Termination termination;
    std::unique_ptr<Session> session;
    /// Query ids are 1, 2, 3, ...; 0 means none issued yet.
    std::uint64_t last_query_id = 0;
    std::optional<std::uint64_t> pending;
    std::size_t events = 0;

    bool done() const { return session->done(termination); }
};

namespace detail {

/// Complete (newline-terminated) lines of a log; a trailing partial line is
/// reported through `complete_bytes` and otherwise ignored.
inline std::vector<std::string> complete_lines(const std::string& text, std::size_t* complete_bytes = nullptr) {
    std::vector<std::string> lines;
    std::size_t start = 0;
    for (std::size_t nl; (nl = text.find('\n', start)) != std::string::npos; start = nl + 1)
        if (nl > start) lines.push_back(text.substr(start, nl - start));
    if (complete_bytes) *complete_bytes = start;
    return lines;
}

inline Json event_field(const Json& e, const char* key, std::size_t line) {
    if (!e.contains(key)) throw ParseError("event " + std::to_string(line) + ": missing '" + key + "'");
    return e.at(key);
}

} // namespace detail

inline Json created_event(const std::string& id, const ProblemDocument& doc, Strategy strategy, std::uint64_t seed,
                          const Termination& t) {
    return {{"event", "created"}, {"id", id},       {"time", utc_timestamp()}, {"problem", to_json(doc)},
            {"strategy", to_string(strategy)}, {"seed", seed}, {"termination", to_json(t)}};
}

inline Json query_event(std::uint64_t id, const Query& q) {
    return {{"event", "query-issued"}, {"time", utc_timestamp()}, {"queryId", id}, {"query", to_json(q)}};
}

inline Json answer_event(std::uint64_t id, const Query& q, bool yes) {
    return {{"event", "answer"}, {"time", utc_timestamp()}, {"queryId", id}, {"query", to_json(q)}, {"answer", yes}};
}

inline Json recommendation_event(const SessionState& st) {
    const auto& r = st.session->current();
    return {{"event", "recommendation"}, {"time", utc_timestamp()}, {"step", st.session->query_count()},
            {"xStar", outcome_json(r.x_star)}, {"witness", outcome_json(r.witness)}, {"mmr", r.value}};
}

/// Rebuilds a session from its log text. Returns nullopt when even the
/// created event is incomplete. Throws ParseError on a corrupt complete line
/// or a log that disagrees with deterministic replay.
inline std::optional<SessionState> replay_session(const std::string& text) {
    const auto lines = detail::complete_lines(text);
    if (lines.empty()) return std::nullopt;
    SessionState st;
    for (std::size_t n = 0; n < lines.size(); ++n) {
        Json e;
        try {
            e = Json::parse(lines[n]);
        } catch (const Json::parse_error& err) {
            throw ParseError("event " + std::to_string(n) + ": " + err.what());
        }
        const auto kind = detail::event_field(e, "event", n).get<std::string>();
        try {
            if (n == 0) {
                if (kind != "created") throw ParseError("event 0: log must start with 'created'");
                st.id = detail::event_field(e, "id", n).get<std::string>();
                st.created = e.value("time", "");
                st.problem = problem_from_json(detail::event_field(e, "problem", n));
                st.termination = termination_from_json(e.value("termination", Json()));
                st.session = std::make_unique<Session>(st.problem.space(st.problem.structure()), st.problem.feasibility,
                                                       parse_strategy(detail::event_field(e, "strategy", n).get<std::string>()),
                                                       e.value("seed", std::uint64_t{0}));
            } else if (kind == "created") {
                throw ParseError("event " + std::to_string(n) + ": duplicate 'created'");
            } else if (kind == "query-issued") {
                const auto id = detail::event_field(e, "queryId", n).get<std::uint64_t>();
                const auto q = query_from_json(detail::event_field(e, "query", n));
                const auto expected = st.session->next_query();
                if (!expected || !(*expected == q))
                    throw ParseError("event " + std::to_string(n) + ": issued query differs from replay");
                if (id <= st.last_query_id)
                    throw ParseError("event " + std::to_string(n) + ": query ids must increase");
                st.last_query_id = id;
                st.pending = id;
            } else if (kind == "answer") {
                const auto id = detail::event_field(e, "queryId", n).get<std::uint64_t>();
                const auto q = query_from_json(detail::event_field(e, "query", n));
                if (st.pending != id) throw ParseError("event " + std::to_string(n) + ": answer to an inactive query");
                st.session->apply(q, answer_from_json(detail::event_field(e, "answer", n)));
                st.pending.reset();
            } else if (kind == "recommendation") {
                const auto mmr = detail::event_field(e, "mmr", n).get<double>();
                if (std::abs(mmr - st.session->current().value) > 1e-9)
                    throw ParseError("event " + std::to_string(n) + ": recorded MMR differs from replay");
            } else {
                throw ParseError("event " + std::to_string(n) + ": unknown event '" + kind + "'");
            }
        } catch (const Json::exception& err) {
            throw ParseError("event " + std::to_string(n) + ": " + err.what());
        }
        st.events = n + 1;
    }
    return st;
}

/// Append-only writer for one session file.
class SessionLog {
public:
    explicit SessionLog(std::filesystem::path path) : path_(std::move(path)) {}

    const std::filesystem::path& path() const noexcept { return path_; }

    void append(const Json& event) {
        std::ofstream out(path_, std::ios::binary | std::ios::app);
        if (!out) throw Error("cannot open session log '" + path_.string() + "'");
        out << event.dump() << '\n';
        out.flush();
        if (!out) throw Error("cannot write session log '" + path_.string() + "'");
    }

    /// Drops a partial trailing line left by an interrupted write.
    void repair() {
        const auto text = read_file(path_.string());
        std::size_t complete = 0;
        detail::complete_lines(text, &complete);
        if (complete < text.size()) std::filesystem::resize_file(path_, complete);
    }

    std::vector<Json> events() const {
        std::vector<Json> out;
        for (const auto& line : detail::complete_lines(read_file(path_.string()))) out.push_back(Json::parse(line));
        return out;
    }

private:
    std::filesystem::path path_;
};

} // namespace gaimr
