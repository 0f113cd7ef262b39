#pragma once

#include "gaimr/elicitation.hpp"
#include "gaimr/errors.hpp"
#include "gaimr/problem_io.hpp"
#include "gaimr/session_store.hpp"
#include "gaimr/simulation.hpp"

#include <httplib.h>

#include <cstdlib>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

namespace gaimr {

class NotFoundError : public Error {
public:
    using Error::Error;
};

/// Answer to a query that is no longer the active one, or to a finished session.
class ConflictError : public Error {
public:
    using Error::Error;
};

/// GAIMR_DATA_DIR if set, else ./gaimr-data.
inline std::filesystem::path default_data_dir() {
    if (const char* env = std::getenv("GAIMR_DATA_DIR"); env && *env) return env;
    return "gaimr-data";
}

/// Session bookkeeping behind the HTTP API. Each session has its own mutex
/// and its own log file; the registry lock is only held for lookups.
class Workbench {
public:
    explicit Workbench(std::filesystem::path data_dir) : dir_(std::move(data_dir)) {
        std::filesystem::create_directories(dir_);
        load_existing();
    }

    const std::filesystem::path& data_dir() const noexcept { return dir_; }

    /// Logs skipped at startup, with the reason.
    const std::vector<std::string>& load_errors() const noexcept { return load_errors_; }

    /// body: {"problem": {...}, "strategy": "AB+LB", "seed": 0,
    ///        "termination": {"maxQueries": 100, "regretThreshold": 0}}
    Json create(const Json& body) {
        if (!body.is_object()) throw ParseError("expected a JSON object");
        if (!body.contains("problem")) throw ParseError("missing 'problem'");
        auto doc = problem_from_json(body.at("problem"));
        Strategy strategy = Strategy::AB_PLUS_LB;
        std::uint64_t seed = 0;
        try {
            if (body.contains("strategy")) strategy = parse_strategy(body.at("strategy").get<std::string>());
            if (body.contains("seed")) seed = body.at("seed").get<std::uint64_t>();
        } catch (const Json::exception& e) {
            throw ParseError(e.what());
        }
        const auto termination = termination_from_json(body.value("termination", Json()));

        auto entry = std::make_shared<Entry>();
        entry->state.problem = std::move(doc);
        entry->state.termination = termination;
        entry->state.session =
            std::make_unique<Session>(entry->state.problem.space(entry->state.problem.structure()),
                                      entry->state.problem.feasibility, strategy, seed);

        std::lock_guard registry(registry_mutex_);
        const auto id = next_id();
        entry->state.id = id;
        entry->log = std::make_unique<SessionLog>(dir_ / (id + ".jsonl"));
        const auto created = created_event(id, entry->state.problem, strategy, seed, termination);
        entry->state.created = created.at("time").get<std::string>();
        entry->log->append(created);
        entry->log->append(recommendation_event(entry->state));
        entry->state.events = 2;
        sessions_[id] = entry;
        return status_of(entry->state);
    }

    Json list() const {
        std::vector<std::shared_ptr<Entry>> entries;
        {
            std::lock_guard registry(registry_mutex_);
            for (const auto& [id, e] : sessions_) entries.push_back(e);
        }
        Json out = Json::array();
        for (const auto& e : entries) {
            std::lock_guard lock(e->mutex);
            const auto& st = e->state;
            out.push_back({{"id", st.id},
                           {"name", st.problem.name},
                           {"created", st.created},
                           {"strategy", to_string(st.session->strategy())},
                           {"queryCount", st.session->query_count()},
                           {"mmr", st.session->current().value}});
        }
        return {{"sessions", out}};
    }

    /// The active query, issuing a new one if none is outstanding.
    Json query(const std::string& id) {
        auto e = find(id);
        std::lock_guard lock(e->mutex);
        auto& st = e->state;
        if (!st.pending) {
            if (st.done()) return {{"done", true}, {"status", status_of(st)}};
            const auto q = *st.session->next_query();
            const auto qid = st.last_query_id + 1;
            e->log->append(query_event(qid, q));
            st.last_query_id = qid;
            st.pending = qid;
            ++st.events;
        }
        const auto q = *st.session->next_query();
        return {{"done", false},
                {"queryId", *st.pending},
                {"query", to_json(q)},
                {"text", render(*st.session->space().structure(), q)}};
    }

    /// body: {"queryId": n, "answer": "yes" | "no" | true | false}
    Json answer(const std::string& id, const Json& body) {
        if (!body.is_object() || !body.contains("queryId") || !body.contains("answer"))
            throw ParseError("expected {\"queryId\": n, \"answer\": \"yes\"|\"no\"}");
        std::uint64_t qid = 0;
        try {
            qid = body.at("queryId").get<std::uint64_t>();
        } catch (const Json::exception& ex) {
            throw ParseError(std::string("queryId: ") + ex.what());
        }
        const bool yes = answer_from_json(body.at("answer"));

        auto e = find(id);
        std::lock_guard lock(e->mutex);
        auto& st = e->state;
        if (!st.pending || *st.pending != qid)
            throw ConflictError("query " + std::to_string(qid) + " is not the active query" +
                                (st.pending ? " (active: " + std::to_string(*st.pending) + ")" : ""));
        const auto q = *st.session->next_query();
        try {
            st.session->apply(q, yes);
        } catch (const InconsistentConstraintError& ex) {
            throw ConflictError(ex.what());
        }
        st.pending.reset();
        e->log->append(answer_event(qid, q, yes));
        e->log->append(recommendation_event(st));
        st.events += 2;
        return status_of(st);
    }

    Json status(const std::string& id) {
        auto e = find(id);
        std::lock_guard lock(e->mutex);
        return status_of(e->state);
    }

    /// Full event log plus the answers in the format `solve --space` reads.
    Json export_session(const std::string& id) {
        auto e = find(id);
        std::lock_guard lock(e->mutex);
        return {{"id", id},
                {"events", e->log->events()},
                {"answers", answers_to_json(e->state.session->history())},
                {"status", status_of(e->state)}};
    }

    std::string export_csv(const std::string& id) {
        auto e = find(id);
        std::lock_guard lock(e->mutex);
        return trace_csv(e->state.session->strategy(), e->state.session->mmr_trace());
    }

private:
    struct Entry {
        std::mutex mutex;
        SessionState state;
        std::unique_ptr<SessionLog> log;
    };

    static Json status_of(SessionState& st) {
        const auto& s = *st.session;
        auto out = result_to_json(st.problem.schema, s.current());
        out["id"] = st.id;
        out["name"] = st.problem.name;
        out["strategy"] = to_string(s.strategy());
        out["queryCount"] = s.query_count();
        out["trace"] = s.mmr_trace();
        out["done"] = !st.pending && st.done();
        out["termination"] = to_json(st.termination);
        return out;
    }

    std::shared_ptr<Entry> find(const std::string& id) const {
        std::lock_guard registry(registry_mutex_);
        const auto it = sessions_.find(id);
        if (it == sessions_.end()) throw NotFoundError("unknown session '" + id + "'");
        return it->second;
    }

    std::string next_id() {
        char buf[32];
        std::snprintf(buf, sizeof buf, "s%06llu", static_cast<unsigned long long>(++counter_));
        return buf;
    }

    void load_existing() {
        std::vector<std::filesystem::path> files;
        for (const auto& f : std::filesystem::directory_iterator(dir_))
            if (f.path().extension() == ".jsonl") files.push_back(f.path());
        std::sort(files.begin(), files.end());
        for (const auto& path : files) {
            const auto stem = path.stem().string();
            if (stem.size() > 1 && stem[0] == 's')
                counter_ = std::max<std::uint64_t>(counter_, std::strtoull(stem.c_str() + 1, nullptr, 10));
            try {
                auto log = std::make_unique<SessionLog>(path);
                log->repair();
                auto st = replay_session(read_file(path.string()));
                if (!st) {
                    load_errors_.push_back(path.string() + ": empty log");
                    continue;
                }
                auto entry = std::make_shared<Entry>();
                entry->state = std::move(*st);
                entry->log = std::move(log);
                sessions_[entry->state.id] = entry;
            } catch (const std::exception& ex) {
                load_errors_.push_back(path.string() + ": " + ex.what());
            }
        }
    }

    std::filesystem::path dir_;
    mutable std::mutex registry_mutex_;
    std::map<std::string, std::shared_ptr<Entry>> sessions_;
    std::uint64_t counter_ = 0;
    std::vector<std::string> load_errors_;
};

namespace detail {

inline void send_json(httplib::Response& res, int status, const Json& body) {
    res.status = status;
    res.set_content(body.dump() + "\n", "application/json");
}

inline Json error_body(const std::exception& e) {
    Json out{{"error", e.what()}};
    if (const auto* v = dynamic_cast<const ValidationError*>(&e)) out["violations"] = v->violations();
    return out;
}

/// Runs f, mapping library errors to HTTP status codes.
template <class F>
void guarded(httplib::Response& res, F&& f) {
    try {
        f();
    } catch (const NotFoundError& e) {
        send_json(res, 404, error_body(e));
    } catch (const ConflictError& e) {
        send_json(res, 409, error_body(e));
    } catch (const ParseError& e) {
        send_json(res, 400, error_body(e));
    } catch (const ValidationError& e) {
        send_json(res, 400, error_body(e));
    } catch (const Error& e) {
        send_json(res, 400, error_body(e));
    } catch (const std::exception& e) {
        send_json(res, 500, error_body(e));
    }
}

inline Json body_json(const httplib::Request& req) { return parse_json(req.body, "request body"); }

} // namespace detail

/// Registers the session API on `server`:
///   POST /sessions                  create
///   GET  /sessions                  list
///   GET  /sessions/{id}/query       active query (issued on first read)
///   POST /sessions/{id}/answer      {"queryId", "answer"}
///   GET  /sessions/{id}/status
///   GET  /sessions/{id}/export      JSON; ?format=csv for the MMR trace
inline void install_routes(httplib::Server& server, Workbench& wb) {
    using namespace detail;
    server.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
    server.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) {
        res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
        res.set_header("Access-Control-Allow-Headers", "Content-Type");
        res.status = 204;
    });
    server.Get("/health", [](const httplib::Request&, httplib::Response& res) { send_json(res, 200, {{"ok", true}}); });
    server.Post("/sessions", [&wb](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] { send_json(res, 201, wb.create(body_json(req))); });
    });
    server.Get("/sessions", [&wb](const httplib::Request&, httplib::Response& res) {
        guarded(res, [&] { send_json(res, 200, wb.list()); });
    });
    server.Get(R"(/sessions/([^/]+)/query)", [&wb](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] { send_json(res, 200, wb.query(req.matches[1])); });
    });
    server.Post(R"(/sessions/([^/]+)/answer)", [&wb](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] { send_json(res, 200, wb.answer(req.matches[1], body_json(req))); });
    });
    server.Get(R"(/sessions/([^/]+)/status)", [&wb](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] { send_json(res, 200, wb.status(req.matches[1])); });
    });
    server.Get(R"(/sessions/([^/]+)/export)", [&wb](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            if (req.get_param_value("format") == "csv") {
                res.set_content(wb.export_csv(req.matches[1]), "text/csv");
            } else {
                send_json(res, 200, wb.export_session(req.matches[1]));
            }
        });
    });
}

} // namespace gaimr
