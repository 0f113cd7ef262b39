#include "gaimr/service.hpp"
#include "gaimr/session_store.hpp"
#include "gaimr/simulation.hpp"

#include <gtest/gtest.h>

#include <atomic>
#include <filesystem>
#include <random>
#include <thread>

using namespace gaimr;
namespace fs = std::filesystem;

#ifndef GAIMR_PROBLEMS_DIR
#error "GAIMR_PROBLEMS_DIR must point at the sample problems"
#endif

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        static std::atomic<int> counter{0};
        path = fs::temp_directory_path() /
               ("gaimr-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

Json problem_json(const std::string& name) {
    return parse_json(read_file(std::string(GAIMR_PROBLEMS_DIR) + "/" + name), name);
}

/// Truthful answers from a utility drawn inside the problem's prior.
struct Oracle {
    GaiModel truth;
    Oracle(const Json& problem, std::uint64_t seed) : truth(draw(problem, seed)) {}
    static GaiModel draw(const Json& problem, std::uint64_t seed) {
        const auto doc = problem_from_json(problem);
        std::mt19937_64 rng(seed);
        return sample_true_utility(doc.space(doc.structure()), rng);
    }
    bool operator()(const Json& query) const { return simulate_answer(truth, query_from_json(query)); }
};

Json create_body(const std::string& problem, const std::string& strategy, std::uint64_t seed) {
    return {{"problem", problem_json(problem)}, {"strategy", strategy}, {"seed", seed}};
}

/// Answers up to `steps` queries through the Workbench interface.
void drive(Workbench& wb, const std::string& id, const Oracle& oracle, int steps) {
    for (int k = 0; k < steps; ++k) {
        const auto q = wb.query(id);
        if (q.at("done").get<bool>()) return;
        wb.answer(id, {{"queryId", q.at("queryId")}, {"answer", oracle(q.at("query"))}});
    }
}

Json comparable(Json status) {
    status.erase("id");
    return status;
}

} // namespace

TEST(SessionLog, ReplayMatchesLiveSession) {
    TempDir dir;
    std::string id;
    Json live;
    {
        Workbench wb(dir.path);
        id = wb.create(create_body("laptop.json", "AB+LC+LB", 3)).at("id");
        drive(wb, id, Oracle(problem_json("laptop.json"), 1), 12);
        wb.query(id);
        live = wb.status(id);
    }
    Workbench reloaded(dir.path);
    EXPECT_TRUE(reloaded.load_errors().empty());
    EXPECT_EQ(reloaded.status(id), live);
    const auto q = reloaded.query(id);
    EXPECT_EQ(q.at("queryId").get<std::uint64_t>(), 13u);
    EXPECT_GT(live.at("queryCount").get<std::size_t>(), 0u);
}

TEST(SessionLog, EveryPrefixReplaysToAValidState) {
    TempDir dir;
    Workbench wb(dir.path);
    const auto id = wb.create(create_body("laptop.json", "AB+LB", 5)).at("id").get<std::string>();
    drive(wb, id, Oracle(problem_json("laptop.json"), 2), 10);
    const auto trace = wb.status(id).at("trace").get<std::vector<double>>();
    const auto text = read_file((dir.path / (id + ".jsonl")).string());
    const auto first_newline = text.find('\n');
    ASSERT_NE(first_newline, std::string::npos);

    std::size_t checked = 0;
    for (std::size_t len = 0; len <= text.size(); ++len) {
        // the created record is one long line; sample it sparsely
        if (len < first_newline && len % 97 != 0) continue;
        const auto st = replay_session(text.substr(0, len));
        if (len <= first_newline) {
            EXPECT_FALSE(st) << len;
            continue;
        }
        ASSERT_TRUE(st) << len;
        const auto answered = st->session->query_count();
        ASSERT_LT(answered, trace.size());
        EXPECT_EQ(st->session->current().value, trace[answered]) << len;
        EXPECT_EQ(st->session->mmr_trace(),
                  std::vector<double>(trace.begin(), trace.begin() + static_cast<long>(answered) + 1));
        ++checked;
    }
    EXPECT_GT(checked, 500u);
}

TEST(SessionLog, TruncatedTailIsRepairedOnLoad) {
    TempDir dir;
    std::string id;
    Json before;
    {
        Workbench wb(dir.path);
        id = wb.create(create_body("laptop.json", "LB", 1)).at("id");
        drive(wb, id, Oracle(problem_json("laptop.json"), 3), 4);
        before = wb.status(id);
    }
    const auto path = dir.path / (id + ".jsonl");
    {
        std::ofstream out(path, std::ios::app | std::ios::binary);
        out << R"({"event":"answer","queryId":5,"que)";
    }
    Workbench wb(dir.path);
    EXPECT_EQ(wb.status(id), before);
    drive(wb, id, Oracle(problem_json("laptop.json"), 3), 2);
    EXPECT_EQ(wb.status(id).at("queryCount").get<std::size_t>(), 6u);
    Workbench again(dir.path);
    EXPECT_TRUE(again.load_errors().empty());
    EXPECT_EQ(again.status(id), wb.status(id));
}

TEST(SessionLog, CorruptLogsAreReportedNotLoaded) {
    TempDir dir;
    write_file((dir.path / "s000001.jsonl").string(), "{\"event\":\"answer\"}\n");
    write_file((dir.path / "s000002.jsonl").string(), "not json\n");
    Workbench wb(dir.path);
    EXPECT_EQ(wb.load_errors().size(), 2u);
    EXPECT_EQ(wb.list().at("sessions").size(), 0u);
    const auto id = wb.create(create_body("singleton.json", "LB", 0)).at("id").get<std::string>();
    EXPECT_EQ(id, "s000003");
}

TEST(Workbench, StaleAndUnknownRequests) {
    TempDir dir;
    Workbench wb(dir.path);
    const auto id = wb.create(create_body("laptop.json", "AB+LB", 0)).at("id").get<std::string>();
    EXPECT_THROW(wb.status("nope"), NotFoundError);
    EXPECT_THROW(wb.answer(id, {{"queryId", 1}, {"answer", "yes"}}), ConflictError);
    const auto q1 = wb.query(id);
    EXPECT_EQ(wb.query(id), q1);
    EXPECT_THROW(wb.answer(id, {{"queryId", 2}, {"answer", "yes"}}), ConflictError);
    wb.answer(id, {{"queryId", 1}, {"answer", "no"}});
    EXPECT_THROW(wb.answer(id, {{"queryId", 1}, {"answer", "no"}}), ConflictError);
    EXPECT_EQ(wb.query(id).at("queryId").get<std::uint64_t>(), 2u);
    EXPECT_THROW(wb.answer(id, {{"queryId", 2}, {"answer", "perhaps"}}), ParseError);
    EXPECT_THROW(wb.create({{"strategy", "LB"}}), ParseError);
    EXPECT_THROW(wb.create({{"problem", problem_json("broken.json")}}), ValidationError);
    EXPECT_THROW(wb.create({{"problem", problem_json("laptop.json")}, {"strategy", "LX"}}), ParseError);
}

TEST(Workbench, SingletonSessionIsDoneImmediately) {
    TempDir dir;
    Workbench wb(dir.path);
    const auto status = wb.create(create_body("singleton.json", "AB+LB", 0));
    EXPECT_EQ(status.at("mmr").get<double>(), 0.0);
    EXPECT_TRUE(status.at("done").get<bool>());
    EXPECT_TRUE(wb.query(status.at("id")).at("done").get<bool>());
}

TEST(Workbench, TerminationBudget) {
    TempDir dir;
    Workbench wb(dir.path);
    auto body = create_body("laptop.json", "AB+LB", 0);
    body["termination"] = {{"maxQueries", 3}};
    const auto id = wb.create(body).at("id").get<std::string>();
    drive(wb, id, Oracle(problem_json("laptop.json"), 8), 10);
    const auto s = wb.status(id);
    EXPECT_EQ(s.at("queryCount").get<std::size_t>(), 3u);
    EXPECT_TRUE(s.at("done").get<bool>());
}

// ---- over HTTP ----

namespace {

struct LiveServer {
    TempDir dir;
    Workbench wb{dir.path};
    httplib::Server server;
    std::thread thread;
    int port = 0;

    LiveServer() {
        install_routes(server, wb);
        port = server.bind_to_any_port("127.0.0.1");
        thread = std::thread([this] { server.listen_after_bind(); });
        server.wait_until_ready();
    }
    ~LiveServer() {
        server.stop();
        thread.join();
    }
    httplib::Client client() const {
        httplib::Client c("127.0.0.1", port);
        c.set_read_timeout(30, 0);
        return c;
    }
};

Json body_of(const httplib::Result& r) { return Json::parse(r->body); }

Json post(httplib::Client& c, const std::string& path, const Json& body) {
    auto r = c.Post(path, body.dump(), "application/json");
    if (!r) throw std::runtime_error("request failed");
    auto j = body_of(r);
    j["_status"] = r->status;
    return j;
}

} // namespace

TEST(HttpApi, CreateQueryAnswerStatus) {
    LiveServer live;
    auto c = live.client();
    const Oracle oracle(problem_json("laptop.json"), 4);
    const auto created = post(c, "/sessions", create_body("laptop.json", "AB+LC+LB", 2));
    ASSERT_EQ(created.at("_status").get<int>(), 201);
    const auto id = created.at("id").get<std::string>();
    double previous = created.at("mmr");
    std::set<std::string> types;
    for (int k = 0; k < 15; ++k) {
        auto r = c.Get("/sessions/" + id + "/query");
        ASSERT_EQ(r->status, 200);
        const auto q = body_of(r);
        if (q.at("done").get<bool>()) break;
        EXPECT_FALSE(q.at("text").get<std::string>().empty());
        types.insert(q.at("query").at("type").get<std::string>());
        const auto s = post(c, "/sessions/" + id + "/answer",
                            {{"queryId", q.at("queryId")}, {"answer", oracle(q.at("query")) ? "yes" : "no"}});
        ASSERT_EQ(s.at("_status").get<int>(), 200);
        EXPECT_LE(s.at("mmr").get<double>(), previous + 1e-9);
        previous = s.at("mmr");
    }
    EXPECT_FALSE(types.empty());

    auto status = c.Get("/sessions/" + id + "/status");
    ASSERT_EQ(status->status, 200);
    EXPECT_EQ(body_of(status).at("mmr").get<double>(), previous);
    EXPECT_EQ(body_of(status).at("trace").back().get<double>(), previous);

    auto list = c.Get("/sessions");
    EXPECT_EQ(body_of(list).at("sessions").size(), 1u);

    auto csv = c.Get("/sessions/" + id + "/export?format=csv");
    ASSERT_EQ(csv->status, 200);
    EXPECT_EQ(csv->body.rfind("strategy,queryIndex,meanMMR,stddev,runs\nAB+LC+LB,0,", 0), 0u);

    auto exported = body_of(c.Get("/sessions/" + id + "/export"));
    EXPECT_EQ(exported.at("events").front().at("event"), "created");
    EXPECT_EQ(exported.at("answers").at("answers").size(), body_of(status).at("queryCount").get<std::size_t>());
}

TEST(HttpApi, ErrorStatuses) {
    LiveServer live;
    auto c = live.client();
    EXPECT_EQ(c.Get("/sessions/s999999/status")->status, 404);
    EXPECT_EQ(c.Get("/sessions/s999999/query")->status, 404);
    EXPECT_EQ(post(c, "/sessions/s999999/answer", {{"queryId", 1}, {"answer", "yes"}}).at("_status"), 404);

    auto bad = c.Post("/sessions", "{not json", "application/json");
    EXPECT_EQ(bad->status, 400);
    const auto invalid = post(c, "/sessions", {{"problem", problem_json("broken.json")}});
    EXPECT_EQ(invalid.at("_status"), 400);
    EXPECT_GE(invalid.at("violations").size(), 3u);

    const auto id = post(c, "/sessions", create_body("laptop.json", "LB", 0)).at("id").get<std::string>();
    const auto q = body_of(c.Get("/sessions/" + id + "/query"));
    const auto stale = q.at("queryId").get<std::uint64_t>() + 7;
    const auto conflict = post(c, "/sessions/" + id + "/answer", {{"queryId", stale}, {"answer", "yes"}});
    EXPECT_EQ(conflict.at("_status"), 409);
    EXPECT_NE(conflict.at("error").get<std::string>().find("not the active query"), std::string::npos);
}

TEST(HttpApi, RacingAnswersToOneQueryAcceptExactlyOne) {
    LiveServer live;
    auto c = live.client();
    const auto id = post(c, "/sessions", create_body("laptop.json", "AB+LB", 0)).at("id").get<std::string>();
    const auto q = body_of(c.Get("/sessions/" + id + "/query"));
    std::atomic<int> ok{0}, conflict{0};
    std::vector<std::thread> threads;
    for (int t = 0; t < 6; ++t)
        threads.emplace_back([&] {
            auto ct = live.client();
            const auto r = post(ct, "/sessions/" + id + "/answer", {{"queryId", q.at("queryId")}, {"answer", "yes"}});
            (r.at("_status") == 200 ? ok : conflict)++;
        });
    for (auto& t : threads) t.join();
    EXPECT_EQ(ok.load(), 1);
    EXPECT_EQ(conflict.load(), 5);
    EXPECT_EQ(body_of(c.Get("/sessions/" + id + "/status")).at("queryCount"), 1);
}

TEST(HttpApi, InterleavedSessionsMatchSequentialRuns) {
    struct Plan {
        std::string problem, strategy;
        std::uint64_t seed, truth;
    };
    const std::vector<Plan> plans{{"laptop.json", "AB+LB", 1, 11},
                                  {"laptop.json", "LC(LB)", 2, 12},
                                  {"apartments.json", "AB+LC+LB", 3, 13},
                                  {"laptop.json", "AB+LB", 1, 14}};
    const int steps = 8;

    // sequential reference, one Workbench per session
    std::vector<Json> expected;
    for (const auto& p : plans) {
        TempDir dir;
        Workbench wb(dir.path);
        const auto id = wb.create(create_body(p.problem, p.strategy, p.seed)).at("id").get<std::string>();
        drive(wb, id, Oracle(problem_json(p.problem), p.truth), steps);
        expected.push_back(comparable(wb.status(id)));
        EXPECT_GT(expected.back().at("queryCount").get<std::size_t>(), 0u);
    }

    LiveServer live;
    std::vector<std::string> ids;
    {
        auto c = live.client();
        for (const auto& p : plans)
            ids.push_back(post(c, "/sessions", create_body(p.problem, p.strategy, p.seed)).at("id"));
    }
    std::vector<std::thread> threads;
    for (std::size_t k = 0; k < plans.size(); ++k)
        threads.emplace_back([&, k] {
            auto c = live.client();
            const Oracle oracle(problem_json(plans[k].problem), plans[k].truth);
            for (int s = 0; s < steps; ++s) {
                const auto q = body_of(c.Get("/sessions/" + ids[k] + "/query"));
                if (q.at("done").get<bool>()) break;
                post(c, "/sessions/" + ids[k] + "/answer", {{"queryId", q.at("queryId")}, {"answer", oracle(q.at("query"))}});
                std::this_thread::yield();
            }
        });
    for (auto& t : threads) t.join();

    auto c = live.client();
    for (std::size_t k = 0; k < plans.size(); ++k)
        EXPECT_EQ(comparable(body_of(c.Get("/sessions/" + ids[k] + "/status"))), expected[k]) << k;
}

TEST(DataDir, EnvironmentOverride) {
    TempDir dir;
    ::setenv("GAIMR_DATA_DIR", dir.path.c_str(), 1);
    EXPECT_EQ(default_data_dir(), dir.path);
    ::unsetenv("GAIMR_DATA_DIR");
    EXPECT_EQ(default_data_dir(), fs::path("gaimr-data"));
}
