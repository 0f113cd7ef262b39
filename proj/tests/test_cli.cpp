#include "gaimr/problem_io.hpp"
#include "gaimr/service.hpp"
#include "gaimr/simulation.hpp"

#include <gtest/gtest.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <random>
#include <sys/wait.h>

using namespace gaimr;
namespace fs = std::filesystem;

#if !defined(GAIMR_CLI_PATH) || !defined(GAIMR_PROBLEMS_DIR)
#error "GAIMR_CLI_PATH and GAIMR_PROBLEMS_DIR must be defined"
#endif

namespace {

struct Run {
    int status;
    std::string out;
};

/// Runs the CLI with stderr discarded.
Run cli(const std::string& args) {
    const auto cmd = std::string(GAIMR_CLI_PATH) + " " + args + " 2>/dev/null";
    FILE* p = popen(cmd.c_str(), "r");
    if (!p) throw std::runtime_error("popen failed");
    std::string out;
    std::array<char, 4096> buf;
    for (std::size_t n; (n = std::fread(buf.data(), 1, buf.size(), p)) > 0;) out.append(buf.data(), n);
    const int rc = pclose(p);
    return {WIFEXITED(rc) ? WEXITSTATUS(rc) : -1, out};
}

std::string problem(const std::string& name) { return std::string(GAIMR_PROBLEMS_DIR) + "/" + name; }

} // namespace

TEST(Cli, ValidateReportsBrokenFiles) {
    EXPECT_EQ(cli("validate " + problem("laptop.json")).status, 0);
    EXPECT_NE(cli("validate " + problem("broken.json")).status, 0);
    EXPECT_NE(cli("validate /nonexistent.json").status, 0);
    EXPECT_NE(cli("frobnicate").status, 0);
}

TEST(Cli, SolveSingletonHasZeroRegret) {
    const auto r = cli("solve " + problem("singleton.json"));
    ASSERT_EQ(r.status, 0);
    const auto j = Json::parse(r.out);
    EXPECT_EQ(j.at("mmr").get<double>(), 0.0);
    // blue+large is forbidden; green+large (1.2 + 2) beats blue+small (3)
    EXPECT_EQ(j.at("xStar"), Json::array({1, 1}));
}

TEST(Cli, ElicitIsDeterministic) {
    for (const char* strategy : {"AB+LB", "LC(LB)", "random"}) {
        const auto args = "elicit " + problem("laptop.json") + " --simulate --seed 7 --strategy '" + strategy + "'";
        const auto a = cli(args), b = cli(args);
        ASSERT_EQ(a.status, 0);
        EXPECT_EQ(a.out, b.out);
        EXPECT_EQ(a.out.rfind(std::string("strategy,queryIndex,meanMMR,stddev,runs\n") + strategy + ",0,", 0), 0u);
    }
    EXPECT_NE(cli("elicit " + problem("laptop.json") + " --simulate --seed 7").out,
              cli("elicit " + problem("laptop.json") + " --simulate --seed 8").out);
    EXPECT_NE(cli("elicit " + problem("laptop.json") + " --simulate --strategy XX").status, 0);
}

TEST(Cli, ExperimentIsDeterministic) {
    const auto a = cli("experiment " + problem("quick-experiment.json") + " --threads 3");
    const auto b = cli("experiment " + problem("quick-experiment.json") + " --threads 1");
    ASSERT_EQ(a.status, 0);
    EXPECT_EQ(a.out, b.out);
    EXPECT_EQ(std::count(a.out.begin(), a.out.end(), '\n'), 1 + 3 * 31);
}

TEST(Cli, GenerateMatchesLibrary) {
    const auto r = cli("generate ten-attribute --seed 4");
    ASSERT_EQ(r.status, 0);
    EXPECT_EQ(r.out, canonical_dump(to_json(generate_problem(preset("ten-attribute", 4)))));
}

TEST(Cli, SolveMatchesApiStatus) {
    const auto dir = fs::temp_directory_path() / ("gaimr-cli-parity-" + std::to_string(::getpid()));
    fs::remove_all(dir);
    for (const char* name : {"laptop.json", "apartments.json", "ten-attribute.json"}) {
        Workbench wb(dir);
        const auto doc_json = parse_json(read_file(problem(name)), name);
        const auto id = wb.create({{"problem", doc_json}, {"strategy", "AB+LC+LB"}}).at("id").get<std::string>();
        const auto doc = problem_from_json(doc_json);
        std::mt19937_64 rng(5);
        const auto truth = sample_true_utility(doc.space(doc.structure()), rng);
        for (int k = 0; k < 9; ++k) {
            const auto q = wb.query(id);
            if (q.at("done").get<bool>()) break;
            wb.answer(id, {{"queryId", q.at("queryId")}, {"answer", simulate_answer(truth, query_from_json(q.at("query")))}});
        }
        const auto answers = dir / "answers.json";
        write_file(answers.string(), canonical_dump(wb.export_session(id).at("answers")));
        const auto status = wb.status(id);
        const auto r = cli("solve " + problem(name) + " --space " + answers.string());
        ASSERT_EQ(r.status, 0) << name;
        const auto solved = Json::parse(r.out);
        EXPECT_EQ(solved.at("mmr").get<double>(), status.at("mmr").get<double>()) << name;
        EXPECT_EQ(solved.at("xStar"), status.at("xStar")) << name;
        EXPECT_EQ(solved.at("witness"), status.at("witness")) << name;
    }
    fs::remove_all(dir);
}
