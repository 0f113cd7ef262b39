#include "gaimr/problem_io.hpp"
#include "gaimr/service.hpp"
#include "gaimr/simulation.hpp"

#include <CLI11.hpp>

#include <csignal>
#include <cstdio>
#include <iostream>
#include <random>

using namespace gaimr;

namespace {

httplib::Server* running_server = nullptr;

void stop_server(int) {
    if (running_server) running_server->stop();
}

void print_violations(const ValidationError& e) {
    std::cerr << "error: validation failed\n";
    for (const auto& v : e.violations()) std::cerr << "  " << v << "\n";
}

int validate_cmd(const std::string& path) {
    const auto doc = load_problem(path);
    const auto s = doc.structure();
    std::cout << "ok: " << s->attribute_count() << " attributes, " << s->factor_count() << " factors, "
              << parameter_count(*s) << " parameters, ";
    if (doc.feasibility.is_catalog())
        std::cout << "catalog of " << doc.feasibility.items().size() << " items\n";
    else
        std::cout << doc.feasibility.nogoods().size() << " nogoods\n";
    return 0;
}

int solve_cmd(const std::string& path, const std::string& space_path) {
    const auto doc = load_problem(path);
    const auto s = doc.structure();
    auto space = doc.space(s);
    if (!space_path.empty()) apply_answers(space, answers_from_json(parse_json(read_file(space_path), space_path)));
    LocalRegretTables tables;
    RegretEngine engine(space, tables);
    const auto r = doc.feasibility.is_catalog() ? engine.db_minimax(doc.feasibility.items())
                                                : engine.minimax_regret(doc.feasibility);
    std::cout << canonical_dump(result_to_json(doc.schema, r));
    return 0;
}

struct ElicitOptions {
    std::string problem;
    std::string strategy = "AB+LB";
    bool simulate = false;
    std::uint64_t seed = 0;
    std::size_t max_queries = 100;
    double threshold = 0.0;
    std::string answers_out;
};

int elicit_cmd(const ElicitOptions& o) {
    const auto doc = load_problem(o.problem);
    const auto s = doc.structure();
    const auto strategy = parse_strategy(o.strategy);
    Session session(doc.space(s), doc.feasibility, strategy, derive_seed(o.seed, 1));
    const Termination stop{o.threshold, o.max_queries};

    if (o.simulate) {
        std::mt19937_64 rng(derive_seed(o.seed, 0));
        const auto truth = sample_true_utility(session.space(), rng);
        run_session(session, [&](const Query& q) { return simulate_answer(truth, q); }, stop);
    } else {
        while (!session.done(stop)) {
            const auto q = *session.next_query();
            std::cerr << "\n[" << session.query_count() + 1 << "] MMR " << session.current().value << "\n"
                      << render(*s, q) << "\n(y/n/q) > " << std::flush;
            std::string line;
            if (!std::getline(std::cin, line) || line == "q") break;
            if (line != "y" && line != "n") {
                std::cerr << "answer y, n or q\n";
                continue;
            }
            session.apply(q, line == "y");
        }
        std::cerr << "\nrecommendation:\n" << canonical_dump(result_to_json(doc.schema, session.current()));
    }
    if (!o.answers_out.empty()) write_file(o.answers_out, canonical_dump(answers_to_json(session.history())));
    std::cout << trace_csv(strategy, session.mmr_trace());
    return 0;
}

int experiment_cmd(const std::string& path, unsigned threads, const std::string& out) {
    auto spec = experiment_from_json(parse_json(read_file(path), path));
    if (threads) spec.threads = threads;
    const auto csv = to_csv(run_experiment(spec));
    if (out.empty())
        std::cout << csv;
    else
        write_file(out, csv);
    return 0;
}

int generate_cmd(const std::string& name, std::uint64_t seed, bool with_prior) {
    auto doc = generate_problem(preset(name, seed));
    if (with_prior) {
        std::mt19937_64 rng(derive_seed(seed, 0));
        doc.priors = sample_prior(*doc.structure(), PriorSpec{}, rng);
    }
    std::cout << canonical_dump(to_json(doc));
    return 0;
}

int serve_cmd(const std::string& host, int port, const std::string& data_dir) {
    Workbench wb(data_dir.empty() ? default_data_dir() : std::filesystem::path(data_dir));
    for (const auto& e : wb.load_errors()) std::cerr << "warning: skipped " << e << "\n";
    httplib::Server server;
    install_routes(server, wb);
    if (port == 0) port = server.bind_to_any_port(host);
    else if (!server.bind_to_port(host, port)) throw Error("cannot bind " + host + ":" + std::to_string(port));
    running_server = &server;
    std::signal(SIGINT, stop_server);
    std::signal(SIGTERM, stop_server);
    std::cerr << "serving on http://" << host << ":" << port << " (data: " << wb.data_dir().string() << ")\n";
    server.listen_after_bind();
    running_server = nullptr;
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Minimax-regret preference elicitation over GAI utilities"};
    app.require_subcommand(1);

    std::string problem;
    auto* validate = app.add_subcommand("validate", "Check a problem file and report every violation");
    validate->add_option("problem", problem, "Problem JSON")->required();

    std::string space_path;
    auto* solve = app.add_subcommand("solve", "Print x*, witness and MMR");
    solve->add_option("problem", problem, "Problem JSON")->required();
    solve->add_option("--space", space_path, "Answers file to apply before solving");

    ElicitOptions eo;
    auto* elicit = app.add_subcommand("elicit", "Run an elicitation session and print its MMR trace as CSV");
    elicit->add_option("problem", eo.problem, "Problem JSON")->required();
    elicit->add_option("--strategy", eo.strategy, "LC, LC(LB), LB, LC+LB, AB+LB, AB+LC+LB or random")
        ->capture_default_str();
    elicit->add_flag("--simulate", eo.simulate, "Answer with a simulated user drawn from the prior");
    elicit->add_option("--seed", eo.seed, "Seed for the simulated user and query tie-breaks")->capture_default_str();
    elicit->add_option("--max-queries", eo.max_queries, "Query budget")->capture_default_str();
    elicit->add_option("--threshold", eo.threshold, "Stop once MMR is at or below this value")->capture_default_str();
    elicit->add_option("--answers-out", eo.answers_out, "Write the answers to this file");

    std::string spec_path, out_path;
    unsigned threads = 0;
    auto* experiment = app.add_subcommand("experiment", "Run a simulation experiment and print the CSV");
    experiment->add_option("spec", spec_path, "Experiment spec JSON")->required();
    experiment->add_option("--threads", threads, "Worker threads (default: hardware concurrency)");
    experiment->add_option("--out", out_path, "Write the CSV here instead of stdout");

    std::string preset_name;
    std::uint64_t gen_seed = 1;
    auto* generate = app.add_subcommand("generate", "Print a synthetic problem from a preset");
    generate->add_option("preset", preset_name, "apartment-shape, car-rental-shape or ten-attribute")->required();
    generate->add_option("--seed", gen_seed, "Generator seed")->capture_default_str();
    bool with_prior = false;
    generate->add_flag("--sample-prior", with_prior, "Include interval priors drawn like the experiments do");

    std::string host = "127.0.0.1", data_dir;
    int port = 8080;
    auto* serve = app.add_subcommand("serve", "Serve the HTTP session API");
    serve->add_option("--port", port, "Port (0 picks a free one)")->capture_default_str();
    serve->add_option("--host", host, "Bind address")->capture_default_str();
    serve->add_option("--data-dir", data_dir, "Session log directory (default: $GAIMR_DATA_DIR or ./gaimr-data)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*validate) return validate_cmd(problem);
        if (*solve) return solve_cmd(problem, space_path);
        if (*elicit) return elicit_cmd(eo);
        if (*experiment) return experiment_cmd(spec_path, threads, out_path);
        if (*generate) return generate_cmd(preset_name, gen_seed, with_prior);
        if (*serve) return serve_cmd(host, port, data_dir);
    } catch (const ValidationError& e) {
        print_violations(e);
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
