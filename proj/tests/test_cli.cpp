#include <catch2/catch_amalgamated.hpp>

#include "phaseflow/experiments.hpp"

using namespace phaseflow;

namespace {

std::filesystem::path repo_root() {
    // tests run from build/tests; configs live in the source tree
    auto p = std::filesystem::current_path();
    while (!std::filesystem::exists(p / "configs") && p.has_parent_path() &&
           p != p.parent_path())
        p = p.parent_path();
    return p;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

ExperimentConfig config_from_string(const std::string& text) {
    ExperimentConfig c;
    c.raw = json::parse(text);
    return c;
}

}  // namespace

TEST_CASE("CSV escaping follows RFC 4180") {
    auto tmp = std::filesystem::temp_directory_path() / "pf_csv_test.csv";
    {
        CsvWriter csv(tmp, {"a", "b"});
        csv.write_row({"plain", "with,comma"});
        csv.write_row({"with\"quote", "with\nnewline"});
    }
    auto text = slurp(tmp);
    CHECK(text == "a,b\nplain,\"with,comma\"\n\"with\"\"quote\",\"with\nnewline\"\n");
    std::filesystem::remove(tmp);
}

TEST_CASE("validation catches bad configs") {
    auto missing = config_from_string(R"({"experiment": "functional"})");
    auto v1 = validate(missing);
    REQUIRE(!v1.empty());
    CHECK(v1[0].rfind("symbol:", 0) == 0);

    auto bad_eps = config_from_string(
        R"({"experiment": "gradient-check",
            "symbol": {"name": "ring_zero"},
            "numeric": {"epsilon_ladder": [0.1, 0.0]}})");
    bool found = false;
    for (const auto& v : validate(bad_eps))
        if (v.find("epsilon_ladder") != std::string::npos) found = true;
    CHECK(found);

    auto bad_name = config_from_string(
        R"({"experiment": "functional", "symbol": {"name": "not_a_symbol"}})");
    found = false;
    for (const auto& v : validate(bad_name))
        if (v.rfind("symbol:", 0) == 0) found = true;
    CHECK(found);

    auto unknown = config_from_string(R"({"experiment": "launch-missiles"})");
    found = false;
    for (const auto& v : validate(unknown))
        if (v.find("unknown name") != std::string::npos) found = true;
    CHECK(found);
}

TEST_CASE("shipped sample configs validate cleanly") {
    auto dir = repo_root() / "configs";
    REQUIRE(std::filesystem::exists(dir));
    int checked = 0;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.path().extension() != ".json") continue;
        auto cfg = ExperimentConfig::from_file(entry.path());
        INFO(entry.path().filename().string());
        CHECK(validate(cfg).empty());
        ++checked;
    }
    CHECK(checked >= 12);
}

TEST_CASE("config JSON round-trips unchanged") {
    auto path = repo_root() / "configs" / "functional_ring.json";
    auto cfg = ExperimentConfig::from_file(path);
    auto text = cfg.raw.dump(2);
    auto reparsed = json::parse(text);
    CHECK(reparsed == cfg.raw);
}

TEST_CASE("functional run on the constant symbol: I = 0 and pass") {
    auto cfg = config_from_string(R"({
        "experiment": "functional",
        "symbol": {"name": "constant_one"},
        "manifold": {"n": 1, "R": 5.0, "grid_shape": [51, 51]},
        "numeric": {"eps0": 0.2, "rungs": 4},
        "output": {"directory": "cli_out/constant"}})");
    CHECK(run(cfg) == 0);
    auto summary = json::parse(slurp("cli_out/constant/summary.json"));
    CHECK(summary["schema"] == 1);
    CHECK(summary["pass"] == true);
    CHECK(summary["results"]["I"] == 0.0);
    // tail bound and grid parameters always accompany functional values
    CHECK(summary["results"].contains("tail_bound"));
    CHECK(summary["results"].contains("grid_shape"));
    CHECK(summary["results"].contains("R"));
    // CSV exists with the documented header
    auto csv = slurp("cli_out/constant/results.csv");
    CHECK(csv.rfind("symbol,manifold_id,epsilon,value,tail_bound,grid_shape,R\n", 0) == 0);
}

TEST_CASE("reruns produce byte-identical CSV") {
    auto text = R"({
        "experiment": "gradient-check",
        "symbol": {"name": "shifted_ring", "params": {"b": 0.3}},
        "manifold": {"n": 1, "R": 5.0, "grid_shape": [201, 201], "tube_radius": 1.8},
        "numeric": {"generators": 2, "epsilon_ladder": [0.1], "seed": 99,
                     "fd_h": 0.001, "tolerance": 0.01},
        "output": {"directory": "cli_out/det_run"}})";
    auto cfg = config_from_string(text);
    run(cfg);
    auto first = slurp("cli_out/det_run/results.csv");
    run(cfg);
    auto second = slurp("cli_out/det_run/results.csv");
    CHECK(first == second);
    CHECK(!first.empty());
}

TEST_CASE("zeroset experiment aggregates chart fields and checks") {
    auto cfg = config_from_string(R"({
        "experiment": "zeroset",
        "symbol": {"name": "torus_codim2"},
        "chart": {"kind": "torus", "m1": 32, "m2": 32},
        "delta_p": {"name": "monomial4", "params": {"k1": 1, "k2": 1}},
        "output": {"directory": "cli_out/zeroset"}})");
    CHECK(run(cfg) == 0);
    auto summary = json::parse(slurp("cli_out/zeroset/summary.json"));
    CHECK(summary["pass"] == true);
    CHECK(summary["results"].contains("liouville_pointwise"));
    CHECK(summary["results"].contains("correction_residual"));
    CHECK(summary["results"].contains("levi_fixed"));
    CHECK(std::filesystem::exists("cli_out/zeroset/lambda.csv"));
    CHECK(std::filesystem::exists("cli_out/zeroset/deltaf.csv"));
}

TEST_CASE("manifold serialization round trip") {
    // weight graph
    auto lg = IRManifold::weight_graph(1, 4.0, {11, 11},
                                       std::make_shared<weights::Quadratic>(1, 0.2));
    save_manifold(lg, "cli_out/graph.json");
    auto lg2 = load_manifold("cli_out/graph.json");
    CHECK(lg2.rep == IRManifold::Rep::weight_graph);
    CHECK(lg2.phi->id() == lg.phi->id());
    CHECK(lg2.R == lg.R);

    // flow grid with history: nodes and frames round trip bitwise
    auto f = GeneratorFunction::from_basis(1, {"bump:0.8,0.3,0.1"}, {0.7});
    auto mf = flow(to_flow_grid(IRManifold::real_phase_space(1, 4.0, {11, 11})), f, 0.2, 0.05,
                   2.0);
    save_manifold(mf, "cli_out/flow.json");
    auto mf2 = load_manifold("cli_out/flow.json");
    REQUIRE(mf2.nodes.size() == mf.nodes.size());
    REQUIRE(mf2.frames.size() == mf.frames.size());
    for (std::size_t i = 0; i < mf.nodes.size(); ++i) CHECK(mf2.nodes[i] == mf.nodes[i]);
    for (std::size_t i = 0; i < mf.frames.size(); ++i) CHECK(mf2.frames[i] == mf.frames[i]);
    REQUIRE(mf2.history.size() == 1);
    CHECK(mf2.history[0].f.terms[0].basis.id == "bump:0.8,0.3,0.1");
    CHECK(mf2.history[0].t_final == 0.2);
}

TEST_CASE("index experiment passes end to end") {
    auto cfg = config_from_string(R"({
        "experiment": "index-1d",
        "numeric": {"epsilon_ladder": [0.1, 0.05, 0.025, 0.0125], "nodes": 2001,
                     "box": 6.0, "tolerance": 0.002},
        "output": {"directory": "cli_out/index"}})");
    CHECK(run(cfg) == 0);
    auto csv = slurp("cli_out/index/results.csv");
    CHECK(csv.find("x^2") != std::string::npos);
}
