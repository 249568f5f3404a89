#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "refscale/errors.hpp"
#include "refscale/experiment.hpp"
#include "refscale/fredholm.hpp"
#include "refscale/standard_systems.hpp"
#include "refscale/system_io.hpp"

using namespace refscale;
namespace fs = std::filesystem;

namespace {

const fs::path EXP = EXPERIMENTS_DIR;

double max_diff(const SparseMatrixC& a, const SparseMatrixC& b) {
    return (Eigen::MatrixXcd(a) - Eigen::MatrixXcd(b)).cwiseAbs().maxCoeff();
}

int run_binary(const std::string& args) {
    const std::string cmd = std::string(REFINED_SCALE_BIN) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("system files reproduce the built-in systems") {
    const std::vector<std::pair<std::string, PdoSystem>> cases{
        {"shift_toeplitz.yaml", PdoSystem::scalar(systems::shift_toeplitz())},
        {"minus_laplacian_1d.yaml", PdoSystem::scalar(systems::minus_laplacian(1))},
        {"one_minus_laplacian_2d.yaml", PdoSystem::scalar(systems::one_minus_laplacian(2))},
        {"perturbed_helmholtz_2d.yaml", systems::perturbed_helmholtz(0.1)},
        {"partial1_2d.yaml", PdoSystem::scalar(systems::partial(2, 0))},
        {"cauchy_riemann.yaml", systems::cauchy_riemann()},
    };
    for (const auto& [file, builtin] : cases) {
        CAPTURE(file);
        const auto A = load_system((EXP / "systems" / file).string());
        CHECK(A.column_orders() == builtin.column_orders());
        CHECK(max_diff(galerkin_section(A, 6, 7), galerkin_section(builtin, 6, 7)) <= 1e-15);
    }
}

TEST_CASE("system file diagnostics") {
    CHECK_THROWS_AS(load_system((EXP / "systems" / "nope.yaml").string()), ParseError);
    try {
        (void)parse_system("n: 1\np: 1\nentries:\n  - row: 0\n    col: 3\n    terms: []\n");
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("line 4") != std::string::npos);
    }
    CHECK_THROWS_AS(parse_system("n: 1\np: 1\nentries:\n  - {row: 0, col: 0, terms: [{degree: 0}]}\n"), ParseError);
    CHECK_THROWS_AS(parse_system("n: 3\np: 1\nentries: []\n"), ParseError);
    CHECK_THROWS_AS(parse_system("n: [1\n"), ParseError);
    CHECK(describe_orders(systems::cauchy_riemann()).find("m: 1 1") != std::string::npos);
}

TEST_CASE("manifest examples") {
    auto toeplitz = run(load_manifest(EXP / "cli" / "toeplitz_index.yaml"));
    CHECK(toeplitz.exit_code == exit_pass);
    CHECK(toeplitz.report["results"][0]["index"] == -1);
    CHECK(toeplitz.report["results"][1]["index"] == -1);

    auto d1 = run(load_manifest(EXP / "cli" / "partial1_ellipticity.yaml"));
    CHECK(d1.exit_code == exit_pass);
    CHECK(d1.report["results"][0]["elliptic"] == false);

    auto missing = run(load_manifest(EXP / "cli" / "missing_system.yaml"));
    CHECK(missing.exit_code == exit_input_error);
    CHECK(missing.diagnostic.find("no_such_system.yaml") != std::string::npos);

    auto bad = run(load_manifest(EXP / "cli" / "bad_field.yaml"));
    CHECK(bad.exit_code == exit_input_error);
    CHECK(bad.diagnostic.find("line 4") != std::string::npos);
    CHECK(bad.diagnostic.find("params.K") != std::string::npos);
}

TEST_CASE("reports are byte-identical across runs") {
    const auto m = load_manifest(EXP / "cli" / "toeplitz_index.yaml");
    CHECK(dump_report(run(m).report) == dump_report(run(m).report));
    const auto seeded = load_manifest(EXP / "acceptance" / "c05_norm_identity.yaml");
    const auto a = run(seeded);
    CHECK(a.report["summary"]["seed"] == 20240531);
    CHECK(dump_report(a.report) == dump_report(run(seeded).report));
}

TEST_CASE("manifest validation and exit codes") {
    const fs::path base = EXP / "cli";
    CHECK_THROWS_AS(parse_manifest("kind: wobble\n", base), ParseError);
    CHECK_THROWS_AS(parse_manifest("kind: index\nsytem: x.yaml\n", base), ParseError);
    CHECK_THROWS_AS(parse_manifest("kind: index\nexpect:\n  - {path: /a, equals: 1, at_most: 2}\n", base), ParseError);
    CHECK_THROWS_AS(parse_manifest("kind: index\nexpect:\n  - {path: /a, approx: 1}\n", base), ParseError);

    const std::string wrong =
        "kind: index\nsystem: ../systems/shift_toeplitz.yaml\nparams: {K: [16]}\n"
        "expect:\n  - {path: /results/0/index, equals: 0}\n  - {path: /results/9/index, equals: -1}\n";
    auto r = run(parse_manifest(wrong, base));
    CHECK(r.exit_code == exit_expectation_failed);
    CHECK(r.failures.size() == 2);

    // -Laplacian singular values k^2/<k>^2 are 0.8, 0.9, ...: a threshold between them is ambiguous
    const std::string ambiguous =
        "kind: index\nsystem: ../systems/minus_laplacian_1d.yaml\nparams: {K: [8], rank_tol: 0.85}\n";
    CHECK(run(parse_manifest(ambiguous, base)).exit_code == exit_ambiguous);
    CHECK(run(parse_manifest(ambiguous + "allow_ambiguous: true\n", base)).exit_code == exit_pass);
    const std::string ambiguous_solve =
        "kind: solve\nsystem: ../systems/minus_laplacian_1d.yaml\n"
        "params: {K: 8, rank_tol: 0.85, rhs: [{components: [{modes: [[1, 1, 0]]}]}]}\n";
    CHECK(run(parse_manifest(ambiguous_solve, base)).exit_code == exit_ambiguous);

    const std::string wrong_components =
        "kind: solve\nsystem: ../systems/cauchy_riemann.yaml\nparams: {K: 4, rhs: [{components: [{zero: true}]}]}\n";
    CHECK(run(parse_manifest(wrong_components, base)).exit_code == exit_input_error);
}

TEST_CASE("command line binary") {
    CHECK(run_binary("index --manifest " + (EXP / "cli" / "toeplitz_index.yaml").string()) == 0);
    CHECK(run_binary("check-ellipticity --manifest " + (EXP / "cli" / "partial1_ellipticity.yaml").string()) == 0);
    CHECK(run_binary("run --manifest " + (EXP / "cli" / "missing_system.yaml").string()) == 2);
    CHECK(run_binary("solve --manifest " + (EXP / "cli" / "toeplitz_index.yaml").string()) == 2);
    CHECK(run_binary("index --manifest /nonexistent.yaml") == 2);
    CHECK(run_binary("index --K 16") == 2);  // no system

    const fs::path out = fs::temp_directory_path() / "refined_scale_cli_test";
    fs::remove_all(out);
    const std::string direct = "index --system " + (EXP / "systems" / "shift_toeplitz.yaml").string() +
                               " --K 32 --K 64 --s 0 --s 2 --phi \"[]\" --phi \"[0.5, 0.7]\" --quiet --output ";
    REQUIRE(run_binary(direct + (out / "a").string()) == 0);
    REQUIRE(run_binary(direct + (out / "b").string()) == 0);
    CHECK(slurp(out / "a" / "report.json") == slurp(out / "b" / "report.json"));
    CHECK(slurp(out / "a" / "singular_values.csv") == slurp(out / "b" / "singular_values.csv"));
    const auto report = Json::parse(slurp(out / "a" / "report.json"));
    CHECK(report["results"].size() == 8);
    for (const auto& row : report["results"]) CHECK(row["index"] == -1);
    CHECK(report["params"]["phi"][1][1] == 0.7);
    fs::remove_all(out);
}
