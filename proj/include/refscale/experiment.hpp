#pragma once

// Manifest-driven experiments. A manifest is a YAML mapping
//
//   kind: index
//   system: ../systems/shift_toeplitz.yaml   # or a list of files
//   params: {s: [0, 2], phi: [[], [1]], K: [32, 64], rank_tol: 1e-8}
//   expect:
//     - {path: /results/0/index, equals: -1}
//     - {path: /summary/max_error, at_most: 1e-12}
//     - {path: /results/0/defect/0, approx: 6.283185307179586, tol: 1e-10}
//
// Paths are relative to the manifest's directory. Reports are ordered JSON
// with no timestamps or absolute paths, so reruns are byte-identical.

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace refscale {

using Json = nlohmann::ordered_json;

enum ExitCode : int {
    exit_pass = 0,
    exit_expectation_failed = 1,
    exit_input_error = 2,
    exit_ambiguous = 3,
};

/// Known kinds, in the order they are documented.
const std::vector<std::string>& experiment_kinds();

struct Expectation {
    enum class Op { equals, approx, at_least, at_most };
    std::string path;  // JSON pointer into the report
    Op op = Op::equals;
    Json value;
    double tol = 0.0;
    int line = 0;
};

struct ExperimentManifest {
    std::string kind;
    std::string name;                   // file stem, or the kind for direct runs
    std::filesystem::path base_dir;     // resolves relative paths
    std::optional<int> n;               // manifold dimension when no system fixes it
    std::vector<std::string> systems;   // as written
    Json params = Json::object();
    std::map<std::string, int> param_lines;
    std::vector<Expectation> expect;
    std::optional<std::string> output;  // output directory, as written
    bool allow_ambiguous = false;
};

/// Throws ParseError with line and field diagnostics.
ExperimentManifest parse_manifest(const std::string& text, const std::filesystem::path& base_dir,
                                  const std::string& name = "manifest");
ExperimentManifest load_manifest(const std::filesystem::path& file);

struct DataTable {
    std::string file;  // relative file name
    std::string content;
};

struct RunResult {
    int exit_code = exit_pass;
    Json report;
    std::vector<DataTable> tables;
    std::vector<std::string> failures;  // failed expectations
    std::string diagnostic;             // input error or ambiguity message
};

/// Never throws for bad input; errors become exit_input_error with a diagnostic.
RunResult run(const ExperimentManifest& manifest);

/// Writes report.json and the data tables into dir (created if needed).
void write_outputs(const RunResult& result, const std::filesystem::path& dir);

/// Canonical text of a report (two-space indent, trailing newline).
std::string dump_report(const Json& report);

/// Runs every *.yaml manifest of dir in parallel. Results are logged in name
/// order; with out_root each manifest writes to out_root / name. The exit code
/// is the most severe one: input error, then ambiguity, then failure.
int run_suite(const std::filesystem::path& dir, const std::optional<std::filesystem::path>& out_root,
              std::ostream& log);

}  // namespace refscale
