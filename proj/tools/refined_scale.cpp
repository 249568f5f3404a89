// refined-scale: runs one experiment from a manifest or from flags, or a
// directory of manifests with --suite.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>

#include "refscale/errors.hpp"
#include "refscale/experiment.hpp"
#include "refscale/slowly_varying.hpp"

namespace fs = std::filesystem;
using refscale::Json;

namespace {

struct Flags {
    std::string manifest;
    std::vector<std::string> systems;
    std::vector<double> s;
    std::vector<std::string> phi;
    std::vector<int> K;
    std::optional<double> sigma, rank_tol, tol, decay, t_max;
    double log_exponent = 0.0;
    bool zero_mean = false;
    std::optional<int> rho, n, cutoff_band;
    std::vector<std::string> rhs_csv;
    std::vector<double> lambdas, powers;
    std::string output;
    bool quiet = false;
};

void add_flags(CLI::App* sub, Flags& f) {
    sub->add_option("--manifest", f.manifest, "Experiment manifest (YAML)");
    sub->add_option("--system", f.systems, "System definition file (repeatable)");
    sub->add_option("--s", f.s, "Smoothness index s (repeatable)");
    // one tuple per occurrence, taken verbatim ("[]" would otherwise read as an empty list)
    sub->add_option("--phi", "Exponent tuple of phi, e.g. \"[0.5, 0.7]\" (repeatable)")
        ->type_name("TUPLE")
        ->expected(1)
        ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll)
        ->each([&f](const std::string& v) { f.phi.push_back(v); });
    sub->add_option("--K", f.K, "Band limit (repeatable)");
    sub->add_option("--sigma", f.sigma, "Weakening sigma > 0 of the a priori estimate");
    sub->add_option("--rank-tol", f.rank_tol, "Relative rank tolerance");
    sub->add_option("--tol", f.tol, "Solvability or slow-variation tolerance");
    sub->add_option("--rho", f.rho, "Derivative order for embedding and continuity");
    sub->add_option("--n", f.n, "Torus dimension when no system is given");
    sub->add_option("--decay", f.decay, "Data field <xi>^-a L1^r: the exponent a");
    sub->add_option("--log-exponent", f.log_exponent, "Data field: the exponent r");
    sub->add_flag("--zero-mean", f.zero_mean, "Data field: drop the zero mode");
    sub->add_option("--rhs-csv", f.rhs_csv, "Data component from CSV (repeatable, one per unknown)");
    sub->add_option("--cutoff-band", f.cutoff_band, "Band of the localizing bump");
    sub->add_option("--lambda", f.lambdas, "Dilation for slow-variation checks (repeatable)");
    sub->add_option("--power", f.powers, "Check t^power for slow variation (repeatable)");
    sub->add_option("--t-max", f.t_max, "Top of the slow-variation grid");
    sub->add_option("--output", f.output, "Write report.json and CSV tables into this directory");
    sub->add_flag("--quiet", f.quiet, "Do not print the report");
}

Json phi_tuple(const std::string& text) {
    const auto phi = refscale::parse_phi(text);
    Json out = Json::array();
    for (double r : phi.exponents()) out.push_back(r);
    return out;
}

refscale::ExperimentManifest from_flags(const std::string& kind, const Flags& f) {
    refscale::ExperimentManifest m;
    m.kind = kind;
    m.name = kind;
    m.base_dir = fs::current_path();
    m.systems = f.systems;
    m.n = f.n;
    Json& p = m.params;
    if (!f.s.empty()) p["s"] = f.s.size() == 1 ? Json(f.s.front()) : Json(f.s);
    if (!f.phi.empty()) {
        Json list = Json::array();
        for (const auto& t : f.phi) list.push_back(phi_tuple(t));
        p["phi"] = list;
    }
    if (!f.K.empty()) p["K"] = f.K.size() == 1 ? Json(f.K.front()) : Json(f.K);
    if (f.sigma) p["sigma"] = *f.sigma;
    if (f.rank_tol) p["rank_tol"] = *f.rank_tol;
    if (f.tol) p["tol"] = *f.tol;
    if (f.rho) p["rho"] = *f.rho;
    if (f.cutoff_band) p["cutoff_band"] = *f.cutoff_band;
    if (!f.lambdas.empty()) p["lambdas"] = f.lambdas;
    if (!f.powers.empty()) p["powers"] = f.powers;
    if (f.t_max) p["t_max"] = *f.t_max;

    Json field = Json::object();
    if (f.decay) field = {{"decay", *f.decay}, {"r", f.log_exponent}, {"zero_mean", f.zero_mean}};
    if (kind == "smoothness" || kind == "continuity") {
        if (f.decay) p["field"] = field;
    }
    if (kind == "solve" || kind == "lift") {
        Json comps = Json::array();
        for (const auto& file : f.rhs_csv) comps.push_back({{"csv", file}});
        if (comps.empty() && f.decay) comps.push_back(field);
        if (!comps.empty()) {
            p["rhs"] = kind == "lift" ? comps : Json::array({Json{{"name", "rhs"}, {"components", comps}}});
        }
    }
    return m;
}

int finish(const refscale::RunResult& r, const std::string& output, bool quiet) {
    if (!output.empty()) refscale::write_outputs(r, output);
    if (!quiet) std::cout << refscale::dump_report(r.report);
    for (const auto& f : r.failures) std::cerr << "expectation failed: " << f << "\n";
    if (!r.diagnostic.empty()) std::cerr << "refined-scale: " << r.diagnostic << "\n";
    return r.exit_code;
}

int run_kind(const std::string& kind, const Flags& f) {
    refscale::ExperimentManifest m;
    std::string output = f.output;
    if (!f.manifest.empty()) {
        try {
            m = refscale::load_manifest(f.manifest);
        } catch (const std::exception& ex) {
            std::cerr << "refined-scale: " << ex.what() << "\n";
            return refscale::exit_input_error;
        }
        if (kind != "run" && m.kind != kind) {
            std::cerr << "refined-scale: manifest kind '" << m.kind << "' does not match subcommand '" << kind << "'\n";
            return refscale::exit_input_error;
        }
        if (output.empty() && m.output) output = (m.base_dir / *m.output).string();
    } else {
        if (kind == "run") {
            std::cerr << "refined-scale: run needs --manifest\n";
            return refscale::exit_input_error;
        }
        m = from_flags(kind, f);
    }
    return finish(refscale::run(m), output, f.quiet);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Refined Sobolev scale experiments on the torus"};
    app.require_subcommand(0, 1);

    std::string suite;
    std::string suite_out;
    app.add_option("--suite", suite, "Run every manifest of a directory");
    app.add_option("--suite-output", suite_out, "Per-manifest output directories go under this one");

    Flags flags;
    std::vector<std::pair<CLI::App*, std::string>> subs;
    for (const auto& kind : refscale::experiment_kinds()) {
        auto* sub = app.add_subcommand(kind, "Run a " + kind + " experiment");
        add_flags(sub, flags);
        subs.emplace_back(sub, kind);
    }
    auto* alias = app.add_subcommand("check-ellipticity", "Same as ellipticity");
    add_flags(alias, flags);
    subs.emplace_back(alias, "ellipticity");
    auto* generic = app.add_subcommand("run", "Run a manifest of any kind");
    add_flags(generic, flags);
    subs.emplace_back(generic, "run");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : refscale::exit_input_error;
    }

    if (!suite.empty()) {
        if (app.get_subcommands().size() > 0) {
            std::cerr << "refined-scale: --suite takes no subcommand\n";
            return refscale::exit_input_error;
        }
        std::optional<fs::path> out;
        if (!suite_out.empty()) out = suite_out;
        return refscale::run_suite(suite, out, std::cout);
    }
    for (const auto& [sub, kind] : subs) {
        if (sub->parsed()) {
            try {
                return run_kind(kind, flags);
            } catch (const std::exception& ex) {
                std::cerr << "refined-scale: " << ex.what() << "\n";
                return refscale::exit_input_error;
            }
        }
    }
    std::cerr << app.help();
    return refscale::exit_input_error;
}
