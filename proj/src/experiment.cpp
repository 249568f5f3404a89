#include "refscale/experiment.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <future>
#include <limits>
#include <sstream>

#include "refscale/errors.hpp"
#include "refscale/fredholm.hpp"
#include "refscale/pdo.hpp"
#include "refscale/refined_spaces.hpp"
#include "refscale/regularity.hpp"
#include "refscale/slowly_varying.hpp"
#include "refscale/system_io.hpp"

namespace refscale {

namespace fs = std::filesystem;

const std::vector<std::string>& experiment_kinds() {
    static const std::vector<std::string> kinds{"ellipticity", "index",      "index-invariance", "solve",
                                                "apriori",     "embedding",  "smoothness",       "lift",
                                                "continuity",  "slow-variation", "norm-identity"};
    return kinds;
}

namespace {

// ---------------------------------------------------------------------------
// YAML -> JSON

[[noreturn]] void fail_at(const YAML::Node& node, const std::string& what) {
    std::ostringstream os;
    if (node.Mark().line >= 0) os << "line " << node.Mark().line + 1 << ": ";
    os << what;
    throw ParseError(os.str());
}

Json scalar_to_json(const YAML::Node& node) {
    const std::string& s = node.Scalar();
    if (node.Tag() == "!") return s;  // quoted
    if (s == "true") return true;
    if (s == "false") return false;
    if (s == "null" || s == "~") return nullptr;
    long long i = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), i);
    if (ec == std::errc() && p == s.data() + s.size()) return i;
    try {
        std::size_t used = 0;
        const double d = std::stod(s, &used);
        if (used == s.size()) return d;
    } catch (const std::exception&) {
    }
    return s;
}

Json to_json(const YAML::Node& node) {
    switch (node.Type()) {
        case YAML::NodeType::Scalar:
            return scalar_to_json(node);
        case YAML::NodeType::Sequence: {
            Json out = Json::array();
            for (const auto& item : node) out.push_back(to_json(item));
            return out;
        }
        case YAML::NodeType::Map: {
            Json out = Json::object();
            for (const auto& kv : node) out[kv.first.as<std::string>()] = to_json(kv.second);
            return out;
        }
        default:
            return nullptr;
    }
}

// inf and nan have no JSON literal
Json num(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    return x;
}

Json nums(const std::vector<double>& xs) {
    Json out = Json::array();
    for (double x : xs) out.push_back(num(x));
    return out;
}

std::optional<double> as_number(const Json& j) {
    if (j.is_number()) return j.get<double>();
    if (j.is_string()) {
        const auto& s = j.get_ref<const std::string&>();
        if (s == "inf") return std::numeric_limits<double>::infinity();
        if (s == "-inf") return -std::numeric_limits<double>::infinity();
    }
    return std::nullopt;
}

Json phi_json(const SlowlyVaryingFunction& phi) {
    Json out = Json::array();
    for (double r : phi.exponents()) out.push_back(r);
    return out;
}

// ---------------------------------------------------------------------------
// Parameter access

class Params {
public:
    explicit Params(const ExperimentManifest& m) : m_(m) {}

    [[nodiscard]] bool has(const std::string& key) const { return m_.params.contains(key); }

    [[noreturn]] void fail(const std::string& key, const std::string& what) const {
        std::ostringstream os;
        if (auto it = m_.param_lines.find(key); it != m_.param_lines.end()) os << "line " << it->second << ": ";
        os << "params." << key << ": " << what;
        throw ParseError(os.str());
    }

    [[nodiscard]] const Json& raw(const std::string& key) const {
        if (!has(key)) fail(key, "missing");
        return m_.params.at(key);
    }

    [[nodiscard]] double number(const std::string& key, std::optional<double> fallback = std::nullopt) const {
        if (!has(key)) {
            if (fallback) return *fallback;
            fail(key, "missing");
        }
        auto v = as_number(raw(key));
        if (!v) fail(key, "expected a number");
        return *v;
    }

    [[nodiscard]] int integer(const std::string& key, std::optional<int> fallback = std::nullopt) const {
        if (!has(key)) {
            if (fallback) return *fallback;
            fail(key, "missing");
        }
        const Json& j = raw(key);
        if (!j.is_number_integer()) fail(key, "expected an integer");
        return j.get<int>();
    }

    [[nodiscard]] bool flag(const std::string& key, bool fallback) const {
        if (!has(key)) return fallback;
        if (!raw(key).is_boolean()) fail(key, "expected true or false");
        return raw(key).get<bool>();
    }

    [[nodiscard]] std::vector<double> numbers(const std::string& key,
                                              std::optional<std::vector<double>> fallback = std::nullopt) const {
        if (!has(key)) {
            if (fallback) return *fallback;
            fail(key, "missing");
        }
        const Json& j = raw(key);
        std::vector<double> out;
        if (j.is_array()) {
            for (const auto& x : j) {
                auto v = as_number(x);
                if (!v) fail(key, "expected a list of numbers");
                out.push_back(*v);
            }
        } else if (auto v = as_number(j)) {
            out.push_back(*v);
        } else {
            fail(key, "expected a number or a list of numbers");
        }
        if (out.empty()) fail(key, "list must be nonempty");
        return out;
    }

    [[nodiscard]] std::vector<int> integers(const std::string& key,
                                            std::optional<std::vector<int>> fallback = std::nullopt) const {
        if (!has(key)) {
            if (fallback) return *fallback;
            fail(key, "missing");
        }
        const Json& j = raw(key);
        std::vector<int> out;
        if (j.is_array()) {
            for (const auto& x : j) {
                if (!x.is_number_integer()) fail(key, "expected a list of integers");
                out.push_back(x.get<int>());
            }
        } else if (j.is_number_integer()) {
            out.push_back(j.get<int>());
        } else {
            fail(key, "expected an integer or a list of integers");
        }
        if (out.empty()) fail(key, "list must be nonempty");
        return out;
    }

    /// One exponent tuple ([0.5, 0.7], [] for the constant one) or a list of tuples.
    [[nodiscard]] std::vector<SlowlyVaryingFunction> phis(const std::string& key) const {
        if (!has(key)) return {SlowlyVaryingFunction{}};
        const Json& j = raw(key);
        if (!j.is_array()) fail(key, "expected an exponent tuple or a list of tuples");
        const bool nested = !j.empty() && std::all_of(j.begin(), j.end(), [](const Json& x) { return x.is_array(); });
        std::vector<SlowlyVaryingFunction> out;
        auto tuple = [&](const Json& t) {
            std::vector<double> r;
            for (const auto& x : t) {
                if (!x.is_number()) fail(key, "exponents must be numbers");
                r.push_back(x.get<double>());
            }
            return make_standard_phi(std::move(r));
        };
        if (nested) {
            for (const auto& t : j) out.push_back(tuple(t));
        } else {
            out.push_back(tuple(j));
        }
        return out;
    }

    [[nodiscard]] SlowlyVaryingFunction phi(const std::string& key) const {
        auto all = phis(key);
        if (all.size() != 1) fail(key, "expected a single exponent tuple");
        return all.front();
    }

    [[nodiscard]] fs::path path(const std::string& file) const { return m_.base_dir / file; }

private:
    const ExperimentManifest& m_;
};

// ---------------------------------------------------------------------------
// Data fields

Mode json_mode(const Json& j, int n, const Params& P, const std::string& key) {
    if (n == 1 && j.is_number_integer()) return {j.get<int>(), 0};
    if (j.is_array() && j.size() == std::size_t(n) &&
        std::all_of(j.begin(), j.end(), [](const Json& x) { return x.is_number_integer(); })) {
        return {j[0].get<int>(), n == 2 ? j[1].get<int>() : 0};
    }
    P.fail(key, "mode must have " + std::to_string(n) + " integer component(s)");
}

// {decay: a, r: 0, zero_mean: false} | {modes: [[eta, re, im], ...]} | {csv: file} | {zero: true}
FourierField make_field(const Json& spec, int n, int K, const Params& P, const std::string& key) {
    const ManifoldSpec M(n);
    if (!spec.is_object()) P.fail(key, "field must be a mapping");
    const int band = spec.contains("K") ? spec["K"].get<int>() : K;
    if (spec.contains("decay")) {
        const double r = spec.contains("r") ? spec["r"].get<double>() : 0.0;
        const bool zero_mean = spec.contains("zero_mean") && spec["zero_mean"].get<bool>();
        return power_decay_field(M, band, spec["decay"].get<double>(), r, zero_mean);
    }
    if (spec.contains("modes")) {
        FourierField u(M, band);
        for (const auto& t : spec["modes"]) {
            if (!t.is_array() || t.size() != 3) P.fail(key, "modes entries are [eta, re, im]");
            const Mode xi = json_mode(t[0], n, P, key);
            if (!u.contains(xi)) P.fail(key, "mode outside the band");
            u[xi] += Complex(t[1].get<double>(), t[2].get<double>());
        }
        return u;
    }
    if (spec.contains("csv")) {
        const fs::path file = P.path(spec["csv"].get<std::string>());
        std::ifstream in(file);
        if (!in) P.fail(key, "cannot open '" + spec["csv"].get<std::string>() + "'");
        return read_csv(in, M);
    }
    if (spec.contains("zero")) return FourierField(M, band);
    P.fail(key, "field needs one of decay, modes, csv, zero");
}

std::vector<FourierField> make_components(const Json& list, int n, int p, int K, const Params& P,
                                          const std::string& key) {
    if (!list.is_array() || list.size() != std::size_t(p)) {
        P.fail(key, "expected " + std::to_string(p) + " component field(s)");
    }
    std::vector<FourierField> out;
    for (const auto& c : list) out.push_back(make_field(c, n, K, P, key));
    return out;
}

Json estimate_json(const SmoothnessEstimate& e) {
    return {{"s_star", num(e.s_star)},     {"r_star", num(e.r_star)},       {"model", e.model},
            {"residual", num(e.residual)}, {"s_power", num(e.s_power)},     {"s_log", num(e.s_log)},
            {"r_log", num(e.r_log)},       {"valid", e.valid}};
}

std::string shells_csv(const std::vector<SmoothnessEstimate>& estimates) {
    std::ostringstream os;
    os.precision(17);
    os << "component,R,sum,in_window\n";
    for (std::size_t k = 0; k < estimates.size(); ++k) {
        for (const auto& sh : estimates[k].shells) os << k << "," << sh.R << "," << sh.sum << "," << sh.in_window << "\n";
    }
    return os.str();
}

std::string field_csv(const FourierField& u) {
    std::ostringstream os;
    os.precision(17);
    write_csv(os, u);
    return os.str();
}

// ---------------------------------------------------------------------------

struct Context {
    const ExperimentManifest& m;
    Params P;
    std::vector<PdoSystem> systems;
    Json results = Json::array();
    Json summary = Json::object();
    std::vector<DataTable> tables;
    bool ambiguous = false;

    explicit Context(const ExperimentManifest& manifest) : m(manifest), P(manifest) {}

    [[nodiscard]] int dim() const {
        if (!systems.empty()) return systems.front().dim();
        return m.n.value_or(1);
    }

    const PdoSystem& single_system() const {
        if (systems.size() != 1) throw ParseError("kind '" + m.kind + "' takes exactly one system file");
        return systems.front();
    }
};

void require_systems(const Context& c) {
    if (c.systems.empty()) throw ParseError("kind '" + c.m.kind + "' needs a system file");
}

void run_ellipticity(Context& c) {
    require_systems(c);
    for (std::size_t i = 0; i < c.systems.size(); ++i) {
        const auto& A = c.systems[i];
        const auto rep = petrovskii_check(A, default_x_grid(A.dim(), c.P.integer("x_per_axis", 16)),
                                          default_omega_grid(A.dim(), c.P.integer("angles", 256)),
                                          c.P.number("delta", 1e-8));
        c.results.push_back({{"system", c.m.systems[i]},
                             {"elliptic", rep.elliptic},
                             {"min_abs_det", num(rep.min_abs_det)},
                             {"argmin_x", {rep.argmin_x[0], rep.argmin_x[1]}},
                             {"argmin_omega", {rep.argmin_omega[0], rep.argmin_omega[1]}},
                             {"delta", rep.delta}});
    }
}

void run_index(Context& c) {
    require_systems(c);
    const auto s_list = c.P.numbers("s", std::vector<double>{0.0});
    const auto phi_list = c.P.phis("phi");
    const auto K_list = c.P.integers("K");
    const double rank_tol = c.P.number("rank_tol", 1e-8);
    std::ostringstream csv;
    csv.precision(17);
    csv << "system,s,phi,K,i,sigma\n";
    std::optional<int> first;
    bool agree = true;
    for (std::size_t i = 0; i < c.systems.size(); ++i) {
        for (double s : s_list) {
            for (const auto& phi : phi_list) {
                for (int K : K_list) {
                    const auto rep = fredholm_report(truncate(c.systems[i], K, s, phi), rank_tol);
                    c.ambiguous = c.ambiguous || rep.ambiguous;
                    if (!first) first = rep.index;
                    agree = agree && rep.index == *first;
                    c.results.push_back({{"system", c.m.systems[i]},
                                         {"s", s},
                                         {"phi", phi_json(phi)},
                                         {"K", K},
                                         {"dim_kernel", rep.dim_kernel},
                                         {"dim_cokernel", rep.dim_cokernel},
                                         {"index", rep.index},
                                         {"sigma_max", num(rep.sigma_max)},
                                         {"sigma_min_retained", num(rep.sigma_min_retained)},
                                         {"threshold", num(rep.threshold)},
                                         {"sigma_gap", num(rep.sigma_gap)},
                                         {"ambiguous", rep.ambiguous}});
                    for (std::size_t j = 0; j < rep.singular_values.size(); ++j) {
                        csv << c.m.systems[i] << "," << s << ",\"" << phi.to_string() << "\"," << K << "," << j << ","
                            << rep.singular_values[j] << "\n";
                    }
                }
            }
        }
    }
    c.summary["indices_agree"] = agree;
    c.summary["any_ambiguous"] = c.ambiguous;
    c.tables.push_back({"singular_values.csv", csv.str()});
}

void run_index_invariance(Context& c) {
    require_systems(c);
    std::vector<RefinedIndex> idx;
    if (c.P.has("indices")) {
        for (const auto& e : c.P.raw("indices")) {
            if (!e.is_object() || !e.contains("s")) c.P.fail("indices", "entries are {s, phi}");
            std::vector<double> r;
            if (e.contains("phi")) {
                for (const auto& x : e["phi"]) r.push_back(x.get<double>());
            }
            idx.push_back({e["s"].get<double>(), make_standard_phi(std::move(r))});
        }
        if (idx.empty()) c.P.fail("indices", "list must be nonempty");
    } else {
        for (double s : c.P.numbers("s", std::vector<double>{0.0})) {
            for (const auto& phi : c.P.phis("phi")) idx.push_back({s, phi});
        }
    }
    const auto K_list = c.P.integers("K");
    bool all_agree = true;
    bool all_stable = true;
    for (std::size_t i = 0; i < c.systems.size(); ++i) {
        const auto t = index_invariance_experiment(c.systems[i], idx, K_list, c.P.number("rank_tol", 1e-8));
        c.ambiguous = c.ambiguous || t.any_ambiguous;
        all_agree = all_agree && t.indices_agree;
        all_stable = all_stable && t.dims_stable;
        Json rows = Json::array();
        for (const auto& r : t.rows) {
            rows.push_back({{"s", r.s},
                            {"phi", phi_json(r.phi)},
                            {"K", r.K},
                            {"dim_kernel", r.dim_kernel},
                            {"dim_cokernel", r.dim_cokernel},
                            {"index", r.index},
                            {"sigma_gap", num(r.sigma_gap)},
                            {"ambiguous", r.ambiguous}});
        }
        c.results.push_back({{"system", c.m.systems[i]},
                             {"index", t.rows.empty() ? Json(nullptr) : Json(t.rows.front().index)},
                             {"indices_agree", t.indices_agree},
                             {"dims_stable", t.dims_stable},
                             {"any_ambiguous", t.any_ambiguous},
                             {"flags", t.flags},
                             {"rows", rows}});
    }
    c.summary["indices_agree"] = all_agree;
    c.summary["dims_stable"] = all_stable;
}

double max_abs(const Eigen::MatrixXcd& M) { return M.size() == 0 ? 0.0 : M.cwiseAbs().maxCoeff(); }

void run_solve(Context& c) {
    const auto& A = c.single_system();
    const int K = c.P.integer("K");
    const double s = c.P.number("s", 0.0);
    const auto phi = c.P.phi("phi");
    const double tol = c.P.number("tol", 1e-10);
    const auto G = truncate(A, K, s, phi);
    const auto rep = fredholm_report(G, c.P.number("rank_tol", 1e-8));
    if (rep.ambiguous) throw AmbiguousRank("sigma_gap " + std::to_string(rep.sigma_gap) + " below 1e3");

    c.summary["dim_kernel"] = rep.dim_kernel;
    c.summary["dim_cokernel"] = rep.dim_cokernel;
    c.summary["index"] = rep.index;
    c.summary["sigma_gap"] = num(rep.sigma_gap);

    if (c.P.flag("projectors", true)) {
        const auto pp = projectors(G, rep);
        const Eigen::MatrixXcd P = pp.P();
        const Eigen::MatrixXcd Pp = pp.P_plus();
        // mean subtraction on every component
        auto mean_projector = [&](Eigen::Index size) {
            Eigen::MatrixXcd M = Eigen::MatrixXcd::Identity(size, size);
            const auto N = Eigen::Index(band_size(A.dim(), K));
            const auto zero = Eigen::Index(band_index(A.dim(), K, {0, 0}));
            for (Eigen::Index k = 0; k < size / N; ++k) M(k * N + zero, k * N + zero) = 0.0;
            return M;
        };
        c.summary["projectors"] = {{"idempotence_P", num(max_abs(P * P - P))},
                                   {"idempotence_P_plus", num(max_abs(Pp * Pp - Pp))},
                                   {"mean_projector_distance_P", num(max_abs(P - mean_projector(P.rows())))},
                                   {"mean_projector_distance_P_plus", num(max_abs(Pp - mean_projector(Pp.rows())))},
                                   {"angle_kernel", num(pp.angle_kernel)},
                                   {"angle_cokernel", num(pp.angle_cokernel)},
                                   {"ill_conditioned", pp.ill_conditioned}};
    }

    const Json& cases = c.P.raw("rhs");
    if (!cases.is_array() || cases.empty()) c.P.fail("rhs", "expected a nonempty list of {name, components}");
    for (std::size_t i = 0; i < cases.size(); ++i) {
        const Json& cs = cases[i];
        if (!cs.is_object() || !cs.contains("components")) c.P.fail("rhs", "entries are {name, components}");
        const std::string name = cs.contains("name") ? cs["name"].get<std::string>() : "rhs" + std::to_string(i);
        const auto f = make_components(cs["components"], A.dim(), A.size(), K, c.P, "rhs");
        const auto out = solve(G, rep, f, tol);
        Json defect = Json::array();
        for (const auto& d : out.defect) defect.push_back(num(std::abs(d)));
        double data_norm = 0.0;
        for (const auto& fk : f) data_norm = std::hypot(data_norm, gamma_norm(fk));
        Json row{{"name", name},
                 {"solvable", out.solvable},
                 {"defect", defect},
                 {"data_norm", num(data_norm)}};
        if (out.solvable) {
            double u_norm = 0.0;
            for (const auto& uk : out.u) u_norm = std::hypot(u_norm, gamma_norm(uk));
            row["residual"] = num(out.residual);
            row["relative_residual"] = num(out.relative_residual);
            row["condition_number"] = num(out.condition_number);
            row["solution_gamma_norm"] = num(u_norm);
            for (std::size_t k = 0; k < out.u.size(); ++k) {
                c.tables.push_back({"u_" + name + "_" + std::to_string(k) + ".csv", field_csv(out.u[k])});
            }
        }
        c.results.push_back(row);
    }
}

void run_apriori(Context& c) {
    require_systems(c);
    const double s = c.P.number("s", 0.0);
    const auto phi = c.P.phi("phi");
    const double sigma = c.P.number("sigma", 1.0);
    const auto K_list = c.P.integers("K");
    for (std::size_t i = 0; i < c.systems.size(); ++i) {
        const auto rep = apriori_report(c.systems[i], s, phi, sigma, K_list);
        c.results.push_back({{"system", c.m.systems[i]},
                             {"s", s},
                             {"phi", phi_json(phi)},
                             {"sigma", sigma},
                             {"K", rep.K},
                             {"c_quad", nums(rep.c_quad)},
                             {"growth", nums(rep.growth)},
                             {"verdict", to_string(rep.verdict)}});
    }
}

void run_embedding(Context& c) {
    const int rho = c.P.integer("rho", 0);
    const ManifoldSpec M(c.dim());
    const auto K_list = c.P.has("K") ? c.P.integers("K") : std::vector<int>{};
    bool all_agree = true;
    std::ostringstream csv;
    csv.precision(17);
    csv << "phi,K,sup_derivative,norm,ratio\n";
    for (const auto& phi : c.P.phis("phi")) {
        const auto analytic = embedding_criterion(phi);
        const auto numeric = numeric_embedding_verdict(phi);
        const bool agree = analytic == numeric.verdict;
        all_agree = all_agree && agree;
        Json row{{"phi", phi_json(phi)},
                 {"criterion", to_string(analytic)},
                 {"numeric", to_string(numeric.verdict)},
                 {"decisive_level", numeric.decisive_level},
                 {"agree", agree}};
        if (!K_list.empty()) {
            const auto ratios = embedding_ratio_experiment(rho, phi, K_list, M);
            std::vector<double> r, growth;
            for (std::size_t j = 0; j < ratios.size(); ++j) {
                r.push_back(ratios[j].ratio);
                // relative growth per octave of K
                if (j > 0) {
                    const double octaves = std::log2(double(ratios[j].K) / ratios[j - 1].K);
                    growth.push_back(std::pow(ratios[j].ratio / ratios[j - 1].ratio, 1.0 / octaves) - 1.0);
                }
                csv << "\"" << phi.to_string() << "\"," << ratios[j].K << "," << ratios[j].sup_derivative << ","
                    << ratios[j].norm << "," << ratios[j].ratio << "\n";
            }
            row["K"] = K_list;
            row["ratios"] = nums(r);
            row["growth_per_octave"] = nums(growth);
        }
        c.results.push_back(row);
    }
    c.summary["all_agree"] = all_agree;
    if (!K_list.empty()) c.tables.push_back({"embedding_ratios.csv", csv.str()});
}

SmoothnessFitOptions fit_options(const Params& P) {
    SmoothnessFitOptions o;
    o.r_min = P.number("r_min", o.r_min);
    o.K_reference = P.integer("K_reference", o.K_reference);
    o.log_model_gain = P.number("log_model_gain", o.log_model_gain);
    o.max_residual = P.number("max_residual", o.max_residual);
    return o;
}

std::vector<Json> field_specs(const Params& P) {
    if (P.has("fields")) {
        const Json& j = P.raw("fields");
        if (!j.is_array() || j.empty()) P.fail("fields", "expected a nonempty list");
        return {j.begin(), j.end()};
    }
    return {P.raw("field")};
}

void run_smoothness(Context& c) {
    const int K = c.P.integer("K");
    const auto opt = fit_options(c.P);
    std::vector<SmoothnessEstimate> all;
    for (const auto& spec : field_specs(c.P)) {
        const auto u = make_field(spec, c.dim(), K, c.P, "field");
        auto e = smoothness_fit(u, opt);
        Json row = estimate_json(e);
        row["field"] = spec;
        c.results.push_back(row);
        all.push_back(std::move(e));
    }
    c.tables.push_back({"shells.csv", shells_csv(all)});
}

void run_lift(Context& c) {
    const auto& A = c.single_system();
    const int K = c.P.integer("K");
    const auto f = make_components(c.P.raw("rhs"), A.dim(), A.size(), K, c.P, "rhs");
    std::optional<CutoffFunction> chi;
    if (const int band = c.P.integer("cutoff_band", 0); band > 0) chi = CutoffFunction::bump(ManifoldSpec(A.dim()), band);
    const auto rep = lifting_experiment(A, f, c.P.number("s", 0.0), c.P.phi("phi"), K, chi, c.P.number("rank_tol", 1e-8));
    auto estimates = [](const std::vector<SmoothnessEstimate>& es) {
        Json out = Json::array();
        for (const auto& e : es) out.push_back(estimate_json(e));
        return out;
    };
    c.results.push_back({{"solvable", rep.solvable},
                         {"residual", num(rep.residual)},
                         {"column_orders", nums(rep.column_orders)},
                         {"s_star_f", num(rep.s_star_f)},
                         {"gaps", nums(rep.gaps)},
                         {"localized_gaps", nums(rep.localized_gaps)},
                         {"estimate_f", estimates(rep.estimate_f)},
                         {"estimate_u", estimates(rep.estimate_u)},
                         {"localized_f", estimates(rep.localized_f)},
                         {"localized_u", estimates(rep.localized_u)}});
    if (rep.solvable) {
        c.tables.push_back({"shells_f.csv", shells_csv(rep.estimate_f)});
        c.tables.push_back({"shells_u.csv", shells_csv(rep.estimate_u)});
    }
}

void run_continuity(Context& c) {
    const int K = c.P.integer("K");
    const int rho = c.P.integer("rho", 0);
    const auto phis = c.P.phis("phi");
    const auto specs = field_specs(c.P);
    for (std::size_t i = 0; i < specs.size(); ++i) {
        const auto u = make_field(specs[i], c.dim(), K, c.P, "field");
        for (const auto& phi : phis) {
            const auto rep = continuity_check(u, rho, phi);
            c.results.push_back({{"field", specs[i]},
                                 {"phi", phi_json(phi)},
                                 {"criterion", to_string(rep.criterion)},
                                 {"criterion_holds", rep.criterion_holds},
                                 {"membership_ok", rep.membership_ok},
                                 {"s_star", num(rep.estimate.s_star)},
                                 {"r_star", num(rep.estimate.r_star)},
                                 {"norms", nums(rep.norms)},
                                 {"sup_increments", nums(rep.sup_increments)},
                                 {"increment_slope", num(rep.increment_slope)},
                                 {"increments_decay", rep.increments_decay},
                                 {"certified", rep.certified},
                                 {"verdict", rep.verdict}});
        }
    }
    if (c.P.has("extremal_K")) {
        const auto Ks = c.P.integers("extremal_K");
        const auto phi = c.P.has("extremal_phi") ? c.P.phi("extremal_phi") : SlowlyVaryingFunction{};
        const auto ratios = embedding_ratio_experiment(rho, phi, Ks, ManifoldSpec(c.dim()));
        std::vector<double> r;
        bool increasing = true;
        for (const auto& e : ratios) {
            if (!r.empty()) increasing = increasing && e.ratio > r.back();
            r.push_back(e.ratio);
        }
        c.summary["extremal"] = {{"phi", phi_json(phi)},
                                 {"K", Ks},
                                 {"ratios", nums(r)},
                                 {"increasing", increasing},
                                 {"criterion", to_string(embedding_criterion(phi))}};
    }
}

void run_slow_variation(Context& c) {
    const auto lambdas = c.P.numbers("lambdas", std::vector<double>{0.5, 2.0, 10.0});
    const auto grid = geometric_grid(c.P.number("t_min", 1.0), c.P.number("t_max", 1e6), c.P.number("factor", 2.0));
    const double tol = c.P.number("tol", 0.1);
    auto record = [&](Json label, const SlowVariationReport& rep) {
        Json per = Json::array();
        for (const auto& l : rep.per_lambda) {
            per.push_back({{"lambda", l.lambda},
                           {"deviation_at_top", num(l.deviation_at_top)},
                           {"max_deviation_tail", num(l.max_deviation_tail)},
                           {"decreasing", l.decreasing},
                           {"pass", l.pass}});
        }
        label["pass"] = rep.pass;
        label["per_lambda"] = per;
        c.results.push_back(label);
    };
    if (c.P.has("phi")) {
        for (const auto& phi : c.P.phis("phi")) record({{"phi", phi_json(phi)}}, check_slow_variation(phi, lambdas, grid, tol));
    }
    // t^alpha, the regularly varying counterexamples
    if (c.P.has("powers")) {
        for (double a : c.P.numbers("powers")) {
            record({{"power", a}},
                   check_slow_variation([a](double t) { return std::pow(t, a); }, lambdas, grid, tol));
        }
    }
    if (c.results.empty()) c.P.fail("phi", "needs phi or powers");
}

void run_norm_identity(Context& c) {
    const ManifoldSpec M(c.dim());
    const int K = c.P.integer("K", 16);
    const int count = c.P.integer("count", 100);
    if (count < 1) c.P.fail("count", "must be positive");
    const auto seed = std::uint64_t(c.P.number("seed", 20240531));
    const auto s_list = c.P.numbers("s");
    const auto phis = c.P.phis("phi");
    std::vector<FourierField> fields;
    for (int i = 0; i < count; ++i) fields.push_back(random_field(M, K, seed + std::uint64_t(i)));
    double worst = 0.0;
    for (double s : s_list) {
        for (const auto& phi : phis) {
            const RefinedIndex idx{s, phi};
            double err = 0.0;
            for (const auto& u : fields) {
                const double a = norm(u, idx);
                err = std::max(err, std::abs(multiplier_norm(u, idx) - a) / a);
            }
            worst = std::max(worst, err);
            c.results.push_back({{"s", s}, {"phi", phi_json(phi)}, {"max_relative_error", num(err)}});
        }
    }
    c.summary["seed"] = seed;
    c.summary["fields"] = count;
    c.summary["max_relative_error"] = num(worst);
}

// ---------------------------------------------------------------------------

Json expectation_json(const Expectation& e) {
    static const char* names[] = {"equals", "approx", "at_least", "at_most"};
    Json j{{"path", e.path}, {"op", names[int(e.op)]}, {"expected", e.value}};
    if (e.op == Expectation::Op::approx) j["tol"] = e.tol;
    return j;
}

bool check(const Expectation& e, const Json& actual) {
    using Op = Expectation::Op;
    const auto a = as_number(actual);
    const auto b = as_number(e.value);
    switch (e.op) {
        case Op::equals:
            if (a && b) return *a == *b;
            return actual == e.value;
        case Op::approx:
            return a && b && std::abs(*a - *b) <= e.tol;
        case Op::at_least:
            return a && b && *a >= *b;
        case Op::at_most:
            return a && b && *a <= *b;
    }
    return false;
}

}  // namespace

// ---------------------------------------------------------------------------

ExperimentManifest parse_manifest(const std::string& text, const fs::path& base_dir, const std::string& name) {
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::ParserException& ex) {
        throw ParseError(std::string("malformed manifest: ") + ex.what());
    }
    if (!root.IsMap()) throw ParseError("manifest must be a mapping");
    ExperimentManifest m;
    m.name = name;
    m.base_dir = base_dir;
    static const std::vector<std::string> known{"kind", "n", "system", "params", "expect", "output", "allow_ambiguous"};
    for (const auto& kv : root) {
        const auto key = kv.first.as<std::string>();
        if (std::find(known.begin(), known.end(), key) == known.end()) fail_at(kv.first, "unknown field '" + key + "'");
    }
    if (!root["kind"]) fail_at(root, "missing field 'kind'");
    m.kind = root["kind"].as<std::string>();
    const auto& kinds = experiment_kinds();
    if (std::find(kinds.begin(), kinds.end(), m.kind) == kinds.end()) {
        fail_at(root["kind"], "unknown experiment kind '" + m.kind + "'");
    }
    try {
        if (root["n"]) m.n = root["n"].as<int>();
        if (root["allow_ambiguous"]) m.allow_ambiguous = root["allow_ambiguous"].as<bool>();
        if (root["output"]) m.output = root["output"].as<std::string>();
    } catch (const YAML::Exception&) {
        fail_at(root, "fields n, allow_ambiguous, output have the wrong type");
    }
    if (m.n && *m.n != 1 && *m.n != 2) fail_at(root["n"], "n must be 1 or 2");
    if (const auto sys = root["system"]) {
        if (sys.IsSequence()) {
            for (const auto& s : sys) m.systems.push_back(s.as<std::string>());
            if (m.systems.empty()) fail_at(sys, "system list must be nonempty");
        } else {
            m.systems.push_back(sys.as<std::string>());
        }
    }
    if (const auto params = root["params"]) {
        if (!params.IsMap()) fail_at(params, "params must be a mapping");
        m.params = to_json(params);
        for (const auto& kv : params) m.param_lines[kv.first.as<std::string>()] = kv.first.Mark().line + 1;
    }
    if (const auto expect = root["expect"]) {
        if (!expect.IsSequence()) fail_at(expect, "expect must be a list");
        for (const auto& e : expect) {
            if (!e.IsMap() || !e["path"]) fail_at(e, "expectations need a path");
            Expectation x;
            x.line = e.Mark().line + 1;
            x.path = e["path"].as<std::string>();
            try {
                (void)Json::json_pointer(x.path);
            } catch (const Json::exception&) {
                fail_at(e["path"], "invalid JSON pointer '" + x.path + "'");
            }
            int ops = 0;
            for (const auto& [key, op] : {std::pair{"equals", Expectation::Op::equals},
                                          std::pair{"approx", Expectation::Op::approx},
                                          std::pair{"at_least", Expectation::Op::at_least},
                                          std::pair{"at_most", Expectation::Op::at_most}}) {
                if (e[key]) {
                    ++ops;
                    x.op = op;
                    x.value = to_json(e[key]);
                }
            }
            if (ops != 1) fail_at(e, "expectation needs exactly one of equals, approx, at_least, at_most");
            if (x.op == Expectation::Op::approx) {
                if (!e["tol"]) fail_at(e, "approx needs tol");
                x.tol = e["tol"].as<double>();
            }
            m.expect.push_back(std::move(x));
        }
    }
    return m;
}

ExperimentManifest load_manifest(const fs::path& file) {
    std::ifstream in(file);
    if (!in) throw ParseError("cannot open manifest '" + file.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return parse_manifest(ss.str(), file.parent_path(), file.stem().string());
    } catch (const ParseError& ex) {
        throw ParseError(file.string() + ": " + ex.what());
    }
}

std::string dump_report(const Json& report) { return report.dump(2) + "\n"; }

RunResult run(const ExperimentManifest& m) {
    RunResult out;
    out.report = Json::object();
    out.report["kind"] = m.kind;
    out.report["name"] = m.name;
    Context c(m);
    try {
        for (const auto& file : m.systems) c.systems.push_back(load_system((m.base_dir / file).string()));
        for (const auto& A : c.systems) {
            if (m.n && *m.n != A.dim()) throw ParseError("n disagrees with a system file");
        }
        out.report["n"] = c.dim();
        Json sys = Json::array();
        for (std::size_t i = 0; i < c.systems.size(); ++i) {
            Json orders = Json::array();
            const auto& A = c.systems[i];
            for (int j = 0; j < A.size(); ++j) {
                Json row = Json::array();
                for (int k = 0; k < A.size(); ++k) row.push_back(num(A.order(j, k)));
                orders.push_back(row);
            }
            sys.push_back({{"file", m.systems[i]}, {"n", A.dim()}, {"p", A.size()}, {"orders", orders}, {"column_orders", nums(A.column_orders())}});
        }
        out.report["systems"] = sys;
        out.report["params"] = m.params;

        if (m.kind == "ellipticity") run_ellipticity(c);
        else if (m.kind == "index") run_index(c);
        else if (m.kind == "index-invariance") run_index_invariance(c);
        else if (m.kind == "solve") run_solve(c);
        else if (m.kind == "apriori") run_apriori(c);
        else if (m.kind == "embedding") run_embedding(c);
        else if (m.kind == "smoothness") run_smoothness(c);
        else if (m.kind == "lift") run_lift(c);
        else if (m.kind == "continuity") run_continuity(c);
        else if (m.kind == "slow-variation") run_slow_variation(c);
        else if (m.kind == "norm-identity") run_norm_identity(c);
        else throw ParseError("unknown experiment kind '" + m.kind + "'");
    } catch (const AmbiguousRank& ex) {
        out.exit_code = exit_ambiguous;
        out.diagnostic = std::string("numerical ambiguity: ") + ex.what();
        out.report["status"] = "ambiguous";
        out.report["diagnostic"] = out.diagnostic;
        return out;
    } catch (const std::exception& ex) {
        // parse errors and domain violations of the parameters alike
        out.exit_code = exit_input_error;
        out.diagnostic = ex.what();
        out.report["status"] = "input-error";
        out.report["diagnostic"] = out.diagnostic;
        return out;
    }
    out.report["results"] = std::move(c.results);
    out.report["summary"] = std::move(c.summary);
    out.tables = std::move(c.tables);

    Json checks = Json::array();
    for (const auto& e : m.expect) {
        const Json::json_pointer ptr(e.path);
        Json j = expectation_json(e);
        const bool found = out.report.contains(ptr);
        j["actual"] = found ? out.report.at(ptr) : Json(nullptr);
        const bool ok = found && check(e, out.report.at(ptr));
        j["pass"] = ok;
        if (!ok) {
            out.failures.push_back("line " + std::to_string(e.line) + ": " + e.path + " " + j["op"].get<std::string>() +
                                   " " + e.value.dump() + ", got " + (found ? j["actual"].dump() : "nothing"));
        }
        checks.push_back(std::move(j));
    }
    out.report["expectations"] = std::move(checks);

    if (c.ambiguous && !m.allow_ambiguous) {
        out.exit_code = exit_ambiguous;
        out.diagnostic = "numerical ambiguity: sigma_gap below 1e3";
        out.report["status"] = "ambiguous";
    } else if (!out.failures.empty()) {
        out.exit_code = exit_expectation_failed;
        out.report["status"] = "fail";
    } else {
        out.report["status"] = "pass";
    }
    return out;
}

void write_outputs(const RunResult& result, const fs::path& dir) {
    fs::create_directories(dir);
    {
        std::ofstream os(dir / "report.json");
        os << dump_report(result.report);
    }
    for (const auto& t : result.tables) {
        std::ofstream os(dir / t.file);
        os << t.content;
    }
}

int run_suite(const fs::path& dir, const std::optional<fs::path>& out_root, std::ostream& log) {
    std::vector<fs::path> files;
    std::error_code ec;
    for (const auto& entry : fs::directory_iterator(dir, ec)) {
        if (entry.is_regular_file() && (entry.path().extension() == ".yaml" || entry.path().extension() == ".yml")) {
            files.push_back(entry.path());
        }
    }
    if (ec) {
        log << "cannot read suite directory '" << dir.string() << "': " << ec.message() << "\n";
        return exit_input_error;
    }
    if (files.empty()) {
        log << "no manifests in '" << dir.string() << "'\n";
        return exit_input_error;
    }
    std::sort(files.begin(), files.end());

    // each manifest has its own output directory, so runs share nothing
    std::vector<std::future<RunResult>> jobs;
    for (const auto& file : files) {
        jobs.push_back(std::async(std::launch::async, [file, out_root] {
            RunResult r;
            try {
                const auto m = load_manifest(file);
                r = run(m);
                if (out_root) write_outputs(r, *out_root / m.name);
            } catch (const std::exception& ex) {
                r.exit_code = exit_input_error;
                r.diagnostic = ex.what();
            }
            return r;
        }));
    }
    bool input_error = false, ambiguous = false, failed = false;
    for (std::size_t i = 0; i < files.size(); ++i) {
        const RunResult r = jobs[i].get();
        static const char* labels[] = {"pass", "FAIL", "INPUT-ERROR", "AMBIGUOUS"};
        log << labels[r.exit_code] << "  " << files[i].filename().string() << "\n";
        for (const auto& f : r.failures) log << "    " << f << "\n";
        if (!r.diagnostic.empty()) log << "    " << r.diagnostic << "\n";
        input_error = input_error || r.exit_code == exit_input_error;
        ambiguous = ambiguous || r.exit_code == exit_ambiguous;
        failed = failed || r.exit_code == exit_expectation_failed;
    }
    if (input_error) return exit_input_error;
    if (ambiguous) return exit_ambiguous;
    return failed ? exit_expectation_failed : exit_pass;
}

}  // namespace refscale
