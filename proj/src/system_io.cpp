#include "refscale/system_io.hpp"

#include <yaml-cpp/yaml.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "refscale/errors.hpp"

namespace refscale {

namespace {

[[noreturn]] void fail(const YAML::Node& node, const std::string& what) {
    std::ostringstream os;
    const auto mark = node.Mark();
    if (mark.line >= 0) os << "line " << mark.line + 1 << ": ";
    os << what;
    throw ParseError(os.str());
}

const YAML::Node require(const YAML::Node& parent, const char* key, const std::string& where) {
    const YAML::Node node = parent[key];
    if (!node) fail(parent, where + ": missing field '" + key + "'");
    return node;
}

template <class T>
T scalar(const YAML::Node& node, const std::string& field) {
    try {
        return node.as<T>();
    } catch (const YAML::Exception&) {
        fail(node, "field '" + field + "' has the wrong type");
    }
}

Mode parse_mode(const YAML::Node& node, int n, const std::string& field) {
    if (n == 1) {
        if (node.IsSequence()) {
            if (node.size() != 1) fail(node, field + ": mode on the circle has one component");
            return {scalar<int>(node[0], field), 0};
        }
        return {scalar<int>(node, field), 0};
    }
    if (!node.IsSequence() || node.size() != 2) fail(node, field + ": mode on the 2-torus is [a, b]");
    return {scalar<int>(node[0], field), scalar<int>(node[1], field)};
}

std::map<Mode, Complex> parse_modes(const YAML::Node& node, int n, const std::string& field) {
    if (!node.IsSequence()) fail(node, field + " must be a list of [eta, re, im]");
    std::map<Mode, Complex> out;
    for (const auto& item : node) {
        if (!item.IsSequence() || item.size() != 3) fail(item, field + " entries are [eta, re, im]");
        out[parse_mode(item[0], n, field)] += Complex(scalar<double>(item[1], field), scalar<double>(item[2], field));
    }
    return out;
}

AngularProfile parse_angular(const YAML::Node& node, int n) {
    if (!node) return AngularProfile::constant(1.0);
    if (!node.IsSequence()) fail(node, "angular must be a list of [direction or mode, re, im]");
    if (n == 1) {
        Complex plus{}, minus{};
        for (const auto& item : node) {
            if (!item.IsSequence() || item.size() != 3) fail(item, "angular entries are [direction, re, im]");
            const int dir = scalar<int>(item[0], "angular");
            const Complex v(scalar<double>(item[1], "angular"), scalar<double>(item[2], "angular"));
            if (dir == 1) {
                plus += v;
            } else if (dir == -1) {
                minus += v;
            } else {
                fail(item, "angular direction on the circle is +1 or -1");
            }
        }
        return AngularProfile::circle(plus, minus);
    }
    std::map<int, Complex> modes;
    for (const auto& item : node) {
        if (!item.IsSequence() || item.size() != 3) fail(item, "angular entries are [mode, re, im]");
        modes[scalar<int>(item[0], "angular")] +=
            Complex(scalar<double>(item[1], "angular"), scalar<double>(item[2], "angular"));
    }
    return AngularProfile::trigonometric(std::move(modes));
}

PdoSystem from_node(const YAML::Node& root) {
    if (!root.IsMap()) throw ParseError("system file must be a mapping");
    const int n = scalar<int>(require(root, "n", "system"), "n");
    const int p = scalar<int>(require(root, "p", "system"), "p");
    if (n != 1 && n != 2) fail(root["n"], "n must be 1 or 2");
    if (p < 1) fail(root["p"], "p must be positive");
    PdoSystem A(n, p);
    const YAML::Node entries = require(root, "entries", "system");
    if (!entries.IsSequence()) fail(entries, "entries must be a list");
    for (const auto& e : entries) {
        const int row = scalar<int>(require(e, "row", "entry"), "row");
        const int col = scalar<int>(require(e, "col", "entry"), "col");
        if (row < 0 || row >= p || col < 0 || col >= p) fail(e, "entry index out of range");
        ZeroModeRule zero;
        try {
            zero = ZeroModeRule::from_name(e["zero_mode"] ? scalar<std::string>(e["zero_mode"], "zero_mode") : "principal_direction");
        } catch (const InvalidSymbol& ex) {
            fail(e["zero_mode"], ex.what());
        }
        if (zero.kind == ZeroModeRule::Kind::explicit_modes) {
            zero.modes = parse_modes(require(e, "zero_mode_coeffs", "explicit zero_mode"), n, "zero_mode_coeffs");
        }
        const YAML::Node terms = require(e, "terms", "entry");
        if (!terms.IsSequence() || terms.size() == 0) fail(terms, "terms must be a nonempty list");
        std::vector<HomogeneousTerm> hs;
        for (const auto& t : terms) {
            HomogeneousTerm h;
            h.degree = scalar<double>(require(t, "degree", "term"), "degree");
            if (t["cutoff_radius"]) h.cutoff_radius = scalar<double>(t["cutoff_radius"], "cutoff_radius");
            h.parts.push_back({parse_modes(require(t, "coeff", "term"), n, "coeff"), parse_angular(t["angular"], n)});
            hs.push_back(std::move(h));
        }
        try {
            A.set(row, col, ClassicalSymbol(n, std::move(hs), std::move(zero)));
        } catch (const std::invalid_argument& ex) {
            fail(e, std::string("entry (") + std::to_string(row) + ", " + std::to_string(col) + "): " + ex.what());
        }
    }
    return A;
}

}  // namespace

PdoSystem parse_system(const std::string& text) {
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::ParserException& ex) {
        throw ParseError(std::string("malformed system file: ") + ex.what());
    }
    return from_node(root);
}

PdoSystem load_system(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open system file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return parse_system(ss.str());
    } catch (const ParseError& ex) {
        throw ParseError(path + ": " + ex.what());
    }
}

std::string describe_orders(const PdoSystem& A) {
    std::ostringstream os;
    for (int j = 0; j < A.size(); ++j) {
        for (int k = 0; k < A.size(); ++k) {
            const double o = A.order(j, k);
            os << (k ? " " : "") << (std::isfinite(o) ? std::to_string(o) : std::string("-inf"));
        }
        os << "\n";
    }
    os << "m:";
    for (double m : A.column_orders()) os << " " << m;
    os << "\n";
    return os.str();
}

}  // namespace refscale
