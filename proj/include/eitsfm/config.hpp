#ifndef EITSFM_CONFIG_HPP
#define EITSFM_CONFIG_HPP

#include "eitsfm/geometry.hpp"
#include "eitsfm/io.hpp"
#include "eitsfm/reconstruction.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace eitsfm {

enum class Domain { Disc, Deformed };

inline std::string domain_name(Domain d) { return d == Domain::Disc ? "disc" : "deformed"; }

inline Domain parse_domain(const std::string& s) {
    if (s == "disc") return Domain::Disc;
    if (s == "deformed") return Domain::Deformed;
    throw std::invalid_argument("unknown domain '" + s + "' (expected disc or deformed)");
}

/// One phantom case of the experiment suite.
struct CaseSpec {
    std::string id;
    Domain domain = Domain::Disc;
    std::vector<Anomaly> anomalies;
};

inline Anomaly disc_anomaly(double x, double y, double r, double contrast) {
    return Anomaly{DiscShape{Point(x, y), r}, contrast};
}

inline Anomaly polygon_anomaly(Polygon vertices, double contrast) {
    return Anomaly{PolygonShape{std::move(vertices)}, contrast};
}

/// Eight cases, (a)-(d) on the unit disc and (e)-(h) on the deformed disc,
/// with one to three anomalies of contrast +1 (conductive) or -0.5
/// (resistive). "empty" is a disc without anomalies.
inline std::vector<CaseSpec> default_suite() {
    const auto square = [](double cx, double cy, double half) {
        return Polygon{Point(cx - half, cy - half), Point(cx + half, cy - half), Point(cx + half, cy + half),
                       Point(cx - half, cy + half)};
    };
    return {
        {"a", Domain::Disc, {disc_anomaly(0.4, 0.1, 0.2, 1.0)}},
        {"b", Domain::Disc, {disc_anomaly(-0.35, 0.35, 0.15, 1.0)}},
        {"c", Domain::Disc, {disc_anomaly(0.45, 0.0, 0.18, 1.0), disc_anomaly(-0.4, -0.1, 0.18, -0.5)}},
        {"d",
         Domain::Disc,
         {disc_anomaly(0.0, 0.45, 0.15, 1.0), polygon_anomaly(square(-0.4, -0.3, 0.13), 1.0),
          disc_anomaly(0.4, -0.35, 0.14, -0.5)}},
        {"e", Domain::Deformed, {disc_anomaly(0.5, 0.0, 0.2, 1.0)}},
        {"f",
         Domain::Deformed,
         {polygon_anomaly({Point(-0.45, 0.05), Point(-0.15, 0.05), Point(-0.15, 0.35), Point(-0.45, 0.35)}, 1.0)}},
        {"g", Domain::Deformed, {disc_anomaly(0.55, 0.1, 0.15, 1.0), disc_anomaly(-0.45, -0.1, 0.17, -0.5)}},
        {"h",
         Domain::Deformed,
         {disc_anomaly(0.0, 0.35, 0.13, 1.0), disc_anomaly(-0.5, -0.15, 0.14, 1.0),
          disc_anomaly(0.45, -0.2, 0.13, -0.5)}},
        {"empty", Domain::Disc, {}},
    };
}

struct ExperimentConfig {
    // [domain]
    double deformation = 0.15;  // r(theta) = 1 + deformation * cos(2 theta) for the deformed disc
    int disc_elements = 4128;
    int deformed_elements = 4432;
    int disc_pixels = 1414;
    int deformed_pixels = 1424;
    int electrodes = 16;
    double margin_edges = 0.5;  // pixel region inset, in mean boundary-edge lengths
    // [phantom]
    std::vector<std::string> cases = {"a", "b", "c", "d", "e", "f", "g", "h"};
    std::vector<CaseSpec> custom_cases;
    double sigma0 = 1.0;
    double interior_margin = 0.05;
    // [noise]
    std::vector<double> noise_levels = {0.0, 0.01, 0.05};
    std::uint64_t seed = 2013;
    // [method]
    double alpha = 1.0;
    std::optional<double> beta;  // unset: lambda_1(S) / max(w)
    double eps_zeta = 1e-3;
    int t0 = 64;
    double rho = 0.0;  // > 0 selects t0 by lambda_t / lambda_1 >= rho instead
    double t1_rho = 1e-3;
    T2Rule t2_rule = T2Rule::UpperThird;
    std::vector<std::string> methods = {"S", "B", "A", "W1"};
    // [run]
    int jobs = 1;
    std::string output_dir;

    std::vector<CaseSpec> selected_cases() const {
        std::vector<CaseSpec> all = default_suite();
        all.insert(all.end(), custom_cases.begin(), custom_cases.end());
        std::vector<CaseSpec> out;
        for (const auto& id : cases) {
            const auto it = std::find_if(all.begin(), all.end(), [&](const CaseSpec& c) { return c.id == id; });
            if (it == all.end()) throw std::invalid_argument("unknown phantom case '" + id + "'");
            out.push_back(*it);
        }
        return out;
    }

    bool wants(const std::string& method) const {
        return std::find(methods.begin(), methods.end(), method) != methods.end();
    }

    void validate() const {
        const auto require = [](bool ok, const std::string& what) {
            if (!ok) throw std::invalid_argument("config: " + what);
        };
        require(deformation >= 0.0 && deformation < 0.5, "deformation must lie in [0, 0.5)");
        require(disc_elements >= 16 && deformed_elements >= 16, "mesh element targets must be at least 16");
        require(disc_pixels >= 1 && deformed_pixels >= 1, "pixel targets must be positive");
        require(electrodes >= 3, "need at least 3 electrodes");
        require(margin_edges > 0.0, "margin_edges must be positive");
        require(sigma0 > 0.0, "sigma0 must be positive");
        require(interior_margin > 0.0, "interior_margin must be positive");
        require(!noise_levels.empty(), "at least one noise level is required");
        for (double l : noise_levels) require(l >= 0.0, "noise levels must be non-negative");
        require(alpha >= 0.0, "alpha must be non-negative");
        require(!beta || *beta >= 0.0, "beta must be non-negative");
        require(eps_zeta >= 0.0 && eps_zeta < 1.0, "eps_zeta must lie in [0, 1)");
        require(t0 >= 1, "t0 must be positive");
        require(rho >= 0.0 && rho < 1.0, "rho must lie in [0, 1)");
        require(t1_rho >= 0.0 && t1_rho < 1.0, "t1_rho must lie in [0, 1)");
        require(jobs >= 1, "jobs must be positive");
        require(!methods.empty(), "at least one method is required");
        for (const auto& m : methods) require(m == "S" || m == "B" || m == "A" || m == "W1", "unknown method " + m);
        require(!cases.empty(), "at least one phantom case is required");
        (void)selected_cases();
    }
};

namespace detail {

inline std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, ',')) {
        const auto b = item.find_first_not_of(" \t");
        const auto e = item.find_last_not_of(" \t");
        if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
    }
    return out;
}

inline std::string join(const std::vector<std::string>& items) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) out += (i ? "," : "") + items[i];
    return out;
}

/// `disc x y r contrast` or `polygon contrast x1 y1 x2 y2 ...`, separated by ';'.
inline std::vector<Anomaly> parse_anomalies(const std::string& text) {
    std::vector<Anomaly> out;
    std::istringstream all(text);
    std::string record;
    while (std::getline(all, record, ';')) {
        std::istringstream in(record);
        std::string kind;
        if (!(in >> kind)) continue;
        if (kind == "disc") {
            double x, y, r, c;
            if (!(in >> x >> y >> r >> c)) throw std::invalid_argument("malformed disc anomaly: " + record);
            out.push_back(disc_anomaly(x, y, r, c));
        } else if (kind == "polygon") {
            double c;
            if (!(in >> c)) throw std::invalid_argument("malformed polygon anomaly: " + record);
            Polygon poly;
            double x, y;
            while (in >> x >> y) poly.emplace_back(x, y);
            if (poly.size() < 3) throw std::invalid_argument("polygon anomaly needs at least 3 vertices");
            if (signed_area(poly) < 0.0) std::reverse(poly.begin(), poly.end());
            out.push_back(polygon_anomaly(std::move(poly), c));
        } else {
            throw std::invalid_argument("unknown anomaly kind '" + kind + "'");
        }
    }
    return out;
}

inline std::string format_anomalies(const std::vector<Anomaly>& anomalies) {
    std::string out;
    for (std::size_t i = 0; i < anomalies.size(); ++i) {
        if (i) out += "; ";
        const auto& a = anomalies[i];
        if (const auto* d = std::get_if<DiscShape>(&a.shape)) {
            out += "disc " + io::format_double(d->center.x()) + " " + io::format_double(d->center.y()) + " " +
                   io::format_double(d->radius) + " " + io::format_double(a.contrast);
        } else {
            const auto& p = std::get<PolygonShape>(a.shape);
            out += "polygon " + io::format_double(a.contrast);
            for (const auto& v : p.vertices) out += " " + io::format_double(v.x()) + " " + io::format_double(v.y());
        }
    }
    return out;
}

/// Like ptree::get with a default, but a present key with a bad value throws
/// instead of silently falling back.
template <typename T>
T get_strict(const boost::property_tree::ptree& tree, const std::string& path, T fallback) {
    return tree.get_child_optional(path) ? tree.get<T>(path) : fallback;
}

}  // namespace detail

/// Parses the INI-style experiment configuration. Missing keys keep their
/// defaults; the result is validated before it is returned.
inline ExperimentConfig parse_config(std::istream& in) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    try {
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw std::invalid_argument(std::string("config: ") + e.what());
    }
    ExperimentConfig c;
    try {
        for (const auto& [section, body] : tree) {
            if (section.rfind("case.", 0) == 0) {
                CaseSpec spec;
                spec.id = section.substr(5);
                spec.domain = parse_domain(body.get<std::string>("domain", "disc"));
                spec.anomalies = detail::parse_anomalies(body.get<std::string>("anomalies", ""));
                c.custom_cases.push_back(std::move(spec));
                continue;
            }
            const auto known = {"domain", "phantom", "noise", "method", "run"};
            if (std::find(known.begin(), known.end(), section) == known.end())
                throw std::invalid_argument("unknown section [" + section + "]");
        }
        c.deformation = detail::get_strict(tree, "domain.deformation", c.deformation);
        c.disc_elements = detail::get_strict(tree, "domain.disc_elements", c.disc_elements);
        c.deformed_elements = detail::get_strict(tree, "domain.deformed_elements", c.deformed_elements);
        c.disc_pixels = detail::get_strict(tree, "domain.disc_pixels", c.disc_pixels);
        c.deformed_pixels = detail::get_strict(tree, "domain.deformed_pixels", c.deformed_pixels);
        c.electrodes = detail::get_strict(tree, "domain.electrodes", c.electrodes);
        c.margin_edges = detail::get_strict(tree, "domain.margin_edges", c.margin_edges);
        if (const auto v = tree.get_optional<std::string>("phantom.cases")) c.cases = detail::split_list(*v);
        c.sigma0 = detail::get_strict(tree, "phantom.sigma0", c.sigma0);
        c.interior_margin = detail::get_strict(tree, "phantom.interior_margin", c.interior_margin);
        if (const auto v = tree.get_optional<std::string>("noise.levels")) {
            c.noise_levels.clear();
            for (const auto& s : detail::split_list(*v)) c.noise_levels.push_back(std::stod(s));
        }
        c.seed = detail::get_strict(tree, "noise.seed", c.seed);
        c.alpha = detail::get_strict(tree, "method.alpha", c.alpha);
        if (const auto v = tree.get_optional<std::string>("method.beta"); v && *v != "auto") c.beta = std::stod(*v);
        c.eps_zeta = detail::get_strict(tree, "method.eps_zeta", c.eps_zeta);
        c.t0 = detail::get_strict(tree, "method.t0", c.t0);
        c.rho = detail::get_strict(tree, "method.rho", c.rho);
        c.t1_rho = detail::get_strict(tree, "method.t1_rho", c.t1_rho);
        if (const auto v = tree.get_optional<std::string>("method.t2_rule")) {
            if (*v == "upper_third")
                c.t2_rule = T2Rule::UpperThird;
            else if (*v == "as_printed")
                c.t2_rule = T2Rule::AsPrinted;
            else
                throw std::invalid_argument("unknown t2_rule '" + *v + "'");
        }
        if (const auto v = tree.get_optional<std::string>("method.methods")) c.methods = detail::split_list(*v);
        c.jobs = detail::get_strict(tree, "run.jobs", c.jobs);
        c.output_dir = detail::get_strict(tree, "run.output", c.output_dir);
    } catch (const pt::ptree_bad_data& e) {
        throw std::invalid_argument(std::string("config: bad value: ") + e.what());
    } catch (const std::logic_error& e) {
        const std::string msg = e.what();
        throw std::invalid_argument(msg.rfind("config:", 0) == 0 ? msg : "config: " + msg);
    }
    c.validate();
    return c;
}

inline ExperimentConfig parse_config_string(const std::string& text) {
    std::istringstream in(text);
    return parse_config(in);
}

/// Writes the fully resolved configuration in the same format parse_config reads.
inline void write_config(std::ostream& out, const ExperimentConfig& c) {
    using io::format_double;
    out << "[domain]\n"
        << "deformation = " << format_double(c.deformation) << '\n'
        << "disc_elements = " << c.disc_elements << '\n'
        << "deformed_elements = " << c.deformed_elements << '\n'
        << "disc_pixels = " << c.disc_pixels << '\n'
        << "deformed_pixels = " << c.deformed_pixels << '\n'
        << "electrodes = " << c.electrodes << '\n'
        << "margin_edges = " << format_double(c.margin_edges) << "\n\n";
    out << "[phantom]\n"
        << "cases = " << detail::join(c.cases) << '\n'
        << "sigma0 = " << format_double(c.sigma0) << '\n'
        << "interior_margin = " << format_double(c.interior_margin) << "\n\n";
    std::vector<std::string> levels;
    for (double l : c.noise_levels) levels.push_back(format_double(l));
    out << "[noise]\n"
        << "levels = " << detail::join(levels) << '\n'
        << "seed = " << c.seed << "\n\n";
    out << "[method]\n"
        << "alpha = " << format_double(c.alpha) << '\n'
        << "beta = " << (c.beta ? format_double(*c.beta) : std::string("auto")) << '\n'
        << "eps_zeta = " << format_double(c.eps_zeta) << '\n'
        << "t0 = " << c.t0 << '\n'
        << "rho = " << format_double(c.rho) << '\n'
        << "t1_rho = " << format_double(c.t1_rho) << '\n'
        << "t2_rule = " << (c.t2_rule == T2Rule::UpperThird ? "upper_third" : "as_printed") << '\n'
        << "methods = " << detail::join(c.methods) << "\n\n";
    out << "[run]\n"
        << "jobs = " << c.jobs << '\n'
        << "output = " << c.output_dir << '\n';
    for (const auto& spec : c.custom_cases) {
        out << "\n[case." << spec.id << "]\n"
            << "domain = " << domain_name(spec.domain) << '\n'
            << "anomalies = " << detail::format_anomalies(spec.anomalies) << '\n';
    }
}

}  // namespace eitsfm

#endif  // EITSFM_CONFIG_HPP
