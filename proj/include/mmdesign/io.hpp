#pragma once

// Text, JSON and CSV serialization of designs, local-opt tables, search
// results and per-grid-point reports.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "criteria.hpp"
#include "design.hpp"
#include "errors.hpp"
#include "search.hpp"

namespace mmdesign::io {

using nlohmann::json;

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + path);
    out << content;
    if (!out) throw ConfigError("write failed for " + path);
}

// Shortest decimal text that round-trips the double.
inline std::string format_number(double x) {
    char buf[32];
    for (int prec = 1; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof buf, "%.*g", prec, x);
        if (std::strtod(buf, nullptr) == x) break;
    }
    return buf;
}

inline std::string labels_to_string(const std::vector<int>& labels) {
    std::string s;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (i) s += ' ';
        s += std::to_string(labels[i]);
    }
    return s;
}

// Whitespace-separated integer labels, possibly over several lines. Blank
// lines and text after '#' are ignored.
inline std::vector<int> parse_labels(const std::string& text) {
    std::vector<int> labels;
    std::istringstream lines(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(lines, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        std::istringstream tokens(line);
        std::string tok;
        while (tokens >> tok) {
            std::size_t used = 0;
            int v = 0;
            try {
                v = std::stoi(tok, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used != tok.size() || v < 0)
                throw ParseError("invalid label '" + tok + "'", line_no);
            labels.push_back(v);
        }
    }
    if (labels.empty()) throw ParseError("design file contains no labels", line_no);
    return labels;
}

inline json design_to_json(const Design& d) { return {{"q", d.q_types}, {"isi", d.isi}, {"labels", d.labels}}; }

inline Design design_from_json(const json& j) {
    try {
        return {j.at("labels").get<std::vector<int>>(), j.at("q").get<int>(), j.value("isi", 4.0)};
    } catch (const json::exception& e) {
        throw ParseError(std::string("bad design JSON: ") + e.what(), 0);
    }
}

// Reads a design in either format: JSON when the first non-blank character
// is '{', otherwise plain labels with the given type count and ISI.
inline Design parse_design(const std::string& text, int q_types, double isi) {
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first != std::string::npos && text[first] == '{') {
        json j;
        try {
            j = json::parse(text);
        } catch (const json::parse_error& e) {
            std::size_t line = 1;
            for (std::size_t i = 0; i < e.byte && i < text.size(); ++i) line += text[i] == '\n';
            throw ParseError(std::string("bad design JSON: ") + e.what(), line);
        }
        return design_from_json(j);
    }
    auto labels = parse_labels(text);
    return {std::move(labels), q_types, isi};
}

inline Design read_design(const std::string& path, int q_types, double isi) {
    return parse_design(read_file(path), q_types, isi);
}

inline std::string design_text(const Design& d) { return labels_to_string(d.labels) + "\n"; }

inline json theta_to_json(const ThetaVector& t) {
    json a = json::array();
    for (Eigen::Index i = 0; i < t.size(); ++i) a.push_back(t[i]);
    return a;
}

inline json table_to_json(const LocalOptTable& table) {
    json out = json::array();
    for (const auto& [key, e] : table)
        out.push_back({{"theta", theta_to_json(e.theta)},
                       {"p", {e.p.p1, e.p.p6}},
                       {"phi_a", e.phi_a},
                       {"design", labels_to_string(e.design)}});
    return out;
}

inline LocalOptTable table_from_json(const json& j) {
    if (!j.is_array()) throw ParseError("local-opt table must be a JSON array", 0);
    LocalOptTable table;
    std::size_t index = 0;
    try {
        for (const auto& row : j) {
            const auto theta = row.at("theta").get<std::vector<double>>();
            const auto p = row.at("p").get<std::vector<double>>();
            if (p.size() != 2) throw ParseError("entry " + std::to_string(index) + ": p must be [p1, p6]", index);
            table.merge({Eigen::Map<const Eigen::VectorXd>(theta.data(), static_cast<Eigen::Index>(theta.size())),
                         hrf::HrfParams(p[0], p[1]), row.at("phi_a").get<double>(),
                         parse_labels(row.at("design").get<std::string>())});
            ++index;
        }
    } catch (const json::exception& e) {
        throw ParseError("local-opt table entry " + std::to_string(index) + ": " + e.what(), index);
    }
    return table;
}

inline LocalOptTable read_table(const std::string& path) {
    const std::string text = read_file(path);
    try {
        return table_from_json(json::parse(text));
    } catch (const json::parse_error& e) {
        throw ParseError(path + ": " + e.what(), 0);
    }
}

inline json search_result_to_json(const SearchResult& r) {
    return {{"design", labels_to_string(r.best_design.labels)},
            {"q", r.best_design.q_types},
            {"isi", r.best_design.isi},
            {"objective", r.best_objective},
            {"evaluations", r.evaluations},
            {"generations", r.generations},
            {"trace", r.trace}};
}

// One row per (p, theta) grid point, p-major:
// p1, p6, phi_1..phi_{Q-1}, theta_1..theta_Q, phi_a, re.
class GridCsv {
public:
    GridCsv(int q_types, bool with_re) : q_(q_types), with_re_(with_re) {
        out_ << "p1,p6";
        for (int i = 1; i < q_; ++i) out_ << ",phi_" << i;
        for (int i = 1; i <= q_; ++i) out_ << ",theta_" << i;
        out_ << ",phi_a,re\n";
    }

    void row(const hrf::HrfParams& p, const ThetaVector& theta, double phi_a, double re) {
        out_ << format_number(p.p1) << ',' << format_number(p.p6);
        for (double a : theta_angles(theta)) out_ << ',' << format_number(a);
        for (Eigen::Index i = 0; i < theta.size(); ++i) out_ << ',' << format_number(theta[i]);
        out_ << ',' << format_number(phi_a) << ',';
        if (with_re_) out_ << format_number(re);
        out_ << '\n';
    }

    std::string str() const { return out_.str(); }

    // Hyperspherical angles in (-pi/2, pi/2] reproducing theta's direction
    // (theta and -theta share angles); zeros for theta = 0.
    static std::vector<double> theta_angles(const ThetaVector& theta) {
        const auto q = theta.size();
        std::vector<double> phi(q > 0 ? static_cast<std::size_t>(q - 1) : 0, 0.0);
        const double norm = theta.norm();
        if (norm < 1e-12) return phi;
        ThetaVector u = theta / norm;
        if (u[0] < 0.0) u = -u;
        double prod = 1.0;  // product of the sines so far
        for (Eigen::Index i = 0; i + 1 < q; ++i) {
            if (std::abs(prod) < 1e-12) break;
            const double c = std::clamp(u[i] / prod, 0.0, 1.0);
            double s = std::sqrt(std::max(0.0, 1.0 - c * c));
            for (Eigen::Index j = i + 1; j < q; ++j)
                if (std::abs(u[j]) > 1e-12) {
                    if (u[j] / prod < 0.0) s = -s;
                    break;
                }
            phi[static_cast<std::size_t>(i)] = std::atan2(s, c);
            prod *= s;
        }
        return phi;
    }

private:
    int q_;
    bool with_re_;
    std::ostringstream out_;
};

}  // namespace mmdesign::io
