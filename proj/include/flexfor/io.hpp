#pragma once

// Serialization of results: polygons (JSON, CSV), elimination reports,
// metrics tables (JSON, aligned text) and SVG overlays.

#include "flexfor/methods.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

namespace flexfor {

using nlohmann::json;

struct WriteOptions {
    /// Wall times are written as null when false, so repeated runs give identical bytes.
    bool timing = true;
};

namespace detail {

inline json timing_value(double ms, const WriteOptions& opt) { return opt.timing ? json(ms) : json(nullptr); }

inline std::string exact(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

} // namespace detail

inline json report_to_json(const EliminationReport& r, const WriteOptions& opt = {}) {
    json steps = json::array();
    for (const EliminationStep& s : r.steps) {
        steps.push_back({{"variable", s.variable},
                         {"substitution", s.substitution},
                         {"rows_before", s.rows_before},
                         {"rows_generated", s.rows_generated},
                         {"rows_skipped", s.rows_skipped},
                         {"redundancy_removed", s.redundancy_removed},
                         {"rows_after", s.rows_after},
                         {"wall_time_ms", detail::timing_value(s.wall_time_ms, opt)}});
    }
    return {{"order", r.order},
            {"initial_rows", r.initial_rows},
            {"initial_rows_after_pruning", r.initial_rows_after_pruning},
            {"final_rows", r.final_rows},
            {"wall_time_ms", detail::timing_value(r.wall_time_ms, opt)},
            {"steps", steps}};
}

inline json polygon_to_json(const Polygon2D& p) {
    json v = json::array();
    for (const Point2& x : p.vertices) v.push_back({x.x(), x.y()});
    return v;
}

inline Polygon2D polygon_from_json(const json& j) {
    Polygon2D p;
    try {
        for (const json& v : j) p.vertices.emplace_back(v.at(0).get<double>(), v.at(1).get<double>());
    } catch (const json::exception& e) {
        throw Error(ErrorKind::ParseError, std::string("polygon vertices: ") + e.what());
    }
    return p;
}

inline json result_to_json(const ForResult& r, const WriteOptions& opt = {}) {
    return {{"method", r.method},
            {"units", "p.u."},
            {"base", {r.base.x(), r.base.y()}},
            {"area_pu2", area(r.polygon)},
            {"vertices", polygon_to_json(r.polygon)},
            {"wall_time_ms", detail::timing_value(r.wall_time_ms, opt)}};
}

/// `p_pu,q_pu` rows, counter-clockwise, printed with round-trip precision.
inline std::string polygon_to_csv(const Polygon2D& p) {
    std::string out = "p_pu,q_pu\n";
    for (const Point2& x : p.vertices) out += detail::exact(x.x()) + "," + detail::exact(x.y()) + "\n";
    return out;
}

inline Polygon2D polygon_from_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line.rfind("p_pu,q_pu", 0) != 0) {
        throw Error(ErrorKind::ParseError, "polygon CSV must start with 'p_pu,q_pu'");
    }
    Polygon2D p;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos) throw Error(ErrorKind::ParseError, "polygon CSV row without a comma");
        try {
            p.vertices.emplace_back(std::stod(line.substr(0, comma)), std::stod(line.substr(comma + 1)));
        } catch (const std::exception&) {
            throw Error(ErrorKind::ParseError, "polygon CSV row is not numeric: " + line);
        }
    }
    return p;
}

inline json metrics_to_json(const MetricsTable& table, const std::string& reference, const WriteOptions& opt = {}) {
    json rows = json::array();
    for (const MetricsRow& r : table) {
        rows.push_back({{"method", r.method},
                        {"area_pu2", r.area},
                        {"fill_factor", r.fill_factor},
                        {"error", r.error},
                        {"wall_time_ms", detail::timing_value(r.wall_time_ms, opt)}});
    }
    return {{"reference", reference}, {"rows", rows}};
}

inline std::string metrics_to_text(const MetricsTable& table, const WriteOptions& opt = {}) {
    std::size_t width = 6;
    for (const MetricsRow& r : table) width = std::max(width, r.method.size());
    std::ostringstream out;
    out << std::left << std::setw(static_cast<int>(width)) << "method" << std::right << std::setw(12) << "area_pu2"
        << std::setw(8) << "phi" << std::setw(8) << "delta";
    if (opt.timing) out << std::setw(14) << "wall_ms";
    out << "\n";
    out << std::fixed;
    for (const MetricsRow& r : table) {
        out << std::left << std::setw(static_cast<int>(width)) << r.method << std::right << std::setprecision(5)
            << std::setw(12) << r.area << std::setprecision(3) << std::setw(8) << r.fill_factor << std::setw(8)
            << r.error;
        if (opt.timing) out << std::setprecision(1) << std::setw(14) << r.wall_time_ms;
        out << "\n";
    }
    return out.str();
}

/// Regions drawn as outlines in a shared frame, base point marked with ×.
inline std::string svg_overlay(const std::vector<ForResult>& results) {
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
    double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
    auto grow = [&](const Point2& p) {
        x0 = std::min(x0, p.x());
        x1 = std::max(x1, p.x());
        y0 = std::min(y0, p.y());
        y1 = std::max(y1, p.y());
    };
    for (const ForResult& r : results) {
        grow(r.base);
        for (const Point2& v : r.polygon.vertices) grow(v);
    }
    if (results.empty()) x0 = y0 = 0.0, x1 = y1 = 1.0;
    const double span = std::max({x1 - x0, y1 - y0, 1e-9});
    const double pad = 0.08 * span;
    x0 -= pad, y0 -= pad, x1 += pad, y1 += pad;
    const double size = 600.0, scale = size / std::max(x1 - x0, y1 - y0);
    auto sx = [&](double x) { return detail::exact(std::round((x - x0) * scale * 100.0) / 100.0); };
    auto sy = [&](double y) { return detail::exact(std::round((y1 - y) * scale * 100.0) / 100.0); };

    std::ostringstream out;
    const std::string w = detail::exact(std::round((x1 - x0) * scale)), h = detail::exact(std::round((y1 - y0) * scale));
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\" viewBox=\"0 0 " << w
        << " " << h << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    for (std::size_t i = 0; i < results.size(); ++i) {
        const ForResult& r = results[i];
        const char* color = colors[i % (sizeof colors / sizeof *colors)];
        out << "<polygon fill=\"" << color << "\" fill-opacity=\"0.12\" stroke=\"" << color
            << "\" stroke-width=\"2\" points=\"";
        for (std::size_t k = 0; k < r.polygon.size(); ++k) {
            out << (k ? " " : "") << sx(r.polygon.vertices[k].x()) << "," << sy(r.polygon.vertices[k].y());
        }
        out << "\"/>\n";
        out << "<text x=\"10\" y=\"" << 20 + 18 * i << "\" font-family=\"sans-serif\" font-size=\"14\" fill=\"" << color
            << "\">" << r.method << "</text>\n";
    }
    if (!results.empty()) {
        const Point2 b = results.front().base;
        out << "<text x=\"" << sx(b.x()) << "\" y=\"" << sy(b.y())
            << "\" font-size=\"18\" text-anchor=\"middle\" dominant-baseline=\"central\">×</text>\n";
    }
    out << "<text x=\"" << detail::exact(size / 2) << "\" y=\"" << h
        << "\" dy=\"-6\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">P at PCC [p.u.]</text>\n";
    out << "</svg>\n";
    return out.str();
}

inline void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::ConfigError, "cannot write '" + path + "'");
    out << text;
}

inline std::string dump(const json& j) { return j.dump(2) + "\n"; }

} // namespace flexfor
