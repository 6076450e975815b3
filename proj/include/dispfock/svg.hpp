#pragma once

// Minimal SVG plots.  Each writer also emits <stem>.csv with the plotted numbers.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace dispfock::svg {

struct Series {
    std::string label;
    std::vector<double> x, y;
    bool markers = false; // points instead of a polyline
};

namespace detail {

inline constexpr double W = 640, H = 420, L = 70, R = 20, T = 40, B = 60;

inline std::string num(double v) {
    std::ostringstream os;
    os << std::setprecision(6) << v;
    return os.str();
}

inline std::string esc(const std::string& s) {
    std::string o;
    for (char c : s) {
        if (c == '<') o += "&lt;";
        else if (c == '>') o += "&gt;";
        else if (c == '&') o += "&amp;";
        else o += c;
    }
    return o;
}

inline const char* color(std::size_t k) {
    static const char* c[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
    return c[k % 6];
}

inline std::string header(const std::string& title) {
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
       << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
       << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << esc(title) << "</text>\n";
    return os.str();
}

inline std::string axes(double x0, double x1, double y0, double y1, const std::string& xl, const std::string& yl, bool xticks = true) {
    std::ostringstream os;
    os << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << W - L - R << "\" height=\"" << H - T - B
       << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int k = 0; k <= 4; ++k) {
        const double fy = k / 4.0;
        const double py = H - B - fy * (H - T - B);
        os << "<text x=\"" << L - 6 << "\" y=\"" << py + 4 << "\" text-anchor=\"end\">" << num(y0 + fy * (y1 - y0)) << "</text>\n";
        if (xticks) {
            const double px = L + fy * (W - L - R);
            os << "<text x=\"" << px << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\">" << num(x0 + fy * (x1 - x0)) << "</text>\n";
        }
    }
    os << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 18 << "\" text-anchor=\"middle\">" << esc(xl) << "</text>\n"
       << "<text x=\"18\" y=\"" << (T + H - B) / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 " << (T + H - B) / 2
       << ")\">" << esc(yl) << "</text>\n";
    return os.str();
}

inline void write(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << text;
}

} // namespace detail

/// Writes stem.svg and stem.csv (columns series,x,y).
inline void line_plot(const std::string& stem, const std::string& title, const std::vector<Series>& series,
                      const std::string& xlabel, const std::string& ylabel) {
    using namespace detail;
    double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
    for (const auto& s : series)
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            x0 = std::min(x0, s.x[i]);
            x1 = std::max(x1, s.x[i]);
            y0 = std::min(y0, s.y[i]);
            y1 = std::max(y1, s.y[i]);
        }
    if (!(x1 > x0)) x1 = x0 + 1;
    if (!(y1 > y0)) y1 = y0 + 1;
    std::ostringstream os, csv;
    csv << "series,x,y\n" << std::setprecision(17);
    os << header(title) << axes(x0, x1, y0, y1, xlabel, ylabel);
    auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
    auto py = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };
    for (std::size_t k = 0; k < series.size(); ++k) {
        const auto& s = series[k];
        for (std::size_t i = 0; i < s.x.size(); ++i) csv << s.label << ',' << s.x[i] << ',' << s.y[i] << '\n';
        if (s.markers) {
            for (std::size_t i = 0; i < s.x.size(); ++i)
                os << "<circle cx=\"" << num(px(s.x[i])) << "\" cy=\"" << num(py(s.y[i])) << "\" r=\"2.5\" fill=\"" << color(k) << "\"/>\n";
        } else {
            os << "<polyline fill=\"none\" stroke=\"" << color(k) << "\" stroke-width=\"1.5\" points=\"";
            for (std::size_t i = 0; i < s.x.size(); ++i) os << num(px(s.x[i])) << ',' << num(py(s.y[i])) << ' ';
            os << "\"/>\n";
        }
        os << "<text x=\"" << W - R - 8 << "\" y=\"" << T + 16 + 14 * k << "\" text-anchor=\"end\" fill=\"" << color(k) << "\">"
           << esc(s.label) << "</text>\n";
    }
    os << "</svg>\n";
    write(stem + ".svg", os.str());
    write(stem + ".csv", csv.str());
}

/// Bars with optional error bars; writes stem.svg and stem.csv (label,value,sigma).
inline void bar_chart(const std::string& stem, const std::string& title, const std::vector<std::string>& labels,
                      const std::vector<double>& values, const std::vector<double>& sigma, const std::string& ylabel) {
    using namespace detail;
    double y1 = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) y1 = std::max(y1, values[i] + (sigma.empty() ? 0.0 : sigma[i]));
    if (!(y1 > 0.0)) y1 = 1.0;
    std::ostringstream os, csv;
    csv << "label,value,sigma\n" << std::setprecision(17);
    os << header(title) << axes(0, 1, 0, y1, "n", ylabel, false);
    const double slot = (W - L - R) / std::max<double>(1.0, static_cast<double>(values.size()));
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double s = sigma.empty() ? 0.0 : sigma[i];
        csv << '"' << labels[i] << "\"," << values[i] << ',' << s << '\n';
        const double h = std::max(values[i], 0.0) / y1 * (H - T - B);
        const double x = L + slot * i + 0.15 * slot;
        os << "<rect x=\"" << num(x) << "\" y=\"" << num(H - B - h) << "\" width=\"" << num(0.7 * slot) << "\" height=\"" << num(h)
           << "\" fill=\"#1f77b4\"/>\n";
        if (s > 0.0) {
            const double cx = x + 0.35 * slot;
            const double top = H - B - (values[i] + s) / y1 * (H - T - B);
            const double bot = H - B - std::max(values[i] - s, 0.0) / y1 * (H - T - B);
            os << "<line x1=\"" << num(cx) << "\" x2=\"" << num(cx) << "\" y1=\"" << num(top) << "\" y2=\"" << num(bot)
               << "\" stroke=\"black\"/>\n";
        }
        os << "<text x=\"" << num(x + 0.35 * slot) << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\" font-size=\"10\">"
           << esc(labels[i]) << "</text>\n";
    }
    os << "</svg>\n";
    write(stem + ".svg", os.str());
    write(stem + ".csv", csv.str());
}

/// Grid of values in [0, 1] shaded white to blue; rows are y (first row at the bottom).  CSV: row,col,value.
inline void heat_map(const std::string& stem, const std::string& title, const std::vector<std::vector<double>>& grid,
                     const std::string& xlabel, const std::string& ylabel) {
    using namespace detail;
    std::ostringstream os, csv;
    csv << "row,col,value\n" << std::setprecision(17);
    os << header(title);
    const std::size_t rows = grid.size(), cols = rows ? grid[0].size() : 0;
    const double cw = (W - L - R) / std::max<double>(1.0, static_cast<double>(cols));
    const double ch = (H - T - B) / std::max<double>(1.0, static_cast<double>(rows));
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            const double v = grid[r][c];
            csv << r << ',' << c << ',' << v << '\n';
            const double f = std::clamp(v, 0.0, 1.0);
            const int red = static_cast<int>(255 * (1 - f)), green = static_cast<int>(255 * (1 - 0.6 * f));
            const double x = L + cw * c, y = H - B - ch * (r + 1);
            os << "<rect x=\"" << num(x) << "\" y=\"" << num(y) << "\" width=\"" << num(cw) << "\" height=\"" << num(ch)
               << "\" fill=\"rgb(" << red << ',' << green << ",255)\" stroke=\"#888\"/>\n"
               << "<text x=\"" << num(x + cw / 2) << "\" y=\"" << num(y + ch / 2 + 4) << "\" text-anchor=\"middle\" font-size=\"10\">"
               << num(std::round(v * 1000) / 1000) << "</text>\n";
        }
    }
    for (std::size_t c = 0; c < cols; ++c)
        os << "<text x=\"" << num(L + cw * (c + 0.5)) << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\">" << c << "</text>\n";
    for (std::size_t r = 0; r < rows; ++r)
        os << "<text x=\"" << L - 8 << "\" y=\"" << num(H - B - ch * (r + 0.5) + 4) << "\" text-anchor=\"end\">" << r << "</text>\n";
    os << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 18 << "\" text-anchor=\"middle\">" << esc(xlabel) << "</text>\n"
       << "<text x=\"18\" y=\"" << (T + H - B) / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 " << (T + H - B) / 2
       << ")\">" << esc(ylabel) << "</text>\n</svg>\n";
    write(stem + ".svg", os.str());
    write(stem + ".csv", csv.str());
}

} // namespace dispfock::svg
