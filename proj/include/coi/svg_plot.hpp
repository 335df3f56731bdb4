#pragma once

// Minimal SVG box plots for report output.

#include <algorithm>
#include <cstdio>
#include <string>
#include <vector>

namespace coi {

struct BoxGroup {
    std::string label;
    std::vector<double> values;
};

namespace detail {

inline std::string xml_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

inline double type7(const std::vector<double>& sorted, double q) {
    double h = (static_cast<double>(sorted.size()) - 1.0) * q;
    auto lo = static_cast<std::size_t>(h);
    auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

}  // namespace detail

/// Tukey box plot (whiskers at 1.5 IQR) with one box per group. Empty groups get a
/// label and no box.
inline std::string box_plot_svg(const std::string& title, const std::vector<BoxGroup>& groups) {
    constexpr double width_per = 120.0, height = 360.0, top = 40.0, bottom = 90.0, left = 60.0;
    const double plot_h = height - top - bottom;
    const double width = left + width_per * static_cast<double>(std::max<std::size_t>(groups.size(), 1)) + 20.0;

    double lo = 0.0, hi = 1.0;
    bool any = false;
    for (const auto& g : groups) {
        for (double v : g.values) {
            if (!any) lo = hi = v;
            lo = std::min(lo, v);
            hi = std::max(hi, v);
            any = true;
        }
    }
    if (hi - lo < 1e-12) {
        lo -= 0.5;
        hi += 0.5;
    }
    auto y = [&](double v) { return top + plot_h * (1.0 - (v - lo) / (hi - lo)); };

    std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + detail::num(width) +
                    "\" height=\"" + detail::num(height) + "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    s += "<text x=\"" + detail::num(width / 2) + "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" +
         detail::xml_escape(title) + "</text>\n";
    s += "<line x1=\"" + detail::num(left) + "\" y1=\"" + detail::num(top) + "\" x2=\"" + detail::num(left) +
         "\" y2=\"" + detail::num(top + plot_h) + "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        double v = lo + (hi - lo) * i / 4.0;
        s += "<text x=\"" + detail::num(left - 6) + "\" y=\"" + detail::num(y(v) + 4) +
             "\" text-anchor=\"end\">" + detail::num(v) + "</text>\n";
    }
    for (std::size_t i = 0; i < groups.size(); ++i) {
        const double cx = left + width_per * (static_cast<double>(i) + 0.5);
        s += "<text x=\"" + detail::num(cx) + "\" y=\"" + detail::num(top + plot_h + 16) +
             "\" text-anchor=\"middle\">" + detail::xml_escape(groups[i].label) + "</text>\n";
        if (groups[i].values.empty()) continue;
        auto v = groups[i].values;
        std::sort(v.begin(), v.end());
        double q1 = detail::type7(v, 0.25), med = detail::type7(v, 0.5), q3 = detail::type7(v, 0.75);
        double iqr = q3 - q1;
        double wlo = q1, whi = q3;
        for (double x : v) {
            if (x >= q1 - 1.5 * iqr) {
                wlo = x;
                break;
            }
        }
        for (auto it = v.rbegin(); it != v.rend(); ++it) {
            if (*it <= q3 + 1.5 * iqr) {
                whi = *it;
                break;
            }
        }
        const double bw = 40.0;
        s += "<line x1=\"" + detail::num(cx) + "\" y1=\"" + detail::num(y(wlo)) + "\" x2=\"" +
             detail::num(cx) + "\" y2=\"" + detail::num(y(whi)) + "\" stroke=\"black\"/>\n";
        s += "<rect x=\"" + detail::num(cx - bw / 2) + "\" y=\"" + detail::num(y(q3)) + "\" width=\"" +
             detail::num(bw) + "\" height=\"" + detail::num(std::max(y(q1) - y(q3), 0.5)) +
             "\" fill=\"#9ecae1\" stroke=\"black\"/>\n";
        s += "<line x1=\"" + detail::num(cx - bw / 2) + "\" y1=\"" + detail::num(y(med)) + "\" x2=\"" +
             detail::num(cx + bw / 2) + "\" y2=\"" + detail::num(y(med)) + "\" stroke=\"black\" stroke-width=\"2\"/>\n";
        for (double x : v) {
            if (x < wlo || x > whi) {
                s += "<circle cx=\"" + detail::num(cx) + "\" cy=\"" + detail::num(y(x)) +
                     "\" r=\"2.5\" fill=\"none\" stroke=\"black\"/>\n";
            }
        }
    }
    s += "</svg>\n";
    return s;
}

}  // namespace coi
