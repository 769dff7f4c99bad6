// Copyright (C) 2026 The ALIA Authors
// SPDX-License-Identifier: Apache-2.0

#include "alia/train/charts.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace alia::train {

namespace {

constexpr double kWidth = 640, kHeight = 400;
constexpr double kLeft = 70, kRight = 20, kTop = 40, kBottom = 70;

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

std::string escape(const std::string& s) {
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

struct Range {
    double lo = 0, hi = 1;
};

Range padded(double lo, double hi) {
    if (!(hi > lo)) {
        lo -= 0.5;
        hi += 0.5;
    }
    double pad = (hi - lo) * 0.1;
    return {lo - pad, hi + pad};
}

std::string header(const std::string& title, const std::string& y_label) {
    std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(kWidth) + "\" height=\"" +
                    num(kHeight) + "\" viewBox=\"0 0 " + num(kWidth) + " " + num(kHeight) + "\">\n";
    s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    s += "<text x=\"" + num(kWidth / 2) + "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"16\">" + escape(title) + "</text>\n";
    s += "<text x=\"16\" y=\"" + num(kHeight / 2) + "\" transform=\"rotate(-90 16 " + num(kHeight / 2) +
         ")\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" + escape(y_label) + "</text>\n";
    return s;
}

std::string y_axis(const Range& r, auto&& to_y) {
    std::string s = "<line x1=\"" + num(kLeft) + "\" y1=\"" + num(kTop) + "\" x2=\"" + num(kLeft) + "\" y2=\"" +
                    num(kHeight - kBottom) + "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        double v = r.lo + (r.hi - r.lo) * i / 4.0;
        double y = to_y(v);
        s += "<line x1=\"" + num(kLeft - 4) + "\" y1=\"" + num(y) + "\" x2=\"" + num(kLeft) + "\" y2=\"" + num(y) +
             "\" stroke=\"black\"/>\n";
        s += "<text x=\"" + num(kLeft - 6) + "\" y=\"" + num(y + 4) +
             "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">" + num(v) + "</text>\n";
    }
    return s;
}

std::string error_bar(double x, double y_lo, double y_hi) {
    return "<line x1=\"" + num(x) + "\" y1=\"" + num(y_lo) + "\" x2=\"" + num(x) + "\" y2=\"" + num(y_hi) +
           "\" stroke=\"black\"/>\n" + "<line x1=\"" + num(x - 4) + "\" y1=\"" + num(y_lo) + "\" x2=\"" +
           num(x + 4) + "\" y2=\"" + num(y_lo) + "\" stroke=\"black\"/>\n" + "<line x1=\"" + num(x - 4) +
           "\" y1=\"" + num(y_hi) + "\" x2=\"" + num(x + 4) + "\" y2=\"" + num(y_hi) + "\" stroke=\"black\"/>\n";
}

}  // namespace

std::string bar_chart_svg(const std::string& title, const std::string& y_label, const std::vector<Bar>& bars) {
    double lo = 0, hi = 0;
    for (const auto& b : bars) {
        lo = std::min(lo, b.mean - b.stddev);
        hi = std::max(hi, b.mean + b.stddev);
    }
    // Zoom in when every bar is far from zero, as accuracy plots usually do.
    double min_low = hi;
    for (const auto& b : bars) min_low = std::min(min_low, b.mean - b.stddev);
    Range r = padded(bars.empty() ? 0 : (min_low > 0 ? min_low : lo), hi);
    if (min_low > 0 && r.lo < 0) r.lo = 0;
    auto to_y = [&](double v) { return kHeight - kBottom - (v - r.lo) / (r.hi - r.lo) * (kHeight - kTop - kBottom); };

    std::string s = header(title, y_label) + y_axis(r, to_y);
    const double plot_w = kWidth - kLeft - kRight;
    const double slot = bars.empty() ? plot_w : plot_w / static_cast<double>(bars.size());
    for (std::size_t i = 0; i < bars.size(); ++i) {
        const auto& b = bars[i];
        double x0 = kLeft + slot * static_cast<double>(i) + slot * 0.15;
        double w = slot * 0.7;
        double y = to_y(b.mean), base = to_y(std::max(r.lo, 0.0));
        s += "<rect x=\"" + num(x0) + "\" y=\"" + num(std::min(y, base)) + "\" width=\"" + num(w) + "\" height=\"" +
             num(std::abs(base - y)) + "\" fill=\"#4c72b0\"><title>" + escape(b.label) + ": " + num(b.mean) +
             " ± " + num(b.stddev) + "</title></rect>\n";
        if (b.stddev > 0) s += error_bar(x0 + w / 2, to_y(b.mean - b.stddev), to_y(b.mean + b.stddev));
        s += "<text x=\"" + num(x0 + w / 2) + "\" y=\"" + num(kHeight - kBottom + 16) +
             "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" + escape(b.label) +
             "</text>\n";
    }
    s += "</svg>\n";
    return s;
}

std::string curve_svg(const std::string& title, const std::string& x_label, const std::string& y_label,
                      const std::vector<CurvePoint>& points, bool log_x) {
    bool use_log = log_x && !points.empty() &&
                   std::all_of(points.begin(), points.end(), [](const CurvePoint& p) { return p.x > 0; });
    auto tx = [&](double x) { return use_log ? std::log10(x) : x; };
    double xlo = 0, xhi = 1, ylo = 0, yhi = 1;
    if (!points.empty()) {
        xlo = xhi = tx(points.front().x);
        ylo = points.front().mean - points.front().stddev;
        yhi = points.front().mean + points.front().stddev;
        for (const auto& p : points) {
            xlo = std::min(xlo, tx(p.x));
            xhi = std::max(xhi, tx(p.x));
            ylo = std::min(ylo, p.mean - p.stddev);
            yhi = std::max(yhi, p.mean + p.stddev);
        }
    }
    Range rx = padded(xlo, xhi), ry = padded(ylo, yhi);
    auto to_x = [&](double x) { return kLeft + (tx(x) - rx.lo) / (rx.hi - rx.lo) * (kWidth - kLeft - kRight); };
    auto to_y = [&](double v) { return kHeight - kBottom - (v - ry.lo) / (ry.hi - ry.lo) * (kHeight - kTop - kBottom); };

    std::string s = header(title, y_label) + y_axis(ry, to_y);
    s += "<line x1=\"" + num(kLeft) + "\" y1=\"" + num(kHeight - kBottom) + "\" x2=\"" + num(kWidth - kRight) +
         "\" y2=\"" + num(kHeight - kBottom) + "\" stroke=\"black\"/>\n";
    s += "<text x=\"" + num((kLeft + kWidth - kRight) / 2) + "\" y=\"" + num(kHeight - 20) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" + escape(x_label) + "</text>\n";
    std::vector<CurvePoint> sorted = points;
    std::sort(sorted.begin(), sorted.end(), [](const CurvePoint& a, const CurvePoint& b) { return a.x < b.x; });
    if (!sorted.empty()) {
        s += "<polyline fill=\"none\" stroke=\"#4c72b0\" stroke-width=\"2\" points=\"";
        for (std::size_t i = 0; i < sorted.size(); ++i)
            s += (i ? " " : "") + num(to_x(sorted[i].x)) + "," + num(to_y(sorted[i].mean));
        s += "\"/>\n";
    }
    for (const auto& p : sorted) {
        double x = to_x(p.x);
        s += "<circle cx=\"" + num(x) + "\" cy=\"" + num(to_y(p.mean)) + "\" r=\"3\" fill=\"#4c72b0\"><title>" +
             num(p.x) + ": " + num(p.mean) + " ± " + num(p.stddev) + "</title></circle>\n";
        if (p.stddev > 0) s += error_bar(x, to_y(p.mean - p.stddev), to_y(p.mean + p.stddev));
        s += "<text x=\"" + num(x) + "\" y=\"" + num(kHeight - kBottom + 16) +
             "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">" + num(p.x) + "</text>\n";
    }
    s += "</svg>\n";
    return s;
}

}  // namespace alia::train
