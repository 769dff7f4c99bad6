// Copyright (C) 2026 The ALIA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>
#include <vector>

namespace alia::train {

struct Bar {
    std::string label;
    double mean = 0;
    double stddev = 0;
};

struct CurvePoint {
    double x = 0;
    double mean = 0;
    double stddev = 0;
};

// Static SVG charts with error bars. Output depends only on the inputs.
std::string bar_chart_svg(const std::string& title, const std::string& y_label, const std::vector<Bar>& bars);
// x is drawn on a log scale when every x is positive and log_x is set.
std::string curve_svg(const std::string& title, const std::string& x_label, const std::string& y_label,
                      const std::vector<CurvePoint>& points, bool log_x = false);

}  // namespace alia::train
