#pragma once

#include <string>
#include <vector>

#include "hicom/evaluate.hpp"
#include "hicom/image.hpp"

namespace hicom {

// 5x7 bitmap text, uppercased; unknown glyphs render as blanks.
void draw_text(Image& img, int x, int y, const std::string& text, double r, double g, double b,
               int scale = 1);

// Grouped FAC/FCAC bars, one group per ablation row.
Image render_metric_bars(const MetricsReport& metrics);

// Per-perturbation face-accuracy bars for the full stack against the
// M1-only ablation, with the clean baselines as reference lines.
Image render_perturbation_chart(const std::vector<PerturbRow>& rows, double clean_fac_full,
                                double clean_fac_m1);

void save_plot(const Image& img, const std::string& path);

}  // namespace hicom
