#include "hicom/plots.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>

namespace hicom {

namespace {

struct Glyph {
    char ch;
    uint8_t rows[7];  // 5 LSBs per row
};

constexpr Glyph kFont[] = {
    {'A', {0x0E, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}},
    {'B', {0x1E, 0x11, 0x1E, 0x11, 0x11, 0x11, 0x1E}},
    {'C', {0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E}},
    {'D', {0x1E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x1E}},
    {'E', {0x1F, 0x10, 0x1E, 0x10, 0x10, 0x10, 0x1F}},
    {'F', {0x1F, 0x10, 0x1E, 0x10, 0x10, 0x10, 0x10}},
    {'G', {0x0E, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0F}},
    {'H', {0x11, 0x11, 0x1F, 0x11, 0x11, 0x11, 0x11}},
    {'I', {0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E}},
    {'J', {0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0C}},
    {'K', {0x11, 0x12, 0x1C, 0x12, 0x11, 0x11, 0x11}},
    {'L', {0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F}},
    {'M', {0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11}},
    {'N', {0x11, 0x19, 0x15, 0x13, 0x11, 0x11, 0x11}},
    {'O', {0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}},
    {'P', {0x1E, 0x11, 0x1E, 0x10, 0x10, 0x10, 0x10}},
    {'Q', {0x0E, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0D}},
    {'R', {0x1E, 0x11, 0x1E, 0x14, 0x12, 0x11, 0x11}},
    {'S', {0x0F, 0x10, 0x0E, 0x01, 0x01, 0x11, 0x0E}},
    {'T', {0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04}},
    {'U', {0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}},
    {'V', {0x11, 0x11, 0x11, 0x11, 0x11, 0x0A, 0x04}},
    {'W', {0x11, 0x11, 0x15, 0x15, 0x15, 0x1B, 0x11}},
    {'X', {0x11, 0x0A, 0x04, 0x04, 0x0A, 0x11, 0x11}},
    {'Y', {0x11, 0x0A, 0x04, 0x04, 0x04, 0x04, 0x04}},
    {'Z', {0x1F, 0x02, 0x04, 0x08, 0x10, 0x10, 0x1F}},
    {'0', {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E}},
    {'1', {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E}},
    {'2', {0x0E, 0x11, 0x01, 0x06, 0x08, 0x10, 0x1F}},
    {'3', {0x1E, 0x01, 0x01, 0x0E, 0x01, 0x01, 0x1E}},
    {'4', {0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02}},
    {'5', {0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E}},
    {'6', {0x0E, 0x10, 0x1E, 0x11, 0x11, 0x11, 0x0E}},
    {'7', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08}},
    {'8', {0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E}},
    {'9', {0x0E, 0x11, 0x11, 0x0F, 0x01, 0x01, 0x0E}},
    {'.', {0x00, 0x00, 0x00, 0x00, 0x00, 0x0C, 0x0C}},
    {'+', {0x00, 0x04, 0x04, 0x1F, 0x04, 0x04, 0x00}},
    {'-', {0x00, 0x00, 0x00, 0x1F, 0x00, 0x00, 0x00}},
    {'_', {0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x1F}},
    {'%', {0x19, 0x1A, 0x02, 0x04, 0x08, 0x0B, 0x13}},
    {'/', {0x01, 0x02, 0x02, 0x04, 0x08, 0x08, 0x10}},
    {':', {0x00, 0x0C, 0x0C, 0x00, 0x0C, 0x0C, 0x00}},
    {' ', {0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00}},
};

const uint8_t* glyph_rows(char ch) {
    for (const auto& g : kFont)
        if (g.ch == ch) return g.rows;
    return nullptr;
}

void fill_box(Image& img, int x0, int y0, int x1, int y1, double r, double g, double b) {
    x0 = std::max(0, x0);
    y0 = std::max(0, y0);
    x1 = std::min(img.w, x1);
    y1 = std::min(img.h, y1);
    for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x) {
            img.at(0, y, x) = r;
            img.at(1, y, x) = g;
            img.at(2, y, x) = b;
        }
}

void hline(Image& img, int x0, int x1, int y, double r, double g, double b) {
    fill_box(img, x0, y, x1, y + 1, r, g, b);
}

}  // namespace

void draw_text(Image& img, int x, int y, const std::string& text, double r, double g, double b,
               int scale) {
    int cx = x;
    for (char raw : text) {
        char ch = static_cast<char>(std::toupper(static_cast<unsigned char>(raw)));
        const uint8_t* rows = glyph_rows(ch);
        if (rows) {
            for (int ry = 0; ry < 7; ++ry)
                for (int rx = 0; rx < 5; ++rx)
                    if (rows[ry] & (1 << (4 - rx)))
                        fill_box(img, cx + rx * scale, y + ry * scale, cx + (rx + 1) * scale,
                                 y + (ry + 1) * scale, r, g, b);
        }
        cx += 6 * scale;
    }
}

void save_plot(const Image& img, const std::string& path) { write_ppm(img, path); }

Image render_metric_bars(const MetricsReport& metrics) {
    const int W = 640, H = 360;
    Image img(H, W);
    img.fill(1.0, 1.0, 1.0);

    const int left = 60, bottom = H - 50, top = 40;
    const int plot_h = bottom - top;
    // axis and gridlines
    for (int i = 0; i <= 4; ++i) {
        int y = bottom - i * plot_h / 4;
        hline(img, left, W - 20, y, 0.85, 0.85, 0.85);
        char lbl[8];
        std::snprintf(lbl, sizeof(lbl), "%.2f", i * 0.25);
        draw_text(img, 18, y - 3, lbl, 0.2, 0.2, 0.2);
    }
    draw_text(img, left, 14, "FAC / FCAC PER ABLATION ROW", 0.1, 0.1, 0.1);

    const int n = static_cast<int>(metrics.ablation.size());
    if (n == 0) return img;
    const int group_w = (W - left - 40) / n;
    const int bar_w = std::max(8, group_w / 3 - 6);
    for (int i = 0; i < n; ++i) {
        const auto& row = metrics.ablation[i];
        int gx = left + 10 + i * group_w;
        if (row.fac) {
            int h = static_cast<int>(*row.fac * plot_h);
            fill_box(img, gx, bottom - h, gx + bar_w, bottom, 0.35, 0.55, 0.85);
        }
        if (row.fcac) {
            int h = static_cast<int>(*row.fcac * plot_h);
            fill_box(img, gx + bar_w + 6, bottom - h, gx + 2 * bar_w + 6, bottom, 0.85, 0.5, 0.3);
        }
        draw_text(img, gx, bottom + 8, row.modules, 0.1, 0.1, 0.1);
        if (row.fcac) {
            char lbl[8];
            std::snprintf(lbl, sizeof(lbl), "%.3f", *row.fcac);
            draw_text(img, gx + bar_w + 6, bottom - static_cast<int>(*row.fcac * plot_h) - 12,
                      lbl, 0.4, 0.2, 0.1);
        }
    }
    // legend
    fill_box(img, W - 170, 10, W - 158, 20, 0.35, 0.55, 0.85);
    draw_text(img, W - 152, 12, "FAC", 0.1, 0.1, 0.1);
    fill_box(img, W - 110, 10, W - 98, 20, 0.85, 0.5, 0.3);
    draw_text(img, W - 92, 12, "FCAC", 0.1, 0.1, 0.1);
    return img;
}

Image render_perturbation_chart(const std::vector<PerturbRow>& rows, double clean_fac_full,
                                double clean_fac_m1) {
    const int W = 840, H = 400;
    Image img(H, W);
    img.fill(1.0, 1.0, 1.0);
    const int left = 60, bottom = H - 90, top = 40;
    const int plot_h = bottom - top;

    for (int i = 0; i <= 4; ++i) {
        int y = bottom - i * plot_h / 4;
        hline(img, left, W - 20, y, 0.85, 0.85, 0.85);
        char lbl[8];
        std::snprintf(lbl, sizeof(lbl), "%.2f", i * 0.25);
        draw_text(img, 18, y - 3, lbl, 0.2, 0.2, 0.2);
    }
    draw_text(img, left, 14, "FACE ACCURACY UNDER PERTURBATIONS", 0.1, 0.1, 0.1);

    const int n = static_cast<int>(rows.size());
    if (n == 0) return img;
    const int group_w = (W - left - 40) / n;
    const int bar_w = std::max(6, group_w / 3 - 4);
    for (int i = 0; i < n; ++i) {
        int gx = left + 6 + i * group_w;
        if (rows[i].fac_full) {
            int h = static_cast<int>(*rows[i].fac_full * plot_h);
            fill_box(img, gx, bottom - h, gx + bar_w, bottom, 0.3, 0.65, 0.4);
        }
        if (rows[i].fac_m1) {
            int h = static_cast<int>(*rows[i].fac_m1 * plot_h);
            fill_box(img, gx + bar_w + 4, bottom - h, gx + 2 * bar_w + 4, bottom, 0.6, 0.6, 0.6);
        }
        // stacked vertical label: kind abbreviated + severity
        std::string kind = rows[i].kind.substr(0, 9);
        draw_text(img, gx, bottom + 8, kind, 0.1, 0.1, 0.1);
        char sev[12];
        std::snprintf(sev, sizeof(sev), "SEV %d", rows[i].severity);
        draw_text(img, gx, bottom + 20, sev, 0.3, 0.3, 0.3);
    }

    // clean baselines
    int y_full = bottom - static_cast<int>(clean_fac_full * plot_h);
    hline(img, left, W - 20, y_full, 0.1, 0.45, 0.2);
    draw_text(img, W - 150, y_full - 10, "CLEAN FULL", 0.1, 0.45, 0.2);
    int y_m1 = bottom - static_cast<int>(clean_fac_m1 * plot_h);
    hline(img, left, W - 20, y_m1, 0.35, 0.35, 0.35);
    draw_text(img, W - 150, y_m1 + 4, "CLEAN M1", 0.35, 0.35, 0.35);

    fill_box(img, W - 260, 10, W - 248, 20, 0.3, 0.65, 0.4);
    draw_text(img, W - 242, 12, "FULL STACK", 0.1, 0.1, 0.1);
    fill_box(img, W - 150, 10, W - 138, 20, 0.6, 0.6, 0.6);
    draw_text(img, W - 132, 12, "M1 ONLY", 0.1, 0.1, 0.1);
    return img;
}

}  // namespace hicom
