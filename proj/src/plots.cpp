#include "umyops/quant/plots.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "umyops/core/errors.hpp"

namespace umyops::quant {

namespace {

constexpr double kPi = 3.14159265358979323846;

const char* bin_color(int bin) {
    switch (bin) {
        case 0: return "mistyrose";
        case 1: return "coral";
        case 2: return "orangered";
        default: return "red";
    }
}

} // namespace

void write_bullseye_svg(const std::string& path, const ChordSet& chords,
                        const std::string& title) {
    std::ofstream out(path);
    if (!out) throw IoError("write_bullseye_svg: cannot write " + path);

    const double cx = 150, cy = 160, r_in = 55, r_out = 120;
    out << "<svg xmlns='http://www.w3.org/2000/svg' width='300' height='320'>\n";
    out << "<text x='150' y='20' text-anchor='middle' font-size='14' font-family='sans-serif'>"
        << title << "</text>\n";

    const double width = 2.0 * kPi / kNumChords;
    for (const auto& ch : chords.chords) {
        const double a0 = ch.sector_index * width - kPi / 2;  // sector 0 at the top
        const double a1 = a0 + width;
        auto px = [&](double r, double a) { return cx + r * std::cos(a); };
        auto py = [&](double r, double a) { return cy + r * std::sin(a); };
        out << "<path d='M " << px(r_in, a0) << ' ' << py(r_in, a0) << " L " << px(r_out, a0)
            << ' ' << py(r_out, a0) << " A " << r_out << ' ' << r_out << " 0 0 1 "
            << px(r_out, a1) << ' ' << py(r_out, a1) << " L " << px(r_in, a1) << ' '
            << py(r_in, a1) << " A " << r_in << ' ' << r_in << " 0 0 0 " << px(r_in, a0) << ' '
            << py(r_in, a0) << " Z' fill='"
            << (ch.empty ? "lightgray" : bin_color(viability_bin(ch.transmurality_pct)))
            << "' stroke='white' stroke-width='0.4'/>\n";
    }
    out << "</svg>\n";
}

void write_scatter_svg(const std::string& path, const std::vector<double>& x,
                       const std::vector<double>& y, const std::string& x_label,
                       const std::string& y_label, const std::string& title) {
    if (x.size() != y.size() || x.empty())
        throw InvalidArgument("write_scatter_svg: need paired non-empty data");
    std::ofstream out(path);
    if (!out) throw IoError("write_scatter_svg: cannot write " + path);

    const double w = 360, h = 320, m = 50;
    double lo_x = *std::min_element(x.begin(), x.end());
    double hi_x = *std::max_element(x.begin(), x.end());
    double lo_y = *std::min_element(y.begin(), y.end());
    double hi_y = *std::max_element(y.begin(), y.end());
    if (hi_x - lo_x < 1e-12) hi_x = lo_x + 1.0;
    if (hi_y - lo_y < 1e-12) hi_y = lo_y + 1.0;
    auto sx = [&](double v) { return m + (v - lo_x) / (hi_x - lo_x) * (w - 2 * m); };
    auto sy = [&](double v) { return h - m - (v - lo_y) / (hi_y - lo_y) * (h - 2 * m); };

    out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << w << "' height='" << h << "'>\n";
    out << "<text x='" << w / 2 << "' y='18' text-anchor='middle' font-size='13' "
        << "font-family='sans-serif'>" << title << "</text>\n";
    out << "<line x1='" << m << "' y1='" << h - m << "' x2='" << w - m << "' y2='" << h - m
        << "' stroke='black'/>\n";
    out << "<line x1='" << m << "' y1='" << m << "' x2='" << m << "' y2='" << h - m
        << "' stroke='black'/>\n";
    out << "<text x='" << w / 2 << "' y='" << h - 12
        << "' text-anchor='middle' font-size='11' font-family='sans-serif'>" << x_label
        << "</text>\n";
    out << "<text x='14' y='" << h / 2 << "' text-anchor='middle' font-size='11' "
        << "font-family='sans-serif' transform='rotate(-90 14 " << h / 2 << ")'>" << y_label
        << "</text>\n";

    // least-squares line and correlation
    const double n = static_cast<double>(x.size());
    double mx = 0, my = 0;
    for (size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0, sxx = 0, syy = 0;
    for (size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx > 1e-12) {
        const double slope = sxy / sxx;
        const double icpt = my - slope * mx;
        out << "<line x1='" << sx(lo_x) << "' y1='" << sy(slope * lo_x + icpt) << "' x2='"
            << sx(hi_x) << "' y2='" << sy(slope * hi_x + icpt)
            << "' stroke='steelblue' stroke-width='1.5'/>\n";
    }
    if (sxx > 1e-12 && syy > 1e-12) {
        const double r = sxy / std::sqrt(sxx * syy);
        char buf[48];
        std::snprintf(buf, sizeof(buf), "R = %.2f", r);
        out << "<text x='" << w - m - 6 << "' y='" << m + 14
            << "' text-anchor='end' font-size='12' font-family='sans-serif'>" << buf
            << "</text>\n";
    }
    for (size_t i = 0; i < x.size(); ++i)
        out << "<circle cx='" << sx(x[i]) << "' cy='" << sy(y[i])
            << "' r='3' fill='firebrick' fill-opacity='0.7'/>\n";
    out << "</svg>\n";
}

} // namespace umyops::quant
