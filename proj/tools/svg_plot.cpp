#include "svg_plot.hpp"

#include "rfm/data_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace cli::svg {
namespace {

constexpr int kW = 900, kH = 360;
constexpr int kL = 55, kR = 15, kT = 30, kB = 35;

std::ofstream open_svg(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw rfm::InvalidInput("cannot write " + path);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
        << "\" viewBox=\"0 0 " << kW << ' ' << kH << "\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    return out;
}

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

void frame(std::ofstream& out, const std::string& title) {
    out << "<rect x=\"" << kL << "\" y=\"" << kT << "\" width=\"" << kW - kL - kR
        << "\" height=\"" << kH - kT - kB
        << "\" fill=\"none\" stroke=\"#444\" stroke-width=\"1\"/>\n";
    out << "<text x=\"" << kW / 2 << "\" y=\"20\" font-family=\"sans-serif\" font-size=\"14\" "
           "text-anchor=\"middle\">"
        << title << "</text>\n";
}

} // namespace

void prob_path(const std::string& path, const rfm::Vector& probs,
               const std::vector<std::pair<int, int>>& shaded,
               const std::vector<double>& guides, const std::string& title) {
    const int t = static_cast<int>(probs.size());
    if (t < 2) throw rfm::InvalidInput("plot: need at least 2 periods");
    auto xpix = [&](double i) { return kL + i / (t - 1) * (kW - kL - kR); };
    auto ypix = [&](double p) { return kT + (1.0 - p) * (kH - kT - kB); };

    std::ofstream out = open_svg(path);
    for (auto [a, b] : shaded)
        out << "<rect x=\"" << num(xpix(a)) << "\" y=\"" << kT << "\" width=\""
            << num(xpix(std::min(b + 1, t - 1)) - xpix(a)) << "\" height=\"" << kH - kT - kB
            << "\" fill=\"#c9d6e8\"/>\n";
    frame(out, title);
    for (double gline : guides)
        out << "<line x1=\"" << kL << "\" y1=\"" << num(ypix(gline)) << "\" x2=\"" << kW - kR
            << "\" y2=\"" << num(ypix(gline))
            << "\" stroke=\"#b06060\" stroke-width=\"1\" stroke-dasharray=\"5,4\"/>\n";
    for (double tick : {0.0, 0.5, 1.0})
        out << "<text x=\"" << kL - 6 << "\" y=\"" << num(ypix(tick) + 4)
            << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">" << num(tick)
            << "</text>\n";
    for (int tick = 0; tick <= 4; ++tick) {
        int i = tick * (t - 1) / 4;
        out << "<text x=\"" << num(xpix(i)) << "\" y=\"" << kH - kB + 16
            << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">" << i + 1
            << "</text>\n";
    }
    out << "<polyline fill=\"none\" stroke=\"#1f4e9c\" stroke-width=\"1.5\" points=\"";
    bool pen_up = true;
    for (int i = 0; i < t; ++i) {
        if (std::isnan(probs(i))) {
            if (!pen_up) {
                out << "\"/>\n<polyline fill=\"none\" stroke=\"#1f4e9c\" stroke-width=\"1.5\" "
                       "points=\"";
                pen_up = true;
            }
            continue;
        }
        out << num(xpix(i)) << ',' << num(ypix(probs(i))) << ' ';
        pen_up = false;
    }
    out << "\"/>\n</svg>\n";
}

void histogram(const std::string& path, const rfm::Vector& sample, int bins,
               const std::string& title) {
    const int n = static_cast<int>(sample.size());
    if (n < 2 || bins < 2) throw rfm::InvalidInput("histogram: too little data");
    double lo = std::min(sample.minCoeff(), -4.0);
    double hi = std::max(sample.maxCoeff(), 4.0);
    double width = (hi - lo) / bins;
    std::vector<double> density(static_cast<std::size_t>(bins), 0.0);
    for (int i = 0; i < n; ++i) {
        int b = std::min(bins - 1, static_cast<int>((sample(i) - lo) / width));
        density[static_cast<std::size_t>(b)] += 1.0 / (n * width);
    }
    double peak = 0.45;  // normal pdf peak is ~0.40; keep headroom
    for (double d : density) peak = std::max(peak, d);

    auto xpix = [&](double v) { return kL + (v - lo) / (hi - lo) * (kW - kL - kR); };
    auto ypix = [&](double d) { return kT + (1.0 - d / peak) * (kH - kT - kB); };

    std::ofstream out = open_svg(path);
    frame(out, title);
    for (int b = 0; b < bins; ++b) {
        double x0 = lo + b * width;
        out << "<rect x=\"" << num(xpix(x0)) << "\" y=\""
            << num(ypix(density[static_cast<std::size_t>(b)])) << "\" width=\""
            << num(xpix(x0 + width) - xpix(x0)) << "\" height=\""
            << num(ypix(0) - ypix(density[static_cast<std::size_t>(b)]))
            << "\" fill=\"#7da7d9\" stroke=\"#3a568a\" stroke-width=\"0.5\"/>\n";
    }
    out << "<polyline fill=\"none\" stroke=\"#a03030\" stroke-width=\"1.5\" points=\"";
    for (int i = 0; i <= 200; ++i) {
        double v = lo + (hi - lo) * i / 200.0;
        double pdf = std::exp(-0.5 * v * v) / std::sqrt(2.0 * M_PI);
        out << num(xpix(v)) << ',' << num(ypix(pdf)) << ' ';
    }
    out << "\"/>\n";
    for (int v = static_cast<int>(std::ceil(lo)); v <= hi; v += 2)
        out << "<text x=\"" << num(xpix(v)) << "\" y=\"" << kH - kB + 16
            << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">" << v
            << "</text>\n";
    out << "</svg>\n";
}

} // namespace cli::svg
