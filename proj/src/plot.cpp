#include "diffdac/plot.hpp"

#include "diffdac/errors.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace diffdac::plot {

namespace {

constexpr double kWidth = 720, kHeight = 440;
constexpr double kLeft = 70, kRight = 170, kTop = 40, kBottom = 55;
constexpr std::array<const char*, 6> kPalette{"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"};

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
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

// Round step of roughly span/5 from {1, 2, 5} x 10^k.
double tick_step(double span) {
    if (!(span > 0)) return 1.0;
    const double raw = span / 5.0;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    for (double m : {1.0, 2.0, 5.0})
        if (raw <= m * mag) return m * mag;
    return 10.0 * mag;
}

} // namespace

std::vector<CurvePoint> learning_curve(std::span<const std::vector<training::MetricsRow>> runs) {
    std::map<std::size_t, std::vector<double>> pooled;
    for (const auto& rows : runs)
        for (const auto& r : rows)
            if (r.agent_id >= 0 && r.task_id >= 0) pooled[r.episodes_per_agent].push_back(r.return_mean);
    std::vector<CurvePoint> out;
    for (const auto& [ep, values] : pooled) out.push_back({static_cast<double>(ep), quartiles(values)});
    return out;
}

std::vector<SeriesSpec> parse_series_args(std::span<const std::string> args) {
    std::vector<SeriesSpec> out;
    for (const auto& arg : args) {
        std::string label, path;
        if (const auto colon = arg.find(':'); colon != std::string::npos && colon > 0) {
            label = arg.substr(0, colon);
            path = arg.substr(colon + 1);
        } else {
            path = arg;
            label = std::filesystem::path(arg).stem().string();
        }
        auto it = std::find_if(out.begin(), out.end(), [&](const SeriesSpec& s) { return s.label == label; });
        if (it == out.end()) out.push_back({label, {path}});
        else it->csvs.push_back(path);
    }
    return out;
}

std::string render_svg(std::span<const Curve> curves, const std::string& title) {
    double x_max = 0, y_min = INFINITY, y_max = -INFINITY;
    for (const auto& c : curves)
        for (const auto& p : c.points) {
            x_max = std::max(x_max, p.episodes);
            y_min = std::min(y_min, p.spread.q1);
            y_max = std::max(y_max, p.spread.q3);
        }
    if (!std::isfinite(y_min)) y_min = 0, y_max = 1;
    if (y_max - y_min < 1e-9) y_min -= 0.5, y_max += 0.5;
    if (x_max <= 0) x_max = 1;
    const double y_pad = 0.05 * (y_max - y_min);
    y_min -= y_pad;
    y_max += y_pad;

    const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
    auto sx = [&](double x) { return kLeft + pw * x / x_max; };
    auto sy = [&](double y) { return kTop + ph * (1.0 - (y - y_min) / (y_max - y_min)); };

    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(kWidth) << "\" height=\"" << num(kHeight)
       << "\" viewBox=\"0 0 " << num(kWidth) << ' ' << num(kHeight) << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << num(kLeft + pw / 2) << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" << escape(title)
       << "</text>\n";

    // axes and ticks
    os << "<g stroke=\"#444\" fill=\"none\">\n";
    os << "<line x1=\"" << num(kLeft) << "\" y1=\"" << num(kTop + ph) << "\" x2=\"" << num(kLeft + pw) << "\" y2=\""
       << num(kTop + ph) << "\"/>\n";
    os << "<line x1=\"" << num(kLeft) << "\" y1=\"" << num(kTop) << "\" x2=\"" << num(kLeft) << "\" y2=\""
       << num(kTop + ph) << "\"/>\n";
    os << "</g>\n<g fill=\"#222\">\n";
    const double xs = tick_step(x_max);
    for (double t = 0; t <= x_max + 1e-9; t += xs)
        os << "<text x=\"" << num(sx(t)) << "\" y=\"" << num(kTop + ph + 18) << "\" text-anchor=\"middle\">" << num(t)
           << "</text>\n";
    const double ys = tick_step(y_max - y_min);
    for (double t = std::ceil(y_min / ys) * ys; t <= y_max + 1e-9; t += ys)
        os << "<text x=\"" << num(kLeft - 6) << "\" y=\"" << num(sy(t) + 4) << "\" text-anchor=\"end\">" << num(t)
           << "</text>\n";
    os << "<text x=\"" << num(kLeft + pw / 2) << "\" y=\"" << num(kHeight - 12)
       << "\" text-anchor=\"middle\">episodes per agent</text>\n";
    os << "<text transform=\"translate(18 " << num(kTop + ph / 2)
       << ") rotate(-90)\" text-anchor=\"middle\">undiscounted return</text>\n";
    os << "</g>\n";

    for (std::size_t i = 0; i < curves.size(); ++i) {
        const auto& c = curves[i];
        const char* color = kPalette[i % kPalette.size()];
        if (c.points.empty()) continue;
        os << "<g id=\"series-" << i << "\">\n";
        os << "<polygon fill=\"" << color << "\" fill-opacity=\"0.25\" stroke=\"none\" points=\"";
        for (const auto& p : c.points) os << num(sx(p.episodes)) << ',' << num(sy(p.spread.q3)) << ' ';
        for (auto it = c.points.rbegin(); it != c.points.rend(); ++it)
            os << num(sx(it->episodes)) << ',' << num(sy(it->spread.q1)) << ' ';
        os << "\"/>\n";
        os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
        for (const auto& p : c.points) os << num(sx(p.episodes)) << ',' << num(sy(p.spread.median)) << ' ';
        os << "\"/>\n";
        const double ly = kTop + 10 + 20.0 * static_cast<double>(i);
        os << "<line x1=\"" << num(kLeft + pw + 15) << "\" y1=\"" << num(ly) << "\" x2=\"" << num(kLeft + pw + 40)
           << "\" y2=\"" << num(ly) << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
        os << "<text x=\"" << num(kLeft + pw + 46) << "\" y=\"" << num(ly + 4) << "\">" << escape(c.label)
           << "</text>\n";
        os << "</g>\n";
    }
    os << "</svg>\n";
    return os.str();
}

void plot(std::span<const SeriesSpec> series, const std::filesystem::path& output, const std::string& title) {
    if (series.empty()) throw ArgumentError("plot: no metrics files given");
    std::vector<Curve> curves;
    for (const auto& s : series) {
        std::vector<std::vector<training::MetricsRow>> runs;
        for (const auto& path : s.csvs) {
            std::vector<training::MetricsRow> rows;
            try {
                rows = training::read_metrics_csv(path);
            } catch (const ConfigError& e) {
                throw ConfigError(path.string(), e.what());
            }
            if (rows.empty()) throw ArgumentError(path.string() + ": metrics file has no data rows");
            runs.push_back(std::move(rows));
        }
        curves.push_back({s.label, learning_curve(runs)});
        if (curves.back().points.empty())
            throw ArgumentError(s.label + ": no per-agent rows to plot");
    }
    const auto svg = render_svg(curves, title);
    if (output.has_parent_path()) std::filesystem::create_directories(output.parent_path());
    std::ofstream out(output, std::ios::binary);
    if (!out) throw ConfigError(output.string(), "cannot write plot");
    out << svg;
}

} // namespace diffdac::plot
