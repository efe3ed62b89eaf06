#include "supplyshare/svg_plot.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>
#include <sstream>

#include "supplyshare/csv.hpp"
#include "supplyshare/error.hpp"

namespace supplyshare {

namespace {

constexpr int kMarginLeft = 44;
constexpr int kMarginRight = 12;
constexpr int kMarginTop = 28;
constexpr int kMarginBottom = 30;
constexpr int kHeader = 40;

std::string num(double v) {
    std::string s = csv::format_fixed(v, 2);
    if (s == "-0.00") s = "0.00";
    return s;
}

std::string xml_escape(const std::string& text) {
    std::string out;
    for (char c : text) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out.push_back(c);
        }
    }
    return out;
}

struct Frame {
    double x0, y0, w, h;  // plotting area in pixels
    double t0, t1;        // year range
    double px(double year) const { return x0 + (year - t0) / (t1 - t0) * w; }
    double py(double p) const { return y0 + (1.0 - std::clamp(p, 0.0, 1.0)) * h; }
};

void ribbon(std::ostringstream& out, const Frame& f, const std::vector<const SummaryRow*>& rows, bool inner,
            const std::string& color, double opacity) {
    out << "<path d=\"";
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out << (i ? " L" : "M") << num(f.px(rows[i]->year)) << "," << num(f.py(inner ? rows[i]->u80 : rows[i]->u95));
    }
    for (std::size_t i = rows.size(); i-- > 0;) {
        out << " L" << num(f.px(rows[i]->year)) << "," << num(f.py(inner ? rows[i]->l80 : rows[i]->l95));
    }
    out << " Z\" fill=\"" << color << "\" fill-opacity=\"" << num(opacity) << "\" stroke=\"none\"/>\n";
}

}  // namespace

std::array<std::string, 3> parse_colors(const std::string& text) {
    std::array<std::string, 3> out;
    std::vector<std::string> parts;
    std::string cur;
    for (char c : text + ",") {
        if (c == ',') {
            parts.push_back(csv::trim(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (parts.size() != 3) throw ConfigError("--colors needs three comma-separated colors");
    for (std::size_t i = 0; i < 3; ++i) {
        const std::string& p = parts[i];
        const bool hex = p.size() == 7 && p[0] == '#' &&
                         std::all_of(p.begin() + 1, p.end(), [](unsigned char c) { return std::isxdigit(c) != 0; });
        const bool name = !p.empty() && std::all_of(p.begin(), p.end(), [](unsigned char c) { return std::isalpha(c) != 0; });
        if (!hex && !name) throw ConfigError("color '" + p + "' is neither a name nor #rrggbb");
        out[i] = p;
    }
    return out;
}

std::string plot_file_name(const std::string& population) {
    std::string out;
    for (char c : population) {
        const unsigned char u = static_cast<unsigned char>(c);
        out.push_back(std::isalnum(u) || c == '-' || c == '.' ? c : '_');
    }
    return out + ".svg";
}

std::map<std::string, std::string> plot_estimates(const PosteriorSummary& summary, const CleanDataset& data,
                                                  const PlotStyle& style) {
    // population -> method -> sector -> rows in year order
    std::map<std::string, std::map<Method, std::array<std::vector<const SummaryRow*>, 3>>> cells;
    for (const auto& r : summary.rows) {
        cells[r.population][r.method][static_cast<std::size_t>(r.sector)].push_back(&r);
    }
    std::map<std::string, std::map<Method, std::vector<const SurveyObservation*>>> points;
    for (const auto& r : data.rows) points[population_name(r.country, r.province)][r.method].push_back(&r);

    std::map<std::string, std::string> files;
    for (auto& [pop, methods] : cells) {
        double t0 = 1e300, t1 = -1e300;
        for (auto& [m, sectors] : methods) {
            for (auto& rows : sectors) {
                std::stable_sort(rows.begin(), rows.end(),
                                 [](const SummaryRow* a, const SummaryRow* b) { return a->year < b->year; });
                if (!rows.empty()) {
                    t0 = std::min(t0, rows.front()->year);
                    t1 = std::max(t1, rows.back()->year);
                }
            }
        }
        if (!(t1 > t0)) t1 = t0 + 1.0;
        const int n_panels = static_cast<int>(methods.size());
        const int cols = std::max(1, std::min(style.columns, n_panels));
        const int rows_n = (n_panels + cols - 1) / cols;
        const int width = cols * style.panel_width;
        const int height = kHeader + rows_n * style.panel_height;

        std::ostringstream out;
        out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
            << "\" viewBox=\"0 0 " << width << " " << height << "\" font-family=\"sans-serif\">\n";
        out << "<rect width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";
        out << "<text x=\"8\" y=\"18\" font-size=\"14\" font-weight=\"bold\">" << xml_escape(pop) << "</text>\n";
        for (int s = 0; s < 3; ++s) {
            const int lx = 8 + s * 150;
            out << "<rect x=\"" << lx << "\" y=\"26\" width=\"10\" height=\"10\" fill=\"" << style.colors[s] << "\"/>\n";
            out << "<text x=\"" << lx + 14 << "\" y=\"35\" font-size=\"11\">" << to_string(kAllSectors[s]) << "</text>\n";
        }

        int panel = 0;
        for (auto& [m, sectors] : methods) {
            const int px = (panel % cols) * style.panel_width;
            const int py = kHeader + (panel / cols) * style.panel_height;
            ++panel;
            const Frame f{static_cast<double>(px + kMarginLeft), static_cast<double>(py + kMarginTop),
                          static_cast<double>(style.panel_width - kMarginLeft - kMarginRight),
                          static_cast<double>(style.panel_height - kMarginTop - kMarginBottom), t0, t1};
            out << "<g class=\"panel\">\n";
            out << "<text x=\"" << num(f.x0) << "\" y=\"" << py + 18 << "\" font-size=\"12\">" << to_string(m)
                << "</text>\n";
            out << "<rect x=\"" << num(f.x0) << "\" y=\"" << num(f.y0) << "\" width=\"" << num(f.w) << "\" height=\""
                << num(f.h) << "\" fill=\"none\" stroke=\"#333333\" stroke-width=\"0.8\"/>\n";
            for (double p : {0.0, 0.25, 0.5, 0.75, 1.0}) {
                out << "<line x1=\"" << num(f.x0 - 4) << "\" y1=\"" << num(f.py(p)) << "\" x2=\"" << num(f.x0)
                    << "\" y2=\"" << num(f.py(p)) << "\" stroke=\"#333333\"/>\n";
                out << "<text x=\"" << num(f.x0 - 6) << "\" y=\"" << num(f.py(p) + 3)
                    << "\" font-size=\"9\" text-anchor=\"end\">" << num(p) << "</text>\n";
            }
            const int step = (t1 - t0) > 30 ? 10 : 5;
            for (int y = static_cast<int>(std::ceil(t0 / step)) * step; y <= t1; y += step) {
                out << "<line x1=\"" << num(f.px(y)) << "\" y1=\"" << num(f.y0 + f.h) << "\" x2=\"" << num(f.px(y))
                    << "\" y2=\"" << num(f.y0 + f.h + 4) << "\" stroke=\"#333333\"/>\n";
                out << "<text x=\"" << num(f.px(y)) << "\" y=\"" << num(f.y0 + f.h + 15)
                    << "\" font-size=\"9\" text-anchor=\"middle\">" << y << "</text>\n";
            }
            for (int s = 0; s < 3; ++s) {
                const auto& rows = sectors[s];
                if (rows.empty()) continue;
                ribbon(out, f, rows, false, style.colors[s], 0.2);
                ribbon(out, f, rows, true, style.colors[s], 0.35);
                out << "<polyline points=\"";
                for (std::size_t i = 0; i < rows.size(); ++i) {
                    out << (i ? " " : "") << num(f.px(rows[i]->year)) << "," << num(f.py(rows[i]->median));
                }
                out << "\" fill=\"none\" stroke=\"" << style.colors[s] << "\" stroke-width=\"1.5\"/>\n";
            }
            auto pit = points.find(pop);
            if (pit != points.end()) {
                auto mit = pit->second.find(m);
                if (mit != pit->second.end()) {
                    for (const SurveyObservation* o : mit->second) {
                        if (o->avg_year < t0 || o->avg_year > t1) continue;
                        const std::string& color = style.colors[static_cast<std::size_t>(o->sector)];
                        const double x = f.px(o->avg_year);
                        out << "<line x1=\"" << num(x) << "\" y1=\"" << num(f.py(o->proportion - o->se)) << "\" x2=\""
                            << num(x) << "\" y2=\"" << num(f.py(o->proportion + o->se)) << "\" stroke=\"" << color
                            << "\" stroke-width=\"1\"/>\n";
                        out << "<circle cx=\"" << num(x) << "\" cy=\"" << num(f.py(o->proportion))
                            << "\" r=\"2.5\" fill=\"" << color << "\" stroke=\"black\" stroke-width=\"0.4\"/>\n";
                    }
                }
            }
            out << "</g>\n";
        }
        out << "</svg>\n";
        files[pop] = out.str();
    }
    return files;
}

}  // namespace supplyshare
