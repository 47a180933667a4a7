#include <cstdio>
#include <sstream>

#include "swarmnet/evaluation.hpp"
#include "swarmnet/io.hpp"

namespace swarmnet::eval {

namespace {

struct Series {
    std::vector<std::pair<double, double>> xy;
    bool steps = false;
};

// Minimal unit-square line chart.
std::string svg_chart(const std::string& title, const std::string& xlabel, const std::string& ylabel,
                      const Series& series, bool diagonal) {
    constexpr double W = 480, H = 400, L = 64, R = 20, T = 40, B = 56;
    const double pw = W - L - R, ph = H - T - B;
    auto sx = [&](double x) { return L + x * pw; };
    auto sy = [&](double y) { return T + (1.0 - y) * ph; };

    std::ostringstream s;
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    s << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" << title << "</text>\n";
    for (int i = 0; i <= 5; ++i) {
        const double v = i / 5.0;
        char buf[16];
        std::snprintf(buf, sizeof buf, "%.1f", v);
        s << "<line x1=\"" << sx(v) << "\" y1=\"" << sy(0) << "\" x2=\"" << sx(v) << "\" y2=\"" << sy(1) << "\" stroke=\"#ddd\"/>\n";
        s << "<line x1=\"" << sx(0) << "\" y1=\"" << sy(v) << "\" x2=\"" << sx(1) << "\" y2=\"" << sy(v) << "\" stroke=\"#ddd\"/>\n";
        s << "<text x=\"" << sx(v) << "\" y=\"" << sy(0) + 16 << "\" text-anchor=\"middle\">" << buf << "</text>\n";
        s << "<text x=\"" << sx(0) - 8 << "\" y=\"" << sy(v) + 4 << "\" text-anchor=\"end\">" << buf << "</text>\n";
    }
    s << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << pw << "\" height=\"" << ph << "\" fill=\"none\" stroke=\"black\"/>\n";
    s << "<text x=\"" << L + pw / 2 << "\" y=\"" << H - 16 << "\" text-anchor=\"middle\">" << xlabel << "</text>\n";
    s << "<text transform=\"translate(18," << T + ph / 2 << ") rotate(-90)\" text-anchor=\"middle\">" << ylabel << "</text>\n";
    if (diagonal)
        s << "<line x1=\"" << sx(0) << "\" y1=\"" << sy(0) << "\" x2=\"" << sx(1) << "\" y2=\"" << sy(1) << "\" stroke=\"#999\" stroke-dasharray=\"4 4\"/>\n";
    s << "<polyline fill=\"none\" stroke=\"#1f5fbf\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < series.xy.size(); ++i) {
        const auto [x, y] = series.xy[i];
        if (series.steps && i > 0) s << sx(x) << ',' << sy(series.xy[i - 1].second) << ' ';
        s << sx(x) << ',' << sy(y) << ' ';
    }
    s << "\"/>\n</svg>\n";
    return s.str();
}

} // namespace

std::vector<std::filesystem::path> write_plots(const EvalReport& report, const std::filesystem::path& dir,
                                               const std::string& run_id) {
    std::filesystem::create_directories(dir);
    Series sens, spec, roc;
    for (const auto& p : report.sweep) {
        sens.xy.emplace_back(p.threshold, p.sensitivity);
        spec.xy.emplace_back(p.threshold, p.specificity);
    }
    for (const auto& p : report.roc) roc.xy.emplace_back(p.fpr, p.tpr);

    char auc[64];
    std::snprintf(auc, sizeof auc, "ROC (AUC = %.4f)", report.auc);
    const std::vector<std::pair<std::filesystem::path, std::string>> files = {
        {dir / (run_id + "_sensitivity.svg"), svg_chart("Sensitivity vs. threshold", "Decision threshold", "Sensitivity", sens, false)},
        {dir / (run_id + "_specificity.svg"), svg_chart("Specificity vs. threshold", "Decision threshold", "Specificity", spec, false)},
        {dir / (run_id + "_roc.svg"), svg_chart(auc, "False positive rate", "True positive rate", roc, true)},
    };
    std::vector<std::filesystem::path> out;
    for (const auto& [path, content] : files) {
        io::write_text_atomic(path, content);
        out.push_back(path);
    }
    return out;
}

} // namespace swarmnet::eval
