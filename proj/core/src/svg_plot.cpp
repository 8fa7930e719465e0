#include "faceedit/svg_plot.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "faceedit/errors.hpp"

namespace faceedit {

namespace {

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                          "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

}  // namespace

void render_svg_plot(const PlotSpec& spec, const std::string& path) {
    if (spec.curves.empty())
        throw DataError("nothing to plot");
    size_t n_samples = 0;
    double lo = 0.0, hi = 1.0;
    bool first = true;
    for (const auto& c : spec.curves) {
        n_samples = std::max(n_samples, c.values.size());
        for (double v : c.values) {
            if (first) {
                lo = hi = v;
                first = false;
            }
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    }
    if (n_samples < 2)
        throw DataError("plot needs at least two frames");
    if (hi - lo < 1e-9) {
        lo -= 0.5;
        hi += 0.5;
    }
    const double pad = 0.05 * (hi - lo);
    lo -= pad;
    hi += pad;

    const double ml = 56, mr = 16, mt = 28, mb = 34;
    const double pw = spec.width - ml - mr;
    const double ph = spec.height - mt - mb;
    auto sx = [&](double t) { return ml + pw * t / static_cast<double>(n_samples - 1); };
    auto sy = [&](double v) { return mt + ph * (1.0 - (v - lo) / (hi - lo)); };

    std::ofstream out(path);
    if (!out)
        throw RuntimeAbort("cannot write plot " + path);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << spec.width << "\" height=\""
        << spec.height << "\" viewBox=\"0 0 " << spec.width << " " << spec.height << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

    for (const auto& seg : spec.shaded)
        out << "<rect x=\"" << sx(seg.start) << "\" y=\"" << mt << "\" width=\""
            << sx(std::min<int>(seg.end, static_cast<int>(n_samples) - 1)) - sx(seg.start)
            << "\" height=\"" << ph << "\" fill=\"#fdd\" opacity=\"0.6\"/>\n";

    // axes + y ticks
    out << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << mt + ph
        << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << ml << "\" y1=\"" << mt + ph << "\" x2=\"" << ml + pw << "\" y2=\""
        << mt + ph << "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double v = lo + (hi - lo) * i / 4.0;
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.2f", v);
        out << "<text x=\"" << ml - 6 << "\" y=\"" << sy(v) + 4
            << "\" font-size=\"11\" text-anchor=\"end\" font-family=\"sans-serif\">" << buf
            << "</text>\n";
    }
    out << "<text x=\"" << ml + pw / 2 << "\" y=\"" << spec.height - 8
        << "\" font-size=\"12\" text-anchor=\"middle\" font-family=\"sans-serif\">frame</text>\n";
    if (!spec.title.empty())
        out << "<text x=\"" << ml << "\" y=\"18\" font-size=\"13\" font-family=\"sans-serif\">"
            << spec.title << "</text>\n";

    for (size_t ci = 0; ci < spec.curves.size(); ++ci) {
        const auto& curve = spec.curves[ci];
        const char* color = kPalette[ci % std::size(kPalette)];
        out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
        for (size_t t = 0; t < curve.values.size(); ++t)
            out << sx(static_cast<double>(t)) << "," << sy(curve.values[t]) << " ";
        out << "\"/>\n";
        out << "<text x=\"" << ml + pw - 4 << "\" y=\"" << mt + 14 + 14 * ci
            << "\" font-size=\"11\" text-anchor=\"end\" fill=\"" << color
            << "\" font-family=\"sans-serif\">" << curve.label << "</text>\n";
    }
    out << "</svg>\n";
    if (!out)
        throw RuntimeAbort("I/O failure writing plot " + path);
}

void plot_curves(const std::vector<std::string>& anim_paths,
                 const std::vector<std::string>& channels, const std::vector<Segment>& segments,
                 const std::string& out_path, const DistanceRig* rig) {
    if (anim_paths.empty() || channels.empty())
        throw DataError("plot needs at least one animation and one channel");
    PlotSpec spec;
    spec.shaded = segments;
    for (const auto& path : anim_paths) {
        const Animation anim = load_animation(path);
        const std::string stem = std::filesystem::path(path).stem().string();
        for (const auto& name : channels) {
            PlotCurve curve;
            curve.label = anim_paths.size() > 1 ? stem + ":" + name : name;
            auto col = std::find(anim.names.begin(), anim.names.end(), name);
            if (col != anim.names.end()) {
                const int c = static_cast<int>(col - anim.names.begin());
                curve.values.assign(anim.frames.col(c).data(),
                                    anim.frames.col(c).data() + anim.length());
            } else if (rig) {
                auto d = std::find(rig->distance_names.begin(), rig->distance_names.end(), name);
                if (d == rig->distance_names.end())
                    throw DataError("unknown channel \"" + name + "\"");
                const int r = static_cast<int>(d - rig->distance_names.begin());
                const Eigen::VectorXd track = compute_distances(anim, *rig).values.col(r);
                curve.values.assign(track.data(), track.data() + track.size());
            } else {
                throw DataError("unknown channel \"" + name + "\"");
            }
            spec.curves.push_back(std::move(curve));
        }
    }
    spec.title = "blendshape curves";
    render_svg_plot(spec, out_path);
}

}  // namespace faceedit
