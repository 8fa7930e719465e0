#pragma once

#include <string>
#include <vector>

#include "faceedit/animation.hpp"
#include "faceedit/masking.hpp"

namespace faceedit {

struct PlotCurve {
    std::string label;
    std::vector<double> values;
};

struct PlotSpec {
    std::string title;
    std::vector<PlotCurve> curves;
    std::vector<Segment> shaded;  // edited spans, drawn behind the curves
    int width = 960;
    int height = 400;
};

void render_svg_plot(const PlotSpec& spec, const std::string& path);

// Overlays the named channels of several animations (original vs edited vs
// baseline, in practice). Channel names resolve to blendshape columns, or
// to rig distance tracks when a rig is given.
void plot_curves(const std::vector<std::string>& anim_paths,
                 const std::vector<std::string>& channels, const std::vector<Segment>& segments,
                 const std::string& out_path, const DistanceRig* rig = nullptr);

}  // namespace faceedit
