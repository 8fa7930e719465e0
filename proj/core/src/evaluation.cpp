#include "faceedit/evaluation.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "faceedit/errors.hpp"
#include "json.hpp"

namespace faceedit {

using nlohmann::json;

namespace {

constexpr double kHandleEps = 1e-12;
constexpr double kArtistSecondsLow = 12.0;
constexpr double kArtistSecondsHigh = 30.0;

struct SpanFit {
    double beta1 = 0.0;  // handle offsets relative to the anchors
    double beta2 = 0.0;
    double max_error = 0.0;
};

// Least-squares cubic over samples y[first..last] at uniform parameters,
// with anchors pinned to the end samples. Two free degrees remain (the
// handle value offsets), so any cubic polynomial is recovered exactly.
SpanFit fit_span(const std::vector<double>& y, int first, int last) {
    const int n = last - first;
    const double c0 = y[first];
    const double c3 = y[last];
    double s11 = 0, s12 = 0, s22 = 0, r1 = 0, r2 = 0;
    for (int i = 1; i < n; ++i) {
        const double u = static_cast<double>(i) / n;
        const double v = 1.0 - u;
        const double b0 = v * v * v;
        const double b1 = 3.0 * v * v * u;
        const double b2 = 3.0 * v * u * u;
        const double b3 = u * u * u;
        const double resid = y[first + i] - (b0 + b1) * c0 - (b2 + b3) * c3;
        s11 += b1 * b1;
        s12 += b1 * b2;
        s22 += b2 * b2;
        r1 += b1 * resid;
        r2 += b2 * resid;
    }
    SpanFit fit;
    const double det = s11 * s22 - s12 * s12;
    if (std::abs(det) > 1e-12) {
        fit.beta1 = (r1 * s22 - r2 * s12) / det;
        fit.beta2 = (r2 * s11 - r1 * s12) / det;
    } else if (s11 + 2 * s12 + s22 > 1e-12) {
        // Under-determined (a single interior sample): equal offsets.
        fit.beta1 = fit.beta2 = (r1 + r2) / (s11 + 2 * s12 + s22);
    }
    for (int i = 1; i < n; ++i) {
        const double u = static_cast<double>(i) / n;
        const double v = 1.0 - u;
        const double value = v * v * v * c0 + 3.0 * v * v * u * (c0 + fit.beta1) +
                             3.0 * v * u * u * (c3 + fit.beta2) + u * u * u * c3;
        fit.max_error = std::max(fit.max_error, std::abs(value - y[first + i]));
    }
    return fit;
}

int max_error_index(const std::vector<double>& y, int first, int last, const SpanFit& fit) {
    const int n = last - first;
    int idx = first + n / 2;
    double worst = -1.0;
    for (int i = 1; i < n; ++i) {
        const double u = static_cast<double>(i) / n;
        const double v = 1.0 - u;
        const double value = v * v * v * y[first] + 3.0 * v * v * u * (y[first] + fit.beta1) +
                             3.0 * v * u * u * (y[last] + fit.beta2) + u * u * u * y[last];
        const double err = std::abs(value - y[first + i]);
        if (err > worst) {
            worst = err;
            idx = first + i;
        }
    }
    return idx;
}

void fit_recursive(const std::vector<double>& y, int first, int last, double tol,
                   std::vector<SpanFit>& spans) {
    const SpanFit fit = fit_span(y, first, last);
    if (fit.max_error <= tol || last - first < 2) {
        spans.push_back(fit);
        return;
    }
    int split = max_error_index(y, first, last, fit);
    split = std::clamp(split, first + 1, last - 1);
    fit_recursive(y, first, split, tol, spans);
    fit_recursive(y, split, last, tol, spans);
}

}  // namespace

BezierFitResult bezier_keypoint_estimate(const std::vector<double>& curve, double tol) {
    if (curve.size() < 2)
        throw DataError("bezier fit needs at least two samples");
    if (!(tol > 0.0))
        throw DataError("bezier fit tolerance must be positive");

    std::vector<SpanFit> spans;
    fit_recursive(curve, 0, static_cast<int>(curve.size()) - 1, tol, spans);

    BezierFitResult result;
    result.n_segments = static_cast<int>(spans.size());
    result.control_points = result.n_segments + 1;  // shared anchors counted once
    for (const auto& s : spans) {
        if (std::abs(s.beta1) > kHandleEps)
            ++result.control_points;
        if (std::abs(s.beta2) > kHandleEps)
            ++result.control_points;
        result.max_error = std::max(result.max_error, s.max_error);
    }
    return result;
}

double mse(const Animation& a, const Animation& b) {
    if (a.length() != b.length() || a.n_shapes() != b.n_shapes())
        throw DataError("mse inputs must share shape");
    return (a.frames - b.frames).array().square().mean();
}

EditReport edit_report(const Animation& original, const Animation& edited,
                       const std::vector<Segment>& segments, const DistanceRig& rig, double tol,
                       double inference_seconds) {
    if (original.length() != edited.length() || original.n_shapes() != edited.n_shapes())
        throw DataError("edit report inputs must share shape");
    EditReport report;
    report.tolerance = tol;
    report.inference_seconds = inference_seconds;
    if (segments.empty())
        return report;

    const Mask mask = segments_to_mask(segments, original.length(), original.n_shapes());
    const Eigen::MatrixXd dist_orig = compute_distances(original, rig).values;
    const Eigen::MatrixXd dist_edit = compute_distances(edited, rig).values;

    for (const auto& seg : mask.segments()) {
        SegmentReport row;
        row.segment = seg;
        row.n_frames = seg.length();
        double err_sum = 0.0;
        for (int c = 0; c < edited.n_shapes(); ++c) {
            ChannelFit cf;
            cf.name = edited.names[c];
            if (seg.length() < 2) {
                cf.control_points = 1;
                cf.max_error = 0.0;
            } else {
                std::vector<double> curve(seg.length());
                for (int k = 0; k < seg.length(); ++k)
                    curve[k] = edited.frames(seg.start + k, c);
                const BezierFitResult fit = bezier_keypoint_estimate(curve, tol);
                cf.control_points = fit.control_points;
                cf.max_error = fit.max_error;
            }
            row.points_sum += cf.control_points;
            if (cf.control_points > row.points_max) {
                row.points_max = cf.control_points;
                row.dominant_channel = cf.name;
            }
            err_sum += cf.max_error;
            row.channels.push_back(std::move(cf));
        }
        row.avg_error = err_sum / edited.n_shapes();
        row.distance_deviation = (dist_edit.middleRows(seg.start, seg.length()) -
                                  dist_orig.middleRows(seg.start, seg.length()))
                                     .array()
                                     .abs()
                                     .mean();
        row.artist_seconds_low = kArtistSecondsLow * row.points_sum;
        row.artist_seconds_high = kArtistSecondsHigh * row.points_sum;
        report.rows.push_back(std::move(row));
    }
    return report;
}

void save_edit_report(const EditReport& report, const std::string& path) {
    json j;
    j["tolerance"] = report.tolerance;
    j["inference_seconds"] = report.inference_seconds;
    json rows = json::array();
    for (const auto& row : report.rows) {
        json channels = json::array();
        for (const auto& cf : row.channels)
            channels.push_back({{"name", cf.name},
                                {"control_points", cf.control_points},
                                {"max_error", cf.max_error}});
        rows.push_back({{"start", row.segment.start},
                        {"end", row.segment.end},
                        {"n_frames", row.n_frames},
                        {"points_sum", row.points_sum},
                        {"points_max", row.points_max},
                        {"dominant_channel", row.dominant_channel},
                        {"avg_error", row.avg_error},
                        {"distance_deviation", row.distance_deviation},
                        {"artist_seconds_low", row.artist_seconds_low},
                        {"artist_seconds_high", row.artist_seconds_high},
                        {"channels", std::move(channels)}});
    }
    j["rows"] = std::move(rows);
    std::ofstream out(path);
    if (!out)
        throw RuntimeAbort("cannot write report " + path);
    out << j.dump(1) << '\n';
}

std::string format_edit_report(const EditReport& report) {
    std::ostringstream os;
    char line[256];
    std::snprintf(line, sizeof(line), "%-12s %8s %10s %10s %-22s %10s %12s\n", "segment",
                  "frames", "pts(sum)", "pts(max)", "dominant", "avg err", "artist est");
    os << line;
    for (const auto& row : report.rows) {
        char span[32];
        std::snprintf(span, sizeof(span), "[%d,%d)", row.segment.start, row.segment.end);
        char artist[32];
        std::snprintf(artist, sizeof(artist), "%.0f-%.0fs", row.artist_seconds_low,
                      row.artist_seconds_high);
        std::snprintf(line, sizeof(line), "%-12s %8d %10d %10d %-22s %10.4f %12s\n", span,
                      row.n_frames, row.points_sum, row.points_max, row.dominant_channel.c_str(),
                      row.avg_error, artist);
        os << line;
    }
    std::snprintf(line, sizeof(line), "inference: %.3fs, tolerance %.3g (artist estimates are projections at 12-30s per key)\n",
                  report.inference_seconds, report.tolerance);
    os << line;
    return os.str();
}

}  // namespace faceedit
