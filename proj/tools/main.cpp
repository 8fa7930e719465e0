// faceedit: synthesize a corpus, train the inpainting networks, fill or
// revise animation segments, and evaluate the results.
//
// Exit codes: 0 success, 1 usage, 2 bad data, 3 runtime abort.

#include <chrono>
#include <filesystem>
#include <iostream>

#include "CLI11.hpp"
#include "faceedit/datagen.hpp"
#include "faceedit/editing.hpp"
#include "faceedit/errors.hpp"
#include "faceedit/evaluation.hpp"
#include "faceedit/svg_plot.hpp"
#include "faceedit/training.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace faceedit;

namespace {

void log_config(const std::string& subcommand, const nlohmann::json& resolved) {
    std::cerr << "[faceedit] " << subcommand << " config: " << resolved.dump() << "\n";
}

struct SynthArgs {
    std::string out;
    CorpusConfig corpus;
    NoiseConfig noise;
};

int run_synth(const SynthArgs& args) {
    log_config("synth", {{"out", args.out},
                         {"sequences", args.corpus.n_sequences},
                         {"length", args.corpus.length},
                         {"fps", args.corpus.fps},
                         {"seed", args.corpus.seed},
                         {"blink_rate", args.corpus.blink_rate},
                         {"speech_band", {args.corpus.speech_freq_lo, args.corpus.speech_freq_hi}},
                         {"expression_rate", args.corpus.expression_rate},
                         {"jitter_std", args.noise.jitter_std},
                         {"spike_prob", args.noise.spike_prob},
                         {"spike_scale", args.noise.spike_scale},
                         {"drift_std", args.noise.drift_std}});
    const CorpusManifest manifest = build_corpus(args.corpus, args.noise, args.out);
    std::cout << "wrote " << manifest.items.size() << " sequences ("
              << manifest.duration_seconds << " s) to " << args.out << "\n";
    return 0;
}

struct TrainArgs {
    std::string data;
    std::string out;
    std::string constraint = "none";
    TrainConfig cfg;
    bool resume = false;
};

std::string latest_checkpoint(const std::string& dir) {
    if (fs::exists(fs::path(dir) / "model.fec"))
        return (fs::path(dir) / "model.fec").string();
    std::string best;
    for (const auto& entry : fs::directory_iterator(dir)) {
        const std::string name = entry.path().filename().string();
        if (name.rfind("checkpoint_", 0) == 0 && name.size() > 4 &&
            name.substr(name.size() - 4) == ".fec" && name > best)
            best = name;
    }
    if (best.empty())
        throw DataError("no checkpoint found in " + dir);
    return (fs::path(dir) / best).string();
}

int run_train(TrainArgs& args) {
    args.cfg.constraint_kind = constraint_kind_from_string(args.constraint);
    if (args.resume)
        args.cfg.resume_from = latest_checkpoint(args.out);
    log_config("train", {{"data", args.data},
                         {"constraint", args.constraint},
                         {"iters", args.cfg.iterations},
                         {"batch", args.cfg.batch_size},
                         {"lr", args.cfg.learning_rate},
                         {"seed", args.cfg.seed},
                         {"hidden", args.cfg.generator.hidden_units},
                         {"layers", args.cfg.generator.n_layers},
                         {"dropout", args.cfg.generator.dropout_rate},
                         {"mask_segments",
                          {args.cfg.mask_sampler.min_segments, args.cfg.mask_sampler.max_segments}},
                         {"mask_len", {args.cfg.mask_sampler.min_len, args.cfg.mask_sampler.max_len}},
                         {"hinge", args.cfg.loss_options.hinge},
                         {"adv_on_recomposed", args.cfg.loss_options.adversarial_on_recomposed},
                         {"resume_from", args.cfg.resume_from},
                         {"out", args.out}});
    const CorpusManifest manifest = load_corpus_manifest(args.data);
    const TrainResult result = train(args.cfg, manifest, args.out);
    std::cout << "final checkpoint: " << result.final_checkpoint << "\n";
    if (!result.records.empty())
        std::cout << "final losses: G=" << result.records.back().loss_g
                  << " D=" << result.records.back().loss_d << "\n";
    return 0;
}

struct EditArgs {
    std::string model, input, spec, out;
    std::uint64_t seed = 0;
    bool exact_keyframes = false;
    bool clamp = false;
};

int run_edit(const EditArgs& args) {
    log_config("edit", {{"model", args.model},
                        {"input", args.input},
                        {"spec", args.spec},
                        {"seed", args.seed},
                        {"exact_keyframes", args.exact_keyframes},
                        {"out", args.out}});
    const ModelBundle bundle = load_checkpoint(args.model);
    EditRequest req;
    req.animation = load_animation(args.input, args.clamp);
    EditSpec spec = load_edit_spec(args.spec);
    req.segments = std::move(spec.segments);
    req.guidance = std::move(spec.guidance);
    req.seed = args.seed;
    req.exact_keyframes = args.exact_keyframes;
    const auto start = std::chrono::steady_clock::now();
    const Animation edited = edit(req, bundle);
    const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
    save_animation(edited, args.out);
    std::cout << "wrote " << args.out << " (inference " << elapsed.count() << " s)\n";
    return 0;
}

struct EvalArgs {
    // bezier
    std::string input;
    double tol = 0.01;
    std::string channel;
    // mse
    std::string a, b;
    // report
    std::string original, edited, spec, out;
    double inference_seconds = 0.0;
};

int run_eval_bezier(const EvalArgs& args) {
    log_config("eval bezier",
               {{"input", args.input}, {"tol", args.tol}, {"channel", args.channel}});
    const Animation anim = load_animation(args.input);
    int total = 0;
    double worst = 0.0;
    bool found = args.channel.empty();
    for (int c = 0; c < anim.n_shapes(); ++c) {
        if (!args.channel.empty() && anim.names[c] != args.channel)
            continue;
        found = true;
        std::vector<double> curve(anim.frames.col(c).data(),
                                  anim.frames.col(c).data() + anim.length());
        const BezierFitResult fit = bezier_keypoint_estimate(curve, args.tol);
        total += fit.control_points;
        worst = std::max(worst, fit.max_error);
        std::cout << anim.names[c] << ": " << fit.control_points << " control points, max error "
                  << fit.max_error << "\n";
    }
    if (!found)
        throw DataError("channel \"" + args.channel + "\" not in animation");
    std::cout << "total: " << total << " control points, max error " << worst << "\n";
    return 0;
}

int run_eval_mse(const EvalArgs& args) {
    log_config("eval mse", {{"a", args.a}, {"b", args.b}});
    std::cout << "mse: " << mse(load_animation(args.a), load_animation(args.b)) << "\n";
    return 0;
}

int run_eval_report(const EvalArgs& args) {
    log_config("eval report", {{"original", args.original},
                               {"edited", args.edited},
                               {"spec", args.spec},
                               {"tol", args.tol},
                               {"out", args.out}});
    const Animation original = load_animation(args.original);
    const Animation edited = load_animation(args.edited);
    const EditSpec spec = load_edit_spec(args.spec);
    const EditReport report = edit_report(original, edited, spec.segments, canonical_rig(),
                                          args.tol, args.inference_seconds);
    std::cout << format_edit_report(report);
    if (!args.out.empty()) {
        save_edit_report(report, args.out);
        std::cout << "wrote " << args.out << "\n";
    }
    return 0;
}

struct PlotArgs {
    std::vector<std::string> inputs;
    std::vector<std::string> channels;
    std::string spec;
    std::vector<std::string> segment_strings;
    std::string rig_path;
    std::string out;
};

int run_plot(const PlotArgs& args) {
    log_config("plot", {{"inputs", args.inputs},
                        {"channels", args.channels},
                        {"spec", args.spec},
                        {"segments", args.segment_strings},
                        {"out", args.out}});
    std::vector<Segment> segments;
    if (!args.spec.empty())
        segments = load_edit_spec(args.spec).segments;
    for (const auto& s : args.segment_strings) {
        const auto colon = s.find(':');
        if (colon == std::string::npos)
            throw DataError("segment must be start:end, got \"" + s + "\"");
        segments.push_back({std::stoi(s.substr(0, colon)), std::stoi(s.substr(colon + 1))});
    }
    const DistanceRig rig = args.rig_path.empty() ? canonical_rig() : load_rig(args.rig_path);
    plot_curves(args.inputs, args.channels, segments, args.out, &rig);
    std::cout << "wrote " << args.out << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"generative blendshape animation inpainting"};
    app.require_subcommand(1);

    SynthArgs synth;
    auto* s = app.add_subcommand("synth", "generate a synthetic training corpus");
    s->add_option("--out", synth.out, "output directory")->required();
    s->add_option("--sequences", synth.corpus.n_sequences, "number of sequences");
    s->add_option("--length", synth.corpus.length, "frames per sequence");
    s->add_option("--fps", synth.corpus.fps, "frame rate");
    s->add_option("--seed", synth.corpus.seed, "random seed");
    s->add_option("--blink-rate", synth.corpus.blink_rate, "blinks per minute");
    s->add_option("--speech-lo", synth.corpus.speech_freq_lo, "mouth spring band low (Hz)");
    s->add_option("--speech-hi", synth.corpus.speech_freq_hi,
                  "mouth spring band high (Hz), 0 disables speech");
    s->add_option("--expression-rate", synth.corpus.expression_rate, "brow events per minute");
    s->add_option("--jitter-std", synth.noise.jitter_std, "tracker jitter std");
    s->add_option("--spike-prob", synth.noise.spike_prob, "per-frame outlier probability");
    s->add_option("--spike-scale", synth.noise.spike_scale, "outlier magnitude");
    s->add_option("--drift-std", synth.noise.drift_std, "random-walk drift std");

    TrainArgs train_args;
    auto* t = app.add_subcommand("train", "train an editing network");
    t->add_option("--data", train_args.data, "corpus manifest")->required();
    t->add_option("--constraint", train_args.constraint, "none|keyframes|noisy|visemes");
    t->add_option("--iters", train_args.cfg.iterations, "training iterations");
    t->add_option("--batch", train_args.cfg.batch_size, "batch size");
    t->add_option("--lr", train_args.cfg.learning_rate, "learning rate (both networks)");
    t->add_option("--seed", train_args.cfg.seed, "random seed");
    t->add_option("--out", train_args.out, "output directory")->required();
    t->add_option("--hidden", train_args.cfg.generator.hidden_units, "recurrent units/direction");
    t->add_option("--layers", train_args.cfg.generator.n_layers, "recurrent layers");
    t->add_option("--dropout", train_args.cfg.generator.dropout_rate, "generator dropout");
    t->add_option("--checkpoint-every", train_args.cfg.checkpoint_every,
                  "checkpoint cadence (iterations)");
    t->add_option("--min-segments", train_args.cfg.mask_sampler.min_segments, "mask sampler");
    t->add_option("--max-segments", train_args.cfg.mask_sampler.max_segments, "mask sampler");
    t->add_option("--min-len", train_args.cfg.mask_sampler.min_len, "mask sampler");
    t->add_option("--max-len", train_args.cfg.mask_sampler.max_len, "mask sampler");
    t->add_flag("--resume", train_args.resume, "resume from the latest checkpoint in --out");
    t->add_flag("!--no-hinge", train_args.cfg.loss_options.hinge,
                "use the literal unhinged discriminator objective");
    t->add_flag("!--adv-on-raw", train_args.cfg.loss_options.adversarial_on_recomposed,
                "evaluate the generator's adversarial term on raw output");
    t->add_flag("!--generator-first", train_args.cfg.discriminator_first,
                "update the generator before the discriminator");

    EditArgs edit_args;
    auto* e = app.add_subcommand("edit", "fill or revise masked segments");
    e->add_option("--model", edit_args.model, "trained checkpoint")->required();
    e->add_option("--input", edit_args.input, "input animation")->required();
    e->add_option("--spec", edit_args.spec, "edit-spec JSON")->required();
    e->add_option("--seed", edit_args.seed, "noise seed");
    e->add_option("--out", edit_args.out, "output animation")->required();
    e->add_flag("--exact-keyframes", edit_args.exact_keyframes,
                "warp the fill to hit keyframes exactly");
    e->add_flag("--clamp", edit_args.clamp, "clamp out-of-range input weights");

    EvalArgs eval_args;
    auto* ev = app.add_subcommand("eval", "quantitative evaluation");
    ev->require_subcommand(1);
    auto* eb = ev->add_subcommand("bezier", "estimate keyframe cost of animation curves");
    eb->add_option("--input", eval_args.input, "animation")->required();
    eb->add_option("--tol", eval_args.tol, "fit tolerance");
    eb->add_option("--channel", eval_args.channel, "restrict to one channel");
    auto* em = ev->add_subcommand("mse", "mean squared error between two animations");
    em->add_option("--a", eval_args.a, "first animation")->required();
    em->add_option("--b", eval_args.b, "second animation")->required();
    auto* er = ev->add_subcommand("report", "per-segment edit cost report");
    er->add_option("--original", eval_args.original, "animation before the edit")->required();
    er->add_option("--edited", eval_args.edited, "animation after the edit")->required();
    er->add_option("--spec", eval_args.spec, "edit-spec JSON with the segments")->required();
    er->add_option("--tol", eval_args.tol, "fit tolerance");
    er->add_option("--inference-seconds", eval_args.inference_seconds,
                   "wall-clock inference time to record");
    er->add_option("--out", eval_args.out, "write the report JSON here");

    PlotArgs plot_args;
    auto* p = app.add_subcommand("plot", "render channel curves to SVG");
    p->add_option("--input", plot_args.inputs, "animation (repeatable)")->required();
    p->add_option("--channel", plot_args.channels, "channel name (repeatable)")->required();
    p->add_option("--spec", plot_args.spec, "edit-spec JSON providing shaded segments");
    p->add_option("--segment", plot_args.segment_strings, "shaded span start:end (repeatable)");
    p->add_option("--rig", plot_args.rig_path, "rig JSON for distance channels");
    p->add_option("--out", plot_args.out, "output SVG")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        return app.exit(err) == 0 ? 0 : 1;
    }

    try {
        if (s->parsed())
            return run_synth(synth);
        if (t->parsed())
            return run_train(train_args);
        if (e->parsed())
            return run_edit(edit_args);
        if (ev->parsed()) {
            if (eb->parsed())
                return run_eval_bezier(eval_args);
            if (em->parsed())
                return run_eval_mse(eval_args);
            if (er->parsed())
                return run_eval_report(eval_args);
        }
        if (p->parsed())
            return run_plot(plot_args);
        std::cerr << "no subcommand\n";
        return 1;
    } catch (const DataError& err) {
        std::cerr << "error: " << err.what() << "\n";
        return 2;
    } catch (const std::exception& err) {
        std::cerr << "fatal: " << err.what() << "\n";
        return 3;
    }
}
