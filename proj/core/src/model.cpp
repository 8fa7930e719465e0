#include <cstring>
#include <fstream>

#include "faceedit/errors.hpp"
#include "faceedit/model.hpp"
#include "json.hpp"

namespace faceedit {

using nlohmann::json;

void AdamState::init(const std::vector<const Eigen::MatrixXd*>& params) {
    m.clear();
    v.clear();
    for (const Eigen::MatrixXd* p : params) {
        m.push_back(Eigen::MatrixXd::Zero(p->rows(), p->cols()));
        v.push_back(Eigen::MatrixXd::Zero(p->rows(), p->cols()));
    }
    step = 0;
}

void AdamState::update(const std::vector<Eigen::MatrixXd*>& params,
                       const std::vector<Eigen::MatrixXd>& grads, const AdamConfig& cfg) {
    if (params.size() != grads.size() || params.size() != m.size())
        throw RuntimeAbort("optimizer state does not match parameter list");
    ++step;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
    for (size_t i = 0; i < params.size(); ++i) {
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * grads[i];
        v[i] = cfg.beta2 * v[i].array().matrix() +
               (1.0 - cfg.beta2) * grads[i].cwiseProduct(grads[i]);
        const Eigen::ArrayXXd m_hat = m[i].array() / bc1;
        const Eigen::ArrayXXd v_hat = v[i].array() / bc2;
        params[i]->array() -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
    }
}

ModelBundle make_bundle(ConstraintKind kind, const GeneratorConfig& gen_cfg,
                        const DiscriminatorConfig& dis_cfg, const DistanceRig& rig,
                        std::uint64_t seed) {
    ModelBundle bundle;
    bundle.kind = kind;
    bundle.seed = seed;
    bundle.rng = Rng(seed);
    bundle.rig = rig;
    bundle.generator = Generator(gen_cfg);
    bundle.generator.init(bundle.rng);
    bundle.discriminator = Discriminator(dis_cfg);
    bundle.discriminator.init(bundle.rng);
    bundle.gen_opt.init(std::as_const(bundle.generator).param_list());
    bundle.dis_opt.init(std::as_const(bundle.discriminator).param_list());
    bundle.iteration = 0;
    return bundle;
}

namespace {

constexpr char kMagic[8] = {'F', 'E', 'C', 'K', 'P', 'T', '0', '1'};

struct TensorRef {
    std::string name;
    const Eigen::MatrixXd* tensor;
};

void collect_tensors(const ModelBundle& bundle, std::vector<TensorRef>& refs,
                     std::vector<Eigen::MatrixXd>& scratch) {
    auto add_list = [&](const std::string& prefix,
                        const std::vector<const Eigen::MatrixXd*>& list) {
        for (size_t i = 0; i < list.size(); ++i)
            refs.push_back({prefix + std::to_string(i), list[i]});
    };
    add_list("gen.p", std::as_const(bundle.generator).param_list());
    add_list("dis.p", std::as_const(bundle.discriminator).param_list());
    for (size_t i = 0; i < bundle.gen_opt.m.size(); ++i) {
        refs.push_back({"gen.adam_m" + std::to_string(i), &bundle.gen_opt.m[i]});
        refs.push_back({"gen.adam_v" + std::to_string(i), &bundle.gen_opt.v[i]});
    }
    for (size_t i = 0; i < bundle.dis_opt.m.size(); ++i) {
        refs.push_back({"dis.adam_m" + std::to_string(i), &bundle.dis_opt.m[i]});
        refs.push_back({"dis.adam_v" + std::to_string(i), &bundle.dis_opt.v[i]});
    }
    auto& dis = const_cast<Discriminator&>(bundle.discriminator);
    for (int i = 0; i < dis.n_layers(); ++i) {
        scratch.push_back(dis.spectral_state(i).u);
        refs.push_back({"dis.sn_u" + std::to_string(i), &scratch.back()});
        scratch.push_back(dis.spectral_state(i).v);
        refs.push_back({"dis.sn_v" + std::to_string(i), &scratch.back()});
    }
}

json rig_to_json(const DistanceRig& rig) {
    json j;
    json rows = json::array();
    for (int r = 0; r < rig.A.rows(); ++r) {
        json row = json::array();
        for (int c = 0; c < rig.A.cols(); ++c)
            row.push_back(rig.A(r, c));
        rows.push_back(std::move(row));
    }
    j["A"] = std::move(rows);
    json b = json::array();
    for (int r = 0; r < rig.b.size(); ++r)
        b.push_back(rig.b(r));
    j["b"] = std::move(b);
    j["distance_names"] = rig.distance_names;
    return j;
}

DistanceRig rig_from_json(const json& j) {
    DistanceRig rig;
    const auto& rows = j.at("A");
    const int R = static_cast<int>(rows.size());
    const int N = static_cast<int>(rows.at(0).size());
    rig.A.resize(R, N);
    for (int r = 0; r < R; ++r)
        for (int c = 0; c < N; ++c)
            rig.A(r, c) = rows[r][c].get<double>();
    rig.b.resize(R);
    for (int r = 0; r < R; ++r)
        rig.b(r) = j.at("b")[r].get<double>();
    rig.distance_names = j.at("distance_names").get<std::vector<std::string>>();
    return rig;
}

}  // namespace

void save_checkpoint(const ModelBundle& bundle, const std::string& path) {
    std::vector<TensorRef> refs;
    std::vector<Eigen::MatrixXd> scratch;
    scratch.reserve(2 * bundle.discriminator.config().channels.size());
    collect_tensors(bundle, refs, scratch);

    json manifest;
    manifest["constraint_kind"] = to_string(bundle.kind);
    manifest["iteration"] = bundle.iteration;
    manifest["seed"] = bundle.seed;
    manifest["rng_state"] = rng_state_string(bundle.rng);
    const auto& g = bundle.generator.config();
    manifest["generator"] = {{"n_layers", g.n_layers},
                             {"hidden_units", g.hidden_units},
                             {"n_shapes", g.n_shapes},
                             {"n_feat", g.n_feat},
                             {"dropout_rate", g.dropout_rate}};
    const auto& d = bundle.discriminator.config();
    manifest["discriminator"] = {{"in_channels", d.in_channels}, {"channels", d.channels},
                                 {"kernel", d.kernel},           {"stride", d.stride},
                                 {"padding", d.padding},         {"leaky_slope", d.leaky_slope},
                                 {"seq_len", d.seq_len}};
    manifest["rig"] = rig_to_json(bundle.rig);
    manifest["gen_opt_step"] = bundle.gen_opt.step;
    manifest["dis_opt_step"] = bundle.dis_opt.step;
    json tensors = json::array();
    for (const auto& ref : refs)
        tensors.push_back({{"name", ref.name},
                           {"rows", ref.tensor->rows()},
                           {"cols", ref.tensor->cols()}});
    manifest["tensors"] = std::move(tensors);

    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out)
            throw RuntimeAbort("cannot write checkpoint " + tmp);
        out.write(kMagic, sizeof(kMagic));
        const std::string m = manifest.dump();
        const std::uint64_t len = m.size();
        out.write(reinterpret_cast<const char*>(&len), sizeof(len));
        out.write(m.data(), static_cast<std::streamsize>(m.size()));
        for (const auto& ref : refs)
            out.write(reinterpret_cast<const char*>(ref.tensor->data()),
                      static_cast<std::streamsize>(ref.tensor->size() * sizeof(double)));
        if (!out)
            throw RuntimeAbort("I/O failure writing checkpoint " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw RuntimeAbort("cannot move checkpoint into place at " + path);
}

ModelBundle load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw DataError("cannot open checkpoint " + path);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw DataError(path + " is not a checkpoint file");
    std::uint64_t len = 0;
    in.read(reinterpret_cast<char*>(&len), sizeof(len));
    std::string text(len, '\0');
    in.read(text.data(), static_cast<std::streamsize>(len));
    if (!in)
        throw DataError(path + ": truncated checkpoint manifest");
    json manifest;
    try {
        manifest = json::parse(text);
    } catch (const json::exception& e) {
        throw DataError(path + ": bad manifest: " + e.what());
    }

    ModelBundle bundle;
    try {
        bundle.kind = constraint_kind_from_string(manifest.at("constraint_kind"));
        bundle.iteration = manifest.at("iteration").get<std::int64_t>();
        bundle.seed = manifest.at("seed").get<std::uint64_t>();
        bundle.rng = rng_from_state_string(manifest.at("rng_state").get<std::string>());
        GeneratorConfig g;
        const auto& jg = manifest.at("generator");
        g.n_layers = jg.at("n_layers").get<int>();
        g.hidden_units = jg.at("hidden_units").get<int>();
        g.n_shapes = jg.at("n_shapes").get<int>();
        g.n_feat = jg.at("n_feat").get<int>();
        g.dropout_rate = jg.at("dropout_rate").get<double>();
        DiscriminatorConfig d;
        const auto& jd = manifest.at("discriminator");
        d.in_channels = jd.at("in_channels").get<int>();
        d.channels = jd.at("channels").get<std::vector<int>>();
        d.kernel = jd.at("kernel").get<int>();
        d.stride = jd.at("stride").get<int>();
        d.padding = jd.at("padding").get<int>();
        d.leaky_slope = jd.at("leaky_slope").get<double>();
        d.seq_len = jd.at("seq_len").get<int>();
        bundle.rig = rig_from_json(manifest.at("rig"));

        Rng scratch_rng(bundle.seed);
        bundle.generator = Generator(g);
        bundle.generator.init(scratch_rng);
        bundle.discriminator = Discriminator(d);
        bundle.discriminator.init(scratch_rng);
        bundle.gen_opt.init(std::as_const(bundle.generator).param_list());
        bundle.dis_opt.init(std::as_const(bundle.discriminator).param_list());
        bundle.gen_opt.step = manifest.at("gen_opt_step").get<std::int64_t>();
        bundle.dis_opt.step = manifest.at("dis_opt_step").get<std::int64_t>();

        // Overwrite everything with the serialized tensors, in file order.
        std::vector<Eigen::MatrixXd*> slots;
        for (auto* p : bundle.generator.param_list())
            slots.push_back(p);
        for (auto* p : bundle.discriminator.param_list())
            slots.push_back(p);
        for (size_t i = 0; i < bundle.gen_opt.m.size(); ++i) {
            slots.push_back(&bundle.gen_opt.m[i]);
            slots.push_back(&bundle.gen_opt.v[i]);
        }
        for (size_t i = 0; i < bundle.dis_opt.m.size(); ++i) {
            slots.push_back(&bundle.dis_opt.m[i]);
            slots.push_back(&bundle.dis_opt.v[i]);
        }
        std::vector<Eigen::MatrixXd> sn_store(2 * bundle.discriminator.n_layers());
        for (int i = 0; i < bundle.discriminator.n_layers(); ++i) {
            slots.push_back(&sn_store[2 * i]);
            slots.push_back(&sn_store[2 * i + 1]);
        }

        const auto& tensors = manifest.at("tensors");
        if (tensors.size() != slots.size())
            throw DataError(path + ": tensor table does not match model layout");
        for (size_t i = 0; i < slots.size(); ++i) {
            const int rows = tensors[i].at("rows").get<int>();
            const int cols = tensors[i].at("cols").get<int>();
            slots[i]->resize(rows, cols);
            in.read(reinterpret_cast<char*>(slots[i]->data()),
                    static_cast<std::streamsize>(slots[i]->size() * sizeof(double)));
        }
        if (!in)
            throw DataError(path + ": truncated tensor data");

        for (int i = 0; i < bundle.discriminator.n_layers(); ++i) {
            bundle.discriminator.spectral_state(i).u = sn_store[2 * i];
            bundle.discriminator.spectral_state(i).v = sn_store[2 * i + 1];
        }
        // Re-derive the cached normalized kernels from the restored state
        // without advancing the power iteration.
        bundle.discriminator.refresh_spectral(0);
    } catch (const json::exception& e) {
        throw DataError(path + ": bad manifest: " + e.what());
    }
    return bundle;
}

}  // namespace faceedit
