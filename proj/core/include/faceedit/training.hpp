#pragma once

#include <string>
#include <vector>

#include "faceedit/datagen.hpp"
#include "faceedit/losses.hpp"
#include "faceedit/masking.hpp"
#include "faceedit/model.hpp"

namespace faceedit {

struct TrainConfig {
    ConstraintKind constraint_kind = ConstraintKind::None;
    double learning_rate = 1e-3;  // both networks
    int batch_size = 16;
    std::int64_t iterations = 1000;
    int train_length = 200;
    MaskSamplerConfig mask_sampler;
    LossWeights weights;
    LossOptions loss_options;
    std::uint64_t seed = 0;
    std::int64_t checkpoint_every = 500;
    int power_iterations = 1;  // per training step
    bool discriminator_first = true;
    std::string resume_from;  // checkpoint path, empty for a fresh run

    GeneratorConfig generator;          // n_feat is derived from the kind
    DiscriminatorConfig discriminator;  // seq_len is pinned to train_length
};

// Fresh bundle matching the config (or the resumed checkpoint).
ModelBundle init_bundle(const TrainConfig& cfg, const DistanceRig& rig);

// One adversarial step over a batch: sample masks and guidance, run the
// generator, update the discriminator on the hinged objective with the
// gradient penalty, then update the generator. Throws RuntimeAbort on a
// non-finite loss.
LossRecord train_step(ModelBundle& bundle, const std::vector<const CorpusSequence*>& batch,
                      const TrainConfig& cfg);

struct TrainResult {
    std::string final_checkpoint;
    std::vector<LossRecord> records;
};

// Full run over a corpus: batches drawn with replacement, checkpoints at the
// configured cadence, loss trace appended to <out_dir>/loss_trace.csv.
TrainResult train(const TrainConfig& cfg, const CorpusManifest& manifest,
                  const std::string& out_dir);

void write_loss_trace(const std::vector<LossRecord>& records, const std::string& path,
                      bool append = false);

}  // namespace faceedit
