#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "msgan/net.hpp"
#include "msgan/pyramid.hpp"
#include "msgan/rng.hpp"
#include "msgan/volume.hpp"

namespace msgan {

struct TrainConfig {
    int epochs = 40;
    int batch_size = 4;
    double learning_rate = 2e-4;
    double beta1 = 0.5;
    double beta2 = 0.999;
    double corrupt_fraction = 0.3;  // chance a sample's conditioning is corrupted
    double corrupt_noise_min = 0.01;
    double corrupt_noise_max = 0.1;
    double corrupt_blur_min = 0.5;
    double corrupt_blur_max = 1.5;
    double edge_flip_fraction = 0.05;  // per-voxel flip chance on corrupted edges
    double pixel_loss_weight = 0.0;
    std::uint64_t seed = 0;
    // Which corruption operators may run (all by default); mainly for tests
    // that need one operator in isolation.
    bool corrupt_noise = true;
    bool corrupt_blur = true;
    bool corrupt_downup = true;
    // Train refinement scales on (edge, noise) alone, without the upscaled
    // previous-scale channel. Used by the overlap-average baseline, whose
    // patches are generated independently of coarser scales. Conditioning
    // corruption does not apply (there is no cascade input to corrupt).
    bool hr_edge_only = false;
};

/// Throws invalid_argument unless 0<=p<=1, 0<=q<=1, learning rate positive,
/// epochs >= 0, batch_size >= 1, and the corruption ranges are ordered.
void validate_config(const TrainConfig& cfg);

/// Canonical `key = value` text, one line per field, fixed order.
std::string config_to_text(const TrainConfig& cfg);

/// Strict parse of config_to_text-style text. Missing keys keep their
/// defaults; unknown keys, malformed values, and repeated keys are errors.
TrainConfig parse_train_config(const std::string& text);

/// Hash of every field except epochs (training length does not change the
/// trajectory identity: step randomness is derived per epoch, so a longer
/// run extends a shorter one bit-exactly).
std::uint64_t config_hash(const TrainConfig& cfg);

/// Flat Adam accumulators matching a NetParams::flat blob.
struct AdamState {
    tracked_vector<float> m, v;
    std::int64_t t = 0;
};

/// One bias-corrected Adam update; g is the mean gradient for params.flat.
void adam_step(NetParams<float>& params, AdamState& st, const float* g,
               const TrainConfig& cfg);

struct Checkpoint {
    int scale = 0;
    int epoch = 0;  // epochs completed
    std::uint64_t cfg_hash = 0;
    NetParams<float> gen, disc;
    AdamState gen_opt, disc_opt;
};

void save_checkpoint(const Checkpoint& c, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

/// One training example: `condition` supplies the per-scale edge maps,
/// `target` the per-scale ground-truth images. The two pyramids must share
/// base size and scale count. For domain translation the condition pyramid
/// is built from the source domain and the target pyramid from the ground
/// truth domain.
struct TrainExample {
    Pyramid condition;
    Pyramid target;
};
using TrainSet = std::vector<TrainExample>;

/// Conditioning corruption. With probability cfg.corrupt_fraction the
/// low-resolution conditioning patch receives, in fixed order, every enabled
/// operator — additive Gaussian noise (std uniform in the configured range),
/// Gaussian blur (std uniform in range), and a downsample-then-upsample by
/// factor 2 — followed by a canonical clamp, and the edge patch has each
/// voxel flipped with chance cfg.edge_flip_fraction. Otherwise both inputs
/// pass through bit-identically. Draw order off `rng` is fixed; disabling an
/// operator removes its draws entirely.
std::pair<Volume, Volume> corrupt_condition(const Volume& lowres_up_patch,
                                            const Volume& edge_patch, const TrainConfig& cfg,
                                            Rng& rng);

/// Per-step loss record for tests and diagnostics.
struct StepStats {
    int epoch = 0;
    double loss_d = 0.0;
    double loss_g = 0.0;
};

/// Adversarial training of one scale: alternating one discriminator step and
/// one generator step of Adam over batches sampled from `data`. Scale 0
/// trains the whole-image generator on base-size images; higher scales train
/// the patch generator on conditioning triples at uniformly sampled origins
/// whose windows stay inside the volume. If `log` is given, one CSV row
/// `epoch,loss_d,loss_g,seconds` is written per epoch (losses are step
/// means; seconds is wall-clock time and is not deterministic). If `resume`
/// is given it must hold a compatible checkpoint; training continues from
/// resume->epoch. Every random draw derives from (cfg.seed, scale, epoch,
/// step), so a resumed run reproduces an uninterrupted one bit-exactly.
Checkpoint train_scale(const TrainSet& data, int scale, const TrainConfig& cfg,
                       std::ostream* log = nullptr, std::vector<StepStats>* stats = nullptr,
                       const Checkpoint* resume = nullptr);

/// Trains every scale 0..n_scales in order, persisting each checkpoint to
/// `out_dir/checkpoint_scale<i>.msgan` plus a `train_scale<i>.csv` log. A
/// scale whose checkpoint file already exists with a matching config hash is
/// skipped when fully trained (resumed when trained for fewer epochs);
/// a hash mismatch is an error telling the user to delete the file.
std::vector<Checkpoint> train_all(const TrainSet& data, const TrainConfig& cfg,
                                  const std::string& out_dir);

}  // namespace msgan
