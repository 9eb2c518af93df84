#pragma once

#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "vts/dataio.hpp"
#include "vts/losses.hpp"
#include "vts/models.hpp"

namespace vts::training {

using blocks::Modality;
using nn::Tensor;

// ---- optimizers ------------------------------------------------------------

enum class OptKind { adam, adamw };

struct OptimizerConfig {
    OptKind kind = OptKind::adam;
    Real lr = 1e-4;
    Real beta1 = 0.9;
    Real beta2 = 0.999;
    Real weight_decay = 0.0;
    Real eps = 1e-8;
    void validate() const;
};

OptimizerConfig gan_adam();   // Adam(0.5, 0.99), lr 1e-4
OptimizerConfig mel_adamw();  // AdamW(0.9, 0.98), weight decay 1e-2

struct Optimizer {
    OptimizerConfig cfg;

    struct Slot {
        std::string name;
        Tensor p;
        std::vector<Real> m, v;
        long t = 0;
        Real lr_mult = 1.0;  // 0 freezes the parameter bitwise
    };
    std::vector<Slot> slots;

    Optimizer() = default;
    explicit Optimizer(OptimizerConfig c);

    void add(const std::vector<std::pair<std::string, Tensor>>& named,
             Real lr_mult = 1.0);
    void set_lr_mult(const std::string& prefix, Real mult);
    void zero_grad();
    // Applies one update at the given base rate. When `roles` is non-empty
    // only slots whose name starts with one of them are touched.
    void step(Real lr, const std::vector<std::string>& roles = {});
};

// ---- schedules -------------------------------------------------------------

struct ScheduleConfig {
    int warmup_epochs = 1;
    Real eta_max = 1e-3;
    Real eta_min = 0.0;
    int t0 = 4;
    int tmult = 1;
    void validate() const;
};

// Linear warmup to eta_max, then SGDR cosine cycles of length t0, t0*tmult,
// t0*tmult^2, ... epochs.
Real lr_at(long step, int epoch_len, const ScheduleConfig& s);

// ---- training steps --------------------------------------------------------

struct StepReport {
    Real d_loss = 0.0;
    Real g_adv = 0.0;
    Real g_mr = 0.0;
    Real g_mfcc = 0.0;
    Real g_total = 0.0;
};

// One discriminator update on aligned 1 s crops followed by one generator
// update on the full-length loss. `source` selects the V2A or A2A branch of
// the graph; `gen_roles` restricts which generator-side slots are stepped.
StepReport gan_train_step(models::ModelGraph& g, const dataio::Batch& batch,
                          const losses::LossWeights& w, Optimizer& opt_g,
                          Optimizer& opt_d, Rng& rng,
                          Modality source = Modality::video,
                          const std::vector<std::string>& gen_roles = {});

// AdamW step on the mel L1 loss at the given rate.
Real melspec_train_step(models::ModelGraph& g, const dataio::Batch& batch,
                        Optimizer& opt, Real lr,
                        Modality source = Modality::video,
                        const std::vector<std::string>& roles = {});

// ---- checkpoints -----------------------------------------------------------

struct CheckpointBundle {
    std::vector<std::pair<std::string, std::vector<Real>>> params;
    std::vector<std::pair<std::string, std::vector<Real>>> buffers;
    struct OptState {
        std::vector<Real> m, v;
        long t = 0;
    };
    std::vector<std::pair<std::string, OptState>> opt;
    long schedule_step = 0;
    std::string rng_state;
};

CheckpointBundle snapshot(models::ModelGraph& g,
                          const Optimizer* opt = nullptr,
                          long schedule_step = 0,
                          const std::string& rng_state = "");
// Copies every graph tensor under `prefix` ("" = all) from the bundle;
// any of them missing or shape-mismatched throws IncompatibleCheckpoint and
// leaves the graph untouched.
void restore(models::ModelGraph& g, const CheckpointBundle& b,
             const std::string& prefix = "");
void restore_optimizer(Optimizer& opt, const CheckpointBundle& b,
                       const std::string& prefix = "");

// Binary file with crc32 trailer; save writes to a temp file and renames.
void checkpoint_save(const CheckpointBundle& b, const std::string& path);
CheckpointBundle checkpoint_load(const std::string& path);

// ---- regimes ---------------------------------------------------------------

enum class Regime { scratch, basic_ft, alternating_ft, frozen_decoder,
                    ft_decoder };

struct RegimeConfig {
    Regime regime = Regime::scratch;
    bool load_decoder_optimizer = false;
    bool load_discriminator_optimizer = false;
    Real audio_encoder_lr = 0.0;  // alternating: 0 freezes E_A, T_A
    Real decoder_lr = 0.0;        // ft_decoder: rate after unfreezing
    int frozen_epochs = 0;
};

Regime parse_regime(const std::string& name);
// Named presets pinning the fine-tuning tables' flags, e.g. "grid4-basic",
// "lrw-alternating-sp".
RegimeConfig regime_preset(const std::string& name);

// Copies the pre-trained decoder (and discriminator / audio branch when the
// regime uses them) into a V2A graph; video-modality BN statistics restart
// at (0, 1), audio statistics are copied. Optimizer states are copied when
// the regime flags ask for it.
void init_from_pretrained(models::ModelGraph& g, const CheckpointBundle& ckpt,
                          const RegimeConfig& regime,
                          Optimizer* opt_g = nullptr,
                          Optimizer* opt_d = nullptr);

// ---- training loops --------------------------------------------------------

struct TrainData {
    std::vector<dataio::Sample> train;
    std::vector<dataio::Sample> val;
};

struct TrainConfig {
    OptimizerConfig opt;       // generator / mel optimizer
    OptimizerConfig disc_opt;  // waveform models only
    ScheduleConfig sched;      // mel models only
    losses::LossWeights weights;
    int batch_size = 4;
    int patience = 5;
    int max_epochs = 20;
    double max_seconds = 3.0;
    std::uint64_t seed = 0;
    std::ostream* log = nullptr;  // line-delimited records when set
};

struct TrainResult {
    CheckpointBundle best;
    Real best_val = 0.0;
    long best_step = 0;  // optimizer steps taken when the best was recorded
    std::vector<Real> val_history;
};

// Mean mel L1 between generated output and target over the validation set,
// eval mode, no updates.
Real validation_loss(models::ModelGraph& g,
                     const std::vector<dataio::Sample>& val,
                     double max_seconds = 3.0);

// Phase 1 on the clean group until patience runs out, phase 2 on clean plus
// noisy; mel models restart the schedule at phase 2 keeping model and
// optimizer state. Returns the best-validation checkpoint.
TrainResult a2a_pretrain(models::ModelGraph& g, const TrainData& clean,
                         const TrainData& noisy, const TrainConfig& cfg);

// `init` supplies pre-trained optimizer state for the decoder and
// discriminator slots when the regime's load flags ask for it.
TrainResult v2a_train(models::ModelGraph& g, const TrainData& data,
                      const RegimeConfig& regime, const TrainConfig& cfg,
                      const CheckpointBundle* init = nullptr);

}  // namespace vts::training
