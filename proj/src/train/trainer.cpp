#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "vts/dsp.hpp"
#include "vts/training.hpp"

namespace vts::training {

using blocks::Mode;
using models::ModelGraph;

namespace {

constexpr int kMaxInputSamples = 3 * dsp::kPipelineSampleRate;

// Trims both mels to the shorter frame count; model output uses rounded
// 80/25 upsampling while targets use floor(len/hop) frames, so the two can
// differ by one frame on lengths that are not multiples of 5 video frames.
Tensor aligned_mel_l1(const Tensor& target, const Tensor& output) {
    int t = std::min(target.dim(0), output.dim(0));
    return losses::mel_l1_loss(nn::slice_rows(target, 0, t),
                               nn::slice_rows(output, 0, t));
}

std::vector<Tensor> forward_batch(ModelGraph& g, const dataio::Batch& batch,
                                  Modality source, Mode mode) {
    if (source == Modality::video)
        return g.generate_from_video(batch.video, batch.ids, mode);
    if (g.mel_dec && !g.wave_dec)
        return g.generate_from_audio(batch.mel, mode);
    return g.generate_from_audio(batch.audio, mode);
}

Tensor detached(const Tensor& t) {
    return Tensor::from(t.shape(), t.val());
}

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed,
                                     int epoch) {
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng rng(seed ^ (0x9e3779b97f4a7c15ull * (epoch + 1)));
    for (std::size_t i = n; i > 1; --i)
        std::swap(order[i - 1], order[rng.below(i)]);
    return order;
}

AudioClip to_clip(const Tensor& t) {
    AudioClip c;
    c.sample_rate = dsp::kPipelineSampleRate;
    c.samples.reserve(t.size());
    for (Real v : t.val()) c.samples.push_back(static_cast<float>(v));
    return c;
}

}  // namespace

StepReport gan_train_step(ModelGraph& g, const dataio::Batch& batch,
                          const losses::LossWeights& w, Optimizer& opt_g,
                          Optimizer& opt_d, Rng& rng, Modality source,
                          const std::vector<std::string>& gen_roles) {
    if (!g.wave_dec || !g.disc)
        throw InvalidArgument("gan_train_step: needs a waveform GAN model");
    if (batch.audio.empty())
        throw InvalidArgument("gan_train_step: batch has no target audio");
    for (const auto& a : batch.audio)
        if (a.dim(0) > kMaxInputSamples)
            throw InvalidArgument("gan_train_step: target exceeds 3 s");

    auto fakes = forward_batch(g, batch, source, Mode::train);
    int n = static_cast<int>(fakes.size());
    Real inv = 1.0 / n;

    // discriminator on aligned 1 s crops, generator path detached
    opt_d.zero_grad();
    Tensor d_total = Tensor::scalar(0.0);
    for (int i = 0; i < n; ++i) {
        auto [rc, fc] =
            dataio::random_1s_crop(batch.audio[i], detached(fakes[i]), rng);
        d_total = nn::add(d_total,
                          losses::lsgan_discriminator_loss(
                              g.disc->forward(rc), g.disc->forward(fc)));
    }
    d_total = nn::scale(d_total, inv);
    d_total.backward();
    opt_d.step(opt_d.cfg.lr);

    // generator on the full-length objective
    opt_g.zero_grad();
    opt_d.zero_grad();
    Real adv_v = 0.0, mr_v = 0.0, mfcc_v = 0.0;
    Tensor g_total = Tensor::scalar(0.0);
    auto res = losses::default_resolutions();
    for (int i = 0; i < n; ++i) {
        auto [rc, fc] = dataio::random_1s_crop(batch.audio[i], fakes[i], rng);
        Tensor adv = losses::lsgan_generator_loss(g.disc->forward(fc));
        Tensor mr =
            losses::multi_resolution_stft_loss(batch.audio[i], fakes[i], res);
        Tensor mfcc = losses::mfcc_loss(batch.audio[i], fakes[i]);
        g_total = nn::add(g_total,
                          losses::wavegan_generator_total(adv, mr, mfcc, w));
        adv_v += adv.item() * inv;
        mr_v += mr.item() * inv;
        mfcc_v += mfcc.item() * inv;
    }
    g_total = nn::scale(g_total, inv);
    g_total.backward();
    opt_g.step(opt_g.cfg.lr, gen_roles);

    StepReport rep;
    rep.d_loss = d_total.item();
    rep.g_adv = adv_v;
    rep.g_mr = mr_v;
    rep.g_mfcc = mfcc_v;
    rep.g_total = g_total.item();
    return rep;
}

Real melspec_train_step(ModelGraph& g, const dataio::Batch& batch,
                        Optimizer& opt, Real lr, Modality source,
                        const std::vector<std::string>& roles) {
    if (!g.mel_dec)
        throw InvalidArgument("melspec_train_step: needs a mel model");
    if (batch.mel.empty())
        throw InvalidArgument("melspec_train_step: batch has no mel targets");
    auto fakes = forward_batch(g, batch, source, Mode::train);
    opt.zero_grad();
    Tensor total = Tensor::scalar(0.0);
    for (std::size_t i = 0; i < fakes.size(); ++i)
        total = nn::add(total, aligned_mel_l1(batch.mel[i], fakes[i]));
    total = nn::scale(total, 1.0 / fakes.size());
    total.backward();
    opt.step(lr, roles);
    return total.item();
}

Real validation_loss(ModelGraph& g, const std::vector<dataio::Sample>& val,
                     double max_seconds) {
    if (val.empty()) throw InvalidArgument("validation_loss: empty set");
    Real total = 0.0;
    for (const auto& s : val) {
        dataio::Batch b = dataio::collate({s}, max_seconds);
        Modality src = (g.video_enc && s.video.defined()) ? Modality::video
                                                          : Modality::audio;
        auto out = forward_batch(g, b, src, Mode::eval)[0];
        if (g.wave_dec) {
            dsp::MelSpectrogram fake_mel =
                dsp::log_mel_spectrogram(to_clip(out));
            Tensor fm = Tensor::from(
                {fake_mel.frames, fake_mel.n_mels},
                std::vector<Real>(fake_mel.values.begin(),
                                  fake_mel.values.end()));
            total += aligned_mel_l1(b.mel[0], fm).item();
        } else {
            total += aligned_mel_l1(b.mel[0], out).item();
        }
    }
    return total / val.size();
}

Regime parse_regime(const std::string& name) {
    if (name == "scratch") return Regime::scratch;
    if (name == "basic-ft" || name == "basic_ft") return Regime::basic_ft;
    if (name == "alternating-ft" || name == "alternating_ft")
        return Regime::alternating_ft;
    if (name == "frozen-decoder" || name == "frozen_decoder")
        return Regime::frozen_decoder;
    if (name == "ft-decoder" || name == "ft_decoder")
        return Regime::ft_decoder;
    throw InvalidConfiguration("unknown regime: " + name);
}

RegimeConfig regime_preset(const std::string& name) {
    RegimeConfig c;
    auto basic = [&](bool load_opt) {
        c.regime = Regime::basic_ft;
        c.load_decoder_optimizer = load_opt;
        c.load_discriminator_optimizer = load_opt;
    };
    auto alternating = [&](Real audio_lr) {
        c.regime = Regime::alternating_ft;
        c.audio_encoder_lr = audio_lr;
    };
    auto ft_decoder = [&](int frozen, bool load_opt, Real lr) {
        c.regime = Regime::ft_decoder;
        c.frozen_epochs = frozen;
        c.load_decoder_optimizer = load_opt;
        c.decoder_lr = lr;
    };
    if (name == "grid4-basic") basic(false);
    else if (name == "grid4-alternating") alternating(0.0);
    else if (name == "grid33-seen-basic") basic(true);
    else if (name == "grid33-seen-alternating") alternating(1e-4);
    else if (name == "grid33-unseen-basic") basic(false);
    else if (name == "grid33-unseen-alternating-f") alternating(1e-4);
    else if (name == "grid33-unseen-alternating-sp") alternating(0.0);
    else if (name == "tcd-basic") basic(false);
    else if (name == "tcd-alternating-f") alternating(0.0);
    else if (name == "tcd-alternating-sp") alternating(1e-4);
    else if (name == "lrw-basic") basic(true);
    else if (name == "lrw-alternating-f") alternating(1e-4);
    else if (name == "lrw-alternating-sp") alternating(0.0);
    else if (name == "mel-frozen") c.regime = Regime::frozen_decoder;
    else if (name == "grid4-ft-decoder") ft_decoder(20, false, 1e-4);
    else if (name == "grid33-seen-ft-decoder-f") ft_decoder(20, false, 1e-4);
    else if (name == "grid33-seen-ft-decoder-sp") ft_decoder(20, true, 1e-4);
    else if (name == "grid33-unseen-ft-decoder") ft_decoder(0, false, 1e-5);
    else if (name == "tcd-ft-decoder") ft_decoder(20, false, 1e-7);
    else if (name == "lrw-ft-decoder") ft_decoder(0, true, 1e-5);
    else throw InvalidConfiguration("unknown regime preset: " + name);
    return c;
}

void init_from_pretrained(ModelGraph& g, const CheckpointBundle& ckpt,
                          const RegimeConfig& regime, Optimizer* opt_g,
                          Optimizer* opt_d) {
    if (regime.regime == Regime::scratch) return;
    if (regime.regime == Regime::alternating_ft) {
        Rng fresh(0);
        double w = g.cfg.width;
        if (g.wave_dec && !g.wave_enc) {
            g.wave_enc = std::make_unique<models::WaveEncoder>(w, fresh);
            g.wave_t_a = std::make_unique<models::WaveTemporalA2A>(w, fresh);
        } else if (g.mel_dec && !g.mel_enc) {
            g.mel_enc = std::make_unique<models::ConformerStack>(
                dsp::kMelBands, models::scaled(64, w), 2, w, fresh);
            g.mel_t_a = std::make_unique<models::MelTemporalA2A>(w, fresh);
        }
        restore(g, ckpt, "E_A.");
        restore(g, ckpt, "T_A.");
    }
    restore(g, ckpt, "F.");
    if (g.disc) restore(g, ckpt, "D.");

    // video-modality statistics start fresh
    auto nt = g.named();
    for (auto& [name, t] : nt.buffers) {
        if (name.find("mean_video") != std::string::npos)
            std::fill(t.val().begin(), t.val().end(), 0.0);
        else if (name.find("var_video") != std::string::npos)
            std::fill(t.val().begin(), t.val().end(), 1.0);
    }

    if (opt_g && regime.load_decoder_optimizer)
        restore_optimizer(*opt_g, ckpt, "F.");
    if (opt_d && regime.load_discriminator_optimizer)
        restore_optimizer(*opt_d, ckpt, "D.");
}

namespace {

struct Loop {
    ModelGraph& g;
    const TrainConfig& cfg;
    Optimizer opt_g, opt_d;
    bool is_wave = false;
    long step = 0;          // total optimizer steps
    long sched_step = 0;    // schedule-local step (resettable)
    TrainResult result;
    Real best = std::numeric_limits<Real>::infinity();

    Loop(ModelGraph& graph, const TrainConfig& c) : g(graph), cfg(c) {
        is_wave = static_cast<bool>(graph.wave_dec);
        opt_g = Optimizer(cfg.opt);
        opt_d = Optimizer(is_wave ? cfg.disc_opt : cfg.opt);
        auto nt = g.named();
        std::vector<std::pair<std::string, Tensor>> gen, disc;
        for (auto& p : nt.params)
            (p.first.rfind("D.", 0) == 0 ? disc : gen).push_back(p);
        opt_g.add(gen);
        if (!disc.empty()) opt_d.add(disc);
    }

    // one training phase with validation patience; returns epochs run
    int run(const std::vector<dataio::Sample>& train,
            const std::vector<dataio::Sample>& val, Rng& step_rng,
            const std::string& phase,
            const std::function<void(const dataio::Batch&, Real lr,
                                     Rng&)>& do_batch,
            int epoch_offset = 0) {
        if (train.empty() || val.empty())
            throw InvalidArgument("training: empty dataset group");
        int epoch_len = static_cast<int>(
            (train.size() + cfg.batch_size - 1) / cfg.batch_size);
        int no_improve = 0;
        int epoch = 0;
        for (; epoch < cfg.max_epochs; ++epoch) {
            auto order = epoch_order(train.size(), cfg.seed,
                                     epoch_offset + epoch);
            for (std::size_t b = 0; b < order.size();
                 b += cfg.batch_size) {
                std::vector<dataio::Sample> chunk;
                for (std::size_t i = b;
                     i < std::min(order.size(),
                                  b + cfg.batch_size);
                     ++i)
                    chunk.push_back(train[order[i]]);
                dataio::Batch batch =
                    dataio::collate(chunk, cfg.max_seconds);
                Real lr = is_wave ? cfg.opt.lr
                                  : lr_at(sched_step, epoch_len, cfg.sched);
                do_batch(batch, lr, step_rng);
                ++step;
                ++sched_step;
            }
            Real v = validation_loss(g, val, cfg.max_seconds);
            result.val_history.push_back(v);
            if (cfg.log)
                *cfg.log << "event=val phase=" << phase
                         << " epoch=" << epoch << " step=" << step
                         << " loss=" << v << '\n';
            if (v < best) {
                best = v;
                result.best_val = v;
                result.best_step = step;
                std::ostringstream rs;
                rs << step_rng.engine();
                result.best = snapshot(g, &opt_g, sched_step, rs.str());
                no_improve = 0;
            } else if (++no_improve >= cfg.patience) {
                ++epoch;
                break;
            }
        }
        return epoch;
    }
};

}  // namespace

TrainResult a2a_pretrain(ModelGraph& g, const TrainData& clean,
                         const TrainData& noisy, const TrainConfig& cfg) {
    if (!g.wave_enc && !g.mel_enc)
        throw InvalidArgument("a2a_pretrain: graph has no audio branch");
    if (clean.train.empty() || clean.val.empty())
        throw InvalidArgument("a2a_pretrain: empty clean group");
    Loop loop(g, cfg);
    Rng step_rng(cfg.seed ^ 0x51ed270b9f5f4c21ull);
    auto do_batch = [&](const dataio::Batch& batch, Real lr, Rng& rng) {
        if (loop.is_wave) {
            auto rep = gan_train_step(g, batch, cfg.weights, loop.opt_g,
                                      loop.opt_d, rng, Modality::audio);
            if (cfg.log)
                *cfg.log << "event=train pass=a2a step=" << loop.step
                         << " d=" << rep.d_loss << " g=" << rep.g_total
                         << '\n';
        } else {
            Real l = melspec_train_step(g, batch, loop.opt_g, lr,
                                        Modality::audio);
            if (cfg.log)
                *cfg.log << "event=train pass=a2a step=" << loop.step
                         << " lr=" << lr << " loss=" << l << '\n';
        }
    };
    int used = loop.run(clean.train, clean.val, step_rng, "1", do_batch);

    std::vector<dataio::Sample> train2 = clean.train;
    std::vector<dataio::Sample> val2 = clean.val;
    train2.insert(train2.end(), noisy.train.begin(), noisy.train.end());
    val2.insert(val2.end(), noisy.val.begin(), noisy.val.end());
    if (!loop.is_wave) loop.sched_step = 0;  // restart from warmup
    loop.run(train2, val2, step_rng, "2", do_batch, used);
    return std::move(loop.result);
}

TrainResult v2a_train(ModelGraph& g, const TrainData& data,
                      const RegimeConfig& regime, const TrainConfig& cfg,
                      const CheckpointBundle* init) {
    if (!g.video_enc)
        throw InvalidArgument("v2a_train: graph has no video branch");
    bool alternating = regime.regime == Regime::alternating_ft;
    if (alternating && !g.wave_enc && !g.mel_enc)
        throw InvalidConfiguration(
            "alternating fine-tuning needs the A2A modules attached");
    Loop loop(g, cfg);
    if (init) {
        if (regime.load_decoder_optimizer)
            restore_optimizer(loop.opt_g, *init, "F.");
        if (regime.load_discriminator_optimizer && g.disc)
            restore_optimizer(loop.opt_d, *init, "D.");
    }
    Real base = cfg.opt.lr;
    switch (regime.regime) {
        case Regime::frozen_decoder:
            loop.opt_g.set_lr_mult("F.", 0.0);
            break;
        case Regime::ft_decoder:
            loop.opt_g.set_lr_mult("F.", 0.0);
            break;
        case Regime::alternating_ft:
            loop.opt_g.set_lr_mult("E_A.", regime.audio_encoder_lr / base);
            loop.opt_g.set_lr_mult("T_A.", regime.audio_encoder_lr / base);
            break;
        default:
            break;
    }
    int epoch_count = 0;
    Rng step_rng(cfg.seed ^ 0x7c15ea9b51ed270bull);
    auto do_batch = [&](const dataio::Batch& batch, Real lr, Rng& rng) {
        if (regime.regime == Regime::ft_decoder &&
            epoch_count == regime.frozen_epochs)
            loop.opt_g.set_lr_mult("F.", regime.decoder_lr / base);
        std::vector<std::string> v2a_roles, a2a_roles;
        if (alternating) {
            v2a_roles = {"E_V", "E_I", "T_V", "F"};
            a2a_roles = {"E_A", "T_A", "F"};
        }
        if (loop.is_wave) {
            auto rep = gan_train_step(g, batch, cfg.weights, loop.opt_g,
                                      loop.opt_d, rng, Modality::video,
                                      v2a_roles);
            if (cfg.log)
                *cfg.log << "event=train pass=v2a step=" << loop.step
                         << " d=" << rep.d_loss << " g=" << rep.g_total
                         << '\n';
            if (alternating) {
                auto rep2 = gan_train_step(g, batch, cfg.weights, loop.opt_g,
                                           loop.opt_d, rng, Modality::audio,
                                           a2a_roles);
                if (cfg.log)
                    *cfg.log << "event=train pass=a2a step=" << loop.step
                             << " d=" << rep2.d_loss << " g=" << rep2.g_total
                             << '\n';
            }
        } else {
            Real l = melspec_train_step(g, batch, loop.opt_g, lr,
                                        Modality::video, v2a_roles);
            if (cfg.log)
                *cfg.log << "event=train pass=v2a step=" << loop.step
                         << " lr=" << lr << " loss=" << l << '\n';
            if (alternating) {
                Real l2 = melspec_train_step(g, batch, loop.opt_g, lr,
                                             Modality::audio, a2a_roles);
                if (cfg.log)
                    *cfg.log << "event=train pass=a2a step=" << loop.step
                             << " loss=" << l2 << '\n';
            }
        }
    };
    // run() appends to val_history once per completed epoch, which gives the
    // current epoch index for the ft_decoder unfreeze point
    auto hooked = [&](const dataio::Batch& b, Real lr, Rng& rng) {
        epoch_count = static_cast<int>(loop.result.val_history.size());
        do_batch(b, lr, rng);
    };
    loop.run(data.train, data.val, step_rng, "v2a", hooked);
    return std::move(loop.result);
}

}  // namespace vts::training
