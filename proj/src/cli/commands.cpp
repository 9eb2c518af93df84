#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "vts/cli.hpp"
#include "vts/eval.hpp"

namespace vts::cli {

namespace {

namespace fs = std::filesystem;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Flags {
    std::map<std::string, std::string> values;
    std::vector<KeyValue> sets;  // repeated --set key=value
    bool help = false;
};

Flags parse_flags(const std::vector<std::string>& args, std::size_t start,
                  const std::vector<std::string>& allowed) {
    Flags f;
    for (std::size_t i = start; i < args.size(); ++i) {
        const std::string& a = args[i];
        if (a == "--help") {
            f.help = true;
            continue;
        }
        if (a == "--set") {
            if (i + 1 >= args.size()) throw UsageError("--set needs key=value");
            std::string kv = args[++i];
            auto eq = kv.find('=');
            if (eq == std::string::npos)
                throw UsageError("--set needs key=value, got " + kv);
            f.sets.push_back({kv.substr(0, eq), kv.substr(eq + 1)});
            continue;
        }
        if (a.rfind("--", 0) != 0) throw UsageError("unexpected argument " + a);
        std::string name = a.substr(2);
        bool ok = false;
        for (const auto& al : allowed) ok = ok || al == name;
        if (!ok) throw UsageError("unknown flag --" + name);
        if (i + 1 >= args.size()) throw UsageError("--" + name + " needs a value");
        f.values[name] = args[++i];
    }
    return f;
}

const std::string* get(const Flags& f, const std::string& name) {
    auto it = f.values.find(name);
    return it == f.values.end() ? nullptr : &it->second;
}

std::string require(const Flags& f, const std::string& name) {
    const std::string* v = get(f, name);
    if (!v) throw UsageError("missing required flag --" + name);
    return *v;
}

RunConfig config_from_flags(const Flags& f) {
    std::vector<KeyValue> file;
    if (const auto* c = get(f, "config")) file = parse_config_file(*c);
    std::vector<KeyValue> overrides = f.sets;
    if (const auto* v = get(f, "out"))
        overrides.push_back({"run.output_dir", *v});
    if (const auto* v = get(f, "seed")) overrides.push_back({"train.seed", *v});
    if (const auto* v = get(f, "threads"))
        overrides.push_back({"run.threads", *v});
    return build_run_config(file, overrides);
}

void prepare_output(const RunConfig& cfg) {
    fs::create_directories(cfg.output_dir);
    std::ofstream eff(fs::path(cfg.output_dir) / "config.effective");
    echo_config(cfg, eff);
}

dataio::DatasetManifest manifest_for(const RunConfig& cfg) {
    if (cfg.manifest.empty())
        throw InvalidConfiguration("data.manifest is required");
    return dataio::read_manifest(cfg.manifest);
}

void save_result(const training::TrainResult& res, const RunConfig& cfg,
                 std::ostream& out) {
    std::string path = (fs::path(cfg.output_dir) / "best.ckpt").string();
    training::checkpoint_save(res.best, path);
    out << "best_val=" << res.best_val << " best_step=" << res.best_step
        << " epochs=" << res.val_history.size() << " checkpoint=" << path
        << '\n';
}

int cmd_pretrain_a2a(const std::vector<std::string>& args, std::ostream& out) {
    Flags f = parse_flags(args, 1, {"config", "out", "seed", "threads"});
    if (f.help) {
        out << "usage: vtsc pretrain-a2a --config FILE [--out DIR]\n"
               "         [--seed N] [--threads N] [--set key=value]...\n"
               "Two-phase audio-to-audio pre-training: clean group first,\n"
               "then clean plus noisy. Writes best.ckpt, train.log and the\n"
               "effective config to the output directory.\n";
        return 0;
    }
    RunConfig cfg = config_from_flags(f);
    if (cfg.model.family != models::Family::a2a_wave &&
        cfg.model.family != models::Family::a2a_mel)
        throw InvalidConfiguration("pretrain-a2a needs an a2a model family");
    auto manifest = manifest_for(cfg);
    training::TrainData clean, noisy;
    clean.train = load_samples(manifest, dataio::Split::train,
                               dataio::Group::clean, cfg.model, false);
    clean.val = load_samples(manifest, dataio::Split::val,
                             dataio::Group::clean, cfg.model, false);
    noisy.train = load_samples(manifest, dataio::Split::train,
                               dataio::Group::noisy, cfg.model, false);
    noisy.val = load_samples(manifest, dataio::Split::val,
                             dataio::Group::noisy, cfg.model, false);
    prepare_output(cfg);
    std::ofstream log(fs::path(cfg.output_dir) / "train.log");
    training::TrainConfig tc = cfg.train;
    tc.log = &log;
    auto g = models::build_model(cfg.model);
    auto res = training::a2a_pretrain(g, clean, noisy, tc);
    save_result(res, cfg, out);
    return 0;
}

int cmd_train_v2a(const std::vector<std::string>& args, std::ostream& out) {
    Flags f = parse_flags(args, 1,
                          {"config", "out", "seed", "threads", "regime",
                           "init-from"});
    if (f.help) {
        out << "usage: vtsc train-v2a --config FILE [--regime NAME]\n"
               "         [--init-from CKPT] [--out DIR] [--seed N]\n"
               "         [--threads N] [--set key=value]...\n"
               "Regimes: scratch, basic-ft, alternating-ft, frozen-decoder,\n"
               "ft-decoder, or a named preset (e.g. grid33-seen-basic).\n"
               "Non-scratch regimes require --init-from.\n";
        return 0;
    }
    std::vector<KeyValue> extra;
    if (const auto* r = get(f, "regime")) extra.push_back({"regime.name", *r});
    Flags merged = f;
    merged.sets.insert(merged.sets.end(), extra.begin(), extra.end());
    RunConfig cfg = config_from_flags(merged);
    if (cfg.model.family != models::Family::v2a_wave &&
        cfg.model.family != models::Family::v2a_mel)
        throw InvalidConfiguration("train-v2a needs a v2a model family");

    const std::string* init_path = get(f, "init-from");
    bool scratch = cfg.regime.regime == training::Regime::scratch;
    if (scratch && init_path)
        throw InvalidConfiguration(
            "--init-from contradicts the scratch regime");
    if (!scratch && !init_path)
        throw InvalidConfiguration(
            "regime " + cfg.regime_name + " requires --init-from");
    if (init_path && !fs::is_regular_file(*init_path))
        throw InvalidConfiguration("--init-from: no such file: " + *init_path);

    auto manifest = manifest_for(cfg);
    training::TrainData data;
    data.train = load_samples(manifest, dataio::Split::train,
                              dataio::Group::clean, cfg.model, true);
    data.val = load_samples(manifest, dataio::Split::val, dataio::Group::clean,
                            cfg.model, true);
    prepare_output(cfg);
    std::ofstream log(fs::path(cfg.output_dir) / "train.log");
    training::TrainConfig tc = cfg.train;
    tc.log = &log;
    auto g = models::build_model(cfg.model);
    training::CheckpointBundle ckpt;
    if (init_path) {
        ckpt = training::checkpoint_load(*init_path);
        training::init_from_pretrained(g, ckpt, cfg.regime);
    }
    auto res = training::v2a_train(g, data, cfg.regime, tc,
                                   init_path ? &ckpt : nullptr);
    save_result(res, cfg, out);
    return 0;
}

int cmd_eval(const std::vector<std::string>& args, std::ostream& out,
             std::ostream& err) {
    Flags f = parse_flags(args, 1, {"generated", "reference", "out"});
    if (f.help) {
        out << "usage: vtsc eval --generated DIR --reference DIR [--out FILE]\n"
               "Pairs *.wav files by name, reports stoi, estoi, mr_stft and\n"
               "mel_l1 per pair plus aggregate means. Unmatched files are\n"
               "listed, excluded, and make the command exit 1.\n";
        return 0;
    }
    std::string gen = require(f, "generated");
    std::string ref = require(f, "reference");
    if (!fs::is_directory(gen) || !fs::is_directory(ref))
        throw UsageError("eval: both --generated and --reference must be "
                         "existing directories");
    eval::MetricReport rep;
    try {
        rep = eval::evaluate_pairs(gen, ref);
    } catch (const InvalidArgument& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    if (const auto* o = get(f, "out")) {
        std::ofstream file(*o);
        if (!file) throw UsageError("eval: cannot write " + *o);
        eval::write_report(rep, file);
    } else {
        eval::write_report(rep, out);
    }
    out << "aggregate pairs=" << rep.pairs.size() << " stoi=" << rep.stoi
        << " estoi=" << rep.estoi << " mr_stft=" << rep.mr_stft
        << " mel_l1=" << rep.mel_l1 << '\n';
    if (rep.warning) {
        for (const auto& u : rep.unmatched) err << "unmatched " << u << '\n';
        return 1;
    }
    return 0;
}

int cmd_dsp(const std::vector<std::string>& args, std::ostream& out) {
    Flags f = parse_flags(args, 1, {"in", "out", "path"});
    if (f.help) {
        out << "usage: vtsc dsp --in WAV --out {mel|mfcc} --path FILE\n"
               "Extracts features at 24 kHz (input resampled when needed)\n"
               "and writes them in the frame-tensor layout [T x 1 x 1 x D].\n";
        return 0;
    }
    std::string kind = require(f, "out");
    if (kind != "mel" && kind != "mfcc")
        throw UsageError("dsp: --out must be mel or mfcc");
    AudioClip clip = dataio::read_wav(require(f, "in"));
    if (clip.sample_rate != dsp::kPipelineSampleRate)
        clip = dsp::resample(clip, dsp::kPipelineSampleRate);
    std::vector<Real> values;
    int frames, width;
    if (kind == "mel") {
        auto mel = dsp::log_mel_spectrogram(clip);
        values.assign(mel.values.begin(), mel.values.end());
        frames = mel.frames;
        width = mel.n_mels;
    } else {
        auto mf = dsp::mfcc(clip);
        values.assign(mf.values.begin(), mf.values.end());
        frames = mf.frames;
        width = mf.n_coeffs;
    }
    nn::Tensor t = nn::Tensor::from({frames, 1, 1, width}, std::move(values));
    dataio::write_frames(require(f, "path"), t);
    out << "wrote " << kind << " frames=" << frames << " width=" << width
        << '\n';
    return 0;
}

int cmd_synth_data(const std::vector<std::string>& args, std::ostream& out) {
    Flags f = parse_flags(args, 1,
                          {"out", "train", "val", "test", "noisy-train",
                           "noisy-val", "seconds", "seed", "speakers"});
    if (f.help) {
        out << "usage: vtsc synth-data --out DIR [--train N] [--val N]\n"
               "         [--test N] [--noisy-train N] [--noisy-val N]\n"
               "         [--seconds S] [--seed K] [--speakers M]\n"
               "Materializes seeded synthetic audio/video pairs (noisy group\n"
               "at 5-20 dB SNR) plus a manifest.tsv referencing them.\n";
        return 0;
    }
    auto count = [&](const std::string& name, long dflt) {
        const std::string* v = get(f, name);
        if (!v) return dflt;
        long n = std::stol(*v);
        if (n < 0) throw UsageError("--" + name + " must be >= 0");
        return n;
    };
    std::string dir = require(f, "out");
    long n_train = count("train", 8), n_val = count("val", 2);
    long n_test = count("test", 0);
    long n_ntrain = count("noisy-train", 0), n_nval = count("noisy-val", 0);
    double seconds = get(f, "seconds") ? std::stod(*get(f, "seconds")) : 1.0;
    std::uint64_t seed = get(f, "seed") ? std::stoull(*get(f, "seed")) : 0;
    long speakers = count("speakers", 1);
    if (speakers < 1) throw UsageError("--speakers must be >= 1");

    fs::create_directories(dir);
    dataio::DatasetManifest manifest;
    Rng noise_rng(seed ^ 0xa5a5a5a5a5a5a5a5ull);
    long serial = 0;
    auto emit = [&](dataio::Split split, dataio::Group group, long n) {
        for (long i = 0; i < n; ++i, ++serial) {
            dataio::SyntheticPairSpec spec;
            spec.seed = seed + static_cast<std::uint64_t>(serial);
            spec.duration_s = seconds;
            spec.speaker_id = "spk" + std::to_string(serial % speakers);
            auto pr = dataio::synth_pair(spec);
            if (group == dataio::Group::noisy)
                pr.audio = dataio::add_noise_snr(
                    pr.audio, noise_rng.uniform(5.0, 20.0), noise_rng);
            std::string id = "sample" + std::to_string(serial);
            std::string wav = (fs::path(dir) / (id + ".wav")).string();
            std::string vid = (fs::path(dir) / (id + ".vtsf")).string();
            dataio::write_wav(wav, pr.audio);
            dataio::write_frames(vid, pr.video);
            manifest.entries.push_back(
                {id, spec.speaker_id, wav, vid, split, group});
        }
    };
    emit(dataio::Split::train, dataio::Group::clean, n_train);
    emit(dataio::Split::val, dataio::Group::clean, n_val);
    emit(dataio::Split::test, dataio::Group::clean, n_test);
    emit(dataio::Split::train, dataio::Group::noisy, n_ntrain);
    emit(dataio::Split::val, dataio::Group::noisy, n_nval);
    std::string mpath = (fs::path(dir) / "manifest.tsv").string();
    dataio::write_manifest(mpath, manifest);
    out << "wrote " << manifest.entries.size() << " samples, manifest="
        << mpath << '\n';
    return 0;
}

int cmd_lr_dump(const std::vector<std::string>& args, std::ostream& out) {
    Flags f = parse_flags(args, 1,
                          {"t0", "tmult", "warmup", "eta-max", "eta-min",
                           "epoch-len", "steps"});
    if (f.help) {
        out << "usage: vtsc lr-dump [--t0 N] [--tmult N] [--warmup N]\n"
               "         [--eta-max X] [--eta-min X] [--epoch-len N]\n"
               "         [--steps N]\n"
               "Prints the warm-restart learning-rate table, one step per\n"
               "line.\n";
        return 0;
    }
    training::ScheduleConfig s;
    if (const auto* v = get(f, "t0")) s.t0 = std::stoi(*v);
    if (const auto* v = get(f, "tmult")) s.tmult = std::stoi(*v);
    if (const auto* v = get(f, "warmup")) s.warmup_epochs = std::stoi(*v);
    if (const auto* v = get(f, "eta-max")) s.eta_max = std::stod(*v);
    if (const auto* v = get(f, "eta-min")) s.eta_min = std::stod(*v);
    int epoch_len = get(f, "epoch-len") ? std::stoi(*get(f, "epoch-len")) : 10;
    int steps = get(f, "steps") ? std::stoi(*get(f, "steps")) : 100;
    for (int i = 0; i < steps; ++i)
        out << "step=" << i << " epoch=" << (i / epoch_len)
            << " lr=" << training::lr_at(i, epoch_len, s) << '\n';
    return 0;
}

void usage(std::ostream& out) {
    out << "usage: vtsc COMMAND [flags]\n"
           "commands:\n"
           "  pretrain-a2a  two-phase audio-to-audio pre-training\n"
           "  train-v2a     video-to-speech training / fine-tuning\n"
           "  eval          objective metrics over paired directories\n"
           "  dsp           mel / mfcc feature extraction from a wav\n"
           "  synth-data    materialize a synthetic paired dataset\n"
           "  lr-dump       print the warm-restart schedule table\n"
           "Run 'vtsc COMMAND --help' for the flags of each command.\n"
           "VTS_OUT_ROOT sets the default output root directory.\n";
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err) {
    if (args.empty()) {
        usage(err);
        return 2;
    }
    if (args[0] == "--help" || args[0] == "help") {
        usage(out);
        return 0;
    }
    try {
        if (args[0] == "pretrain-a2a") return cmd_pretrain_a2a(args, out);
        if (args[0] == "train-v2a") return cmd_train_v2a(args, out);
        if (args[0] == "eval") return cmd_eval(args, out, err);
        if (args[0] == "dsp") return cmd_dsp(args, out);
        if (args[0] == "synth-data") return cmd_synth_data(args, out);
        if (args[0] == "lr-dump") return cmd_lr_dump(args, out);
        err << "error: unknown command " << args[0] << '\n';
        usage(err);
        return 2;
    } catch (const UsageError& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    } catch (const InvalidConfiguration& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
}

}  // namespace vts::cli
