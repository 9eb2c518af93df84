#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include "vts/cli.hpp"

namespace vts::cli {

namespace {

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double to_real(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        double x = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw InvalidConfiguration(key + ": not a number: " + v);
    }
}

long to_int(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        long x = std::stol(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw InvalidConfiguration(key + ": not an integer: " + v);
    }
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw InvalidConfiguration(key + ": not a boolean: " + v);
}

}  // namespace

std::vector<KeyValue> parse_config_text(const std::string& text) {
    std::vector<KeyValue> out;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw InvalidConfiguration("config line " + std::to_string(lineno) +
                                       ": expected key = value");
        KeyValue kv{trim(line.substr(0, eq)), trim(line.substr(eq + 1))};
        if (kv.key.empty())
            throw InvalidConfiguration("config line " + std::to_string(lineno) +
                                       ": empty key");
        out.push_back(std::move(kv));
    }
    return out;
}

std::vector<KeyValue> parse_config_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw InvalidConfiguration("cannot open config file " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_config_text(ss.str());
}

RunConfig build_run_config(const std::vector<KeyValue>& file_values,
                           const std::vector<KeyValue>& overrides) {
    std::vector<KeyValue> merged = file_values;
    merged.insert(merged.end(), overrides.begin(), overrides.end());

    auto find_last = [&](const std::string& key) -> const std::string* {
        const std::string* v = nullptr;
        for (const auto& kv : merged)
            if (kv.key == key) v = &kv.value;
        return v;
    };

    RunConfig cfg;
    // family-dependent defaults need the family first
    if (const auto* fam = find_last("model.family"))
        cfg.model = models::parse_family(*fam);
    bool is_wave = cfg.model.family == models::Family::v2a_wave ||
                   cfg.model.family == models::Family::a2a_wave;
    cfg.train.opt = is_wave ? training::gan_adam() : training::mel_adamw();
    cfg.train.disc_opt = training::gan_adam();

    const char* root = std::getenv("VTS_OUT_ROOT");
    cfg.output_dir = root ? std::string(root) + "/run" : "out";

    for (const auto& [key, value] : merged) {
        if (key == "model.family") {
            auto parsed = models::parse_family(value);
            cfg.model.family = parsed.family;
            cfg.model.size = parsed.size;
        } else if (key == "model.width") {
            cfg.model.width = to_real(key, value);
        } else if (key == "model.identity") {
            cfg.model.identity = models::parse_identity(value);
        } else if (key == "model.seed") {
            cfg.model.seed = static_cast<std::uint64_t>(to_int(key, value));
        } else if (key == "data.manifest") {
            cfg.manifest = value;
        } else if (key == "train.batch_size") {
            cfg.train.batch_size = static_cast<int>(to_int(key, value));
        } else if (key == "train.max_epochs") {
            cfg.train.max_epochs = static_cast<int>(to_int(key, value));
        } else if (key == "train.patience") {
            cfg.train.patience = static_cast<int>(to_int(key, value));
        } else if (key == "train.max_seconds") {
            cfg.train.max_seconds = to_real(key, value);
        } else if (key == "train.seed") {
            cfg.train.seed = static_cast<std::uint64_t>(to_int(key, value));
        } else if (key == "opt.kind") {
            if (value == "adam") cfg.train.opt.kind = training::OptKind::adam;
            else if (value == "adamw")
                cfg.train.opt.kind = training::OptKind::adamw;
            else throw InvalidConfiguration("opt.kind: unknown: " + value);
        } else if (key == "opt.lr") {
            cfg.train.opt.lr = to_real(key, value);
        } else if (key == "opt.beta1") {
            cfg.train.opt.beta1 = to_real(key, value);
        } else if (key == "opt.beta2") {
            cfg.train.opt.beta2 = to_real(key, value);
        } else if (key == "opt.weight_decay") {
            cfg.train.opt.weight_decay = to_real(key, value);
        } else if (key == "disc.lr") {
            cfg.train.disc_opt.lr = to_real(key, value);
        } else if (key == "disc.beta1") {
            cfg.train.disc_opt.beta1 = to_real(key, value);
        } else if (key == "disc.beta2") {
            cfg.train.disc_opt.beta2 = to_real(key, value);
        } else if (key == "disc.weight_decay") {
            cfg.train.disc_opt.weight_decay = to_real(key, value);
        } else if (key == "sched.warmup_epochs") {
            cfg.train.sched.warmup_epochs = static_cast<int>(to_int(key, value));
        } else if (key == "sched.eta_max") {
            cfg.train.sched.eta_max = to_real(key, value);
        } else if (key == "sched.eta_min") {
            cfg.train.sched.eta_min = to_real(key, value);
        } else if (key == "sched.t0") {
            cfg.train.sched.t0 = static_cast<int>(to_int(key, value));
        } else if (key == "sched.tmult") {
            cfg.train.sched.tmult = static_cast<int>(to_int(key, value));
        } else if (key == "loss.lambda1") {
            cfg.train.weights.lambda1 = to_real(key, value);
        } else if (key == "loss.lambda2") {
            cfg.train.weights.lambda2 = to_real(key, value);
        } else if (key == "loss.lambda3") {
            cfg.train.weights.lambda3 = to_real(key, value);
        } else if (key == "regime.name") {
            cfg.regime_name = value;
        } else if (key == "regime.audio_encoder_lr") {
            cfg.regime.audio_encoder_lr = to_real(key, value);
        } else if (key == "regime.decoder_lr") {
            cfg.regime.decoder_lr = to_real(key, value);
        } else if (key == "regime.frozen_epochs") {
            cfg.regime.frozen_epochs = static_cast<int>(to_int(key, value));
        } else if (key == "regime.load_decoder_optimizer") {
            cfg.regime.load_decoder_optimizer = to_bool(key, value);
        } else if (key == "regime.load_discriminator_optimizer") {
            cfg.regime.load_discriminator_optimizer = to_bool(key, value);
        } else if (key == "run.output_dir") {
            cfg.output_dir = value;
        } else if (key == "run.deterministic") {
            cfg.deterministic = to_bool(key, value);
        } else if (key == "run.threads") {
            cfg.threads = static_cast<int>(to_int(key, value));
        } else {
            throw InvalidConfiguration("unknown config key: " + key);
        }
    }

    // regime: presets first, explicit keys already merged above win on fields
    // they set only when the name maps to a plain regime
    bool plain = true;
    try {
        cfg.regime.regime = training::parse_regime(cfg.regime_name);
    } catch (const InvalidConfiguration&) {
        plain = false;
    }
    if (!plain) {
        training::RegimeConfig preset = training::regime_preset(cfg.regime_name);
        auto keyed = [&](const std::string& k) {
            return find_last(k) != nullptr;
        };
        if (!keyed("regime.audio_encoder_lr"))
            cfg.regime.audio_encoder_lr = preset.audio_encoder_lr;
        if (!keyed("regime.decoder_lr"))
            cfg.regime.decoder_lr = preset.decoder_lr;
        if (!keyed("regime.frozen_epochs"))
            cfg.regime.frozen_epochs = preset.frozen_epochs;
        if (!keyed("regime.load_decoder_optimizer"))
            cfg.regime.load_decoder_optimizer = preset.load_decoder_optimizer;
        if (!keyed("regime.load_discriminator_optimizer"))
            cfg.regime.load_discriminator_optimizer =
                preset.load_discriminator_optimizer;
        cfg.regime.regime = preset.regime;
    }

    if (cfg.model.width <= 0.0)
        throw InvalidConfiguration("model.width must be positive");
    if (cfg.train.batch_size < 1)
        throw InvalidConfiguration("train.batch_size must be >= 1");
    if (cfg.train.max_epochs < 1)
        throw InvalidConfiguration("train.max_epochs must be >= 1");
    if (cfg.train.patience < 1)
        throw InvalidConfiguration("train.patience must be >= 1");
    if (cfg.train.max_seconds <= 0.0)
        throw InvalidConfiguration("train.max_seconds must be positive");
    if (cfg.threads < 1)
        throw InvalidConfiguration("run.threads must be >= 1");
    cfg.train.opt.validate();
    cfg.train.disc_opt.validate();
    cfg.train.sched.validate();

    auto put = [&](const std::string& k, const std::string& v) {
        cfg.effective.push_back({k, v});
    };
    auto num = [](double v) {
        std::ostringstream ss;
        ss << v;
        return ss.str();
    };
    put("model.family", models::family_name(cfg.model));
    put("model.width", num(cfg.model.width));
    put("model.identity", cfg.model.identity == models::IdentityKind::none
                              ? "none"
                              : cfg.model.identity ==
                                        models::IdentityKind::speaker256
                                    ? "speaker256"
                                    : "face4096");
    put("model.seed", std::to_string(cfg.model.seed));
    put("data.manifest", cfg.manifest);
    put("train.batch_size", std::to_string(cfg.train.batch_size));
    put("train.max_epochs", std::to_string(cfg.train.max_epochs));
    put("train.patience", std::to_string(cfg.train.patience));
    put("train.max_seconds", num(cfg.train.max_seconds));
    put("train.seed", std::to_string(cfg.train.seed));
    put("opt.kind",
        cfg.train.opt.kind == training::OptKind::adam ? "adam" : "adamw");
    put("opt.lr", num(cfg.train.opt.lr));
    put("opt.beta1", num(cfg.train.opt.beta1));
    put("opt.beta2", num(cfg.train.opt.beta2));
    put("opt.weight_decay", num(cfg.train.opt.weight_decay));
    put("disc.lr", num(cfg.train.disc_opt.lr));
    put("disc.beta1", num(cfg.train.disc_opt.beta1));
    put("disc.beta2", num(cfg.train.disc_opt.beta2));
    put("disc.weight_decay", num(cfg.train.disc_opt.weight_decay));
    put("sched.warmup_epochs", std::to_string(cfg.train.sched.warmup_epochs));
    put("sched.eta_max", num(cfg.train.sched.eta_max));
    put("sched.eta_min", num(cfg.train.sched.eta_min));
    put("sched.t0", std::to_string(cfg.train.sched.t0));
    put("sched.tmult", std::to_string(cfg.train.sched.tmult));
    put("loss.lambda1", num(cfg.train.weights.lambda1));
    put("loss.lambda2", num(cfg.train.weights.lambda2));
    put("loss.lambda3", num(cfg.train.weights.lambda3));
    put("regime.name", cfg.regime_name);
    put("regime.audio_encoder_lr", num(cfg.regime.audio_encoder_lr));
    put("regime.decoder_lr", num(cfg.regime.decoder_lr));
    put("regime.frozen_epochs", std::to_string(cfg.regime.frozen_epochs));
    put("regime.load_decoder_optimizer",
        cfg.regime.load_decoder_optimizer ? "true" : "false");
    put("regime.load_discriminator_optimizer",
        cfg.regime.load_discriminator_optimizer ? "true" : "false");
    put("run.output_dir", cfg.output_dir);
    put("run.deterministic", cfg.deterministic ? "true" : "false");
    put("run.threads", std::to_string(cfg.threads));
    std::sort(cfg.effective.begin(), cfg.effective.end(),
              [](const KeyValue& a, const KeyValue& b) { return a.key < b.key; });
    return cfg;
}

void echo_config(const RunConfig& cfg, std::ostream& out) {
    for (const auto& kv : cfg.effective)
        out << kv.key << " = " << kv.value << '\n';
}

std::vector<dataio::Sample> load_samples(const dataio::DatasetManifest& m,
                                         dataio::Split split,
                                         dataio::Group group,
                                         const models::ModelConfig& model,
                                         bool need_video) {
    std::vector<dataio::Sample> out;
    for (const auto& e : m.entries) {
        if (e.split != split || e.group != group) continue;
        dataio::Sample s;
        s.id = e.id;
        s.speaker_id = e.speaker_id;
        s.audio = dataio::read_wav(e.audio_path);
        if (s.audio.sample_rate != dsp::kPipelineSampleRate)
            s.audio = dsp::resample(s.audio, dsp::kPipelineSampleRate);
        if (!e.video_path.empty()) s.video = dataio::read_frames(e.video_path);
        else if (need_video)
            throw InvalidConfiguration("entry " + e.id + " has no video");
        if (model.identity != models::IdentityKind::none)
            s.id_emb = models::identity_embedding(model.identity, e.speaker_id);
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace vts::cli
