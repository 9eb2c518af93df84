#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "vts/dataio.hpp"
#include "vts/dsp.hpp"
#include "vts/models.hpp"

namespace vts::dataio {

namespace {

const char* split_name(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::val: return "val";
        case Split::test: return "test";
    }
    return "?";
}

Split parse_split(const std::string& s) {
    if (s == "train") return Split::train;
    if (s == "val") return Split::val;
    if (s == "test") return Split::test;
    throw ParseError("manifest: bad split '" + s + "'");
}

Group parse_group(const std::string& s) {
    if (s == "clean") return Group::clean;
    if (s == "noisy") return Group::noisy;
    throw ParseError("manifest: bad group '" + s + "'");
}

}  // namespace

DatasetManifest read_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open manifest " + path);
    DatasetManifest m;
    std::set<std::string> seen;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::vector<std::string> fields;
        std::string field;
        while (std::getline(ss, field, '\t')) fields.push_back(field);
        if (fields.size() != 6)
            throw ParseError("manifest line " + std::to_string(lineno) +
                             ": expected 6 tab-separated fields");
        ManifestEntry e;
        e.id = fields[0];
        e.speaker_id = fields[1];
        e.split = parse_split(fields[2]);
        e.group = parse_group(fields[3]);
        e.audio_path = fields[4];
        e.video_path = fields[5] == "-" ? "" : fields[5];
        if (!seen.insert(e.id).second)
            throw InvalidArgument("manifest: duplicate id " + e.id);
        if (e.audio_path.empty() ||
            !std::filesystem::exists(e.audio_path))
            throw InvalidArgument("manifest: missing audio " + e.audio_path);
        if (!e.video_path.empty() &&
            !std::filesystem::exists(e.video_path))
            throw InvalidArgument("manifest: missing video " + e.video_path);
        m.entries.push_back(std::move(e));
    }
    return m;
}

void write_manifest(const std::string& path, const DatasetManifest& m) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot open " + path + " for writing");
    for (const auto& e : m.entries)
        out << e.id << '\t' << e.speaker_id << '\t' << split_name(e.split)
            << '\t' << (e.group == Group::clean ? "clean" : "noisy") << '\t'
            << e.audio_path << '\t'
            << (e.video_path.empty() ? "-" : e.video_path) << '\n';
    if (!out) throw ParseError("write failed: " + path);
}

Batch collate(const std::vector<Sample>& samples, double max_seconds) {
    if (samples.empty()) throw InvalidArgument("collate: empty sample list");
    int max_frames = static_cast<int>(max_seconds * models::kVideoFps);
    bool any_video = false;
    std::vector<int> keep;
    for (const auto& s : samples) {
        int n = static_cast<int>(s.audio.size()) / models::kSamplesPerFeature;
        if (s.video.defined()) {
            any_video = true;
            n = std::min(n, s.video.dim(0));
        }
        if (n < 1) throw InvalidArgument("collate: sample under one frame");
        keep.push_back(std::min(n, max_frames));
    }
    Batch b;
    b.padded_frames = *std::max_element(keep.begin(), keep.end());
    b.frames = keep;
    long pad_samples =
        static_cast<long>(b.padded_frames) * models::kSamplesPerFeature;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& s = samples[i];
        AudioClip padded;
        padded.sample_rate = s.audio.sample_rate;
        long n = static_cast<long>(keep[i]) * models::kSamplesPerFeature;
        padded.samples.assign(pad_samples, 0.0f);
        std::copy(s.audio.samples.begin(), s.audio.samples.begin() + n,
                  padded.samples.begin());
        Tensor a = Tensor::zeros({static_cast<int>(pad_samples)});
        for (long j = 0; j < pad_samples; ++j) a.val()[j] = padded.samples[j];
        b.audio.push_back(a);

        dsp::MelSpectrogram mel = dsp::log_mel_spectrogram(padded);
        b.mel.push_back(Tensor::from(
            {mel.frames, mel.n_mels},
            std::vector<Real>(mel.values.begin(), mel.values.end())));

        if (any_video) {
            if (!s.video.defined())
                throw InvalidArgument("collate: mixed video availability");
            int c = s.video.dim(1), h = s.video.dim(2), w = s.video.dim(3);
            Tensor v = Tensor::zeros({b.padded_frames, c, h, w});
            long frame_elems = static_cast<long>(c) * h * w;
            std::copy(s.video.val().begin(),
                      s.video.val().begin() + keep[i] * frame_elems,
                      v.val().begin());
            b.video.push_back(v);
        }
        b.ids.push_back(s.id_emb);
    }
    return b;
}

Tensor horizontal_flip_augment(const Tensor& frames, double probability,
                               Rng& rng) {
    if (probability < 0.0 || probability > 1.0)
        throw InvalidArgument("flip: probability out of range");
    if (rng.uniform(0.0, 1.0) >= probability) return frames;
    if (frames.shape().size() != 4)
        throw InvalidArgument("flip: expected [N x C x H x W]");
    int w = frames.dim(3);
    Tensor out = Tensor::from(frames.shape(), frames.val());
    long rows = frames.size() / w;
    for (long r = 0; r < rows; ++r)
        std::reverse(out.val().begin() + r * w,
                     out.val().begin() + (r + 1) * w);
    return out;
}

std::pair<Tensor, Tensor> random_1s_crop(const Tensor& real,
                                         const Tensor& fake, Rng& rng) {
    if (real.shape().size() != 1 || fake.shape().size() != 1 ||
        real.dim(0) != fake.dim(0))
        throw InvalidArgument("crop: expected equal-length 1-D audio");
    int t = real.dim(0);
    int len = dsp::kPipelineSampleRate;
    auto cut = [&](const Tensor& x, int off, int n) {
        return nn::reshape(
            nn::slice_cols(nn::reshape(x, {1, t}), off, n), {n});
    };
    if (t >= len) {
        int off = static_cast<int>(rng.below(t - len + 1));
        return {cut(real, off, len), cut(fake, off, len)};
    }
    auto pad = [&](const Tensor& x) {
        Tensor zeros = Tensor::zeros({1, len - t});
        return nn::reshape(
            nn::concat_cols({nn::reshape(x, {1, t}), zeros}), {len});
    };
    return {pad(real), pad(fake)};
}

}  // namespace vts::dataio
