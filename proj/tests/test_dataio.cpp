#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "vts/dataio.hpp"
#include "vts/dsp.hpp"

using namespace vts;
using namespace vts::dataio;
using nn::Tensor;

namespace {

std::string tmp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

void put16(std::ofstream& f, std::uint16_t v) {
    char b[2] = {char(v & 0xff), char(v >> 8)};
    f.write(b, 2);
}
void put32(std::ofstream& f, std::uint32_t v) {
    char b[4] = {char(v & 0xff), char((v >> 8) & 0xff), char((v >> 16) & 0xff),
                 char(v >> 24)};
    f.write(b, 4);
}

void write_pcm16(const std::string& path, const std::vector<std::int16_t>& s,
                 int channels, int rate) {
    std::ofstream f(path, std::ios::binary);
    std::uint32_t data = static_cast<std::uint32_t>(s.size() * 2);
    f.write("RIFF", 4);
    put32(f, 4 + 8 + 16 + 8 + data);
    f.write("WAVE", 4);
    f.write("fmt ", 4);
    put32(f, 16);
    put16(f, 1);
    put16(f, static_cast<std::uint16_t>(channels));
    put32(f, static_cast<std::uint32_t>(rate));
    put32(f, static_cast<std::uint32_t>(rate * channels * 2));
    put16(f, static_cast<std::uint16_t>(channels * 2));
    put16(f, 16);
    f.write("data", 4);
    put32(f, data);
    for (std::int16_t v : s) put16(f, static_cast<std::uint16_t>(v));
}

}  // namespace

TEST_CASE("wav: float round trip and pcm16 scaling") {
    AudioClip clip;
    clip.sample_rate = 24000;
    Rng rng(1);
    for (int i = 0; i < 1000; ++i)
        clip.samples.push_back(static_cast<float>(rng.uniform(-1, 1)));
    std::string path = tmp_path("rt.wav");
    write_wav(path, clip);
    AudioClip back = read_wav(path);
    CHECK(back.sample_rate == 24000);
    REQUIRE(back.samples.size() == clip.samples.size());
    CHECK(std::memcmp(back.samples.data(), clip.samples.data(),
                      clip.samples.size() * 4) == 0);

    std::string p16 = tmp_path("p16.wav");
    write_pcm16(p16, {-32768, 0, 16384, 32767}, 1, 16000);
    AudioClip q = read_wav(p16);
    REQUIRE(q.samples.size() == 4);
    CHECK(q.samples[0] == -1.0f);
    CHECK(q.samples[1] == 0.0f);
    CHECK(q.samples[2] == 0.5f);
    CHECK(q.sample_rate == 16000);

    // stereo: left channel taken
    std::string st = tmp_path("st.wav");
    write_pcm16(st, {100, -100, 200, -200}, 2, 8000);
    AudioClip s2 = read_wav(st);
    REQUIRE(s2.samples.size() == 2);
    CHECK(s2.samples[0] == doctest::Approx(100.0 / 32768));
    CHECK(s2.samples[1] == doctest::Approx(200.0 / 32768));

    std::string bad = tmp_path("bad.wav");
    std::ofstream(bad) << "not a wav at all";
    CHECK_THROWS_AS(read_wav(bad), ParseError);
    CHECK_THROWS_AS(read_wav(tmp_path("nonexistent-file.wav")), ParseError);
}

TEST_CASE("frame tensor files round trip") {
    Rng rng(2);
    Tensor t = Tensor::zeros({3, 3, 4, 5});
    for (auto& v : t.val()) v = std::round(rng.uniform(-1, 1) * 1e4) / 1e4;
    std::string path = tmp_path("frames.vtsf");
    write_frames(path, t);
    Tensor back = read_frames(path);
    CHECK(back.shape() == t.shape());
    for (long i = 0; i < t.size(); ++i)
        CHECK(back.val()[i] == doctest::Approx(t.val()[i]).epsilon(1e-6));

    std::ofstream(path, std::ios::binary) << "XXXX";
    CHECK_THROWS_AS(read_frames(path), ParseError);
}

TEST_CASE("manifest io") {
    std::string wav = tmp_path("m1.wav");
    AudioClip c;
    c.samples.assign(100, 0.0f);
    write_wav(wav, c);

    DatasetManifest m;
    m.entries.push_back({"a", "s1", wav, "", Split::train, Group::clean});
    m.entries.push_back({"b", "s2", wav, "", Split::val, Group::noisy});
    std::string path = tmp_path("manifest.tsv");
    write_manifest(path, m);
    DatasetManifest back = read_manifest(path);
    REQUIRE(back.entries.size() == 2);
    CHECK(back.entries[0].id == "a");
    CHECK(back.entries[1].group == Group::noisy);
    CHECK(back.entries[1].split == Split::val);
    CHECK(back.entries[0].video_path.empty());

    m.entries.push_back({"a", "s3", wav, "", Split::test, Group::clean});
    write_manifest(path, m);
    CHECK_THROWS_AS(read_manifest(path), InvalidArgument);

    m.entries.pop_back();
    m.entries[0].audio_path = tmp_path("gone.wav");
    write_manifest(path, m);
    CHECK_THROWS_AS(read_manifest(path), InvalidArgument);
}

TEST_CASE("synthetic pairs: determinism, rates, lossless decode") {
    SyntheticPairSpec spec;
    spec.seed = 7;
    spec.duration_s = 1.0;
    spec.n_sinusoids = 3;
    auto a = synth_pair(spec);
    auto b = synth_pair(spec);
    CHECK(a.video.shape() == nn::Shape{25, 3, 32, 32});
    CHECK(a.audio.samples.size() == 24000);
    CHECK(a.audio.sample_rate == 24000);
    CHECK(a.video.val() == b.video.val());
    CHECK(a.audio.samples == b.audio.samples);

    // same seed, different speaker: same frames, different audio
    SyntheticPairSpec sp2 = spec;
    sp2.speaker_id = "other";
    auto c = synth_pair(sp2);
    CHECK(c.video.val() == a.video.val());
    CHECK(c.audio.samples != a.audio.samples);

    // parameters decode exactly from the frames and re-render bitwise
    SynthParams p = draw_synth_params(spec);
    SynthParams d = decode_synth_video(a.video, spec.n_sinusoids);
    CHECK(d.freq_q == p.freq_q);
    CHECK(d.amp_q == p.amp_q);
    AudioClip re = render_synth_audio(d, spec);
    CHECK(re.samples == a.audio.samples);

    SyntheticPairSpec bad = spec;
    bad.duration_s = 0.35;
    CHECK_THROWS_AS(synth_pair(bad), InvalidArgument);
    bad = spec;
    bad.height = 8;
    CHECK_THROWS_AS(synth_pair(bad), InvalidArgument);
}

TEST_CASE("noise at target snr") {
    SyntheticPairSpec spec;
    spec.seed = 9;
    spec.duration_s = 1.0;
    auto clean = render_synth_audio(draw_synth_params(spec), spec);
    Rng rng(3);
    auto noisy = add_noise_snr(clean, 10.0, rng);
    double sp = 0, np = 0;
    for (std::size_t i = 0; i < clean.samples.size(); ++i) {
        sp += double(clean.samples[i]) * clean.samples[i];
        double d = double(noisy.samples[i]) - clean.samples[i];
        np += d * d;
    }
    double snr = 10.0 * std::log10(sp / np);
    CHECK(snr == doctest::Approx(10.0).epsilon(0.05));
}

TEST_CASE("collate: truncation, padding, alignment") {
    auto make = [](double seconds, std::uint64_t seed) {
        SyntheticPairSpec spec;
        spec.seed = seed;
        spec.duration_s = seconds;
        auto pr = synth_pair(spec);
        Sample s;
        s.id = "s" + std::to_string(seed);
        s.video = pr.video;
        s.audio = pr.audio;
        return s;
    };

    // equal lengths: no padding
    Batch b = collate({make(1.0, 1), make(1.0, 2)});
    CHECK(b.padded_frames == 25);
    CHECK(b.frames == std::vector<int>{25, 25});
    CHECK(b.audio[0].shape() == nn::Shape{24000});
    CHECK(b.video[0].shape() == nn::Shape{25, 3, 32, 32});
    CHECK(b.mel[0].shape() == nn::Shape{80, 80});

    // 4 s truncates to 3 s = 75 frames / 72000 samples
    Batch t = collate({make(4.0, 3)});
    CHECK(t.padded_frames == 75);
    CHECK(t.audio[0].dim(0) == 72000);
    CHECK(t.video[0].dim(0) == 75);

    // ragged batch right-pads with zeros
    Batch r = collate({make(1.0, 4), make(0.4, 5)});
    CHECK(r.padded_frames == 25);
    CHECK(r.frames == std::vector<int>{25, 10});
    CHECK(r.audio[1].dim(0) == 24000);
    for (int i = 9600; i < 24000; ++i) CHECK(r.audio[1].val()[i] == 0.0);
    long frame_elems = 3 * 32 * 32;
    for (long i = 10 * frame_elems; i < 25 * frame_elems; ++i)
        CHECK(r.video[1].val()[i] == 0.0);

    CHECK_THROWS_AS(collate({}), InvalidArgument);
}

TEST_CASE("horizontal flip augmentation") {
    Rng rng(4);
    Tensor frames = Tensor::zeros({2, 3, 4, 6});
    for (long i = 0; i < frames.size(); ++i) frames.val()[i] = i;

    Rng never(1);
    auto same = horizontal_flip_augment(frames, 0.0, never);
    CHECK(same.val() == frames.val());

    Rng always(1);
    auto flipped = horizontal_flip_augment(frames, 1.0, always);
    CHECK(flipped.val() != frames.val());
    CHECK(flipped.val()[0] == 5.0);  // first row reversed
    Rng always2(1);
    auto twice = horizontal_flip_augment(flipped, 1.0, always2);
    CHECK(twice.val() == frames.val());

    // seeded draw reproducible
    Rng r1(7), r2(7);
    auto x1 = horizontal_flip_augment(frames, 0.5, r1);
    auto x2 = horizontal_flip_augment(frames, 0.5, r2);
    CHECK(x1.val() == x2.val());
}

TEST_CASE("random aligned one-second crop") {
    Tensor real = Tensor::zeros({30000});
    Tensor fake = Tensor::zeros({30000});
    for (int i = 0; i < 30000; ++i) {
        real.val()[i] = i;
        fake.val()[i] = i + 0.5;
    }
    Rng rng(5);
    auto [rc, fc] = random_1s_crop(real, fake, rng);
    CHECK(rc.shape() == nn::Shape{24000});
    CHECK(fc.shape() == nn::Shape{24000});
    // shared offset: fake crop tracks the real crop exactly
    for (int i : {0, 100, 23999})
        CHECK(fc.val()[i] == rc.val()[i] + 0.5);

    Tensor shrt = Tensor::full({12000}, 0.25);
    Rng rng2(6);
    auto [rs, fs] = random_1s_crop(shrt, shrt, rng2);
    CHECK(rs.dim(0) == 24000);
    CHECK(rs.val()[11999] == 0.25);
    CHECK(rs.val()[12000] == 0.0);
    CHECK(rs.val()[23999] == 0.0);

    Tensor other = Tensor::zeros({100});
    Rng rng3(7);
    CHECK_THROWS_AS(random_1s_crop(real, other, rng3), InvalidArgument);
}
