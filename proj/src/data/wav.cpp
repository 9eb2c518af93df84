#include <cstdint>
#include <cstring>
#include <fstream>
#include <iostream>

#include "vts/dataio.hpp"

namespace vts::dataio {

namespace {

std::uint32_t read_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw ParseError("unexpected end of file");
    return b[0] | (b[1] << 8) | (std::uint32_t(b[2]) << 16) |
           (std::uint32_t(b[3]) << 24);
}

std::uint16_t read_u16(std::istream& in) {
    unsigned char b[2];
    in.read(reinterpret_cast<char*>(b), 2);
    if (!in) throw ParseError("unexpected end of file");
    return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

void write_u32(std::ostream& out, std::uint32_t v) {
    char b[4] = {char(v & 0xff), char((v >> 8) & 0xff), char((v >> 16) & 0xff),
                 char((v >> 24) & 0xff)};
    out.write(b, 4);
}

void write_u16(std::ostream& out, std::uint16_t v) {
    char b[2] = {char(v & 0xff), char((v >> 8) & 0xff)};
    out.write(b, 2);
}

}  // namespace

AudioClip read_wav(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open " + path);
    char tag[4];
    in.read(tag, 4);
    if (!in || std::memcmp(tag, "RIFF", 4) != 0)
        throw ParseError(path + ": not a RIFF file");
    read_u32(in);  // riff size
    in.read(tag, 4);
    if (!in || std::memcmp(tag, "WAVE", 4) != 0)
        throw ParseError(path + ": not a WAVE file");

    int format = 0, channels = 0, rate = 0, bits = 0;
    bool have_fmt = false;
    AudioClip clip;
    while (in.read(tag, 4)) {
        std::uint32_t size = read_u32(in);
        if (std::memcmp(tag, "fmt ", 4) == 0) {
            if (size < 16) throw ParseError(path + ": short fmt chunk");
            format = read_u16(in);
            channels = read_u16(in);
            rate = static_cast<int>(read_u32(in));
            read_u32(in);  // byte rate
            read_u16(in);  // block align
            bits = read_u16(in);
            in.ignore(size - 16 + (size & 1));
            have_fmt = true;
        } else if (std::memcmp(tag, "data", 4) == 0) {
            if (!have_fmt) throw ParseError(path + ": data before fmt");
            if (channels < 1) throw ParseError(path + ": zero channels");
            if (channels > 1)
                std::cerr << "warning: " << path << " has " << channels
                          << " channels, taking the first\n";
            int bytes = bits / 8;
            long frames = size / (static_cast<long>(bytes) * channels);
            clip.samples.reserve(frames);
            std::vector<char> raw(size);
            in.read(raw.data(), size);
            if (!in) throw ParseError(path + ": truncated data chunk");
            if (format == 1 && bits == 16) {
                for (long f = 0; f < frames; ++f) {
                    std::int16_t s;
                    std::memcpy(&s, raw.data() + f * 2L * channels, 2);
                    clip.samples.push_back(static_cast<float>(s) / 32768.0f);
                }
            } else if (format == 3 && bits == 32) {
                for (long f = 0; f < frames; ++f) {
                    float s;
                    std::memcpy(&s, raw.data() + f * 4L * channels, 4);
                    clip.samples.push_back(s);
                }
            } else {
                throw UnsupportedFormat(path + ": only PCM16 and float32");
            }
            clip.sample_rate = rate;
            return clip;
        } else {
            in.ignore(size + (size & 1));
        }
    }
    throw ParseError(path + ": no data chunk");
}

void write_wav(const std::string& path, const AudioClip& audio) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("cannot open " + path + " for writing");
    std::uint32_t data_size =
        static_cast<std::uint32_t>(audio.samples.size() * 4);
    out.write("RIFF", 4);
    write_u32(out, 4 + 8 + 18 + 8 + data_size);
    out.write("WAVE", 4);
    out.write("fmt ", 4);
    write_u32(out, 18);
    write_u16(out, 3);  // IEEE float
    write_u16(out, 1);
    write_u32(out, static_cast<std::uint32_t>(audio.sample_rate));
    write_u32(out, static_cast<std::uint32_t>(audio.sample_rate) * 4);
    write_u16(out, 4);
    write_u16(out, 32);
    write_u16(out, 0);  // extension size
    out.write("data", 4);
    write_u32(out, data_size);
    for (float s : audio.samples)
        out.write(reinterpret_cast<const char*>(&s), 4);
    if (!out) throw ParseError("write failed: " + path);
}

namespace {
constexpr char kFramesMagic[4] = {'V', 'T', 'S', 'F'};
constexpr std::uint32_t kFramesVersion = 1;
}  // namespace

Tensor read_frames(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kFramesMagic, 4) != 0)
        throw ParseError(path + ": bad frame file magic");
    if (read_u32(in) != kFramesVersion)
        throw UnsupportedFormat(path + ": unknown frame file version");
    int n = static_cast<int>(read_u32(in));
    int c = static_cast<int>(read_u32(in));
    int h = static_cast<int>(read_u32(in));
    int w = static_cast<int>(read_u32(in));
    Tensor t = Tensor::zeros({n, c, h, w});
    for (auto& v : t.val()) {
        float f;
        in.read(reinterpret_cast<char*>(&f), 4);
        if (!in) throw ParseError(path + ": truncated frame data");
        v = f;
    }
    return t;
}

void write_frames(const std::string& path, const Tensor& frames) {
    if (frames.shape().size() != 4)
        throw InvalidArgument("write_frames: expected [N x C x H x W]");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("cannot open " + path + " for writing");
    out.write(kFramesMagic, 4);
    write_u32(out, kFramesVersion);
    for (int i = 0; i < 4; ++i)
        write_u32(out, static_cast<std::uint32_t>(frames.dim(i)));
    for (Real v : frames.val()) {
        float f = static_cast<float>(v);
        out.write(reinterpret_cast<const char*>(&f), 4);
    }
    if (!out) throw ParseError("write failed: " + path);
}

}  // namespace vts::dataio
