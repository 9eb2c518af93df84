#include <algorithm>
#include <filesystem>
#include <set>

#include "vts/dataio.hpp"
#include "vts/eval.hpp"
#include "vts/losses.hpp"

namespace vts::eval {

namespace {

std::set<std::string> wav_names(const std::string& dir) {
    std::set<std::string> names;
    for (const auto& e : std::filesystem::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".wav")
            names.insert(e.path().filename().string());
    return names;
}

}  // namespace

MetricReport evaluate_pairs(const std::string& generated_dir,
                            const std::string& reference_dir) {
    if (!std::filesystem::is_directory(generated_dir) ||
        !std::filesystem::is_directory(reference_dir))
        throw InvalidArgument("evaluate_pairs: directory does not exist");

    auto gen = wav_names(generated_dir);
    auto ref = wav_names(reference_dir);

    MetricReport rep;
    for (const auto& n : gen)
        if (!ref.count(n)) rep.unmatched.push_back(n + " (no reference)");
    for (const auto& n : ref)
        if (!gen.count(n)) rep.unmatched.push_back(n + " (no output)");
    std::sort(rep.unmatched.begin(), rep.unmatched.end());
    rep.warning = !rep.unmatched.empty();

    auto res = losses::default_resolutions();
    for (const auto& n : ref) {
        if (!gen.count(n)) continue;
        AudioClip g = dataio::read_wav(
            (std::filesystem::path(generated_dir) / n).string());
        AudioClip r = dataio::read_wav(
            (std::filesystem::path(reference_dir) / n).string());
        if (g.sample_rate != r.sample_rate)
            throw SampleRateMismatch("evaluate_pairs: rate mismatch at " + n);
        // trim to the shorter clip so generated length jitter is tolerated
        std::size_t len = std::min(g.samples.size(), r.samples.size());
        g.samples.resize(len);
        r.samples.resize(len);
        PairMetrics pm;
        pm.name = n;
        pm.stoi = stoi(r, g);
        pm.estoi = estoi(r, g);
        pm.mr_stft = losses::multi_resolution_stft_loss(r, g, res);
        pm.mel_l1 = losses::mel_l1_loss(dsp::log_mel_spectrogram(r),
                                        dsp::log_mel_spectrogram(g));
        rep.pairs.push_back(std::move(pm));
    }
    if (rep.pairs.empty())
        throw InvalidArgument("evaluate_pairs: no matching filename pairs");

    for (const auto& p : rep.pairs) {
        rep.stoi += p.stoi;
        rep.estoi += p.estoi;
        rep.mr_stft += p.mr_stft;
        rep.mel_l1 += p.mel_l1;
    }
    auto n = static_cast<Real>(rep.pairs.size());
    rep.stoi /= n;
    rep.estoi /= n;
    rep.mr_stft /= n;
    rep.mel_l1 /= n;
    return rep;
}

void write_report(const MetricReport& report, std::ostream& out) {
    for (const auto& p : report.pairs)
        out << "file=" << p.name << " stoi=" << p.stoi
            << " estoi=" << p.estoi << " mr_stft=" << p.mr_stft
            << " mel_l1=" << p.mel_l1 << '\n';
    out << "aggregate pairs=" << report.pairs.size()
        << " stoi=" << report.stoi << " estoi=" << report.estoi
        << " mr_stft=" << report.mr_stft << " mel_l1=" << report.mel_l1
        << '\n';
    for (const auto& u : report.unmatched) out << "unmatched " << u << '\n';
}

}  // namespace vts::eval
