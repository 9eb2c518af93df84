#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "vts/common.hpp"

namespace vts::eval {

// STOI operating point: 10 kHz analysis rate, 256-sample frames with 50%
// overlap zero-padded to a 512 FFT, 15 one-third-octave bands from 150 Hz,
// 30-frame (384 ms) segments, 40 dB silent-frame range, -15 dB SDR clipping.
inline constexpr int kStoiRate = 10000;
inline constexpr int kStoiFrame = 256;
inline constexpr int kStoiHop = 128;
inline constexpr int kStoiFft = 512;
inline constexpr int kStoiBands = 15;
inline constexpr double kStoiBandStart = 150.0;
inline constexpr int kStoiSegFrames = 30;
inline constexpr double kStoiDynRange = 40.0;
inline constexpr double kStoiBeta = -15.0;

// Both metrics are pure functions of the two clips and lie in [-1, 1].
// Inputs must have equal lengths; fewer than 30 active frames after
// resampling and silent-frame removal raises InsufficientLength.
Real stoi(const AudioClip& clean, const AudioClip& degraded);
Real estoi(const AudioClip& clean, const AudioClip& degraded);

struct PairMetrics {
    std::string name;
    Real stoi = 0.0;
    Real estoi = 0.0;
    Real mr_stft = 0.0;
    Real mel_l1 = 0.0;
};

struct MetricReport {
    std::vector<PairMetrics> pairs;  // sorted by filename
    Real stoi = 0.0;                 // aggregate means over pairs
    Real estoi = 0.0;
    Real mr_stft = 0.0;
    Real mel_l1 = 0.0;
    std::vector<std::string> unmatched;  // present on one side only
    bool warning = false;                // set when any file was excluded
};

// Pairs *.wav files by name across the two directories. PESQ and WER need
// external models and are absent; merge them downstream if required.
MetricReport evaluate_pairs(const std::string& generated_dir,
                            const std::string& reference_dir);

// One record per pair: "file=<name> stoi=... estoi=... mr_stft=... mel_l1=..."
// followed by an "aggregate" footer and one "unmatched" line per exclusion.
void write_report(const MetricReport& report, std::ostream& out);

}  // namespace vts::eval
