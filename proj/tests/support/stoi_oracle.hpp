// Reference intelligibility metrics written straight from the published
// definitions: naive DFT, explicit loops, no code shared with the library.
// Operates on signals already at the 10 kHz analysis rate.
#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

namespace stoi_oracle {

constexpr int FS = 10000;
constexpr int FRAME = 256;
constexpr int HOP = 128;
constexpr int NFFT = 512;
constexpr int NBANDS = 15;
constexpr int SEG = 30;
constexpr double DYN = 40.0;
constexpr double BETA = -15.0;
constexpr double TINY = 2.220446049250313e-16;

using Mat = std::vector<std::vector<double>>;

inline double win_at(int k) {
    return 0.5 - 0.5 * std::cos(2.0 * M_PI * (k + 1) / (FRAME + 1));
}

inline Mat cut_frames(const std::vector<double>& s) {
    Mat out;
    if ((int)s.size() < FRAME) return out;
    for (int start = 0; start + FRAME <= (int)s.size(); start += HOP) {
        std::vector<double> fr(FRAME);
        for (int k = 0; k < FRAME; ++k) fr[k] = s[start + k] * win_at(k);
        out.push_back(fr);
    }
    return out;
}

inline void drop_quiet(std::vector<double>& a, std::vector<double>& b) {
    Mat fa = cut_frames(a), fb = cut_frames(b);
    std::vector<double> db;
    double top = -1e300;
    for (auto& fr : fa) {
        double e = 0;
        for (double v : fr) e += v * v;
        double d = 20.0 * std::log10(std::sqrt(e) + TINY);
        db.push_back(d);
        if (d > top) top = d;
    }
    Mat ka, kb;
    for (size_t i = 0; i < fa.size(); ++i)
        if (db[i] > top - DYN) {
            ka.push_back(fa[i]);
            kb.push_back(fb[i]);
        }
    size_t n = ka.empty() ? 0 : (ka.size() - 1) * HOP + FRAME;
    a.assign(n, 0.0);
    b.assign(n, 0.0);
    for (size_t i = 0; i < ka.size(); ++i)
        for (int k = 0; k < FRAME; ++k) {
            a[i * HOP + k] += ka[i][k];
            b[i * HOP + k] += kb[i][k];
        }
}

// third-octave magnitudes via direct DFT, [frames][band]
inline Mat octave_bands(const std::vector<double>& s) {
    int bins = NFFT / 2 + 1;
    std::vector<int> first(NBANDS), last(NBANDS);
    for (int b = 0; b < NBANDS; ++b) {
        double center = 150.0 * std::pow(2.0, b / 3.0);
        double edges[2] = {center * std::pow(2.0, -1.0 / 6.0),
                           center * std::pow(2.0, 1.0 / 6.0)};
        int picked[2];
        for (int e = 0; e < 2; ++e) {
            int arg = 0;
            double best = 1e300;
            for (int i = 0; i < bins; ++i) {
                double fi = double(i) * FS / NFFT;
                double d2 = (fi - edges[e]) * (fi - edges[e]);
                if (d2 < best) {
                    best = d2;
                    arg = i;
                }
            }
            picked[e] = arg;
        }
        first[b] = picked[0];
        last[b] = picked[1];
    }
    Mat frames = cut_frames(s);
    Mat out;
    for (auto& fr : frames) {
        std::vector<double> bands(NBANDS, 0.0);
        for (int b = 0; b < NBANDS; ++b) {
            double acc = 0.0;
            for (int i = first[b]; i < last[b]; ++i) {
                double re = 0, im = 0;
                for (int k = 0; k < FRAME; ++k) {
                    double ang = -2.0 * M_PI * i * k / NFFT;
                    re += fr[k] * std::cos(ang);
                    im += fr[k] * std::sin(ang);
                }
                acc += re * re + im * im;
            }
            bands[b] = std::sqrt(acc);
        }
        out.push_back(bands);
    }
    return out;
}

inline double ref_stoi(std::vector<double> x, std::vector<double> y) {
    drop_quiet(x, y);
    Mat bx = octave_bands(x), by = octave_bands(y);
    if ((int)bx.size() < SEG) throw std::runtime_error("oracle: too short");
    double c = std::pow(10.0, -BETA / 20.0);
    double acc = 0.0;
    long cnt = 0;
    for (int m = SEG; m <= (int)bx.size(); ++m)
        for (int b = 0; b < NBANDS; ++b) {
            std::vector<double> u(SEG), v(SEG);
            double nu = 0, nv = 0;
            for (int n = 0; n < SEG; ++n) {
                u[n] = bx[m - SEG + n][b];
                v[n] = by[m - SEG + n][b];
                nu += u[n] * u[n];
                nv += v[n] * v[n];
            }
            double scalef = std::sqrt(nu) / (std::sqrt(nv) + TINY);
            double mu = 0, mv = 0;
            for (int n = 0; n < SEG; ++n) {
                double capped = u[n] * (1.0 + c);
                v[n] = scalef * v[n] < capped ? scalef * v[n] : capped;
                mu += u[n];
                mv += v[n];
            }
            mu /= SEG;
            mv /= SEG;
            double su = 0, sv = 0, dp = 0;
            for (int n = 0; n < SEG; ++n) {
                su += (u[n] - mu) * (u[n] - mu);
                sv += (v[n] - mv) * (v[n] - mv);
                dp += (u[n] - mu) * (v[n] - mv);
            }
            acc += dp / (std::sqrt(su) * std::sqrt(sv) + TINY);
            ++cnt;
        }
    return acc / cnt;
}

inline void unit_rows_then_cols(Mat& m) {
    for (auto& row : m) {
        double mean = 0;
        for (double v : row) mean += v;
        mean /= row.size();
        double nn = 0;
        for (double& v : row) {
            v -= mean;
            nn += v * v;
        }
        nn = std::sqrt(nn) + TINY;
        for (double& v : row) v /= nn;
    }
    for (size_t c = 0; c < m[0].size(); ++c) {
        double mean = 0;
        for (auto& row : m) mean += row[c];
        mean /= m.size();
        double nn = 0;
        for (auto& row : m) {
            row[c] -= mean;
            nn += row[c] * row[c];
        }
        nn = std::sqrt(nn) + TINY;
        for (auto& row : m) row[c] /= nn;
    }
}

inline double ref_estoi(std::vector<double> x, std::vector<double> y) {
    drop_quiet(x, y);
    Mat bx = octave_bands(x), by = octave_bands(y);
    if ((int)bx.size() < SEG) throw std::runtime_error("oracle: too short");
    double acc = 0.0;
    int cnt = 0;
    for (int m = SEG; m <= (int)bx.size(); ++m) {
        Mat u(NBANDS, std::vector<double>(SEG));
        Mat v(NBANDS, std::vector<double>(SEG));
        for (int b = 0; b < NBANDS; ++b)
            for (int n = 0; n < SEG; ++n) {
                u[b][n] = bx[m - SEG + n][b];
                v[b][n] = by[m - SEG + n][b];
            }
        unit_rows_then_cols(u);
        unit_rows_then_cols(v);
        double d = 0;
        for (int b = 0; b < NBANDS; ++b)
            for (int n = 0; n < SEG; ++n) d += u[b][n] * v[b][n];
        acc += d / SEG;
        ++cnt;
    }
    return acc / cnt;
}

}  // namespace stoi_oracle
