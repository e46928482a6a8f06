#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <string>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "isnmf/io.hpp"
#include "isnmf/matrix.hpp"

namespace isnmf {

struct AudioData {
    std::vector<double> samples;  // mono, in [-1, 1]
    double sample_rate = 0.0;
};

namespace detail {

inline std::uint32_t rd_u32(const unsigned char* p) {
    return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 |
           std::uint32_t(p[3]) << 24;
}

inline std::uint16_t rd_u16(const unsigned char* p) {
    return static_cast<std::uint16_t>(std::uint16_t(p[0]) | std::uint16_t(p[1]) << 8);
}

} // namespace detail

/// Decodes a RIFF/WAVE file: PCM 16-bit or IEEE float32, 1 or 2 channels.
/// Stereo is downmixed by channel average.
inline AudioData load_audio(std::istream& in) {
    unsigned char hdr[12];
    in.read(reinterpret_cast<char*>(hdr), 12);
    if (in.gcount() != 12 || std::memcmp(hdr, "RIFF", 4) != 0 ||
        std::memcmp(hdr + 8, "WAVE", 4) != 0)
        throw UnsupportedFormat("not a RIFF/WAVE file");

    std::uint16_t format = 0, channels = 0, bits = 0;
    std::uint32_t rate = 0;
    bool have_fmt = false;
    std::vector<unsigned char> data;
    bool have_data = false;

    unsigned char chdr[8];
    while (in.read(reinterpret_cast<char*>(chdr), 8)) {
        const std::uint32_t size = detail::rd_u32(chdr + 4);
        if (std::memcmp(chdr, "fmt ", 4) == 0) {
            if (size < 16) throw UnsupportedFormat("fmt chunk too small");
            std::vector<unsigned char> fmt(size);
            in.read(reinterpret_cast<char*>(fmt.data()), size);
            if (static_cast<std::uint32_t>(in.gcount()) != size)
                throw UnsupportedFormat("truncated fmt chunk");
            format = detail::rd_u16(fmt.data());
            channels = detail::rd_u16(fmt.data() + 2);
            rate = detail::rd_u32(fmt.data() + 4);
            bits = detail::rd_u16(fmt.data() + 14);
            have_fmt = true;
        } else if (std::memcmp(chdr, "data", 4) == 0) {
            data.resize(size);
            in.read(reinterpret_cast<char*>(data.data()), size);
            if (static_cast<std::uint32_t>(in.gcount()) != size)
                throw UnsupportedFormat("truncated data chunk");
            have_data = true;
        } else {
            in.seekg(size, std::ios::cur);
            if (!in) throw UnsupportedFormat("truncated chunk: " +
                                             std::string(reinterpret_cast<char*>(chdr), 4));
        }
        if (size % 2) in.seekg(1, std::ios::cur);  // chunks are word-aligned
    }
    if (!have_fmt || !have_data) throw UnsupportedFormat("missing fmt or data chunk");
    if (channels < 1 || channels > 2)
        throw UnsupportedFormat("unsupported channel count " + std::to_string(channels));

    const bool pcm16 = format == 1 && bits == 16;
    const bool f32 = format == 3 && bits == 32;
    if (!pcm16 && !f32)
        throw UnsupportedFormat("unsupported encoding (format " + std::to_string(format) +
                                ", " + std::to_string(bits) + " bits)");

    const std::size_t bytes_per = bits / 8;
    const std::size_t n_values = data.size() / bytes_per;
    const std::size_t n_frames = n_values / channels;
    AudioData out;
    out.sample_rate = rate;
    out.samples.resize(n_frames);
    for (std::size_t i = 0; i < n_frames; ++i) {
        double acc = 0.0;
        for (std::uint16_t c = 0; c < channels; ++c) {
            const unsigned char* p = data.data() + (i * channels + c) * bytes_per;
            if (pcm16) {
                const auto raw = static_cast<std::int16_t>(detail::rd_u16(p));
                acc += raw / 32768.0;
            } else {
                std::uint32_t bitsle = detail::rd_u32(p);
                float f;
                std::memcpy(&f, &bitsle, sizeof(f));
                acc += f;
            }
        }
        out.samples[i] = acc / channels;
    }
    return out;
}

inline AudioData load_audio(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path);
    return load_audio(in);
}

/// Power spectrogram with a sine analysis window:
/// frame i covers samples [i*hop, i*hop + window); output is the squared
/// magnitude of the one-sided spectrum, F = window/2 + 1 bins,
/// N = floor((len - window)/hop) + 1 frames.
inline Matrix stft_power(const std::vector<double>& samples, int window = 512, int hop = 256) {
    if (window < 2 || window % 2 != 0)
        throw UnsupportedFormat("stft_power: window must be even and >= 2");
    if (hop < 1 || hop > window) throw UnsupportedFormat("stft_power: need 1 <= hop <= window");
    if (samples.size() < static_cast<std::size_t>(window))
        throw TooShort("stft_power: signal shorter than one window");

    const Index bins = window / 2 + 1;
    const Index frames =
        static_cast<Index>((samples.size() - static_cast<std::size_t>(window)) /
                           static_cast<std::size_t>(hop)) +
        1;

    std::vector<double> win(static_cast<std::size_t>(window));
    for (int i = 0; i < window; ++i)
        win[static_cast<std::size_t>(i)] = std::sin(M_PI * (i + 0.5) / window);

    Eigen::FFT<double> fft;
    fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
    std::vector<double> frame(static_cast<std::size_t>(window));
    std::vector<std::complex<double>> spectrum;

    Matrix power(bins, frames);
    for (Index n = 0; n < frames; ++n) {
        const std::size_t off = static_cast<std::size_t>(n) * static_cast<std::size_t>(hop);
        for (int i = 0; i < window; ++i)
            frame[static_cast<std::size_t>(i)] =
                samples[off + static_cast<std::size_t>(i)] * win[static_cast<std::size_t>(i)];
        fft.fwd(spectrum, frame);
        for (Index f = 0; f < bins; ++f) power(f, n) = std::norm(spectrum[static_cast<std::size_t>(f)]);
    }
    return power;
}

struct FrameMeta {
    std::uint32_t file_index = 0;
    std::uint64_t frame_index = 0;
};

struct SpectrogramDataset {
    Matrix frames;
    double sample_rate = 0.0;
    std::vector<FrameMeta> meta;
    std::uint64_t discarded_count = 0;
};

/// Drops every frame whose total power sits more than |threshold_db| dB below
/// the loudest frame of the dataset. Retained frames keep their order.
inline SpectrogramDataset discard_silence(const Matrix& spec, double threshold_db = -60.0,
                                          double sample_rate = 0.0,
                                          const std::vector<FrameMeta>* meta = nullptr) {
    const Index n = spec.cols();
    if (meta && static_cast<Index>(meta->size()) != n)
        throw ShapeMismatch("discard_silence: metadata length vs frame count");
    Vector power = spec.colwise().sum();
    const double pmax = n > 0 ? power.maxCoeff() : 0.0;
    if (!(pmax > 0.0)) throw AllSilent("discard_silence: every frame is silent");
    const double floor = pmax * std::pow(10.0, threshold_db / 10.0);

    std::vector<Index> keep;
    keep.reserve(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i)
        if (power[i] >= floor) keep.push_back(i);
    if (keep.empty()) throw AllSilent("discard_silence: every frame is silent");

    SpectrogramDataset ds;
    ds.sample_rate = sample_rate;
    ds.discarded_count = static_cast<std::uint64_t>(n - static_cast<Index>(keep.size()));
    ds.frames.resize(spec.rows(), static_cast<Index>(keep.size()));
    ds.meta.reserve(keep.size());
    for (std::size_t j = 0; j < keep.size(); ++j) {
        ds.frames.col(static_cast<Index>(j)) = spec.col(keep[j]);
        ds.meta.push_back(meta ? (*meta)[static_cast<std::size_t>(keep[j])]
                               : FrameMeta{0, static_cast<std::uint64_t>(keep[j])});
    }
    return ds;
}

/// Persists a dataset as the binary matrix plus a text sidecar
/// (`<path>.meta`): a header line with the sample rate and discarded count,
/// then one `file_index frame_index` line per retained frame.
inline void save_dataset(const std::string& path, const SpectrogramDataset& ds) {
    save_matrix(path, ds.frames);
    std::ofstream meta(path + ".meta");
    if (!meta) throw IoError("cannot open for writing: " + path + ".meta");
    meta << ds.sample_rate << ' ' << ds.discarded_count << "\n";
    for (const auto& m : ds.meta) meta << m.file_index << ' ' << m.frame_index << "\n";
    if (!meta) throw IoError("write failed: " + path + ".meta");
}

inline SpectrogramDataset load_dataset(const std::string& path) {
    SpectrogramDataset ds;
    ds.frames = load_matrix(path);
    std::ifstream meta(path + ".meta");
    if (meta) {
        meta >> ds.sample_rate >> ds.discarded_count;
        FrameMeta m;
        while (meta >> m.file_index >> m.frame_index) ds.meta.push_back(m);
    }
    return ds;
}

} // namespace isnmf
