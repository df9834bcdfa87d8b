#pragma once

#include <filesystem>
#include <vector>

#include "geco/audio.hpp"

namespace geco {

inline constexpr std::size_t kSpectrogramFrame = 256;
inline constexpr std::size_t kSpectrogramHop = 64;
inline constexpr double kSpectrogramFloorDb = -200.0;  ///< 20 log10(1e-10)

/// Log-magnitude spectrogram in dB. values[bin][frame], bins = frame/2 + 1.
struct Spectrogram {
  std::size_t bins = 0;
  std::size_t frames = 0;
  int sample_rate = 0;
  std::vector<std::vector<double>> values;
};

/// Hann-windowed 256-sample frames with hop 64; frames = floor((N - 256)/64) + 1.
/// Throws ShapeError for signals shorter than one frame.
Spectrogram log_magnitude_spectrogram(const Waveform& w);

/// CSV export: a '#' header line carrying the dimensions, then one row per frequency bin.
void spectrogram_export(const Waveform& w, const std::filesystem::path& path);

}  // namespace geco
