#include "geco/spectrogram.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "geco/errors.hpp"
#include "geco/manifest.hpp"

namespace geco {

Spectrogram log_magnitude_spectrogram(const Waveform& w) {
  w.validate();
  constexpr std::size_t N = kSpectrogramFrame;
  if (w.size() < N) {
    throw ShapeError("spectrogram: signal of " + std::to_string(w.size()) +
                     " samples is shorter than one frame");
  }
  Spectrogram spec;
  spec.bins = N / 2 + 1;
  spec.frames = (w.size() - N) / kSpectrogramHop + 1;
  spec.sample_rate = w.sample_rate;
  spec.values.assign(spec.bins, std::vector<double>(spec.frames));

  std::vector<double> window(N), cos_table(N), sin_table(N);
  for (std::size_t n = 0; n < N; ++n) {
    const double phase = 2.0 * std::numbers::pi * static_cast<double>(n) / N;
    window[n] = 0.5 - 0.5 * std::cos(phase);
    cos_table[n] = std::cos(phase);
    sin_table[n] = std::sin(phase);
  }

  const double floor_mag = std::pow(10.0, kSpectrogramFloorDb / 20.0);
  std::vector<double> frame(N);
  for (std::size_t f = 0; f < spec.frames; ++f) {
    const std::size_t start = f * kSpectrogramHop;
    for (std::size_t n = 0; n < N; ++n) frame[n] = window[n] * w.samples[start + n];
    for (std::size_t k = 0; k < spec.bins; ++k) {
      double re = 0.0, im = 0.0;
      for (std::size_t n = 0; n < N; ++n) {
        const std::size_t idx = (k * n) % N;
        re += frame[n] * cos_table[idx];
        im -= frame[n] * sin_table[idx];
      }
      const double mag = std::sqrt(re * re + im * im);
      spec.values[k][f] = 20.0 * std::log10(std::max(mag, floor_mag));
    }
  }
  return spec;
}

void spectrogram_export(const Waveform& w, const std::filesystem::path& path) {
  const Spectrogram spec = log_magnitude_spectrogram(w);
  std::ostringstream out;
  out.precision(10);
  out << "# bins=" << spec.bins << " frames=" << spec.frames << " frame=" << kSpectrogramFrame
      << " hop=" << kSpectrogramHop << " sample_rate=" << spec.sample_rate << " unit=dB\n";
  for (const auto& row : spec.values) {
    for (std::size_t f = 0; f < row.size(); ++f) {
      if (f) out << ',';
      out << row[f];
    }
    out << '\n';
  }
  atomic_write_text(path, out.str());
}

}  // namespace geco
