#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "geco/audio.hpp"
#include "geco/errors.hpp"
#include "geco/rng.hpp"

namespace geco {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr int kToneGrid = 4096;

void peak_normalize(std::vector<double>& x) {
  double peak = 0.0;
  for (double v : x) peak = std::max(peak, std::abs(v));
  if (peak == 0.0) return;
  const double scale = kSourcePeak / peak;
  for (double& v : x) v *= scale;
}

// RBJ cookbook band-pass (0 dB peak gain), transposed direct form II.
struct Biquad {
  double b0, b1, b2, a1, a2;
  double z1 = 0.0, z2 = 0.0;

  static Biquad bandpass(double centre_hz, double q, int sample_rate) {
    const double w0 = kTwoPi * centre_hz / sample_rate;
    const double alpha = std::sin(w0) / (2.0 * q);
    const double a0 = 1.0 + alpha;
    return {alpha / a0, 0.0, -alpha / a0, -2.0 * std::cos(w0) / a0, (1.0 - alpha) / a0};
  }

  double operator()(double x) {
    const double y = b0 * x + z1;
    z1 = b1 * x - a1 * y + z2;
    z2 = b2 * x - a2 * y;
    return y;
  }
};

std::vector<double> tonal(std::size_t n, int sr, Rng& rng) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const double grid = static_cast<double>(sr) / kToneGrid;
  const double f0 = std::round((110.0 + 220.0 * u01(rng)) / grid) * grid;

  std::vector<int> harmonics{1, 2, 3, 4, 5};
  std::shuffle(harmonics.begin(), harmonics.end(), rng);
  harmonics.resize(3);

  double amp[3], phase[3];
  for (int k = 0; k < 3; ++k) {
    amp[k] = 0.3 + 0.7 * u01(rng);
    phase[k] = kTwoPi * u01(rng);
  }
  const double env_hz = 0.2 + 0.3 * u01(rng);
  const double env_phase = kTwoPi * u01(rng);

  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / sr;
    const double env = 1.0 + 0.2 * std::sin(kTwoPi * env_hz * t + env_phase);
    double s = 0.0;
    for (int k = 0; k < 3; ++k) s += amp[k] * std::sin(kTwoPi * harmonics[k] * f0 * t + phase[k]);
    x[i] = env * s;
  }
  return x;
}

std::vector<double> band_noise(std::size_t n, int sr, Rng& rng) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const double nyquist = 0.5 * sr;
  const double lo = std::min(400.0, 0.1 * nyquist), hi = std::min(2500.0, 0.6 * nyquist);
  const double centre = lo * std::pow(hi / lo, u01(rng));
  const double q = 2.0 + 3.0 * u01(rng);
  Biquad first = Biquad::bandpass(centre, q, sr);
  Biquad second = first;
  std::normal_distribution<double> nd;
  std::vector<double> x(n);
  for (auto& v : x) v = second(first(nd(rng)));
  return x;
}

std::vector<double> chirp(std::size_t n, int sr, Rng& rng) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const double nyquist = 0.5 * sr;
  const double lo = std::min(150.0, 0.05 * nyquist), hi = std::min(1500.0, 0.5 * nyquist);
  const double f_start = lo + (hi - lo) * u01(rng);
  double f_end = lo + (hi - lo) * u01(rng);
  if (std::abs(f_end - f_start) < 0.1 * (hi - lo)) f_end = lo + hi - f_start;
  const double phase0 = kTwoPi * u01(rng);
  const double duration = static_cast<double>(n) / sr;
  const double fade = std::min(0.01, 0.25 * duration);

  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / sr;
    const double phase = kTwoPi * (f_start * t + 0.5 * (f_end - f_start) * t * t / duration);
    double gain = 1.0;
    if (fade > 0.0) {
      const double edge = std::min(t, duration - t) / fade;
      if (edge < 1.0) gain = 0.5 - 0.5 * std::cos(std::numbers::pi * std::max(edge, 0.0));
    }
    x[i] = gain * std::sin(phase + phase0);
  }
  return x;
}

}  // namespace

const char* to_string(SourceKind kind) {
  switch (kind) {
    case SourceKind::tonal: return "tonal";
    case SourceKind::band_noise: return "band_noise";
    case SourceKind::chirp: return "chirp";
  }
  return "unknown";
}

SourceKind source_kind_from_string(const std::string& name) {
  if (name == "tonal") return SourceKind::tonal;
  if (name == "band_noise") return SourceKind::band_noise;
  if (name == "chirp") return SourceKind::chirp;
  throw ConfigError("unknown source kind '" + name + "'");
}

Waveform synth_source(SourceKind kind, double duration_s, int sample_rate, std::uint64_t seed) {
  if (!(duration_s > 0.0)) throw DomainError("synth_source: duration must be positive");
  if (sample_rate <= 0) throw ConfigError("synth_source: sample rate must be positive");
  const auto n = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(duration_s * sample_rate)));
  Rng rng(seed);
  Waveform w;
  w.sample_rate = sample_rate;
  switch (kind) {
    case SourceKind::tonal: w.samples = tonal(n, sample_rate, rng); break;
    case SourceKind::band_noise: w.samples = band_noise(n, sample_rate, rng); break;
    case SourceKind::chirp: w.samples = chirp(n, sample_rate, rng); break;
  }
  peak_normalize(w.samples);
  return w;
}

Waveform synth_noise(std::size_t length, int sample_rate, std::uint64_t seed) {
  Waveform w;
  w.sample_rate = sample_rate;
  w.samples = standard_normal(seed, length);
  return w;
}

}  // namespace geco
