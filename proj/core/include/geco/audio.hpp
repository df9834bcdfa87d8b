#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace geco {

/// Mono real-valued signal. Nominal amplitude range is [-1, 1].
struct Waveform {
  std::vector<double> samples;
  int sample_rate = 8000;

  std::size_t size() const noexcept { return samples.size(); }

  /// Throws ShapeError when empty, NumericError on non-finite samples, ConfigError on a
  /// non-positive sample rate.
  void validate() const;

  friend bool operator==(const Waveform&, const Waveform&) = default;
};

/// One noisy two-source item: mixture = noise + sum(sources).
struct MixtureExample {
  Waveform mixture;
  std::vector<Waveform> sources;
  Waveform noise;
  double snr_db = 0.0;
  std::string id;

  /// Shared length and rate, K == 2, reconstruction error <= 1e-6.
  void validate() const;
};

enum class SourceKind { tonal, band_noise, chirp };

const char* to_string(SourceKind kind);
SourceKind source_kind_from_string(const std::string& name);

inline constexpr double kSourcePeak = 0.7;

/// Deterministic synthetic "speaker", peak-normalized to 0.7.
///   tonal       three random harmonics of a random fundamental under a slow envelope;
///               frequencies sit on the sample_rate/4096 grid
///   band_noise  white noise through two cascaded band-pass biquads at a random centre
///   chirp       linear frequency sweep between two random frequencies
Waveform synth_source(SourceKind kind, double duration_s, int sample_rate, std::uint64_t seed);

/// White Gaussian noise of the given length (unit variance before scaling).
Waveform synth_noise(std::size_t length, int sample_rate, std::uint64_t seed);

/// Min-length mixing at a target SNR measured against the summed sources.
///
/// Sources are truncated to the shortest source, the noise to the same length and then
/// rescaled so that 10 log10(P_speech / P_noise) = snr_db. Source levels are untouched.
MixtureExample mix(const std::vector<Waveform>& sources, const Waveform& noise, double snr_db);

/// Achieved 10 log10(P_speech / P_noise) of an example.
double achieved_snr_db(const MixtureExample& ex);

struct DatasetConfig {
  int sample_rate = 8000;
  double min_duration_s = 0.5;
  double max_duration_s = 1.0;
  double snr_min_db = -6.0;
  double snr_max_db = 3.0;

  void validate() const;
};

/// Deterministic synthetic dataset. Example i depends only on (seed, i).
/// Examples whose mixture peak exceeds 0.9 are scaled down as a whole (mixture, sources
/// and noise by one common gain) so they survive 16-bit storage without clipping.
std::vector<MixtureExample> build_dataset(std::size_t n_examples, const DatasetConfig& cfg,
                                          std::uint64_t seed);

/// Example `index` of build_dataset(..., seed) without building the others.
MixtureExample build_example(std::size_t index, const DatasetConfig& cfg, std::uint64_t seed);

}  // namespace geco
