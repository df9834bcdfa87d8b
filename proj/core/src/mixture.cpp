#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>

#include "geco/audio.hpp"
#include "geco/errors.hpp"
#include "geco/rng.hpp"

namespace geco {

namespace {

constexpr std::uint64_t kExampleStream = 0xda7a5e7;
constexpr double kMaxMixturePeak = 0.9;

double mean_power(std::span<const double> x) {
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return acc / static_cast<double>(x.size());
}

}  // namespace

void Waveform::validate() const {
  if (sample_rate <= 0) throw ConfigError("waveform: sample rate must be positive");
  if (samples.empty()) throw ShapeError("waveform: no samples");
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (!std::isfinite(samples[i])) {
      throw NumericError("waveform: non-finite sample at index " + std::to_string(i));
    }
  }
}

void MixtureExample::validate() const {
  mixture.validate();
  noise.validate();
  if (sources.size() != 2) throw ShapeError("mixture example: expected 2 sources");
  for (const auto& s : sources) {
    s.validate();
    if (s.size() != mixture.size() || s.sample_rate != mixture.sample_rate) {
      throw ShapeError("mixture example " + id + ": source length or rate differs from mixture");
    }
  }
  if (noise.size() != mixture.size() || noise.sample_rate != mixture.sample_rate) {
    throw ShapeError("mixture example " + id + ": noise length or rate differs from mixture");
  }
  for (std::size_t i = 0; i < mixture.size(); ++i) {
    double rebuilt = noise.samples[i];
    for (const auto& s : sources) rebuilt += s.samples[i];
    if (std::abs(rebuilt - mixture.samples[i]) > 1e-6) {
      throw NumericError("mixture example " + id + ": reconstruction error at sample " +
                         std::to_string(i));
    }
  }
}

MixtureExample mix(const std::vector<Waveform>& sources, const Waveform& noise, double snr_db) {
  if (sources.empty()) throw ShapeError("mix: no sources");
  noise.validate();
  std::size_t length = sources.front().size();
  std::size_t longest = 0;
  for (const auto& s : sources) {
    s.validate();
    if (s.sample_rate != noise.sample_rate) throw ShapeError("mix: sample rates differ");
    length = std::min(length, s.size());
    longest = std::max(longest, s.size());
  }
  if (noise.size() < longest) throw ShapeError("mix: noise shorter than the longest source");

  MixtureExample ex;
  ex.snr_db = snr_db;
  const int sr = noise.sample_rate;
  for (const auto& s : sources) {
    ex.sources.push_back({{s.samples.begin(), s.samples.begin() + static_cast<std::ptrdiff_t>(length)}, sr});
  }
  std::vector<double> speech(length, 0.0);
  for (const auto& s : ex.sources) {
    for (std::size_t i = 0; i < length; ++i) speech[i] += s.samples[i];
  }
  std::vector<double> n(noise.samples.begin(), noise.samples.begin() + static_cast<std::ptrdiff_t>(length));
  const double p_speech = mean_power(speech);
  const double p_noise = mean_power(n);
  if (p_speech == 0.0) throw DegenerateInputError("mix: summed sources have zero power");
  if (p_noise == 0.0) throw DegenerateInputError("mix: noise has zero power");

  const double gain = std::sqrt(p_speech / (p_noise * std::pow(10.0, snr_db / 10.0)));
  for (double& v : n) v *= gain;
  ex.noise = {std::move(n), sr};
  ex.mixture = {std::move(speech), sr};
  for (std::size_t i = 0; i < length; ++i) ex.mixture.samples[i] += ex.noise.samples[i];
  return ex;
}

double achieved_snr_db(const MixtureExample& ex) {
  std::vector<double> speech(ex.mixture.size(), 0.0);
  for (const auto& s : ex.sources) {
    for (std::size_t i = 0; i < speech.size(); ++i) speech[i] += s.samples[i];
  }
  return 10.0 * std::log10(mean_power(speech) / mean_power(ex.noise.samples));
}

void DatasetConfig::validate() const {
  if (sample_rate <= 0) throw ConfigError("dataset: sample_rate must be positive");
  if (!(min_duration_s > 0.0 && max_duration_s >= min_duration_s)) {
    throw ConfigError("dataset: need 0 < min_duration_s <= max_duration_s");
  }
  if (!(snr_max_db >= snr_min_db)) throw ConfigError("dataset: need snr_min_db <= snr_max_db");
}

MixtureExample build_example(std::size_t index, const DatasetConfig& cfg, std::uint64_t seed) {
  const std::uint64_t example_seed = derive_seed(seed, kExampleStream, index);
  Rng rng(example_seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);

  constexpr SourceKind kKinds[] = {SourceKind::tonal, SourceKind::band_noise, SourceKind::chirp};
  const int first = static_cast<int>(rng() % 3);
  const int second = (first + 1 + static_cast<int>(rng() % 2)) % 3;
  const double span = cfg.max_duration_s - cfg.min_duration_s;
  const double d1 = cfg.min_duration_s + span * u01(rng);
  const double d2 = cfg.min_duration_s + span * u01(rng);
  const double snr = cfg.snr_min_db + (cfg.snr_max_db - cfg.snr_min_db) * u01(rng);

  std::vector<Waveform> sources{
      synth_source(kKinds[first], d1, cfg.sample_rate, derive_seed(example_seed, 1)),
      synth_source(kKinds[second], d2, cfg.sample_rate, derive_seed(example_seed, 2)),
  };
  const std::size_t longest = std::max(sources[0].size(), sources[1].size());
  const Waveform noise = synth_noise(longest, cfg.sample_rate, derive_seed(example_seed, 3));

  MixtureExample ex = mix(sources, noise, snr);
  // Common gain keeps the mixture inside the 16-bit range; SNR and source ratios are unchanged.
  double peak = 0.0;
  for (double v : ex.mixture.samples) peak = std::max(peak, std::abs(v));
  if (peak > kMaxMixturePeak) {
    const double g = kMaxMixturePeak / peak;
    for (Waveform* w : {&ex.mixture, &ex.noise, &ex.sources[0], &ex.sources[1]}) {
      for (double& v : w->samples) v *= g;
    }
  }
  char id[64];
  std::snprintf(id, sizeof id, "s%llu-%06zu", static_cast<unsigned long long>(seed), index);
  ex.id = id;
  return ex;
}

std::vector<MixtureExample> build_dataset(std::size_t n_examples, const DatasetConfig& cfg,
                                          std::uint64_t seed) {
  cfg.validate();
  if (n_examples < 1) throw ConfigError("build_dataset: need at least one example");
  std::vector<MixtureExample> out;
  out.reserve(n_examples);
  for (std::size_t i = 0; i < n_examples; ++i) out.push_back(build_example(i, cfg, seed));
  return out;
}

}  // namespace geco
