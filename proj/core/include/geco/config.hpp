#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "geco/audio.hpp"
#include "geco/bridge.hpp"
#include "geco/sampler.hpp"
#include "geco/training.hpp"

namespace geco {

/// Everything a run needs, resolved from defaults, an INI file, and overrides (in that
/// order of increasing precedence).
///
///   [run]        seed
///   [bridge]     c v T t_eps T_prime M
///   [dataset]    size sample_rate min_duration_s max_duration_s snr_min_db snr_max_db
///   [train_sep]  lr epochs batch_size ema_decay grad_clip validate_every
///   [train_geco] (same keys)
///   [finetune]   (same keys) fresh_noise
///   [sampler]    deterministic_final stochastic_init
struct RunConfig {
  std::uint64_t seed = 0;
  BridgeConfig bridge;
  DatasetConfig dataset;
  std::size_t dataset_size = 100;
  TrainConfig train_sep;
  TrainConfig train_geco;
  TrainConfig finetune;
  FinetuneConfig finetune_options;
  ReverseOptions sampler;

  /// ConfigError naming the first invalid section.
  void validate() const;

  /// Stage configs carry the run seed.
  TrainConfig stage(const TrainConfig& base) const;
};

/// All recognised "section.key" names, in serialisation order.
const std::vector<std::string>& config_keys();

/// Sets one key. ConfigError for an unknown key or an unparsable value.
void set_config_value(RunConfig& cfg, const std::string& dotted_key, const std::string& value);
std::string get_config_value(const RunConfig& cfg, const std::string& dotted_key);

/// Applies an INI document on top of `base`. Unknown sections or keys are errors.
RunConfig parse_run_config(const std::string& ini_text, RunConfig base = {});
RunConfig load_run_config(const std::filesystem::path& path, RunConfig base = {});

/// Canonical INI text of every key; parsing it reproduces `cfg` exactly.
std::string to_ini(const RunConfig& cfg);

}  // namespace geco
