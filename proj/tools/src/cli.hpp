#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "geco/audio.hpp"
#include "geco/config.hpp"
#include "geco/models.hpp"
#include "geco/sampler.hpp"

namespace geco::cli {

/// Exit codes of the geco tool.
enum ExitCode : int { kOk = 0, kFailure = 1, kConfig = 2, kOrdering = 3, kNumeric = 4 };

/// Runs one invocation (argv without the program name). Errors are reported on `err`
/// and mapped to exit codes; nothing escapes.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

enum class Mode { sep_only, geco, geco_1step, fastgeco, oracle };

const char* to_string(Mode m);
Mode mode_from_string(const std::string& name);  ///< ConfigError on unknown names

/// Checkpoint file names inside a run directory.
inline constexpr const char* kSeparatorFile = "separator.ckpt";
inline constexpr const char* kGecoFile = "geco.ckpt";
inline constexpr const char* kFastGecoFile = "fastgeco.ckpt";

/// Models needed by a separation mode, loaded from a run directory. OrderingError names
/// the missing stage.
struct Pipeline {
  Mode mode = Mode::sep_only;
  SeparatorModel separator;
  std::optional<ScoreModel> score;
  ReverseOptions sampler;
  int sample_rate = 8000;
};

Pipeline load_pipeline(const std::filesystem::path& checkpoint_dir, Mode mode, const RunConfig& cfg);

struct Separation {
  std::vector<std::vector<double>> estimates;  ///< one per speaker, separator output order
  std::size_t score_evaluations = 0;           ///< score-model calls across all speakers
};

/// Separates one mixture. Corrector noise seeds derive from (seed, speaker).
Separation separate(const Pipeline& p, std::span<const double> mixture, std::uint64_t seed);

struct EvalRow {
  std::string id;
  std::vector<int> permutation;
  std::vector<double> sisnr;
  std::vector<double> sisnri;
};

struct EvalSummary {
  std::vector<EvalRow> rows;
  double mean_sisnri = 0.0, std_sisnri = 0.0;  ///< over all (example, speaker) pairs
  double mean_sisnr = 0.0, std_sisnr = 0.0;
  std::size_t score_evaluations = 0;
};

/// uPIT-resolved SI-SNR / SI-SNRi per example. The oracle mode returns the references
/// themselves as estimates.
EvalSummary evaluate(const Pipeline& p, std::span<const MixtureExample> data, std::span<const std::string> ids,
                     std::uint64_t seed);

void write_eval_csv(const EvalSummary& s, Mode mode, const std::string& config_text,
                    const std::filesystem::path& path);

}  // namespace geco::cli
