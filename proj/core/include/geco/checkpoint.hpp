#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "geco/models.hpp"

namespace geco {

/// Pipeline stage that produced a checkpoint. Separator checkpoints carry a SeparatorArch,
/// the other two a ScoreArch and its bridge schedule.
enum class Stage : std::uint32_t { separator = 1, geco = 2, fastgeco = 3 };

const char* to_string(Stage s);

/// Little-endian binary layout:
///   "GECOCKPT" | u32 version | u32 stage | arch record | u64 n | n x f64 params
///   | u8 has_ema [| f64 decay | u64 n | n x f64 shadow] | u64 step
///   | u64 len | config text | u32 CRC-32 of everything before it
struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;

  Stage stage = Stage::separator;
  SeparatorArch separator_arch;
  ScoreArch score_arch;
  BridgeConfig bridge;
  std::vector<double> params;
  std::optional<EmaState> ema;
  std::uint64_t step = 0;
  std::string config_text;

  friend bool operator==(const Checkpoint& a, const Checkpoint& b);
};

Checkpoint make_checkpoint(const SeparatorModel& model, std::uint64_t step, std::string config_text);
Checkpoint make_checkpoint(Stage stage, const ScoreModel& model, std::optional<EmaState> ema, std::uint64_t step,
                           std::string config_text);

/// FormatError if the checkpoint holds a different kind of model.
SeparatorModel separator_from(const Checkpoint& ckpt);

/// Score model with the EMA shadow swapped in when present and `prefer_ema` is set.
ScoreModel score_model_from(const Checkpoint& ckpt, bool prefer_ema = true);

std::vector<unsigned char> encode_checkpoint(const Checkpoint& ckpt);

/// FormatError (with byte offset) on bad magic, unknown version or stage, truncation,
/// checksum mismatch, or a parameter count that disagrees with the arch.
Checkpoint decode_checkpoint(std::span<const unsigned char> bytes);

/// Atomic write (temp file + rename).
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace geco
