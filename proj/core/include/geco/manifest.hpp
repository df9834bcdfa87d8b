#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "geco/audio.hpp"

namespace geco {

/// One line of a dataset manifest (JSON lines).
struct ManifestRow {
  std::string id;
  std::filesystem::path mixture;
  std::vector<std::filesystem::path> sources;
  std::filesystem::path noise;
  double snr_db = 0.0;
};

/// Writes mixture/sources/noise WAVs for an example under `dir` and returns its row.
/// Paths in the row are relative to `dir`.
ManifestRow write_example(const MixtureExample& ex, const std::filesystem::path& dir);

void write_manifest(const std::filesystem::path& path, const std::vector<ManifestRow>& rows);
std::vector<ManifestRow> read_manifest(const std::filesystem::path& path);

/// Loads the WAVs named by a row; relative paths resolve against `base_dir`.
MixtureExample load_example(const ManifestRow& row, const std::filesystem::path& base_dir);

/// Writes `contents` to a temporary sibling of `path` and renames it into place.
void atomic_write_text(const std::filesystem::path& path, const std::string& contents);
void atomic_write_bytes(const std::filesystem::path& path, const std::vector<unsigned char>& bytes);

}  // namespace geco
