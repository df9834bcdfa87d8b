#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "geco/audio.hpp"

namespace geco {

/// Reads a RIFF/WAVE PCM 16-bit mono file. Samples are q / 32768.
/// Throws FormatError (with byte offset) on malformed or unsupported content and
/// IoError when the file cannot be opened.
Waveform read_wav(const std::filesystem::path& path);

/// Writes PCM 16-bit mono. Samples are quantized as round(x * 32768) clamped to the int16
/// range, so +1.0 is stored as 32767. The file is written to a temporary sibling and
/// renamed into place.
void write_wav(const std::filesystem::path& path, const Waveform& w);

/// In-memory variants of the codec.
Waveform decode_wav(std::span<const unsigned char> bytes);
std::vector<unsigned char> encode_wav(const Waveform& w);

}  // namespace geco
