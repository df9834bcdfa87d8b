#include "geco/manifest.hpp"

#include <fstream>
#include <json.hpp>
#include <sstream>

#include "geco/errors.hpp"
#include "geco/wav.hpp"

namespace geco {

namespace fs = std::filesystem;

namespace {

fs::path temp_sibling(const fs::path& path) {
  fs::path tmp = path;
  tmp += ".tmp";
  return tmp;
}

template <class Bytes>
void atomic_write(const fs::path& path, const Bytes& bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = temp_sibling(path);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("short write to " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

fs::path resolve(const fs::path& p, const fs::path& base) { return p.is_absolute() ? p : base / p; }

}  // namespace

void atomic_write_text(const fs::path& path, const std::string& contents) { atomic_write(path, contents); }

void atomic_write_bytes(const fs::path& path, const std::vector<unsigned char>& bytes) {
  atomic_write(path, bytes);
}

ManifestRow write_example(const MixtureExample& ex, const fs::path& dir) {
  ManifestRow row;
  row.id = ex.id;
  row.snr_db = ex.snr_db;
  row.mixture = fs::path("wav") / (ex.id + "_mix.wav");
  write_wav(dir / row.mixture, ex.mixture);
  for (std::size_t k = 0; k < ex.sources.size(); ++k) {
    row.sources.push_back(fs::path("wav") / (ex.id + "_s" + std::to_string(k + 1) + ".wav"));
    write_wav(dir / row.sources.back(), ex.sources[k]);
  }
  row.noise = fs::path("wav") / (ex.id + "_noise.wav");
  write_wav(dir / row.noise, ex.noise);
  return row;
}

void write_manifest(const fs::path& path, const std::vector<ManifestRow>& rows) {
  std::ostringstream out;
  for (const auto& r : rows) {
    nlohmann::json j;
    j["id"] = r.id;
    j["mixture"] = r.mixture.generic_string();
    j["sources"] = nlohmann::json::array();
    for (const auto& s : r.sources) j["sources"].push_back(s.generic_string());
    j["noise"] = r.noise.generic_string();
    j["snr_db"] = r.snr_db;
    out << j.dump() << '\n';
  }
  atomic_write_text(path, out.str());
}

std::vector<ManifestRow> read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  std::vector<ManifestRow> rows;
  std::string line;
  std::size_t line_no = 0;
  std::size_t offset = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t line_start = offset;
    offset += line.size() + 1;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      ManifestRow r;
      r.id = j.at("id").get<std::string>();
      r.mixture = j.at("mixture").get<std::string>();
      for (const auto& s : j.at("sources")) r.sources.emplace_back(s.get<std::string>());
      r.noise = j.at("noise").get<std::string>();
      r.snr_db = j.at("snr_db").get<double>();
      rows.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(path.string() + " line " + std::to_string(line_no) + ": " + e.what(),
                        line_start);
    }
  }
  return rows;
}

MixtureExample load_example(const ManifestRow& row, const fs::path& base_dir) {
  MixtureExample ex;
  ex.id = row.id;
  ex.snr_db = row.snr_db;
  ex.mixture = read_wav(resolve(row.mixture, base_dir));
  for (const auto& s : row.sources) ex.sources.push_back(read_wav(resolve(s, base_dir)));
  ex.noise = read_wav(resolve(row.noise, base_dir));
  return ex;
}

}  // namespace geco
