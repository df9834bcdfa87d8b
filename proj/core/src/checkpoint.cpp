#include "geco/checkpoint.hpp"

#include <bit>
#include <boost/crc.hpp>
#include <cstring>
#include <fstream>
#include <iterator>

#include "geco/errors.hpp"
#include "geco/manifest.hpp"

namespace geco {

namespace {

constexpr char kMagic[8] = {'G', 'E', 'C', 'O', 'C', 'K', 'P', 'T'};

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<unsigned char>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<unsigned char>(v >> (8 * i)));
  }
  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void vec(const std::vector<double>& v) {
    u64(v.size());
    for (double x : v) f64(x);
  }
  std::vector<unsigned char>& data() { return out_; }

 private:
  std::vector<unsigned char> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const unsigned char> b) : b_(b) {}

  std::size_t offset() const { return pos_; }

  void need(std::size_t n, const char* what) const {
    if (b_.size() - pos_ < n) throw FormatError(std::string("checkpoint truncated while reading ") + what, pos_);
  }
  std::uint8_t u8(const char* what) {
    need(1, what);
    return b_[pos_++];
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64(const char* what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
  }
  std::int32_t i32(const char* what) { return static_cast<std::int32_t>(u32(what)); }
  double f64(const char* what) { return std::bit_cast<double>(u64(what)); }
  std::vector<double> vec(const char* what) {
    const std::size_t at = pos_;
    const std::uint64_t n = u64(what);
    if (n > (b_.size() - pos_) / 8) throw FormatError(std::string("checkpoint ") + what + " length exceeds file", at);
    std::vector<double> v(n);
    for (auto& x : v) x = f64(what);
    return v;
  }
  std::string text(const char* what) {
    const std::size_t at = pos_;
    const std::uint64_t n = u64(what);
    if (n > b_.size() - pos_) throw FormatError(std::string("checkpoint ") + what + " length exceeds file", at);
    std::string s(reinterpret_cast<const char*>(b_.data() + pos_), n);
    pos_ += n;
    return s;
  }

 private:
  std::span<const unsigned char> b_;
  std::size_t pos_ = 0;
};

std::uint32_t crc32(std::span<const unsigned char> bytes) {
  boost::crc_32_type crc;
  crc.process_bytes(bytes.data(), bytes.size());
  return crc.checksum();
}

bool is_score_stage(Stage s) { return s == Stage::geco || s == Stage::fastgeco; }

}  // namespace

const char* to_string(Stage s) {
  switch (s) {
    case Stage::separator: return "separator";
    case Stage::geco: return "geco";
    case Stage::fastgeco: return "fastgeco";
  }
  return "unknown";
}

bool operator==(const Checkpoint& a, const Checkpoint& b) {
  const bool ema_equal = a.ema.has_value() == b.ema.has_value() &&
                         (!a.ema || (a.ema->decay == b.ema->decay && a.ema->shadow == b.ema->shadow));
  return a.stage == b.stage && a.separator_arch == b.separator_arch && a.score_arch == b.score_arch &&
         a.bridge == b.bridge && a.params == b.params && ema_equal && a.step == b.step &&
         a.config_text == b.config_text;
}

Checkpoint make_checkpoint(const SeparatorModel& model, std::uint64_t step, std::string config_text) {
  validate(model);
  Checkpoint c;
  c.stage = Stage::separator;
  c.separator_arch = model.arch;
  c.params = model.params;
  c.step = step;
  c.config_text = std::move(config_text);
  return c;
}

Checkpoint make_checkpoint(Stage stage, const ScoreModel& model, std::optional<EmaState> ema, std::uint64_t step,
                           std::string config_text) {
  if (!is_score_stage(stage)) throw ConfigError("make_checkpoint: score models belong to the geco or fastgeco stage");
  validate(model);
  if (ema && ema->shadow.size() != model.params.size()) throw ShapeError("make_checkpoint: EMA length mismatch");
  Checkpoint c;
  c.stage = stage;
  c.score_arch = model.arch;
  c.bridge = model.bridge;
  c.params = model.params;
  c.ema = std::move(ema);
  c.step = step;
  c.config_text = std::move(config_text);
  return c;
}

SeparatorModel separator_from(const Checkpoint& ckpt) {
  if (ckpt.stage != Stage::separator) {
    throw FormatError(std::string("expected a separator checkpoint, found stage '") + to_string(ckpt.stage) + "'");
  }
  SeparatorModel m{ckpt.separator_arch, ckpt.params};
  validate(m);
  return m;
}

ScoreModel score_model_from(const Checkpoint& ckpt, bool prefer_ema) {
  if (!is_score_stage(ckpt.stage)) {
    throw FormatError(std::string("expected a score-model checkpoint, found stage '") + to_string(ckpt.stage) + "'");
  }
  ScoreModel m{ckpt.score_arch, ckpt.bridge, (prefer_ema && ckpt.ema) ? ckpt.ema->shadow : ckpt.params};
  validate(m);
  return m;
}

std::vector<unsigned char> encode_checkpoint(const Checkpoint& c) {
  Writer w;
  w.bytes(kMagic, sizeof kMagic);
  w.u32(Checkpoint::kVersion);
  w.u32(static_cast<std::uint32_t>(c.stage));
  if (c.stage == Stage::separator) {
    const auto& a = c.separator_arch;
    for (int v : {a.window, a.basis, a.hidden, a.blocks, a.sources}) w.i32(v);
  } else {
    const auto& a = c.score_arch;
    for (int v : {a.in_channels, a.time_embed_dim, a.hidden, a.blocks, a.frame}) w.i32(v);
    const auto& b = c.bridge;
    for (double v : {b.c, b.v, b.T, b.t_eps, b.T_prime}) w.f64(v);
    w.i32(b.M);
  }
  w.vec(c.params);
  w.u8(c.ema ? 1 : 0);
  if (c.ema) {
    w.f64(c.ema->decay);
    w.vec(c.ema->shadow);
  }
  w.u64(c.step);
  w.u64(c.config_text.size());
  w.bytes(c.config_text.data(), c.config_text.size());
  w.u32(crc32(w.data()));
  return std::move(w.data());
}

Checkpoint decode_checkpoint(std::span<const unsigned char> bytes) {
  Reader r(bytes);
  r.need(sizeof kMagic, "magic");
  if (std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) throw FormatError("not a geco checkpoint (bad magic)", 0);
  r = Reader(bytes);
  for (std::size_t i = 0; i < sizeof kMagic; ++i) r.u8("magic");

  const std::size_t version_at = r.offset();
  if (const auto version = r.u32("version"); version != Checkpoint::kVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version), version_at);
  }
  if (bytes.size() < 4) throw FormatError("checkpoint truncated", bytes.size());
  const std::size_t body = bytes.size() - 4;
  std::uint32_t stored = 0;
  for (int i = 0; i < 4; ++i) stored |= static_cast<std::uint32_t>(bytes[body + i]) << (8 * i);
  if (crc32(bytes.first(body)) != stored) throw FormatError("checkpoint checksum mismatch", body);

  Checkpoint c;
  const std::size_t stage_at = r.offset();
  const auto stage = r.u32("stage");
  if (stage < 1 || stage > 3) throw FormatError("unknown checkpoint stage " + std::to_string(stage), stage_at);
  c.stage = static_cast<Stage>(stage);
  if (c.stage == Stage::separator) {
    auto& a = c.separator_arch;
    for (int* v : {&a.window, &a.basis, &a.hidden, &a.blocks, &a.sources}) *v = r.i32("arch");
  } else {
    auto& a = c.score_arch;
    for (int* v : {&a.in_channels, &a.time_embed_dim, &a.hidden, &a.blocks, &a.frame}) *v = r.i32("arch");
    auto& b = c.bridge;
    for (double* v : {&b.c, &b.v, &b.T, &b.t_eps, &b.T_prime}) *v = r.f64("bridge");
    b.M = r.i32("bridge");
  }
  const std::size_t params_at = r.offset();
  c.params = r.vec("params");
  if (r.u8("ema flag")) {
    EmaState e;
    e.decay = r.f64("ema decay");
    e.shadow = r.vec("ema shadow");
    c.ema = std::move(e);
  }
  c.step = r.u64("step");
  c.config_text = r.text("config");
  if (r.offset() != body) throw FormatError("trailing bytes before checksum", r.offset());

  try {
    if (c.stage == Stage::separator) {
      separator_from(c);
    } else {
      score_model_from(c, false);
      if (c.ema && c.ema->shadow.size() != c.params.size()) throw ShapeError("EMA length differs from params");
    }
  } catch (const ConfigError& e) {
    throw FormatError(std::string("checkpoint arch invalid: ") + e.what(), stage_at);
  } catch (const ShapeError& e) {
    throw FormatError(std::string("checkpoint parameters do not match arch: ") + e.what(), params_at);
  } catch (const NumericError& e) {
    throw FormatError(std::string("checkpoint parameters invalid: ") + e.what(), params_at);
  }
  return c;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  atomic_write_bytes(path, encode_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace geco
