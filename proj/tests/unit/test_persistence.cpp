#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "geco/checkpoint.hpp"
#include "geco/config.hpp"
#include "geco/errors.hpp"

namespace {

namespace fs = std::filesystem;

geco::Checkpoint score_checkpoint() {
  auto m = geco::make_score_model({.hidden = 8, .blocks = 1, .frame = 4}, {.M = 7}, 3);
  auto ema = geco::ema_init(m.params, 0.99);
  for (double& v : ema.shadow) v *= 0.5;
  return geco::make_checkpoint(geco::Stage::geco, m, ema, 42, "[run]\nseed = 1\n");
}

TEST(Checkpoint, RoundTripsBitExactly) {
  const auto sep = geco::make_checkpoint(geco::make_separator({}, 1), 10, "cfg");
  EXPECT_EQ(geco::decode_checkpoint(geco::encode_checkpoint(sep)), sep);
  const auto score = score_checkpoint();
  const auto back = geco::decode_checkpoint(geco::encode_checkpoint(score));
  EXPECT_EQ(back, score);
  EXPECT_EQ(back.bridge.M, 7);
  EXPECT_EQ(geco::encode_checkpoint(back), geco::encode_checkpoint(score));

  const auto path = fs::temp_directory_path() / "geco_ckpt_test.bin";
  geco::save_checkpoint(score, path);
  EXPECT_EQ(geco::load_checkpoint(path), score);
  fs::remove(path);
}

TEST(Checkpoint, ModelExtraction) {
  const auto c = score_checkpoint();
  EXPECT_EQ(geco::score_model_from(c).params, c.ema->shadow);
  EXPECT_EQ(geco::score_model_from(c, false).params, c.params);
  EXPECT_THROW(geco::separator_from(c), geco::FormatError);
  const auto s = geco::make_checkpoint(geco::make_separator({}, 1), 0, "");
  EXPECT_THROW(geco::score_model_from(s), geco::FormatError);
  EXPECT_EQ(geco::separator_from(s).params, geco::make_separator({}, 1).params);
  EXPECT_THROW(geco::make_checkpoint(geco::Stage::separator, geco::score_model_from(c), {}, 0, ""), geco::ConfigError);
}

TEST(Checkpoint, CorruptionIsDetected) {
  const auto bytes = geco::encode_checkpoint(score_checkpoint());
  auto flipped = bytes;
  flipped[100] ^= 0x01;
  try {
    geco::decode_checkpoint(flipped);
    FAIL();
  } catch (const geco::FormatError& e) {
    EXPECT_EQ(e.byte_offset(), bytes.size() - 4);
  }
  auto magic = bytes;
  magic[0] = 'X';
  EXPECT_THROW(geco::decode_checkpoint(magic), geco::FormatError);
  auto version = bytes;
  version[8] = 9;
  try {
    geco::decode_checkpoint(version);
    FAIL();
  } catch (const geco::FormatError& e) {
    EXPECT_EQ(e.byte_offset(), 8u);
  }
  EXPECT_THROW(geco::decode_checkpoint(std::span(bytes).first(30)), geco::FormatError);
  EXPECT_THROW(geco::load_checkpoint("/nonexistent/ckpt.bin"), geco::IoError);
}

TEST(Checkpoint, ParamCountMustMatchArch) {
  auto c = score_checkpoint();
  c.params.pop_back();
  c.ema.reset();
  // Bypass make_checkpoint validation by editing the record directly.
  EXPECT_THROW(geco::decode_checkpoint(geco::encode_checkpoint(c)), geco::FormatError);
}

TEST(RunConfig, DefaultsRoundTripThroughIni) {
  const geco::RunConfig d;
  EXPECT_EQ(d.bridge, geco::BridgeConfig{});
  EXPECT_EQ(d.train_geco.ema_decay, 0.999);
  const auto text = geco::to_ini(d);
  EXPECT_NE(text.find("[bridge]\nc = 0.51\n"), std::string::npos);
  EXPECT_EQ(geco::to_ini(geco::parse_run_config(text)), text);
}

TEST(RunConfig, PrecedenceFlagOverFileOverDefault) {
  const auto file = geco::parse_run_config("[bridge]\nM = 12\nT_prime = 0.4\n[run]\nseed = 5\n");
  EXPECT_EQ(file.bridge.M, 12);
  EXPECT_EQ(file.bridge.T_prime, 0.4);
  EXPECT_EQ(file.bridge.c, 0.51);
  auto flagged = file;
  geco::set_config_value(flagged, "bridge.M", "3");
  EXPECT_EQ(flagged.bridge.M, 3);
  EXPECT_EQ(flagged.bridge.T_prime, 0.4);
  EXPECT_EQ(flagged.stage(flagged.train_sep).seed, 5u);
}

TEST(RunConfig, ErrorsAreConfigErrors) {
  EXPECT_THROW(geco::parse_run_config("[bridge]\nq = 1\n"), geco::ConfigError);
  EXPECT_THROW(geco::parse_run_config("[nope]\nx = 1\n"), geco::ConfigError);
  EXPECT_THROW(geco::parse_run_config("[bridge]\nM = twelve\n"), geco::ConfigError);
  EXPECT_THROW(geco::parse_run_config("[sampler]\nstochastic_init = maybe\n"), geco::ConfigError);
  EXPECT_THROW(geco::parse_run_config("[bridge\n"), geco::ConfigError);
  auto bad = geco::parse_run_config("[bridge]\nv = 1\n");
  EXPECT_THROW(bad.validate(), geco::ConfigError);
  EXPECT_THROW(geco::load_run_config("/nonexistent.ini"), geco::ConfigError);
  try {
    geco::parse_run_config("[train_geco]\nlr = -1\n").validate();
    FAIL();
  } catch (const geco::ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("[train_geco]"), std::string::npos);
  }
}

}  // namespace
