#include "cli.hpp"

#include <CLI11.hpp>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <json.hpp>
#include <sstream>

#include "geco/checkpoint.hpp"
#include "geco/errors.hpp"
#include "geco/manifest.hpp"
#include "geco/metrics.hpp"
#include "geco/rng.hpp"
#include "geco/spectrogram.hpp"
#include "geco/training.hpp"
#include "geco/wav.hpp"

namespace geco::cli {

namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kEvalTag = 0xe7a1;

struct Globals {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> overrides;
  std::string out;
  bool force = false;
};

RunConfig resolve_config(const Globals& g) {
  RunConfig cfg;
  if (!g.config_path.empty()) cfg = load_run_config(g.config_path);
  for (const auto& kv : g.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects section.key=value, got '" + kv + "'");
    set_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (g.seed) cfg.seed = *g.seed;
  cfg.validate();
  return cfg;
}

fs::path require_out(const Globals& g, const char* cmd) {
  if (g.out.empty()) throw ConfigError(std::string(cmd) + ": --out is required");
  return g.out;
}

void refuse_overwrite(const fs::path& p, bool force) {
  if (fs::exists(p) && !force) throw IoError(p.string() + " exists; pass --force to overwrite");
}

std::vector<MixtureExample> load_manifest_examples(const fs::path& manifest, std::vector<std::string>* ids = nullptr) {
  const auto rows = read_manifest(manifest);
  std::vector<MixtureExample> out;
  for (const auto& r : rows) {
    out.push_back(load_example(r, manifest.parent_path()));
    if (ids) ids->push_back(r.id);
  }
  if (out.empty()) throw ShapeError("manifest " + manifest.string() + " has no rows");
  return out;
}

Checkpoint require_stage(const fs::path& dir, const char* file, Stage stage, const char* needed_by) {
  const fs::path p = dir / file;
  if (!fs::exists(p)) {
    std::ostringstream msg;
    msg << needed_by << " requires the '" << to_string(stage) << "' stage checkpoint " << p.string();
    switch (stage) {
      case Stage::separator: msg << " (run train-sep first)"; break;
      case Stage::geco: msg << " (run train-geco first)"; break;
      case Stage::fastgeco: msg << " (run finetune first)"; break;
    }
    throw OrderingError(msg.str());
  }
  auto ckpt = load_checkpoint(p);
  if (ckpt.stage != stage) {
    throw FormatError(p.string() + " holds a '" + to_string(ckpt.stage) + "' checkpoint, expected '" +
                      to_string(stage) + "'");
  }
  return ckpt;
}

void write_report(const fs::path& path, const TrainReport& r, const std::string& config_text) {
  std::ostringstream out;
  for (std::size_t e = 0; e < r.epoch_loss.size(); ++e) {
    nlohmann::json line{{"epoch", e + 1}, {"loss", r.epoch_loss[e]}};
    if (std::isnan(r.validation[e])) {
      line[r.validation_metric] = nullptr;
    } else {
      line[r.validation_metric] = r.validation[e];
    }
    out << line.dump() << '\n';
  }
  nlohmann::json summary{{"summary", true},         {"best_epoch", r.best_epoch + 1},
                         {"steps", r.steps},         {"wall_seconds", r.wall_seconds},
                         {"checkpoint", r.checkpoint}, {"config", config_text}};
  out << summary.dump() << '\n';
  atomic_write_text(path, out.str());
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double std_of(const std::vector<double>& v, double mean) {
  if (v.size() < 2) return 0.0;
  double s = 0.0;
  for (double x : v) s += (x - mean) * (x - mean);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

// ---------------------------------------------------------------------------------------

void cmd_simulate(const Globals& g, std::optional<std::size_t> n, std::ostream& out) {
  RunConfig cfg = resolve_config(g);
  if (n) cfg.dataset_size = *n;
  const fs::path dir = require_out(g, "simulate");
  fs::create_directories(dir);
  std::vector<ManifestRow> rows;
  for (std::size_t i = 0; i < cfg.dataset_size; ++i) {
    rows.push_back(write_example(build_example(i, cfg.dataset, cfg.seed), dir));
  }
  write_manifest(dir / "manifest.jsonl", rows);
  atomic_write_text(dir / "config.ini", to_ini(cfg));
  out << "wrote " << rows.size() << " examples to " << (dir / "manifest.jsonl").string() << '\n';
}

void cmd_train_sep(const Globals& g, const std::string& data, const std::string& valid, std::ostream& out) {
  const RunConfig cfg = resolve_config(g);
  const fs::path dir = require_out(g, "train-sep");
  const fs::path ckpt_path = dir / kSeparatorFile;
  refuse_overwrite(ckpt_path, g.force);
  const auto train = load_manifest_examples(data);
  const auto val = valid.empty() ? std::vector<MixtureExample>{} : load_manifest_examples(valid);
  auto result = train_separator(train, make_separator({}, cfg.seed), cfg.stage(cfg.train_sep), val);
  fs::create_directories(dir);
  const std::string text = to_ini(cfg);
  save_checkpoint(make_checkpoint(result.model, result.report.steps, text), ckpt_path);
  result.report.checkpoint = ckpt_path.string();
  write_report(dir / "separator_report.jsonl", result.report, text);
  out << "separator: " << result.report.steps << " steps, best validation SI-SNRi "
      << result.report.validation[static_cast<std::size_t>(result.report.best_epoch)] << " dB -> "
      << ckpt_path.string() << '\n';
}

void cmd_train_geco(const Globals& g, const std::string& data, const std::string& valid, const std::string& ckpts,
                    std::ostream& out) {
  const RunConfig cfg = resolve_config(g);
  const fs::path dir = require_out(g, "train-geco");
  const fs::path from = ckpts.empty() ? dir : fs::path(ckpts);
  const auto separator = separator_from(require_stage(from, kSeparatorFile, Stage::separator, "train-geco"));
  const fs::path ckpt_path = dir / kGecoFile;
  refuse_overwrite(ckpt_path, g.force);
  const auto train = load_manifest_examples(data);
  const auto val = valid.empty() ? std::vector<MixtureExample>{} : load_manifest_examples(valid);
  const std::uint64_t init_seed = derive_seed(cfg.seed, 0x9ec0);
  auto result = train_geco(train, make_score_model({}, cfg.bridge, init_seed), separator, cfg.stage(cfg.train_geco), val);
  fs::create_directories(dir);
  const std::string text = to_ini(cfg);
  save_checkpoint(make_checkpoint(Stage::geco, result.model, result.ema, result.report.steps, text), ckpt_path);
  result.report.checkpoint = ckpt_path.string();
  write_report(dir / "geco_report.jsonl", result.report, text);
  out << "geco: " << result.report.steps << " steps, final DSM loss " << result.report.epoch_loss.back() << " -> "
      << ckpt_path.string() << '\n';
}

void cmd_finetune(const Globals& g, const std::string& data, const std::string& valid, const std::string& ckpts,
                  std::ostream& out) {
  const RunConfig cfg = resolve_config(g);
  const fs::path dir = require_out(g, "finetune");
  const fs::path from = ckpts.empty() ? dir : fs::path(ckpts);
  const auto separator = separator_from(require_stage(from, kSeparatorFile, Stage::separator, "finetune"));
  const auto geco_model = score_model_from(require_stage(from, kGecoFile, Stage::geco, "finetune"));
  const fs::path ckpt_path = dir / kFastGecoFile;
  refuse_overwrite(ckpt_path, g.force);
  const auto train = load_manifest_examples(data);
  const auto val = valid.empty() ? std::vector<MixtureExample>{} : load_manifest_examples(valid);
  auto result = finetune_fastgeco(train, geco_model, separator, cfg.stage(cfg.finetune), val, cfg.finetune_options);
  fs::create_directories(dir);
  const std::string text = to_ini(cfg);
  save_checkpoint(make_checkpoint(Stage::fastgeco, result.model, std::nullopt, result.report.steps, text), ckpt_path);
  result.report.checkpoint = ckpt_path.string();
  write_report(dir / "fastgeco_report.jsonl", result.report, text);
  out << "fastgeco: " << result.report.steps << " steps, best validation SI-SNRi "
      << result.report.validation[static_cast<std::size_t>(result.report.best_epoch)] << " dB -> "
      << ckpt_path.string() << '\n';
}

void cmd_separate(const Globals& g, const std::string& mixture, const std::string& ckpts, const std::string& mode_name,
                  std::ostream& out) {
  const RunConfig cfg = resolve_config(g);
  const Mode mode = mode_from_string(mode_name);
  if (mode == Mode::oracle) throw ConfigError("separate: the oracle mode needs references; use eval");
  const fs::path dir = require_out(g, "separate");
  const Pipeline p = load_pipeline(ckpts, mode, cfg);
  const Waveform y = read_wav(mixture);
  if (y.sample_rate != p.sample_rate) {
    throw FormatError(mixture + ": sample rate " + std::to_string(y.sample_rate) + " Hz, models were trained at " +
                      std::to_string(p.sample_rate) + " Hz");
  }
  const auto start = std::chrono::steady_clock::now();
  const Separation s = separate(p, y.samples, cfg.seed);
  const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  fs::create_directories(dir);
  const std::string stem = fs::path(mixture).stem().string();
  for (std::size_t k = 0; k < s.estimates.size(); ++k) {
    const fs::path path = dir / (stem + "_s" + std::to_string(k + 1) + ".wav");
    refuse_overwrite(path, g.force);
    write_wav(path, Waveform{s.estimates[k], y.sample_rate});
    out << path.string() << '\n';
  }
  out << "mode=" << to_string(mode) << " score_evaluations=" << s.score_evaluations << " seconds=" << elapsed << '\n';
}

void cmd_eval(const Globals& g, const std::string& manifest, const std::string& ckpts, const std::string& mode_name,
              std::ostream& out) {
  const RunConfig cfg = resolve_config(g);
  const Mode mode = mode_from_string(mode_name);
  const fs::path path = require_out(g, "eval");
  refuse_overwrite(path, g.force);
  const Pipeline p = load_pipeline(ckpts, mode, cfg);
  std::vector<std::string> ids;
  const auto data = load_manifest_examples(manifest, &ids);
  const EvalSummary s = evaluate(p, data, ids, cfg.seed);
  if (!path.parent_path().empty()) fs::create_directories(path.parent_path());
  write_eval_csv(s, mode, to_ini(cfg), path);
  out << std::fixed << std::setprecision(3) << "mode=" << to_string(mode) << " SI-SNRi " << s.mean_sisnri << " +/- "
      << s.std_sisnri << " dB over " << s.rows.size() << " examples -> " << path.string() << '\n';
}

void cmd_spectrogram(const Globals& g, const std::string& wav, std::ostream& out) {
  const fs::path path = require_out(g, "spectrogram");
  refuse_overwrite(path, g.force);
  spectrogram_export(read_wav(wav), path);
  out << path.string() << '\n';
}

}  // namespace

// ---------------------------------------------------------------------------------------

const char* to_string(Mode m) {
  switch (m) {
    case Mode::sep_only: return "sep_only";
    case Mode::geco: return "geco";
    case Mode::geco_1step: return "geco_1step";
    case Mode::fastgeco: return "fastgeco";
    case Mode::oracle: return "oracle";
  }
  return "unknown";
}

Mode mode_from_string(const std::string& name) {
  for (Mode m : {Mode::sep_only, Mode::geco, Mode::geco_1step, Mode::fastgeco, Mode::oracle}) {
    if (name == to_string(m)) return m;
  }
  throw ConfigError("unknown mode '" + name + "' (sep_only, geco, geco_1step, fastgeco)");
}

Pipeline load_pipeline(const fs::path& dir, Mode mode, const RunConfig& cfg) {
  Pipeline p;
  p.mode = mode;
  p.sampler = cfg.sampler;
  const char* who = "separation";
  const Checkpoint sep = require_stage(dir, kSeparatorFile, Stage::separator, who);
  p.separator = separator_from(sep);
  p.sample_rate = parse_run_config(sep.config_text).dataset.sample_rate;
  if (mode == Mode::geco || mode == Mode::geco_1step) {
    p.score = score_model_from(require_stage(dir, kGecoFile, Stage::geco, who));
    p.score->bridge.M = mode == Mode::geco ? cfg.bridge.M : 1;
  } else if (mode == Mode::fastgeco) {
    p.score = score_model_from(require_stage(dir, kFastGecoFile, Stage::fastgeco, who));
    p.score->bridge.M = 1;
  }
  return p;
}

Separation separate(const Pipeline& p, std::span<const double> mixture, std::uint64_t seed) {
  Separation s;
  s.estimates = separator_forward(p.separator, mixture);
  if (p.mode == Mode::sep_only || p.mode == Mode::oracle) return s;

  const ScoreModel& model = *p.score;
  const ScoreFn inner = model_score_fn(model);
  const ScoreFn counted = [&](std::span<const double> x, std::span<const double> sh, std::span<const double> y,
                              double t) {
    ++s.score_evaluations;
    return inner(x, sh, y, t);
  };
  for (std::size_t k = 0; k < s.estimates.size(); ++k) {
    const std::uint64_t sk = derive_seed(seed, k);
    if (p.mode == Mode::fastgeco) {
      s.estimates[k] = one_step_fastgeco(s.estimates[k], mixture, counted, model.bridge, sk, p.sampler);
    } else {
      s.estimates[k] = reverse_geco(s.estimates[k], mixture, counted, model.bridge, sk, false, p.sampler).x0;
    }
  }
  return s;
}

EvalSummary evaluate(const Pipeline& p, std::span<const MixtureExample> data, std::span<const std::string> ids,
                     std::uint64_t seed) {
  if (data.empty()) throw ShapeError("evaluate: no examples");
  EvalSummary out;
  std::vector<double> all_i, all_s;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& ex = data[i];
    std::vector<std::vector<double>> refs;
    for (const auto& s : ex.sources) refs.push_back(s.samples);
    std::vector<std::vector<double>> est;
    if (p.mode == Mode::oracle) {
      est = refs;
    } else {
      Separation sep = separate(p, ex.mixture.samples, derive_seed(seed, kEvalTag, i));
      out.score_evaluations += sep.score_evaluations;
      est = std::move(sep.estimates);
    }
    const PitResult pit = pit_assign(est, refs);
    EvalRow row;
    row.id = i < ids.size() ? ids[i] : std::to_string(i);
    row.permutation = pit.permutation;
    for (std::size_t k = 0; k < refs.size(); ++k) {
      const double s = pit.per_source_sisnr[k];
      const double imp = s - si_snr(ex.mixture.samples, refs[k]);
      row.sisnr.push_back(s);
      row.sisnri.push_back(imp);
      all_s.push_back(s);
      all_i.push_back(imp);
    }
    out.rows.push_back(std::move(row));
  }
  out.mean_sisnri = mean_of(all_i);
  out.std_sisnri = std_of(all_i, out.mean_sisnri);
  out.mean_sisnr = mean_of(all_s);
  out.std_sisnr = std_of(all_s, out.mean_sisnr);
  return out;
}

void write_eval_csv(const EvalSummary& s, Mode mode, const std::string& config_text, const fs::path& path) {
  std::ostringstream out;
  out << std::setprecision(10);
  out << "# mode=" << to_string(mode) << " examples=" << s.rows.size() << " score_evaluations=" << s.score_evaluations
      << '\n';
  std::istringstream cfg(config_text);
  for (std::string line; std::getline(cfg, line);) {
    if (!line.empty()) out << "# " << line << '\n';
  }
  const std::size_t K = s.rows.empty() ? 0 : s.rows.front().sisnr.size();
  out << "id,permutation";
  for (std::size_t k = 0; k < K; ++k) out << ",sisnr_" << k + 1;
  for (std::size_t k = 0; k < K; ++k) out << ",sisnri_" << k + 1;
  out << '\n';
  for (const auto& r : s.rows) {
    out << r.id << ',';
    for (std::size_t k = 0; k < r.permutation.size(); ++k) out << (k ? " " : "") << r.permutation[k];
    for (double v : r.sisnr) out << ',' << v;
    for (double v : r.sisnri) out << ',' << v;
    out << '\n';
  }
  out << "# summary,mean,std\n";
  out << "# sisnri," << s.mean_sisnri << ',' << s.std_sisnri << '\n';
  out << "# sisnr," << s.mean_sisnr << ',' << s.std_sisnr << '\n';
  atomic_write_text(path, out.str());
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"geco: separation with generative correction"};
  app.fallthrough();
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config_path, "INI run configuration");
  app.add_option("--seed", g.seed, "root seed (overrides [run] seed)");
  app.add_option("--set", g.overrides, "override one key, section.key=value (repeatable)");
  app.add_option("--out", g.out, "output directory or file");
  app.add_flag("--force", g.force, "overwrite existing outputs");

  std::optional<std::size_t> n;
  std::string data, valid, ckpts, mixture, mode = "fastgeco", manifest, wav;

  auto* sim = app.add_subcommand("simulate", "write a synthetic dataset and manifest");
  sim->add_option("--n", n, "number of examples (overrides [dataset] size)");

  auto add_training = [&](const char* name, const char* help) {
    auto* c = app.add_subcommand(name, help);
    c->add_option("--data", data, "training manifest")->required();
    c->add_option("--valid", valid, "validation manifest (defaults to the training data)");
    return c;
  };
  auto* tsep = add_training("train-sep", "train the separator");
  auto* tgeco = add_training("train-geco", "train the score model (needs a separator checkpoint)");
  tgeco->add_option("--checkpoints", ckpts, "directory holding earlier stages (defaults to --out)");
  auto* ft = add_training("finetune", "fine-tune the score model for one-step correction (needs a geco checkpoint)");
  ft->add_option("--checkpoints", ckpts, "directory holding earlier stages (defaults to --out)");

  auto* sep = app.add_subcommand("separate", "separate one mixture WAV");
  sep->add_option("--mixture", mixture, "mixture WAV")->required();
  sep->add_option("--checkpoints", ckpts, "run directory")->required();
  sep->add_option("--mode", mode, "sep_only | geco | geco_1step | fastgeco");

  auto* ev = app.add_subcommand("eval", "evaluate on a manifest and write a CSV report");
  ev->add_option("--manifest", manifest, "dataset manifest")->required();
  ev->add_option("--checkpoints", ckpts, "run directory")->required();
  ev->add_option("--mode", mode, "sep_only | geco | geco_1step | fastgeco");

  auto* spec = app.add_subcommand("spectrogram", "export a log-magnitude spectrogram as CSV");
  spec->add_option("--wav", wav, "input WAV")->required();

  std::vector<std::string> argv(args.rbegin(), args.rend());
  try {
    app.parse(argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "geco: " << e.what() << '\n';
    return kConfig;
  }

  try {
    if (sim->parsed()) cmd_simulate(g, n, out);
    if (tsep->parsed()) cmd_train_sep(g, data, valid, out);
    if (tgeco->parsed()) cmd_train_geco(g, data, valid, ckpts, out);
    if (ft->parsed()) cmd_finetune(g, data, valid, ckpts, out);
    if (sep->parsed()) cmd_separate(g, mixture, ckpts, mode, out);
    if (ev->parsed()) cmd_eval(g, manifest, ckpts, mode, out);
    if (spec->parsed()) cmd_spectrogram(g, wav, out);
  } catch (const ConfigError& e) {
    err << "geco: config error: " << e.what() << '\n';
    return kConfig;
  } catch (const OrderingError& e) {
    err << "geco: ordering error: " << e.what() << '\n';
    return kOrdering;
  } catch (const NumericError& e) {
    err << "geco: numeric error: " << e.what() << '\n';
    return kNumeric;
  } catch (const std::exception& e) {
    err << "geco: " << e.what() << '\n';
    return kFailure;
  }
  return kOk;
}

}  // namespace geco::cli
