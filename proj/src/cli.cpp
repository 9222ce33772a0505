#include "relzero/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include "relzero/analysis.hpp"
#include "relzero/error.hpp"
#include "relzero/imaging.hpp"
#include "relzero/perturb.hpp"
#include "relzero/predictor.hpp"
#include "relzero/relational.hpp"
#include "relzero/rng.hpp"
#include "relzero/watermark.hpp"

namespace relzero::cli {

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRejected = 1;
constexpr int kExitError = 2;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  std::istringstream in(value);
  T v{};
  in >> v;
  if (!in || !in.eof()) throw Error(Errc::invalid_argument, "config: bad value for " + key + ": '" + value + "'");
  return v;
}

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  for (std::string part; std::getline(ss, part, ',');) out.push_back(parse_number<int>("hidden", trim(part)));
  if (out.empty()) throw Error(Errc::invalid_argument, "empty hidden layer list");
  return out;
}

watermark::ArnoldKey resolve_key(const RunConfig& cfg, int patches) {
  std::string spec = cfg.key;
  if (spec.empty()) {
    if (const char* env = std::getenv("RELZERO_KEY")) spec = env;
  }
  if (spec.empty()) throw Error(Errc::invalid_argument, "missing key: pass --key p,q,T or set RELZERO_KEY");
  std::vector<long long> parts;
  std::stringstream ss(spec);
  for (std::string part; std::getline(ss, part, ',');) parts.push_back(parse_number<long long>("key", trim(part)));
  if (parts.size() != 2 && parts.size() != 3) throw Error(Errc::invalid_argument, "key must be 'p,q' or 'p,q,T'");
  const int iterations = parts.size() == 3 ? static_cast<int>(parts[2]) : 10;
  return watermark::ArnoldKey(parts[0], parts[1], iterations, watermark::grid_side_for(patches));
}

bool is_external(const RunConfig& cfg) {
  return imaging::feature_source_from_string(cfg.feature_source) == imaging::FeatureSource::external;
}

imaging::PatchFeatureMap features_of(const fs::path& path, const RunConfig& cfg) {
  if (is_external(cfg)) return imaging::load_embeddings(path);
  return imaging::extract_mean_rgb(imaging::load_image(path, cfg.image_side), cfg.patch_side);
}

std::string lower_ext(const fs::path& p) {
  auto ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext;
}

std::vector<fs::path> list_inputs(const fs::path& dir, bool external) {
  if (!fs::is_directory(dir)) throw Error(Errc::io, "not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const auto ext = lower_ext(entry.path());
    const bool match = external ? ext == ".emb" : (ext == ".png" || ext == ".jpg" || ext == ".jpeg");
    if (match) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

// Positional inputs: files as given, directories expanded in name order.
std::vector<fs::path> expand_inputs(const std::vector<std::string>& args, bool external) {
  std::vector<fs::path> out;
  for (const auto& a : args) {
    if (fs::is_directory(a)) {
      const auto files = list_inputs(a, external);
      out.insert(out.end(), files.begin(), files.end());
    } else {
      out.emplace_back(a);
    }
  }
  return out;
}

watermark::CalibrationResult calibration_for(const RunConfig& cfg, int k, std::int64_t m_pairs) {
  return watermark::calibrate(k, cfg.fpr, watermark::calibration_mode_from_string(cfg.calib), m_pairs);
}

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

// Ground-truth counterpart: the matching file in edited_dir, else a seeded surrogate edit.
imaging::PatchFeatureMap edited_features(const fs::path& original, std::size_t index, const RunConfig& cfg,
                                         const std::string& edited_dir) {
  if (!edited_dir.empty()) {
    const auto counterpart = fs::path(edited_dir) / original.filename();
    if (!fs::exists(counterpart)) {
      throw Error(Errc::invalid_argument, "unpaired file: no counterpart for " + original.filename().string() +
                                              " in " + edited_dir);
    }
    return features_of(counterpart, cfg);
  }
  if (is_external(cfg)) throw Error(Errc::invalid_argument, "external features need --edited-dir");
  const auto img = imaging::load_image(original, cfg.image_side);
  return imaging::extract_mean_rgb(perturb::surrogate_edit(img, mix_seed(cfg.seed, index)), cfg.patch_side);
}

// ---- commands -----------------------------------------------------------------

struct TrainArgs {
  std::string image_dir;
  std::string edited_dir;
  std::string loss_csv;
};

int cmd_train(const RunConfig& cfg, const TrainArgs& args, std::ostream& out) {
  const auto files = list_inputs(args.image_dir, is_external(cfg));
  if (files.empty()) throw Error(Errc::invalid_argument, "no images in " + args.image_dir);
  std::vector<predictor::TrainingImage> images;
  for (std::size_t n = 0; n < files.size(); ++n) {
    images.push_back({features_of(files[n], cfg), edited_features(files[n], n, cfg, args.edited_dir)});
  }
  predictor::TrainConfig tc;
  tc.learning_rate = cfg.learning_rate;
  tc.epochs = cfg.epochs;
  tc.batch_size = cfg.batch_size;
  tc.seed = cfg.seed;
  tc.k = cfg.k;
  tc.pos_weight = cfg.pos_weight;
  tc.hidden = cfg.hidden;

  std::ofstream csv;
  if (!args.loss_csv.empty()) {
    csv.open(args.loss_csv, std::ios::binary | std::ios::trunc);
    if (!csv) throw Error(Errc::io, "cannot write " + args.loss_csv);
    csv << "epoch,loss\n";
  }
  out << "epoch,loss\n";
  const auto result = predictor::train(images, tc, [&](int epoch, double loss) {
    const auto line = std::to_string(epoch) + "," + fmt("%.10g", loss) + "\n";
    out << line << std::flush;
    if (csv) csv << line;
  });
  predictor::save_checkpoint(result.model, cfg.checkpoint);
  out << "final_loss=" << fmt("%.10g", result.epoch_loss.back()) << " best_epoch=" << result.best_epoch
      << " best_loss=" << fmt("%.10g", result.epoch_loss[result.best_epoch]) << " images=" << images.size()
      << " checkpoint=" << cfg.checkpoint.string() << "\n";
  return kExitOk;
}

int cmd_register(const RunConfig& cfg, const std::string& image, const std::string& id, bool force,
                 std::ostream& out) {
  const auto model = predictor::load_checkpoint(cfg.checkpoint);
  const auto fm = features_of(image, cfg);
  const auto key = resolve_key(cfg, fm.patch_count());
  const auto pairs = predictor::extract_watermark(model, fm, cfg.k);
  watermark::RecordMeta meta;
  meta.patch_side = cfg.patch_side;
  meta.image_side = cfg.image_side;
  meta.feature_source = cfg.feature_source;
  meta.content_id = id;
  const auto record = watermark::encrypt(pairs, key, meta);
  const auto path = watermark::registry_put(cfg.registry, record, force);
  out << "registered " << path.string() << " K=" << record.k << "\n";
  out << "pairs";
  for (const auto& p : pairs) out << ' ' << p.i << '-' << p.j;
  out << "\n";
  return kExitOk;
}

int cmd_verify(const RunConfig& base, const std::string& image, const std::string& id, std::ostream& out) {
  const auto record = watermark::registry_get(base.registry, id);
  // Extract the suspect exactly as the record was registered.
  RunConfig cfg = base;
  cfg.patch_side = record.patch_side;
  cfg.image_side = record.image_side;
  cfg.feature_source = record.feature_source;
  const auto key = resolve_key(cfg, record.patches);
  const auto model = predictor::load_checkpoint(cfg.checkpoint);
  const auto fm = features_of(image, cfg);
  if (fm.patch_count() != record.patches) throw Error(Errc::dimension_mismatch, "suspect patch count != record P");
  const auto suspect = predictor::extract_watermark(model, fm, record.k);
  const auto calib = calibration_for(cfg, record.k, record.m);
  const auto v = watermark::verify(record, key, suspect, calib);
  out << (v.authenticated ? "AUTH" : "REJECT") << " η=" << fmt("%.4f", v.eta) << " m=" << v.matches
      << " thr=" << v.threshold << "\n";
  return v.authenticated ? kExitOk : kExitRejected;
}

int cmd_attack(const RunConfig& cfg, const std::string& image, const std::string& spec, const std::string& out_path,
               std::ostream& out) {
  const auto attack = perturb::parse_attack(spec, cfg.seed);
  const auto img = imaging::load_image_native(image);
  imaging::save_png(perturb::apply_attack(img, attack), out_path);
  out << "wrote " << out_path << " (" << attack.label() << ")\n";
  return kExitOk;
}

int cmd_calibrate(const RunConfig& cfg, std::ostream& out) {
  const auto m_pairs = pair_count(cfg.patch_count());
  const auto r = calibration_for(cfg, cfg.k, m_pairs);
  out << "mode=" << watermark::to_string(r.mode) << " K=" << r.k;
  if (r.mode == watermark::CalibrationMode::hypergeometric) out << " M=" << r.m_pairs;
  out << " m=" << r.threshold << " tau=" << fmt("%.4g", r.tau) << " fpr=" << fmt("%.6g", r.achieved_fpr)
      << " target=" << fmt("%.6g", cfg.fpr) << "\n";
  return kExitOk;
}

struct AnalyzeArgs {
  std::string what;
  std::vector<std::string> inputs;
  std::string edited_dir;
  std::string out_dir = ".";
  int bins = 50;
  std::string attacks;
};

int cmd_analyze(const RunConfig& cfg, const AnalyzeArgs& args, std::ostream& out) {
  const auto inputs = expand_inputs(args.inputs, is_external(cfg));
  if (inputs.empty()) throw Error(Errc::invalid_argument, "analyze " + args.what + ": no inputs");
  const fs::path out_dir = args.out_dir;
  fs::create_directories(out_dir);

  auto distance_pair = [&](std::size_t n) {
    return std::pair{relational::pairwise_distances(features_of(inputs[n], cfg)),
                     relational::pairwise_distances(edited_features(inputs[n], n, cfg, args.edited_dir))};
  };

  if (args.what == "regression") {
    std::vector<analysis::RegressionRow> rows;
    for (std::size_t n = 0; n < inputs.size(); ++n) {
      const auto [before, after] = distance_pair(n);
      rows.push_back({inputs[n].stem().string(), analysis::fit_distance_regression(before, after)});
      const auto& r = rows.back().report;
      out << rows.back().id << " alpha=" << fmt("%.6g", r.alpha) << " beta=" << fmt("%.6g", r.beta)
          << " r2=" << fmt("%.6g", r.r_squared) << " rho=" << fmt("%.6g", r.spearman_rho) << "\n";
    }
    analysis::write_regression_csv(out_dir / "regression.csv", rows);
  } else if (args.what == "residuals") {
    const auto [before, after] = distance_pair(0);
    const auto h = analysis::residual_distribution(before, after, args.bins);
    analysis::write_residuals_csv(out_dir / "residuals.csv", h);
    out << "mean=" << fmt("%.6g", h.mean) << " std=" << fmt("%.6g", h.stddev) << "\n";
  } else if (args.what == "ssm") {
    const auto [before, after] = distance_pair(0);
    const auto s = analysis::ssm_residual(before, after);
    analysis::write_ssm_csv(out_dir / "ssm.csv", inputs[0].stem().string(), s);
    out << "scale=" << fmt("%.6g", s.scale) << " raw_mean=" << fmt("%.6g", s.raw_summary.mean)
        << " adjusted_mean=" << fmt("%.6g", s.adjusted_summary.mean) << "\n";
  } else if (args.what == "uniqueness") {
    const auto model = predictor::load_checkpoint(cfg.checkpoint);
    std::vector<PairIndexSet> marks;
    std::vector<std::string> ids;
    for (const auto& path : inputs) {
      marks.push_back(predictor::extract_watermark(model, features_of(path, cfg), cfg.k));
      ids.push_back(path.stem().string());
    }
    const auto r = analysis::uniqueness_study(marks, cfg.k);
    analysis::write_uniqueness_csv(out_dir / "uniqueness.csv", r, ids);
    out << "pairs=" << r.entries.size() << " mean=" << fmt("%.6g", r.mean) << " max=" << fmt("%.6g", r.max)
        << " expected=" << fmt("%.6g", r.expected_eta) << "\n";
  } else if (args.what == "sweep") {
    if (is_external(cfg)) throw Error(Errc::invalid_argument, "sweep needs images, not external embeddings");
    const auto model = predictor::load_checkpoint(cfg.checkpoint);
    const auto key = resolve_key(cfg, cfg.patch_count());
    const auto calib = calibration_for(cfg, cfg.k, pair_count(cfg.patch_count()));
    std::vector<analysis::CorpusImage> corpus;
    for (const auto& path : inputs) corpus.push_back({path.stem().string(), imaging::load_image(path, cfg.image_side)});
    std::vector<perturb::AttackConfig> attacks;
    if (args.attacks.empty()) {
      attacks = perturb::attack_matrix(cfg.seed);
    } else {
      std::stringstream ss(args.attacks);
      for (std::string spec; std::getline(ss, spec, ',');) attacks.push_back(perturb::parse_attack(trim(spec), cfg.seed));
    }
    const auto rows = analysis::robustness_sweep(model, corpus, key, calib, attacks, {cfg.patch_side, cfg.k, cfg.seed});
    analysis::write_robustness_csv(out_dir / "robustness.csv", rows);
    for (const auto& r : rows) out << r.attack << " tpr=" << fmt("%.4f", r.tpr) << "\n";
  } else {
    throw Error(Errc::invalid_argument, "unknown analysis '" + args.what + "'");
  }
  return kExitOk;
}

}  // namespace

int RunConfig::patch_count() const {
  if (patch_side <= 0 || image_side <= 0 || image_side % patch_side != 0) {
    throw Error(Errc::invalid_argument, "image side must be a positive multiple of patch side");
  }
  const int per_side = image_side / patch_side;
  return per_side * per_side;
}

void apply_config_text(RunConfig& cfg, const std::string& text) {
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw Error(Errc::invalid_argument, "config line " + std::to_string(line_no) + ": expected key=value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key == "image_side") cfg.image_side = parse_number<int>(key, value);
    else if (key == "patch_side") cfg.patch_side = parse_number<int>(key, value);
    else if (key == "k") cfg.k = parse_number<int>(key, value);
    else if (key == "feature_source") cfg.feature_source = value;
    else if (key == "checkpoint") cfg.checkpoint = value;
    else if (key == "registry") cfg.registry = value;
    else if (key == "key") cfg.key = value;
    else if (key == "calib") cfg.calib = value;
    else if (key == "fpr") cfg.fpr = parse_number<double>(key, value);
    else if (key == "seed") cfg.seed = parse_number<std::uint64_t>(key, value);
    else if (key == "epochs") cfg.epochs = parse_number<int>(key, value);
    else if (key == "lr") cfg.learning_rate = parse_number<double>(key, value);
    else if (key == "batch") cfg.batch_size = parse_number<int>(key, value);
    else if (key == "hidden") cfg.hidden = parse_int_list(value);
    else if (key == "pos_weight") cfg.pos_weight = parse_number<double>(key, value);
    else throw Error(Errc::invalid_argument, "config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
  }
}

void apply_config_file(RunConfig& cfg, const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io, "cannot read config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  apply_config_text(cfg, ss.str());
}

int run(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"relzero: relational zero-watermarking toolkit", "relzero"};
  app.require_subcommand(1);
  app.fallthrough();

  RunConfig flags;
  std::string config_path, hidden, checkpoint, registry, calib;
  auto* o_config = app.add_option("--config", config_path, "key=value config file");
  auto* o_seed = app.add_option("--seed", flags.seed, "global seed");
  auto* o_key = app.add_option("--key", flags.key, "Arnold key p,q,T (else $RELZERO_KEY)");
  auto* o_registry = app.add_option("--registry", registry, "record directory");
  auto* o_calib = app.add_option("--calib", calib, "calibration: binom | hyper");
  auto* o_fpr = app.add_option("--fpr", flags.fpr, "target false-positive rate");
  auto* o_k = app.add_option("--k", flags.k, "watermark size K");
  auto* o_patch = app.add_option("--patch-side", flags.patch_side, "patch side in pixels");
  auto* o_image = app.add_option("--image-side", flags.image_side, "resize side in pixels");
  auto* o_ckpt = app.add_option("--checkpoint", checkpoint, "predictor checkpoint path");
  auto* o_source = app.add_option("--features", flags.feature_source, "mean_rgb | external");

  TrainArgs train_args;
  auto* train = app.add_subcommand("train", "train the pair predictor");
  train->add_option("image_dir", train_args.image_dir)->required();
  train->add_option("--edited-dir", train_args.edited_dir, "externally edited counterparts, paired by name");
  train->add_option("--loss-csv", train_args.loss_csv, "write per-epoch loss CSV");
  auto* o_epochs = train->add_option("--epochs", flags.epochs);
  auto* o_lr = train->add_option("--lr", flags.learning_rate);
  auto* o_batch = train->add_option("--batch", flags.batch_size, "batch size in pairs");
  auto* o_hidden = train->add_option("--hidden", hidden, "hidden widths, e.g. 128,128");
  auto* o_posw = train->add_option("--pos-weight", flags.pos_weight, "positive class weight (0 = auto)");

  std::string image, content_id, spec, out_path;
  bool force = false;
  auto* reg = app.add_subcommand("register", "register an image's watermark");
  reg->add_option("image", image)->required();
  reg->add_option("content_id", content_id)->required();
  reg->add_flag("--force", force, "overwrite an existing record");

  auto* ver = app.add_subcommand("verify", "verify a suspect image against a record");
  ver->add_option("image", image)->required();
  ver->add_option("content_id", content_id)->required();

  auto* att = app.add_subcommand("attack", "apply a distortion and write a PNG");
  att->add_option("image", image)->required();
  att->add_option("spec", spec, "kind:param[:seed]")->required();
  att->add_option("out", out_path)->required();

  auto* cal = app.add_subcommand("calibrate", "print the calibrated threshold");

  AnalyzeArgs analyze_args;
  auto* ana = app.add_subcommand("analyze", "regression | residuals | ssm | uniqueness | sweep");
  ana->add_option("what", analyze_args.what)
      ->required()
      ->check(CLI::IsMember({"regression", "residuals", "ssm", "uniqueness", "sweep"}));
  ana->add_option("inputs", analyze_args.inputs, "images or directories")->required();
  ana->add_option("--edited-dir", analyze_args.edited_dir);
  ana->add_option("--out", analyze_args.out_dir, "output directory for CSVs");
  ana->add_option("--bins", analyze_args.bins);
  ana->add_option("--attacks", analyze_args.attacks, "comma-separated attack specs (default: full grid)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitError;
  }

  try {
    RunConfig cfg;
    if (o_config->count()) apply_config_file(cfg, config_path);
    if (o_seed->count()) cfg.seed = flags.seed;
    if (o_key->count()) cfg.key = flags.key;
    if (o_registry->count()) cfg.registry = registry;
    if (o_calib->count()) cfg.calib = calib;
    if (o_fpr->count()) cfg.fpr = flags.fpr;
    if (o_k->count()) cfg.k = flags.k;
    if (o_patch->count()) cfg.patch_side = flags.patch_side;
    if (o_image->count()) cfg.image_side = flags.image_side;
    if (o_ckpt->count()) cfg.checkpoint = checkpoint;
    if (o_source->count()) cfg.feature_source = flags.feature_source;
    if (o_epochs->count()) cfg.epochs = flags.epochs;
    if (o_lr->count()) cfg.learning_rate = flags.learning_rate;
    if (o_batch->count()) cfg.batch_size = flags.batch_size;
    if (o_hidden->count()) cfg.hidden = parse_int_list(hidden);
    if (o_posw->count()) cfg.pos_weight = flags.pos_weight;
    imaging::feature_source_from_string(cfg.feature_source);
    watermark::calibration_mode_from_string(cfg.calib);

    if (*train) return cmd_train(cfg, train_args, out);
    if (*reg) return cmd_register(cfg, image, content_id, force, out);
    if (*ver) return cmd_verify(cfg, image, content_id, out);
    if (*att) return cmd_attack(cfg, image, spec, out_path, out);
    if (*cal) return cmd_calibrate(cfg, out);
    if (*ana) return cmd_analyze(cfg, analyze_args, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitError;
  }
  return kExitError;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<std::string> storage;
  storage.reserve(args.size() + 1);
  storage.emplace_back("relzero");
  storage.insert(storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& s : storage) argv.push_back(s.data());
  argv.push_back(nullptr);
  return run(static_cast<int>(storage.size()), argv.data(), out, err);
}

}  // namespace relzero::cli
