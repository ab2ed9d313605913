#include "foliage/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "foliage/augment.hpp"
#include "foliage/coco_io.hpp"
#include "foliage/detector.hpp"
#include "foliage/evalprot.hpp"
#include "foliage/treegen.hpp"

namespace foliage::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw UsageError("cannot read " + p.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << text;
  if (!out) throw std::runtime_error("cannot write " + p.string());
}

/// Config file: a JSON object whose keys must all be in `allowed`.
json load_config(const std::string& path, const std::set<std::string>& allowed) {
  if (path.empty()) return json::object();
  json j;
  try {
    j = json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw UsageError("config " + path + ": " + e.what());
  }
  if (!j.is_object()) throw UsageError("config " + path + ": top level must be an object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key())) throw UsageError("config " + path + ": unknown key \"" + it.key() + "\"");
  return j;
}

template <class T>
T config_value(const json& cfg, const std::string& key, const std::string& where = "") {
  try {
    return cfg.at(key).get<T>();
  } catch (const json::exception& e) {
    throw UsageError("config key \"" + where + key + "\": " + e.what());
  }
}

/// Flag value if given, else config value, else fallback.
template <class T>
std::optional<T> pick(const std::optional<T>& flag, const json& cfg, const std::string& key) {
  if (flag) return flag;
  if (cfg.contains(key)) return config_value<T>(cfg, key);
  return std::nullopt;
}

template <class T>
T require(const std::optional<T>& v, const std::string& name) {
  if (!v) throw UsageError("missing required setting \"" + name + "\" (flag or config key)");
  return *v;
}

UniformRange uniform_range(const json& cfg, const std::string& key, const std::string& where) {
  const auto v = config_value<std::vector<double>>(cfg, key, where);
  if (v.size() != 2) throw UsageError("config key \"" + where + key + "\" must be [lo, hi]");
  return {v[0], v[1]};
}

IntRange int_range(const json& cfg, const std::string& key, const std::string& where) {
  const auto v = config_value<std::vector<int>>(cfg, key, where);
  if (v.size() != 2) throw UsageError("config key \"" + where + key + "\" must be [lo, hi]");
  return {v[0], v[1]};
}

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw UsageError("config key \"" + where + "\" must be an object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key())) throw UsageError("config: unknown key \"" + where + "." + it.key() + "\"");
}

TreeParams tree_params_from(const json& j) {
  check_keys(j, {"branch_count_mean", "branch_count", "attach_span", "branch_angle_deg", "branch_length",
                 "leaves_per_branch", "leaf_scale", "alpha_threshold"},
             "tree_params");
  const std::string w = "tree_params.";
  TreeParams p;
  if (j.contains("branch_count_mean")) p.branch_count_mean = config_value<double>(j, "branch_count_mean", w);
  if (j.contains("branch_count")) p.branch_count = int_range(j, "branch_count", w);
  if (j.contains("attach_span")) p.attach_span = config_value<double>(j, "attach_span", w);
  if (j.contains("branch_angle_deg")) p.branch_angle_deg = uniform_range(j, "branch_angle_deg", w);
  if (j.contains("branch_length")) p.branch_length = uniform_range(j, "branch_length", w);
  if (j.contains("leaves_per_branch")) p.leaves_per_branch = int_range(j, "leaves_per_branch", w);
  if (j.contains("leaf_scale")) p.leaf_scale = uniform_range(j, "leaf_scale", w);
  if (j.contains("alpha_threshold")) p.alpha_threshold = config_value<int>(j, "alpha_threshold", w);
  return p;
}

LevelThresholds thresholds_from(const json& cfg) {
  const auto v = config_value<std::vector<double>>(cfg, "thresholds");
  if (v.size() != 3) throw UsageError("config key \"thresholds\" must be [t1, t2, t3]");
  return {v[0], v[1], v[2]};
}

void require_file(const fs::path& p, const std::string& what) {
  if (!fs::is_regular_file(p)) throw UsageError(what + " not found: " + p.string());
}

void require_dir(const fs::path& p, const std::string& what) {
  if (!fs::is_directory(p)) throw UsageError(what + " not found: " + p.string());
}

Dataset load_checked(const fs::path& p) {
  require_file(p, "dataset");
  Dataset d = load_dataset(p.string());
  validate_dataset(d);
  return d;
}

// ---------------------------------------------------------------- commands

struct SynthArgs {
  std::optional<std::uint64_t> seed;
  std::string out;
};

int cmd_synth_assets(const SynthArgs& a, std::ostream& out) {
  const std::uint64_t seed = require(a.seed, "seed");
  if (a.out.empty()) throw UsageError("--out is required");
  const AssetBank bank = synthesize_assets(seed);
  save_asset_bank(bank, a.out);
  out << "wrote " << bank.trunks.size() << " trunks and " << bank.leaves.size() << " leaves to " << a.out << "\n";
  return kExitOk;
}

struct AugmentArgs {
  std::string config;
  std::optional<std::string> dataset, images, assets, output, person_category;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
};

const std::set<std::string> kAugmentKeys = {"dataset",     "images",          "assets",         "output",
                                            "master_seed", "workers",         "trees_per_image", "rotation_deg",
                                            "height_factor", "person_category", "thresholds",     "tree_params"};

int cmd_augment(const AugmentArgs& a, std::ostream& out, std::ostream& err) {
  const json cfg = load_config(a.config, kAugmentKeys);
  AugmentConfig ac;
  ac.master_seed = require(pick(a.seed, cfg, "master_seed"), "master_seed");
  if (cfg.contains("trees_per_image")) ac.trees_per_image = int_range(cfg, "trees_per_image", "");
  if (cfg.contains("rotation_deg")) ac.rotation_deg = uniform_range(cfg, "rotation_deg", "");
  if (cfg.contains("height_factor")) ac.height_factor = uniform_range(cfg, "height_factor", "");
  if (auto c = pick(a.person_category, cfg, "person_category")) ac.person_category = *c;
  if (cfg.contains("thresholds")) ac.thresholds = thresholds_from(cfg);
  if (cfg.contains("tree_params")) ac.tree_params = tree_params_from(cfg.at("tree_params"));
  try {
    ac.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }

  const fs::path dataset = require(pick(a.dataset, cfg, "dataset"), "dataset");
  const fs::path images = require(pick(a.images, cfg, "images"), "images");
  const fs::path assets = require(pick(a.assets, cfg, "assets"), "assets");
  const fs::path output = require(pick(a.output, cfg, "output"), "output");
  const int workers = pick(a.workers, cfg, "workers").value_or(1);
  if (workers < 1) throw UsageError("workers must be >= 1");
  require_dir(images, "image directory");
  require_dir(assets, "asset directory");

  const Dataset d = load_checked(dataset);
  const AssetBank bank = load_asset_bank(assets);
  const AugmentReport rep = augment_dataset(d, bank, ac, images, output, workers);
  for (const AugmentIssue& i : rep.issues) {
    err << "warning: image " << i.image_id;
    if (i.annotation_id) err << " annotation " << *i.annotation_id;
    err << ": " << i.message << "\n";
  }
  out << "augmented " << rep.images_processed << " images (" << rep.images_skipped_no_person
      << " without persons, " << rep.images_failed << " failed), " << rep.trees_placed << " trees\n";
  return kExitOk;
}

struct RegionsArgs {
  std::string config;
  std::optional<std::string> dataset, output, person_category;
  std::optional<std::int64_t> n_background;
  std::optional<std::uint64_t> seed;
  std::optional<int> min_side;
  std::optional<double> aspect_min, aspect_max;
};

const std::set<std::string> kRegionsKeys = {"dataset",  "output",     "n_background", "seed",
                                            "min_side", "aspect_min", "aspect_max",   "person_category"};

int cmd_regions(const RegionsArgs& a, std::ostream& out, std::ostream& err) {
  const json cfg = load_config(a.config, kRegionsKeys);
  const std::uint64_t seed = require(pick(a.seed, cfg, "seed"), "seed");
  const fs::path dataset = require(pick(a.dataset, cfg, "dataset"), "dataset");
  const fs::path output = require(pick(a.output, cfg, "output"), "output");
  const std::int64_t n_background = pick(a.n_background, cfg, "n_background").value_or(0);
  if (n_background < 0) throw UsageError("n_background must be >= 0");
  SamplerConstraints sc;
  if (auto v = pick(a.min_side, cfg, "min_side")) sc.min_side = *v;
  if (auto v = pick(a.aspect_min, cfg, "aspect_min")) sc.aspect.lo = *v;
  if (auto v = pick(a.aspect_max, cfg, "aspect_max")) sc.aspect.hi = *v;
  try {
    sc.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const std::string category = pick(a.person_category, cfg, "person_category").value_or("person");

  const Dataset d = load_checked(dataset);
  const RegionSet set = extract_regions(d, category, n_background, sc, seed);
  write_text(output, regions_to_json(set.regions).dump(1) + "\n");

  std::int64_t positives = 0;
  for (const Region& r : set.regions) positives += r.kind == RegionKind::Positive ? 1 : 0;
  if (set.flagged > 0) err << "warning: " << set.flagged << " positive regions overlap another person box\n";
  if (set.background_shortfall > 0)
    err << "warning: " << set.background_shortfall << " background regions could not be placed ("
        << set.exhausted_images.size() << " images exhausted)\n";
  out << "wrote " << positives << " positive and " << std::int64_t(set.regions.size()) - positives
      << " background regions to " << output.string() << "\n";
  return kExitOk;
}

struct EvalArgs {
  std::string config;
  std::optional<std::string> dataset, images, regions, detector, output, person_category;
  std::optional<int> workers, steps;
};

const std::set<std::string> kEvalKeys = {"dataset", "images", "regions", "detector",
                                         "output",  "workers", "steps",  "person_category"};

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  const json cfg = load_config(a.config, kEvalKeys);
  const fs::path dataset = require(pick(a.dataset, cfg, "dataset"), "dataset");
  const fs::path images = require(pick(a.images, cfg, "images"), "images");
  const fs::path regions_path = require(pick(a.regions, cfg, "regions"), "regions");
  const std::string spec = require(pick(a.detector, cfg, "detector"), "detector");
  const fs::path output = require(pick(a.output, cfg, "output"), "output");
  const int workers = pick(a.workers, cfg, "workers").value_or(1);
  const int steps = pick(a.steps, cfg, "steps").value_or(100);
  const std::string category = pick(a.person_category, cfg, "person_category").value_or("person");
  if (workers < 1) throw UsageError("workers must be >= 1");
  if (steps < 1) throw UsageError("steps must be >= 1");
  require_dir(images, "image directory");
  require_file(regions_path, "regions file");

  const Dataset d = load_checked(dataset);
  std::vector<Region> regions;
  try {
    regions = regions_from_json(json::parse(read_text(regions_path)));
  } catch (const json::parse_error& e) {
    throw UsageError("regions file: " + std::string(e.what()));
  } catch (const std::invalid_argument& e) {
    throw UsageError("regions file: " + std::string(e.what()));
  }

  std::unique_ptr<Detector> detector;
  try {
    detector = make_detector(spec);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const auto thresholds = threshold_sweep(steps);
  const EvalResult r = evaluate(d, regions, *detector, category, images, thresholds, workers);

  fs::create_directories(output);
  write_text(output / "eval_result.csv", eval_result_to_csv(r));
  out << "evaluated " << regions.size() << " regions with " << detector->describe() << "; wrote "
      << (output / "eval_result.csv").string() << "\n";
  return kExitOk;
}

struct ReportArgs {
  std::string csv, output;
};

int cmd_report(const ReportArgs& a, std::ostream& out, std::ostream& err) {
  require_file(a.csv, "eval CSV");
  EvalResult r;
  try {
    r = eval_result_from_csv(read_text(a.csv));
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  std::vector<OcclusionLevel> omitted;
  const std::string svg = render_pr_svg(r, &omitted);
  for (OcclusionLevel l : omitted)
    err << "warning: level " << level_name(l) << " has no positive regions; omitted from plot\n";
  write_text(a.output, svg);
  out << "wrote " << a.output << "\n";
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Tree-occlusion augmentation and region-based detector evaluation", "foliage"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* s = app.add_subcommand("synth-assets", "Write a deterministic synthetic trunk/leaf asset bank");
  s->add_option("--seed", synth.seed, "Generation seed")->required();
  s->add_option("--out", synth.out, "Output directory (parent must exist)")->required();

  AugmentArgs aug;
  auto* g = app.add_subcommand("augment", "Composite trees onto person images and rewrite their annotations");
  g->add_option("--config", aug.config, "JSON config file");
  g->add_option("--dataset", aug.dataset, "COCO annotation JSON");
  g->add_option("--images", aug.images, "Directory holding the dataset's PNG images");
  g->add_option("--assets", aug.assets, "Asset bank directory");
  g->add_option("--out", aug.output, "Output directory");
  g->add_option("--seed", aug.seed, "Master seed");
  g->add_option("--person-category", aug.person_category, "Category name treated as person");
  g->add_option("--workers", aug.workers, "Worker threads");

  RegionsArgs reg;
  auto* r = app.add_subcommand("regions", "Extract positive and background evaluation regions");
  r->add_option("--config", reg.config, "JSON config file");
  r->add_option("--dataset", reg.dataset, "COCO annotation JSON");
  r->add_option("--out", reg.output, "Output regions JSON");
  r->add_option("--n-background", reg.n_background, "Background regions to sample");
  r->add_option("--seed", reg.seed, "Sampling seed");
  r->add_option("--min-side", reg.min_side, "Minimum background side in pixels");
  r->add_option("--aspect-min", reg.aspect_min, "Minimum background width/height");
  r->add_option("--aspect-max", reg.aspect_max, "Maximum background width/height");
  r->add_option("--person-category", reg.person_category, "Category name treated as person");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Score regions with a detector and write per-level counts");
  e->add_option("--config", ev.config, "JSON config file");
  e->add_option("--dataset", ev.dataset, "COCO annotation JSON");
  e->add_option("--images", ev.images, "Image directory");
  e->add_option("--regions", ev.regions, "Regions JSON from `foliage regions`");
  e->add_option("--detector", ev.detector, "mock:R,G,B[:TOL] | precomputed:FILE | subprocess:CMD");
  e->add_option("--out", ev.output, "Output directory (eval_result.csv)");
  e->add_option("--workers", ev.workers, "Worker threads (shareable detectors only)");
  e->add_option("--steps", ev.steps, "Threshold sweep steps (100 gives 0.01 granularity)");
  e->add_option("--person-category", ev.person_category, "Detection category counted as person");

  ReportArgs rep;
  auto* p = app.add_subcommand("report", "Render per-level precision-recall curves to SVG");
  p->add_option("--csv", rep.csv, "eval_result.csv")->required();
  p->add_option("--out", rep.output, "Output SVG")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& ex) {
    err << "error: " << ex.what() << "\n";
    return kExitUsage;
  }

  try {
    if (s->parsed()) return cmd_synth_assets(synth, out);
    if (g->parsed()) return cmd_augment(aug, out, err);
    if (r->parsed()) return cmd_regions(reg, out, err);
    if (e->parsed()) return cmd_eval(ev, out);
    if (p->parsed()) return cmd_report(rep, out, err);
  } catch (const UsageError& ex) {
    err << "error: " << ex.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace foliage::cli
