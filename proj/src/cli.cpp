#include "timberlens/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <ostream>
#include <set>

#include "timberlens/analysis.hpp"
#include "timberlens/dataset.hpp"
#include "timberlens/eval.hpp"
#include "timberlens/image_io.hpp"
#include "timberlens/kp_geometry.hpp"
#include "timberlens/parallel.hpp"
#include "timberlens/refpred.hpp"
#include "timberlens/svg.hpp"
#include "timberlens/synth.hpp"

namespace timberlens::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Kind { kString, kInt, kUInt, kDouble, kBool, kObject };

struct Opt {
  std::string key;  // config key; the flag is --key with '_' as '-'
  Kind kind;
  json def;         // null: unset unless given
  std::string help;
  bool required = false;
};

std::string flag_name(const std::string& key) {
  std::string f = key;
  std::replace(f.begin(), f.end(), '_', '-');
  return "--" + f;
}

const char* kind_name(Kind k) {
  switch (k) {
    case Kind::kString: return "a string";
    case Kind::kInt: return "an integer";
    case Kind::kUInt: return "a non-negative integer";
    case Kind::kDouble: return "a number";
    case Kind::kBool: return "a boolean";
    case Kind::kObject: return "an object";
  }
  return "?";
}

bool matches(const json& v, Kind k) {
  switch (k) {
    case Kind::kString: return v.is_string();
    case Kind::kInt: return v.is_number_integer();
    case Kind::kUInt: return v.is_number_unsigned();
    case Kind::kDouble: return v.is_number();
    case Kind::kBool: return v.is_boolean();
    case Kind::kObject: return v.is_object();
  }
  return false;
}

json convert_flag(const std::string& text, const Opt& o) {
  const std::string where = flag_name(o.key);
  try {
    std::size_t used = 0;
    switch (o.kind) {
      case Kind::kString:
        return text;
      case Kind::kInt: {
        const long long v = std::stoll(text, &used);
        if (used == text.size()) return v;
        break;
      }
      case Kind::kUInt: {
        if (text.find('-') != std::string::npos) break;
        const unsigned long long v = std::stoull(text, &used);
        if (used == text.size()) return v;
        break;
      }
      case Kind::kDouble: {
        const double v = std::stod(text, &used);
        if (used == text.size()) return v;
        break;
      }
      case Kind::kBool:
      case Kind::kObject:
        break;
    }
  } catch (const std::exception&) {
  }
  throw ConfigError(where + ": expected " + kind_name(o.kind) + ", got \"" + text + "\"");
}

/// Merged settings for one command: defaults < config file < flags.
class Settings {
 public:
  explicit Settings(json values) : v_(std::move(values)) {}

  bool has(const std::string& k) const { return v_.contains(k) && !v_[k].is_null(); }
  const json& raw(const std::string& k) const { return v_.at(k); }
  std::string str(const std::string& k) const { return v_.at(k).get<std::string>(); }
  long long integer(const std::string& k) const { return v_.at(k).get<long long>(); }
  double number(const std::string& k) const { return v_.at(k).get<double>(); }
  bool flag(const std::string& k) const { return v_.at(k).get<bool>(); }
  std::optional<std::string> opt_str(const std::string& k) const {
    return has(k) ? std::optional<std::string>(str(k)) : std::nullopt;
  }
  const json& all() const { return v_; }

 private:
  json v_;
};

struct Command {
  std::string name;
  std::string help;
  std::vector<Opt> opts;
  std::function<int(const Settings&, std::ostream&, std::ostream&)> run;
};

// Storage for CLI11 bindings, one slot per option.
struct Bound {
  const Command* cmd = nullptr;
  CLI::App* app = nullptr;
  std::string config_path;
  std::map<std::string, std::string> text;
  std::map<std::string, bool> flags;
};

void bind(CLI::App& app, const Command& cmd, Bound& b) {
  b.cmd = &cmd;
  b.app = &app;
  app.add_option("--config", b.config_path, "JSON config file (flags override its values)");
  for (const auto& o : cmd.opts) {
    if (o.kind == Kind::kObject) continue;  // config file only
    std::string help = o.help;
    if (!o.def.is_null()) help += " [default: " + (o.def.is_string() ? o.def.get<std::string>() : o.def.dump()) + "]";
    if (o.kind == Kind::kBool) {
      app.add_flag(flag_name(o.key), b.flags[o.key], help);
    } else {
      app.add_option(flag_name(o.key), b.text[o.key], help);
    }
  }
}

Settings resolve(const Bound& b) {
  const Command& cmd = *b.cmd;
  json merged = json::object();
  for (const auto& o : cmd.opts) {
    merged[o.key] = o.kind == Kind::kUInt && !o.def.is_null() ? json(o.def.get<std::uint64_t>()) : o.def;
  }

  if (!b.config_path.empty()) {
    json file;
    try {
      file = json::parse(read_text_file(b.config_path));
    } catch (const json::parse_error& e) {
      throw ConfigError(b.config_path + ": invalid JSON: " + e.what());
    }
    if (!file.is_object()) throw ConfigError(b.config_path + ": config must be a JSON object");
    for (const auto& [key, value] : file.items()) {
      if (key == "subcommand") {
        if (!value.is_string() || value.get<std::string>() != cmd.name) {
          throw ConfigError(b.config_path + ": config is for subcommand " + value.dump() +
                            ", not \"" + cmd.name + "\"");
        }
        continue;
      }
      auto it = std::find_if(cmd.opts.begin(), cmd.opts.end(), [&](const Opt& o) { return o.key == key; });
      if (it == cmd.opts.end()) {
        throw ConfigError(b.config_path + ": unknown key \"" + key + "\" for " + cmd.name);
      }
      if (!value.is_null() && !matches(value, it->kind)) {
        throw ConfigError(b.config_path + ": \"" + key + "\" must be " + kind_name(it->kind));
      }
      merged[key] = value;
    }
  }

  for (const auto& o : cmd.opts) {
    if (o.kind == Kind::kObject) continue;
    const CLI::Option* opt = b.app->get_option_no_throw(flag_name(o.key));
    if (!opt || opt->count() == 0) continue;
    merged[o.key] = o.kind == Kind::kBool ? json(b.flags.at(o.key)) : convert_flag(b.text.at(o.key), o);
  }
  for (const auto& o : cmd.opts) {
    if (o.required && merged[o.key].is_null()) {
      throw ConfigError(cmd.name + ": " + flag_name(o.key) + " is required");
    }
  }
  return Settings(std::move(merged));
}

// ---------------------------------------------------------------------------
// Shared helpers

unsigned threads_from(const Settings& s) {
  if (!s.has("threads")) return default_thread_count();
  const long long t = s.integer("threads");
  if (t < 1) throw ValidationError("threads must be >= 1");
  return static_cast<unsigned>(t);
}

void write_json(const fs::path& path, const json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_text_file(path, j.dump(2) + "\n");
}

void write_svg(const fs::path& dir, const std::string& name, const svg::Plot& plot, std::ostream& out) {
  fs::create_directories(dir);
  write_text_file(dir / name, svg::render(plot));
  out << "wrote " << (dir / name).string() << "\n";
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// Fitted line with its 95 % band of the mean over [lo, hi].
void add_fit(svg::Plot& plot, const std::string& name, const LinearFit& fit, double lo, double hi,
             bool log2_x = false) {
  svg::Series line{name + " fit", {}, svg::Style::kLine, {}};
  svg::Series band{"", {}, svg::Style::kBand, {}};
  constexpr int kSteps = 24;
  for (int i = 0; i <= kSteps; ++i) {
    const double x = lo + (hi - lo) * i / kSteps;
    const double fx = log2_x ? std::log2(x) : x;
    const double m = fit.predict(fx), se = fit.mean_se(fx);
    line.points.push_back({x, m});
    band.points.push_back({x, m - kZ95 * se});
    band.upper.push_back({x, m + kZ95 * se});
  }
  plot.series.push_back(std::move(band));
  plot.series.push_back(std::move(line));
}

DatasetIndex load_dataset(const Settings& s) { return parse_dataset(fs::path(s.str("dataset"))); }

// ---------------------------------------------------------------------------
// generate

int cmd_generate(const Settings& s, std::ostream& out, std::ostream&) {
  const fs::path out_dir = s.str("out");
  const unsigned threads = threads_from(s);

  GenerationResult result;
  if (auto manifest = s.opt_str("manifest")) {
    result = regenerate_from_manifest(*manifest, out_dir, threads);
  } else {
    json base = s.has("spec") ? s.raw("spec") : json::object();
    const std::pair<const char*, const char*> overrides[] = {
        {"profile", "density_profile"}, {"density", "tree_density"},  {"understorey", "understorey_density"},
        {"lighting", "lighting"},       {"weather", "weather"},       {"terrain_size", "terrain_size"}};
    for (const auto& [key, field] : overrides) {
      if (s.has(key)) base[field] = s.raw(key);
    }
    SceneSpec spec = scene_spec_from_json(base);
    const std::uint64_t seed0 = s.has("seed") ? s.raw("seed").get<std::uint64_t>() : spec.seed;

    const long long n_scenes = s.integer("scenes");
    if (n_scenes < 1) throw ValidationError("scenes must be >= 1");
    std::vector<SceneSpec> specs;
    for (long long i = 0; i < n_scenes; ++i) {
      spec.seed = seed0 + static_cast<std::uint64_t>(i);
      validate(spec);
      specs.push_back(spec);
    }

    GenerateOptions opts;
    if (s.has("frames")) {
      if (s.integer("frames") < 1) throw ValidationError("frames must be >= 1");
      opts.frames_per_scene = static_cast<int>(s.integer("frames"));
    }
    opts.band.min_frames = static_cast<int>(s.integer("min_frames"));
    opts.band.max_frames = static_cast<int>(s.integer("max_frames"));
    opts.band.frames_per_tree = s.number("frames_per_tree");
    opts.width = static_cast<int>(s.integer("width"));
    opts.height = static_cast<int>(s.integer("height"));
    opts.annotate.max_distance = s.number("max_distance");
    opts.annotate.max_occlusion = s.number("max_occlusion");
    opts.threads = threads;
    // Round-trip through the JSON form so the same validation applies as
    // for manifests.
    const unsigned keep_threads = opts.threads;
    opts = generate_options_from_json(to_json(opts));
    opts.threads = keep_threads;
    result = generate_dataset(specs, out_dir, opts);
  }

  int total = 0;
  for (std::size_t i = 0; i < result.scenes.size(); ++i) {
    const auto& sc = result.scenes[i];
    out << "scene " << i << ": seed " << sc.seed << ", " << sc.tree_count << " trees, " << sc.frames
        << " frames, " << sc.annotations << " annotations\n";
    total += sc.frames;
  }
  out << "total: " << total << " frames, " << result.index.annotations.size() << " annotations -> "
      << (out_dir / kAnnotationFile).string() << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// evaluate

svg::Plot pr_plot(const std::vector<PRCurve>& curves, const std::string& title) {
  svg::Plot p;
  p.title = title;
  p.x_label = "recall";
  p.y_label = "interpolated precision";
  for (const auto& c : curves) {
    svg::Series s{"IoU " + fmt("%.2f", c.iou_threshold), {}, svg::Style::kLine, {}};
    for (int r = 0; r < kRecallSamples; ++r) s.points.push_back({r / 100.0, c.interpolated[r]});
    p.series.push_back(std::move(s));
  }
  return p;
}

int cmd_evaluate(const Settings& s, std::ostream& out, std::ostream&) {
  EvalOptions opts;
  opts.threads = threads_from(s);
  const std::string recall = s.str("recall");
  if (recall == "max_recall") {
    opts.recall = RecallConvention::kMaxRecall;
  } else if (recall == "coco") {
    opts.recall = RecallConvention::kCocoMaxDets;
  } else {
    throw ValidationError("recall must be \"max_recall\" or \"coco\"");
  }
  if (s.has("max_dets")) {
    if (s.integer("max_dets") < 1) throw ValidationError("max_dets must be >= 1");
    opts.max_dets = static_cast<std::size_t>(s.integer("max_dets"));
  }
  const DatasetIndex index = load_dataset(s);
  const auto preds = read_detections(s.str("predictions"), index);
  const EvalSummary summary = evaluate(index, preds, opts);

  out << format_summary_table(summary, s.str("label"));
  if (auto path = s.opt_str("out")) {
    write_json(*path, to_json(summary));
    out << "wrote " << *path << "\n";
  }
  if (auto dir = s.opt_str("plots")) {
    write_svg(*dir, "pr_curves_bbox.svg", pr_plot(summary.pr_curves_bb, "Precision-recall, boxes"), out);
    if (!summary.pr_curves_seg.empty()) {
      write_svg(*dir, "pr_curves_segm.svg", pr_plot(summary.pr_curves_seg, "Precision-recall, masks"), out);
    }
  }
  return kOk;
}

// ---------------------------------------------------------------------------
// kp-eval

int cmd_kp_eval(const Settings& s, std::ostream& out, std::ostream&) {
  const fs::path dataset_path = s.str("dataset");
  const DatasetIndex index = parse_dataset(dataset_path);
  const auto preds = read_detections(s.str("predictions"), index);
  const fs::path root = dataset_path.parent_path();

  KeypointEvalOptions opts;
  opts.iou_threshold = s.number("iou");
  DepthLoader loader = [&](const ImageRecord& img) -> std::optional<DepthImage> {
    if (!img.depth_file_name) return std::nullopt;
    return read_depth(root / *img.depth_file_name);
  };
  KeypointErrorReport report = keypoint_errors(index, preds, loader, opts);

  const double max_d = s.number("max_distance"), bin_w = s.number("bin_width");
  if (!(max_d > 0.0) || !(bin_w > 0.0)) throw ValidationError("max_distance and bin_width must be > 0");
  std::vector<std::pair<double, double>> dia, fc;
  for (const auto& r : report.instances) {
    if (!r.distance_m) continue;
    if (r.dia_error_cm) dia.push_back({*r.distance_m, *r.dia_error_cm});
    if (r.fc) fc.push_back({*r.distance_m, r.fc->error_cm});
  }
  const ErrorVsDistance dia_vs = error_vs_distance(dia, max_d, bin_w);
  const ErrorVsDistance fc_vs = error_vs_distance(fc, max_d, bin_w);

  out << format_fc_medians(report) << "\n";
  auto line = [&](const char* name, const std::optional<ErrorAggregate>& a, const char* unit) {
    if (!a) {
      out << name << ": n = 0\n";
      return;
    }
    out << name << ": mean " << fmt("%.2f", a->mean) << " " << unit << ", median " << fmt("%.2f", a->median)
        << " " << unit << " (n = " << a->count << ")\n";
  };
  line("diameter error", report.dia_error_cm, "cm");
  line("felling cut error", report.fc_error_cm, "cm");
  line("inclination error", report.inc_error_deg, "deg");

  if (auto path = s.opt_str("out")) {
    json j = to_json(report);
    j["error_vs_distance"] = {{"diameter", to_json(dia_vs)}, {"felling_cut", to_json(fc_vs)}};
    write_json(*path, j);
    out << "wrote " << *path << "\n";
  }
  if (auto dir = s.opt_str("plots")) {
    svg::Plot p;
    p.title = "Keypoint error against camera distance";
    p.x_label = "distance (m)";
    p.y_label = "error (cm)";
    p.series.push_back({"diameter", dia_vs.points, svg::Style::kPoints, {}});
    p.series.push_back({"felling cut", fc_vs.points, svg::Style::kPoints, {}});
    if (dia_vs.fit) add_fit(p, "diameter", *dia_vs.fit, 0.0, max_d);
    if (fc_vs.fit) add_fit(p, "felling cut", *fc_vs.fit, 0.0, max_d);
    write_svg(*dir, "error_vs_distance.svg", p, out);

    svg::Plot q;
    q.title = "Felling cut offset (pred - gt)";
    q.x_label = "x offset (cm)";
    q.y_label = "y offset (cm, down positive)";
    svg::Series pts{"felling cut", {}, svg::Style::kPoints, {}};
    for (const auto& r : report.instances) {
      if (r.fc) pts.points.push_back({r.fc->dx_cm, r.fc->dy_cm});
    }
    q.series.push_back(std::move(pts));
    write_svg(*dir, "fc_scatter.svg", q, out);
  }
  return kOk;
}

// ---------------------------------------------------------------------------
// analyze

int cmd_occlusion(const Settings& s, std::ostream& out, std::ostream&) {
  const DatasetIndex index = load_dataset(s);
  const auto preds = read_detections(s.str("predictions"), index);
  const OcclusionReport r =
      occlusion_fn_rates(index, preds, static_cast<int>(s.integer("bins")), s.number("iou"));

  out << "bin | support | FN rate (tree) | support | FN rate (base)\n";
  for (const auto& b : r.bins) {
    auto rate = [](std::optional<double> v) { return v ? fmt("%.3f", *v) : std::string("-"); };
    out << fmt("%.2f", b.lo) << "-" << fmt("%.2f", b.hi) << " | " << b.support_tree << " | "
        << rate(b.rate_tree()) << " | " << b.support_base << " | " << rate(b.rate_base()) << "\n";
  }
  if (auto path = s.opt_str("out")) {
    write_json(*path, to_json(r));
    out << "wrote " << *path << "\n";
  }
  if (auto dir = s.opt_str("plots")) {
    svg::Plot p;
    p.title = "False negatives by occlusion";
    p.x_label = "occlusion (bin centre)";
    p.y_label = "FN rate";
    svg::Series tree{"whole tree", {}, svg::Style::kLine, {}};
    svg::Series base{"tree base", {}, svg::Style::kLine, {}};
    for (const auto& b : r.bins) {
      const double c = 0.5 * (b.lo + b.hi);
      if (auto v = b.rate_tree()) tree.points.push_back({c, *v});
      if (auto v = b.rate_base()) base.points.push_back({c, *v});
    }
    p.series.push_back(std::move(tree));
    p.series.push_back(std::move(base));
    write_svg(*dir, "occlusion_fn.svg", p, out);
  }
  return kOk;
}

json read_json_file(const std::string& path) {
  try {
    return json::parse(read_text_file(path));
  } catch (const json::parse_error& e) {
    throw FormatError(path + ": invalid JSON: " + e.what());
  }
}

int cmd_scaling(const Settings& s, std::ostream& out, std::ostream&) {
  const json doc = read_json_file(s.str("input"));
  std::vector<std::pair<std::string, std::vector<ScalingPoint>>> series;
  if (doc.is_object() && doc.contains("series")) {
    if (!doc["series"].is_array()) throw FormatError("scaling input: \"series\" must be an array");
    for (std::size_t i = 0; i < doc["series"].size(); ++i) {
      const json& e = doc["series"][i];
      if (!e.is_object()) throw FormatError("scaling series " + std::to_string(i) + ": expected an object");
      const std::string name = e.contains("name") && e["name"].is_string() ? e["name"].get<std::string>()
                                                                           : "series " + std::to_string(i);
      series.push_back({name, scaling_points_from_json(e)});
    }
  } else {
    series.push_back({s.str("metric"), scaling_points_from_json(doc)});
  }

  std::vector<ScalingFit> fits;
  json arr = json::array();
  for (const auto& [name, pts] : series) {
    auto fit = scaling_fit(pts);
    if (!fit) throw ValidationError(name + ": a scaling fit needs at least 3 points with distinct n");
    json j = to_json(*fit);
    j["name"] = name;
    arr.push_back(std::move(j));
    fits.push_back(std::move(*fit));
  }
  const std::string summary = scaling_summary(fits, s.str("metric"));
  out << summary << "\n";
  if (auto path = s.opt_str("out")) {
    write_json(*path, {{"metric", s.str("metric")}, {"fits", arr}, {"summary", summary}});
    out << "wrote " << *path << "\n";
  }
  if (auto dir = s.opt_str("plots")) {
    svg::Plot p;
    p.title = s.str("metric") + " against training set size";
    p.x_label = "training images (log2 scale)";
    p.y_label = s.str("metric");
    p.log2_x = true;
    for (std::size_t i = 0; i < fits.size(); ++i) {
      svg::Series pts{series[i].first, {}, svg::Style::kPoints, {}};
      for (const auto& q : fits[i].points) pts.points.push_back({q.n, q.ap});
      p.series.push_back(std::move(pts));
      add_fit(p, series[i].first, fits[i].fit, fits[i].points.front().n, fits[i].points.back().n, true);
    }
    write_svg(*dir, "scaling.svg", p, out);
  }
  return kOk;
}

int cmd_transfer(const Settings& s, std::ostream& out, std::ostream&) {
  auto load = [](const std::string& path) {
    try {
      return summary_from_json(read_json_file(path));
    } catch (const json::exception& e) {
      throw FormatError(path + ": not an evaluation summary: " + e.what());
    }
  };
  TransferMeta meta;
  meta.source_name = s.str("source_name");
  meta.target_name = s.str("target_name");
  if (s.has("n_train")) meta.n_train = static_cast<int>(s.integer("n_train"));
  const TransferReport r = transfer_report(load(s.str("source")), load(s.str("target")), meta);
  out << format_transfer_table(std::span(&r, 1));
  if (auto path = s.opt_str("out")) {
    write_json(*path, to_json(r));
    out << "wrote " << *path << "\n";
  }
  return kOk;
}

int cmd_epochs(const Settings& s, std::ostream& out, std::ostream&) {
  const auto curve = epoch_generalization_curve(epoch_points_from_json(read_json_file(s.str("input"))));
  out << "epoch | source AP | target AP\n";
  for (const auto& p : curve) {
    auto v = [](std::optional<double> x) { return x ? fmt("%.1f", *x) : std::string("-"); };
    out << fmt("%g", p.epoch) << " | " << v(p.source_ap) << " | " << v(p.target_ap) << "\n";
  }
  if (auto path = s.opt_str("out")) {
    write_json(*path, epochs_to_json(curve));
    out << "wrote " << *path << "\n";
  }
  if (auto dir = s.opt_str("plots")) {
    svg::Plot p;
    p.title = "Generalization over training epochs";
    p.x_label = "epoch";
    p.y_label = "AP";
    svg::Series src{"source", {}, svg::Style::kLine, {}}, tgt{"target", {}, svg::Style::kLine, {}};
    for (const auto& e : curve) {
      if (e.source_ap) src.points.push_back({e.epoch, *e.source_ap});
      if (e.target_ap) tgt.points.push_back({e.epoch, *e.target_ap});
    }
    p.series.push_back(std::move(src));
    p.series.push_back(std::move(tgt));
    write_svg(*dir, "epochs.svg", p, out);
  }
  return kOk;
}

// ---------------------------------------------------------------------------
// perturb

int cmd_perturb(const Settings& s, std::ostream& out, std::ostream&) {
  const fs::path dataset_path = s.str("dataset");
  const DatasetIndex index = parse_dataset(dataset_path);
  const std::string mode = s.str("detector");
  std::vector<Detection> dets;

  if (mode == "noise") {
    json nj = {{"p_fn", s.raw("p_fn")},           {"drop_by_occlusion", s.raw("drop_by_occlusion")},
               {"lambda_fp", s.raw("lambda_fp")}, {"sigma_b", s.raw("sigma_b")},
               {"sigma_k", s.raw("sigma_k")},     {"mask_px", s.raw("mask_px")},
               {"score_model", s.raw("score_model")}, {"seed", s.raw("seed")}};
    dets = perturb(index, noise_model_from_json(nj));
  } else if (mode == "naive_depth") {
    const auto tree = index.tree_category_id().value_or(1);
    std::vector<std::vector<Detection>> per_image(index.images.size());
    parallel_for(index.images.size(), threads_from(s), [&](std::size_t i) {
      const ImageRecord& img = index.images[i];
      if (!img.depth_file_name) return;
      const DepthImage depth = read_depth(dataset_path.parent_path() / *img.depth_file_name);
      per_image[i] = naive_depth_detector(depth, img.id,
                                          img.intrinsics.value_or(CameraIntrinsics::for_resolution(img.width, img.height)));
      for (auto& d : per_image[i]) d.category_id = tree;
    });
    for (auto& v : per_image) dets.insert(dets.end(), v.begin(), v.end());
  } else {
    throw ValidationError("detector must be \"noise\" or \"naive_depth\"");
  }

  const fs::path path = s.str("out");
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_text_file(path, dump_detections(dets));
  out << dets.size() << " detections -> " << path.string() << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------

Opt threads_opt() { return {"threads", Kind::kInt, nullptr, "worker threads (default: $TIMBERLENS_THREADS, else all cores)"}; }

std::vector<Command> commands() {
  std::vector<Command> c;
  c.push_back({"generate",
               "Render synthetic RGB-D frames with annotations",
               {{"out", Kind::kString, nullptr, "output directory", true},
                {"seed", Kind::kUInt, nullptr, "seed of the first scene; scene i uses seed + i"},
                {"scenes", Kind::kInt, 1, "number of scenes"},
                {"frames", Kind::kInt, nullptr, "frames per scene (default: scale with tree count)"},
                {"width", Kind::kInt, 1280, "image width (px)"},
                {"height", Kind::kInt, 720, "image height (px)"},
                {"min_frames", Kind::kInt, 200, "lower frame bound per scene in dataset mode"},
                {"max_frames", Kind::kInt, 1000, "upper frame bound per scene in dataset mode"},
                {"frames_per_tree", Kind::kDouble, 2.0, "frames per tree in dataset mode"},
                {"max_distance", Kind::kDouble, 10.0, "farthest annotated trunk (m)"},
                {"max_occlusion", Kind::kDouble, 0.7, "largest annotated occlusion fraction"},
                {"profile", Kind::kString, nullptr, "plantation | managed | natural"},
                {"density", Kind::kDouble, nullptr, "trees per hectare"},
                {"understorey", Kind::kDouble, nullptr, "understorey density in [0, 1]"},
                {"lighting", Kind::kString, nullptr, "morning | day | evening | night"},
                {"weather", Kind::kString, nullptr, "clear | fog | rain | snow"},
                {"terrain_size", Kind::kDouble, nullptr, "terrain side length (m)"},
                {"spec", Kind::kObject, nullptr, "scene spec object (config file only)"},
                {"manifest", Kind::kString, nullptr, "regenerate from an existing manifest"},
                threads_opt()},
               cmd_generate});
  c.push_back({"evaluate",
               "Box and mask AP/AR of predictions against a dataset",
               {{"dataset", Kind::kString, nullptr, "dataset JSON", true},
                {"predictions", Kind::kString, nullptr, "detections JSON", true},
                {"out", Kind::kString, nullptr, "summary JSON path"},
                {"plots", Kind::kString, nullptr, "directory for SVG precision-recall curves"},
                {"label", Kind::kString, "predictions", "row label of the printed table"},
                {"recall", Kind::kString, "max_recall", "recall convention: max_recall | coco"},
                {"max_dets", Kind::kInt, nullptr, "keep the top-scoring detections per image"},
                threads_opt()},
               cmd_evaluate});
  c.push_back({"kp-eval",
               "Metric keypoint errors using the dataset depth images",
               {{"dataset", Kind::kString, nullptr, "dataset JSON", true},
                {"predictions", Kind::kString, nullptr, "detections JSON with keypoints", true},
                {"out", Kind::kString, nullptr, "report JSON path"},
                {"plots", Kind::kString, nullptr, "directory for SVG plots"},
                {"iou", Kind::kDouble, 0.5, "box IoU for pairing predictions with ground truth"},
                {"max_distance", Kind::kDouble, kMaxRange, "distance cut-off of the error trend (m)"},
                {"bin_width", Kind::kDouble, 1.0, "distance bin width (m)"}},
               cmd_kp_eval});
  c.push_back({"perturb",
               "Reference predictions: noisy ground truth or the naive depth detector",
               {{"dataset", Kind::kString, nullptr, "dataset JSON", true},
                {"out", Kind::kString, nullptr, "detections JSON path", true},
                {"detector", Kind::kString, "noise", "noise | naive_depth"},
                {"p_fn", Kind::kDouble, 0.0, "drop probability per ground truth"},
                {"drop_by_occlusion", Kind::kBool, false, "drop with probability occlusion_tree"},
                {"lambda_fp", Kind::kDouble, 0.0, "spurious boxes per image (Poisson mean)"},
                {"sigma_b", Kind::kDouble, 0.0, "box corner jitter (px)"},
                {"sigma_k", Kind::kDouble, 0.0, "keypoint jitter (px)"},
                {"mask_px", Kind::kInt, 0, "mask dilation (> 0) or erosion (< 0) radius"},
                {"score_model", Kind::kString, "iou_proportional", "iou_proportional | uniform"},
                {"seed", Kind::kUInt, 0, "noise seed"},
                threads_opt()},
               cmd_perturb});
  return c;
}

std::vector<Command> analyze_commands() {
  std::vector<Command> c;
  c.push_back({"occlusion",
               "False-negative rate per occlusion bin",
               {{"dataset", Kind::kString, nullptr, "dataset JSON with occlusion values", true},
                {"predictions", Kind::kString, nullptr, "detections JSON", true},
                {"bins", Kind::kInt, 10, "number of occlusion bins"},
                {"iou", Kind::kDouble, 0.5, "box IoU for a hit"},
                {"out", Kind::kString, nullptr, "report JSON path"},
                {"plots", Kind::kString, nullptr, "directory for SVG plots"}},
               cmd_occlusion});
  c.push_back({"scaling",
               "AP against log2 of the training set size",
               {{"input", Kind::kString, nullptr, "points JSON: [{n, ap}] or {series: [{name, points}]}", true},
                {"metric", Kind::kString, "AP", "metric name used in the summary"},
                {"out", Kind::kString, nullptr, "report JSON path"},
                {"plots", Kind::kString, nullptr, "directory for SVG plots"}},
               cmd_scaling});
  c.push_back({"transfer",
               "Cross-domain table from two evaluation summaries",
               {{"source", Kind::kString, nullptr, "summary JSON on the source domain", true},
                {"target", Kind::kString, nullptr, "summary JSON on the target domain", true},
                {"source_name", Kind::kString, "source", "source dataset name"},
                {"target_name", Kind::kString, "target", "target dataset name"},
                {"n_train", Kind::kInt, nullptr, "training images"},
                {"out", Kind::kString, nullptr, "report JSON path"}},
               cmd_transfer});
  c.push_back({"epochs",
               "Source and target AP across training epochs",
               {{"input", Kind::kString, nullptr, "points JSON: [{epoch, source_ap, target_ap}]", true},
                {"out", Kind::kString, nullptr, "report JSON path"},
                {"plots", Kind::kString, nullptr, "directory for SVG plots"}},
               cmd_epochs});
  return c;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Synthetic forest RGB-D data generation and tree detection evaluation", "timberlens"};
  app.require_subcommand(1);

  const std::vector<Command> top = commands();
  const std::vector<Command> analyze = analyze_commands();
  std::vector<std::unique_ptr<Bound>> bound;

  for (const auto& cmd : top) {
    CLI::App* sub = app.add_subcommand(cmd.name, cmd.help);
    bound.push_back(std::make_unique<Bound>());
    bind(*sub, cmd, *bound.back());
  }
  CLI::App* an = app.add_subcommand("analyze", "Studies: occlusion | scaling | transfer | epochs");
  an->require_subcommand(1);
  for (const auto& cmd : analyze) {
    CLI::App* sub = an->add_subcommand(cmd.name, cmd.help);
    bound.push_back(std::make_unique<Bound>());
    bind(*sub, cmd, *bound.back());
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kConfigError;
  }

  const Bound* chosen = nullptr;
  for (const auto& b : bound) {
    if (b->app->parsed()) chosen = b.get();
  }
  if (!chosen) {
    err << "error: no subcommand given\n";
    return kConfigError;
  }

  try {
    const Settings settings = resolve(*chosen);
    return chosen->cmd->run(settings, out, err);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const ValidationError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const DatasetParseError& e) {
    err << "schema error: " << e.offenses().size() << " offending record(s)\n";
    for (const auto& o : e.offenses()) {
      err << "  " << o.kind << (o.id ? " id " + std::to_string(*o.id) : std::string()) << " at position "
          << o.position << ": " << o.reason << "\n";
    }
    return kSchemaError;
  } catch (const UnknownImageError& e) {
    err << "schema error: predictions reference unknown image id(s):";
    for (auto id : e.ids()) err << " " << id;
    err << "\n";
    return kSchemaError;
  } catch (const FormatError& e) {
    err << "schema error: " << e.what() << "\n";
    return kSchemaError;
  } catch (const IoError& e) {
    err << "I/O error: " << e.what() << "\n";
    return kIoError;
  } catch (const fs::filesystem_error& e) {
    err << "I/O error: " << e.what() << "\n";
    return kIoError;
  } catch (const json::exception& e) {
    err << "schema error: " << e.what() << "\n";
    return kSchemaError;
  }
}

}  // namespace timberlens::cli
