#include "cli.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <ostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "gausshead/config.hpp"
#include "gausshead/error.hpp"
#include "gausshead/experiments.hpp"
#include "gausshead/io.hpp"
#include "gausshead/model.hpp"
#include "gausshead/rng.hpp"
#include "gausshead/scene.hpp"
#include "gausshead/train.hpp"

namespace gausshead::cli {
namespace {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

enum class Kind { kString, kInt, kReal, kBool };

struct OptionDef {
  std::string name;  // snake_case; flag is --kebab-case, env is GAUSSHEAD_UPPER_CASE
  Kind kind;
  ordered_json def;  // null means "unset"
  std::string help;
  bool required = false;
};

std::string flag_name(const std::string& name) {
  std::string f = "--" + name;
  std::replace(f.begin(), f.end(), '_', '-');
  return f;
}

std::string env_name(const std::string& name) {
  std::string e = "GAUSSHEAD_" + name;
  for (char& ch : e) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  return e;
}

ordered_json parse_typed(const std::string& text, Kind kind, const std::string& where) {
  switch (kind) {
    case Kind::kString:
      return text;
    case Kind::kInt: {
      long long v = 0;
      const auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
      if (ec != std::errc() || p != text.data() + text.size()) {
        throw ValidationError(where + ": expected an integer, got '" + text + "'");
      }
      return v;
    }
    case Kind::kReal: {
      double v = 0;
      const auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
      if (ec != std::errc() || p != text.data() + text.size()) {
        throw ValidationError(where + ": expected a number, got '" + text + "'");
      }
      return v;
    }
    case Kind::kBool: {
      std::string t = text;
      for (char& ch : t) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
      if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
      if (t == "false" || t == "0" || t == "no" || t == "off") return false;
      throw ValidationError(where + ": expected true or false, got '" + text + "'");
    }
  }
  return nullptr;
}

ordered_json check_json_type(const ordered_json& v, Kind kind, const std::string& where) {
  const bool ok = (kind == Kind::kString && v.is_string()) ||
                  (kind == Kind::kInt && v.is_number_integer()) ||
                  (kind == Kind::kReal && v.is_number()) ||
                  (kind == Kind::kBool && v.is_boolean());
  if (!ok) {
    static constexpr const char* kNames[] = {"a string", "an integer", "a number", "a boolean"};
    throw ValidationError(where + ": expected " + kNames[static_cast<int>(kind)]);
  }
  if (kind == Kind::kReal) return v.get<double>();
  return v;
}

/// Resolved option values for one invocation.
class Options {
 public:
  explicit Options(ordered_json values) : values_(std::move(values)) {}

  [[nodiscard]] bool has(const std::string& name) const { return !values_.at(name).is_null(); }
  [[nodiscard]] std::string str(const std::string& name) const { return values_.at(name).get<std::string>(); }
  [[nodiscard]] long long integer(const std::string& name) const { return values_.at(name).get<long long>(); }
  [[nodiscard]] int int32(const std::string& name) const {
    const long long v = integer(name);
    if (v < INT32_MIN || v > INT32_MAX) throw ValidationError(name + ": out of range");
    return static_cast<int>(v);
  }
  [[nodiscard]] double real(const std::string& name) const { return values_.at(name).get<double>(); }
  [[nodiscard]] bool flag(const std::string& name) const { return values_.at(name).get<bool>(); }
  [[nodiscard]] std::uint64_t seed() const {
    const long long v = integer("seed");
    if (v < 0) throw ValidationError("seed: must be >= 0");
    return static_cast<std::uint64_t>(v);
  }
  [[nodiscard]] int threads() const {
    const int t = int32("threads");
    if (t < 1) throw ValidationError("threads: must be >= 1");
    return t;
  }
  [[nodiscard]] fs::path out() const { return str("out"); }
  [[nodiscard]] const ordered_json& json() const { return values_; }

 private:
  ordered_json values_;
};

struct Command {
  std::string name;
  std::string help;
  std::vector<OptionDef> options;
  std::function<void(const Options&, std::ostream&)> action;
};

std::string version_text() {
  return std::string("gausshead ") + GAUSSHEAD_VERSION + "\nformats: annotations/detections/feature-map v" +
         kFormatVersion + ", model v" + std::to_string(kModelFormatVersion) + "\n";
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write " + path.string());
  f << content;
  if (!f) throw Error("write failed: " + path.string());
}

template <typename Fn>
void write_stream(const fs::path& path, Fn&& fn) {
  std::ostringstream s;
  fn(s);
  write_file(path, s.str());
}

std::vector<int> parse_int_list(const std::string& text, const std::string& where) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    out.push_back(static_cast<int>(parse_typed(item, Kind::kInt, where).get<long long>()));
  }
  if (out.empty()) throw ValidationError(where + ": empty list");
  return out;
}

BackboneSpec parse_backbone(const std::string& text) {
  BackboneSpec b;
  b.channels = parse_int_list(text, "backbone");
  for (int c : b.channels) {
    if (c < 1) throw ValidationError("backbone: channel counts must be >= 1");
  }
  return b;
}

std::map<int, double> parse_class_iou(const std::string& text) {
  std::map<int, double> out;
  if (text.empty()) return out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) {
      throw ValidationError("class_iou: expected class:threshold pairs, got '" + item + "'");
    }
    const auto c = parse_typed(item.substr(0, colon), Kind::kInt, "class_iou").get<long long>();
    out[static_cast<int>(c)] = parse_typed(item.substr(colon + 1), Kind::kReal, "class_iou").get<double>();
  }
  return out;
}

ordered_json counts_json(const ClassCounts& c) { return {{"fp", c.fp}, {"tp", c.tp}, {"gt", c.gt}}; }

// ---- option groups --------------------------------------------------------

std::vector<OptionDef> scene_options() {
  return {
      {"image_size", Kind::kInt, 64, "square image side in pixels"},
      {"min_objects", Kind::kInt, 1, "minimum objects per image"},
      {"max_objects", Kind::kInt, 4, "maximum objects per image"},
      {"classes", Kind::kInt, 3, "number of classes"},
      {"min_size", Kind::kReal, 0.12, "minimum box side (fraction of image)"},
      {"max_size", Kind::kReal, 0.4, "maximum box side (fraction of image)"},
      {"noise_magnitude", Kind::kReal, 0.1, "label jitter relative to box size"},
      {"pixel_noise", Kind::kReal, 12.0, "uniform pixel noise amplitude"},
  };
}

SceneSpec scene_from(const Options& o) {
  SceneSpec s;
  s.image_size = o.int32("image_size");
  s.min_objects = o.int32("min_objects");
  s.max_objects = o.int32("max_objects");
  s.classes = o.int32("classes");
  s.min_size = o.real("min_size");
  s.max_size = o.real("max_size");
  s.noise_magnitude = o.real("noise_magnitude");
  s.pixel_noise = o.real("pixel_noise");
  return s;
}

std::vector<OptionDef> train_options() {
  return {
      {"backbone", Kind::kString, "8,16,16,32", "backbone channels per stage"},
      {"lr", Kind::kReal, 0.01, "learning rate"},
      {"batch", Kind::kInt, 16, "images per batch"},
      {"epochs", Kind::kInt, 15, "training epochs"},
      {"momentum", Kind::kReal, 0.0, "SGD momentum (0 = plain SGD)"},
      {"clip_norm", Kind::kReal, 0.0, "global gradient-norm clip (0 = off)"},
      {"ignore_iou", Kind::kReal, 0.5, "objectness ignore threshold"},
  };
}

TrainConfig train_from(const Options& o) {
  TrainConfig t;
  t.lr = o.real("lr");
  t.batch = o.int32("batch");
  t.epochs = o.int32("epochs");
  t.momentum = o.real("momentum");
  t.clip_norm = o.real("clip_norm");
  t.loss.ignore_iou = o.real("ignore_iou");
  t.threads = o.threads();
  t.deterministic = o.flag("deterministic");
  t.validate();
  return t;
}

std::vector<OptionDef> inference_options(bool use_uncertainty) {
  return {
      {"threshold", Kind::kReal, 0.5, "detection criterion threshold"},
      {"nms_iou", Kind::kReal, 0.45, "class-wise NMS IOU threshold"},
      {"use_uncertainty", Kind::kBool, use_uncertainty, "include (1 - uncertainty) in the score"},
      {"all_classes", Kind::kBool, false, "emit every class above threshold, not only the argmax"},
  };
}

InferenceOptions inference_from(const Options& o) {
  InferenceOptions io;
  io.detect.threshold = o.real("threshold");
  io.detect.use_uncertainty = o.flag("use_uncertainty");
  io.detect.all_classes = o.flag("all_classes");
  io.nms_iou = o.real("nms_iou");
  if (!(io.detect.threshold >= 0 && io.detect.threshold < 1)) {
    throw ValidationError("threshold: must be in [0, 1)");
  }
  if (!(io.nms_iou > 0 && io.nms_iou <= 1)) throw ValidationError("nms_iou: must be in (0, 1]");
  return io;
}

template <typename... Groups>
std::vector<OptionDef> concat(Groups&&... groups) {
  std::vector<OptionDef> out;
  (out.insert(out.end(), groups.begin(), groups.end()), ...);
  return out;
}

// ---- commands -------------------------------------------------------------

void cmd_cluster_anchors(const Options& o, std::ostream& log) {
  const AnnotationSet ann = read_annotations(o.str("annotations"));
  std::vector<Box> boxes;
  int max_class = -1;
  for (const auto& [id, gts] : ann) {
    for (const GroundTruth& g : gts) {
      boxes.push_back(g.box);
      max_class = std::max(max_class, g.class_id);
    }
  }
  KmeansOptions ko;
  ko.k = o.int32("k");
  ko.image_width = o.int32("image_width");
  ko.image_height = o.int32("image_height");
  ko.max_iters = o.int32("max_iters");
  ko.seed = o.seed();
  if (ko.image_width < 1) throw ValidationError("image_width: must be >= 1");
  if (ko.image_height < 1) throw ValidationError("image_height: must be >= 1");
  const KmeansResult res = kmeans_anchors(boxes, ko);

  ordered_json doc;
  ordered_json anchors = ordered_json::array();
  for (const Anchor& a : res.anchors) anchors.push_back({a.w, a.h});
  doc["anchors"] = std::move(anchors);
  doc["objective"] = res.objective;
  doc["iterations"] = res.iterations;
  doc["converged"] = res.converged;
  write_file(o.out() / "anchors.json", doc.dump(2) + "\n");

  if (const int grid = o.int32("grid"); grid > 0) {
    int classes = o.int32("classes");
    if (classes == 0) classes = max_class + 1;
    ModelConfig cfg;
    cfg.grid = GridSpec{grid, grid, ko.k, classes, ko.image_width, ko.image_height};
    cfg.anchors = res.anchors;
    for (int c = 0; c < classes; ++c) cfg.class_names.push_back("class" + std::to_string(c));
    cfg.validate();
    save_config(cfg, o.out() / "model_config.json");
  }
  log << "clustered " << boxes.size() << " boxes into " << res.anchors.size() << " anchors\n";
}

void cmd_gen_data(const Options& o, std::ostream& log) {
  SceneSpec s = scene_from(o);
  s.noise_prob = o.real("noise_prob");
  s.seed = o.seed();
  s.validate();
  const int n = o.int32("n");
  if (n < 0) throw ValidationError("n: must be >= 0");
  const Dataset data = gen_dataset(s, n);
  write_dataset(data, o.out());
  write_stream(o.out() / "rendered.jsonl",
               [&](std::ostream& f) { write_annotations(f, data.rendered_annotations()); });
  log << "wrote " << n << " images to " << o.out().string() << "\n";
}

void cmd_train(const Options& o, std::ostream& log) {
  const ModelConfig cfg = load_config(o.str("model_config"));
  const HeadMode mode = parse_head_mode(o.str("mode"));
  TrainConfig tc = train_from(o);
  tc.seed = child_seed(o.seed(), "train");
  const Dataset data = read_dataset(o.str("data"));
  for (const Sample& s : data.samples) {
    for (const GroundTruth& g : s.labels) validate_ground_truth(g, cfg.grid.classes);
  }
  ToyModel model(cfg, mode, parse_backbone(o.str("backbone")), child_seed(o.seed(), "model"));
  const auto entries = train(model, data, tc, [&](const EpochLog& e) {
    log << "epoch " << e.epoch << " loss " << format_double(e.mean.total) << "\n";
  });
  model.save(o.out() / "model.json");
  write_stream(o.out() / "train_log.csv", [&](std::ostream& f) { write_train_log(f, entries); });
}

void cmd_detect(const Options& o, std::ostream& log) {
  const InferenceOptions io = inference_from(o);
  DetectionSet dets;
  if (o.has("features")) {
    if (o.has("model") || o.has("data")) {
      throw ValidationError("features: cannot be combined with --model/--data");
    }
    if (!o.has("model_config")) throw ValidationError("model_config: required with --features");
    const ModelConfig cfg = load_config(o.str("model_config"));
    const fs::path path = o.str("features");
    const RawGrid raw = read_feature_map(path);
    raw.check_matches(cfg.grid);
    const std::string id = o.str("image_id").empty() ? path.stem().string() : o.str("image_id");
    auto found = nms(extract_detections(raw, cfg.grid, cfg.anchors, io.detect), io.nms_iou);
    if (!found.empty()) dets[id] = std::move(found);
  } else {
    if (!o.has("model") || !o.has("data")) {
      throw ValidationError("model: either --features or both --model and --data are required");
    }
    const ToyModel model = ToyModel::load(o.str("model"));
    const Dataset data = read_dataset(o.str("data"));
    dets = detect_dataset(model, data, io, o.threads());
  }
  write_stream(o.out() / "detections.jsonl", [&](std::ostream& f) { write_detections(f, dets); });
  std::size_t n = 0;
  for (const auto& [id, d] : dets) n += d.size();
  log << "wrote " << n << " detections\n";
}

void cmd_eval(const Options& o, std::ostream& log) {
  EvalConfig cfg;
  cfg.default_iou = o.real("iou");
  cfg.class_iou = parse_class_iou(o.str("class_iou"));
  cfg.score_threshold = o.real("score_threshold");
  cfg.eleven_point = o.flag("eleven_point");
  cfg.validate();
  const DetectionSet dets = read_detections(o.str("detections"));
  const AnnotationSet gts = read_annotations(o.str("annotations"));
  const MapReport rep = evaluate_map(dets, gts, cfg, o.int32("classes"));

  ordered_json doc;
  doc["map"] = rep.map;
  ordered_json per_class = ordered_json::object();
  for (const ClassReport& c : rep.per_class) {
    ordered_json entry;
    entry["ap"] = c.ap ? ordered_json(*c.ap) : ordered_json(nullptr);
    entry.update(counts_json(c.counts));
    per_class[std::to_string(c.class_id)] = std::move(entry);
    write_stream(o.out() / ("pr_class" + std::to_string(c.class_id) + ".csv"), [&](std::ostream& f) {
      f << "score,precision,recall\n";
      for (const PrPoint& p : c.curve) {
        f << format_double(p.score) << ',' << format_double(p.precision) << ','
          << format_double(p.recall) << '\n';
      }
    });
  }
  doc["per_class"] = std::move(per_class);
  doc["fp"] = rep.counts.fp;
  doc["tp"] = rep.counts.tp;
  doc["gt"] = rep.counts.gt;
  doc["notices"] = rep.notices;
  write_file(o.out() / "report.json", doc.dump(2) + "\n");
  for (const std::string& n : rep.notices) log << "notice: " << n << "\n";
  log << "mAP " << format_double(rep.map) << "\n";
}

void cmd_experiment_iou(const Options& o, std::ostream& log) {
  IouExperimentOptions eo;
  eo.inference = inference_from(o);
  eo.match_iou = o.real("match_iou");
  eo.min_tp = o.int32("min_tp");
  eo.threads = o.threads();
  const ToyModel model = ToyModel::load(o.str("model"));
  const Dataset data = read_dataset(o.str("data"));
  const IouExperimentReport rep = experiment_iou_vs_uncertainty(model, data, eo);
  write_stream(o.out() / "iou_uncertainty.csv", [&](std::ostream& f) { write_iou_report(f, rep); });
  write_stream(o.out() / "tp_pairs.csv", [&](std::ostream& f) {
    f << "iou,uncertainty\n";
    for (std::size_t n = 0; n < rep.tp_iou.size(); ++n) {
      f << format_double(rep.tp_iou[n]) << ',' << format_double(rep.tp_uncertainty[n]) << '\n';
    }
  });
  ordered_json doc;
  doc["tp"] = rep.tp;
  doc["spearman"] = rep.spearman ? ordered_json(*rep.spearman) : ordered_json(nullptr);
  write_file(o.out() / "report.json", doc.dump(2) + "\n");
  log << "TPs " << rep.tp << ", spearman "
      << (rep.spearman ? format_double(*rep.spearman) : std::string("undefined")) << "\n";
}

void cmd_experiment_noise(const Options& o, std::ostream& log) {
  ToySetup setup;
  setup.scene = scene_from(o);
  setup.backbone = parse_backbone(o.str("backbone"));
  setup.train = train_from(o);
  setup.inference = inference_from(o);
  setup.train_images = o.int32("train_images");
  setup.val_images = o.int32("val_images");
  setup.eval.default_iou = o.real("iou");
  setup.eval.score_threshold = o.real("threshold");
  setup.ap_threshold = o.real("ap_threshold");
  setup.model = toy_model_config(setup.scene, o.int32("grid"), o.int32("anchors"),
                                 child_seed(o.seed(), "anchors"));
  const int runs = o.int32("runs");
  if (runs < 2) throw ValidationError("runs: must be >= 2");
  std::vector<std::uint64_t> seeds;
  for (int r = 0; r < runs; ++r) seeds.push_back(child_seed(o.seed(), "noise/run", r));
  const NoiseReport rep = experiment_noise_robustness(setup, o.real("noise_prob"), seeds);

  write_stream(o.out() / "noise_rows.csv", [&](std::ostream& f) { write_noise_rows(f, rep); });
  write_stream(o.out() / "noise_summary.csv", [&](std::ostream& f) { write_noise_summary(f, rep); });
  save_config(setup.model, o.out() / "model_config.json");
  for (const ModeSummary& s : rep.summary) {
    log << to_string(s.mode) << ": mAP " << format_double(s.mean_map) << " +- "
        << format_double(s.ci95) << ", mean FP " << format_double(s.mean_fp) << "\n";
  }
  log << "seeds with fewer gaussian FP: " << rep.seeds_with_fewer_gaussian_fp << "/" << runs << "\n";
}

std::vector<Command> commands() {
  const ordered_json none = nullptr;
  return {
      {"cluster-anchors",
       "k-means anchor clustering over annotation boxes",
       {{"annotations", Kind::kString, none, "annotations JSONL", true},
        {"k", Kind::kInt, 9, "number of anchors"},
        {"image_width", Kind::kInt, none, "image width in pixels", true},
        {"image_height", Kind::kInt, none, "image height in pixels", true},
        {"max_iters", Kind::kInt, 300, "iteration cap"},
        {"grid", Kind::kInt, 0, "also write model_config.json for a grid x grid head"},
        {"classes", Kind::kInt, 0, "class count for model_config.json (0: from annotations)"}},
       cmd_cluster_anchors},
      {"gen-data",
       "generate a synthetic dataset",
       concat(scene_options(),
              std::vector<OptionDef>{{"n", Kind::kInt, 1000, "number of images"},
                                     {"noise_prob", Kind::kReal, 0.0, "label jitter probability"}}),
       cmd_gen_data},
      {"train",
       "train a toy detector",
       concat(std::vector<OptionDef>{{"data", Kind::kString, none, "dataset directory", true},
                                     {"model_config", Kind::kString, none, "model config JSON", true},
                                     {"mode", Kind::kString, "gaussian", "gaussian or deterministic"}},
              train_options()),
       cmd_train},
      {"detect",
       "decode detections from a feature map or a trained model",
       concat(std::vector<OptionDef>{{"features", Kind::kString, none, "raw feature-map file"},
                                     {"model_config", Kind::kString, none, "model config for --features"},
                                     {"image_id", Kind::kString, "", "image id for --features (default: file stem)"},
                                     {"model", Kind::kString, none, "trained model JSON"},
                                     {"data", Kind::kString, none, "dataset directory"}},
              inference_options(true)),
       cmd_detect},
      {"eval",
       "mAP evaluation of detections against annotations",
       {{"detections", Kind::kString, none, "detections JSONL", true},
        {"annotations", Kind::kString, none, "annotations JSONL", true},
        {"iou", Kind::kReal, 0.5, "default TP IOU threshold"},
        {"class_iou", Kind::kString, "", "per-class thresholds, e.g. 0:0.7,1:0.5"},
        {"score_threshold", Kind::kReal, 0.5, "score threshold for FP/TP counts"},
        {"eleven_point", Kind::kBool, false, "11-point interpolated AP"},
        {"classes", Kind::kInt, 0, "number of classes to report"}},
       cmd_eval},
      {"experiment-iou",
       "relate TP IOU to predicted localization uncertainty",
       concat(std::vector<OptionDef>{{"model", Kind::kString, none, "trained gaussian model", true},
                                     {"data", Kind::kString, none, "validation dataset directory", true},
                                     {"match_iou", Kind::kReal, 0.5, "TP IOU threshold"},
                                     {"min_tp", Kind::kInt, 50, "minimum number of TPs"}},
              inference_options(false)),
       cmd_experiment_iou},
      {"experiment-noise",
       "gaussian vs deterministic head under label noise",
       concat(scene_options(), train_options(), inference_options(true),
              std::vector<OptionDef>{{"noise_prob", Kind::kReal, 0.3, "label jitter probability"},
                                     {"train_images", Kind::kInt, 1000, "training images per run"},
                                     {"val_images", Kind::kInt, 300, "clean validation images per run"},
                                     {"grid", Kind::kInt, 8, "grid cells per side"},
                                     {"anchors", Kind::kInt, 3, "anchors per cell"},
                                     {"runs", Kind::kInt, 5, "number of seeds"},
                                     {"iou", Kind::kReal, 0.5, "evaluation IOU threshold"},
                                     {"ap_threshold", Kind::kReal, 0.005, "extraction threshold for AP"}}),
       cmd_experiment_noise},
  };
}

std::vector<OptionDef> common_options() {
  const int hw = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  return {
      {"out", Kind::kString, nullptr, "output directory", true},
      {"seed", Kind::kInt, 0, "root seed"},
      {"threads", Kind::kInt, hw, "worker threads"},
      {"deterministic", Kind::kBool, true, "fixed-order reductions"},
  };
}

ordered_json resolve(const std::vector<OptionDef>& defs, const std::string& config_path,
                     const std::map<std::string, std::string>& flags) {
  ordered_json values = ordered_json::object();
  for (const OptionDef& d : defs) values[d.name] = d.def;

  if (!config_path.empty()) {
    const std::string text = read_text_file(config_path);
    ordered_json doc;
    try {
      doc = ordered_json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(config_path + ": " + e.what());
    }
    if (!doc.is_object()) throw ValidationError(config_path + ": expected a JSON object");
    for (const auto& [key, v] : doc.items()) {
      const auto it = std::find_if(defs.begin(), defs.end(), [&](const OptionDef& d) { return d.name == key; });
      if (it == defs.end()) throw ValidationError(config_path + ": unknown option '" + key + "'");
      values[key] = check_json_type(v, it->kind, config_path + ": " + key);
    }
  }
  for (const OptionDef& d : defs) {
    const std::string env = env_name(d.name);
    if (const char* v = std::getenv(env.c_str())) values[d.name] = parse_typed(v, d.kind, env);
  }
  for (const OptionDef& d : defs) {
    if (const auto it = flags.find(d.name); it != flags.end()) {
      values[d.name] = parse_typed(it->second, d.kind, flag_name(d.name));
    }
  }
  for (const OptionDef& d : defs) {
    if (d.required && values[d.name].is_null()) {
      throw ValidationError(d.name + ": required (" + flag_name(d.name) + ", " + env_name(d.name) +
                            " or config file)");
    }
  }
  return values;
}

void write_manifest(const std::string& command, const Options& opts) {
  ordered_json m;
  m["command"] = command;
  m["version"] = GAUSSHEAD_VERSION;
  m["format_version"] = kFormatVersion;
  m["model_format_version"] = kModelFormatVersion;
  m["seed"] = opts.json().at("seed");
  m["options"] = opts.json();
  write_file(opts.out() / "manifest.json", m.dump(2) + "\n");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Gaussian detection head toolkit", "gausshead"};
  app.require_subcommand(0, 1);
  bool show_version = false;
  app.add_flag("--version", show_version, "print artifact and format versions");

  struct Registered {
    Command cmd;
    std::vector<OptionDef> defs;
    CLI::App* sub = nullptr;
    std::string config;
    std::map<std::string, std::string> text;
    std::map<std::string, bool> bools;
    std::map<std::string, CLI::Option*> handles;
  };
  std::vector<std::unique_ptr<Registered>> regs;
  for (Command& c : commands()) {
    auto r = std::make_unique<Registered>();
    r->cmd = std::move(c);
    r->defs = concat(common_options(), r->cmd.options);
    r->sub = app.add_subcommand(r->cmd.name, r->cmd.help);
    r->sub->add_option("--config", r->config, "JSON file of option values");
    for (const OptionDef& d : r->defs) {
      const std::string f = flag_name(d.name);
      if (d.kind == Kind::kBool) {
        r->handles[d.name] = r->sub->add_flag(f + ",!--no-" + f.substr(2), r->bools[d.name], d.help);
      } else {
        static constexpr const char* kTypeNames[] = {"TEXT", "INT", "FLOAT", "BOOL"};
        r->handles[d.name] = r->sub->add_option(f, r->text[d.name], d.help)
                                 ->type_name(kTypeNames[static_cast<int>(d.kind)]);
      }
    }
    regs.push_back(std::move(r));
  }

  std::vector<std::string> rev(args.begin() + (args.empty() ? 0 : 1), args.end());
  std::reverse(rev.begin(), rev.end());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  if (show_version) {
    out << version_text();
    return kExitOk;
  }

  for (const auto& r : regs) {
    if (!r->sub->parsed()) continue;
    try {
      std::map<std::string, std::string> flags;
      for (const OptionDef& d : r->defs) {
        if (r->handles[d.name]->count() == 0) continue;
        flags[d.name] = d.kind == Kind::kBool ? (r->bools[d.name] ? "true" : "false") : r->text[d.name];
      }
      const Options opts(resolve(r->defs, r->config, flags));
      static_cast<void>(opts.seed());
      static_cast<void>(opts.threads());
      fs::create_directories(opts.out());
      r->cmd.action(opts, err);
      write_manifest(r->cmd.name, opts);
      return kExitOk;
    } catch (const ValidationError& e) {
      err << "error: " << e.what() << "\n";
      return kExitUsage;
    } catch (const std::exception& e) {
      err << "error: " << e.what() << "\n";
      return kExitRuntime;
    }
  }
  out << app.help();
  return kExitUsage;
}

}  // namespace gausshead::cli
