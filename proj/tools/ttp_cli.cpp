// ttp: command-line front end for evaluation, attack generation, detection,
// threshold calibration, sweeps and plotting.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "ttp/harness/benchmark.hpp"
#include "ttp/harness/image_io.hpp"
#include "ttp/harness/report.hpp"
#include "ttp/harness/synthetic.hpp"
#include "ttp/ttp.hpp"

namespace fs = std::filesystem;
using namespace ttp;
using namespace ttp::harness;

namespace {

struct Options {
  std::string dataset;
  std::string backend = "toy";
  std::string prompt_template{kDefaultTemplate};
  int synthetic_classes = 5;
  int synthetic_per_class = 2;
  int synthetic_size = 0;  // 0: the backend's input resolution
  int pad_size = 32;
  std::string pattern = "zero";
  double threshold = 0.8;
  int views = 64;
  double select_frac = 0.1;
  double lr = 5.0;
  double temperature = 0.01;
  std::string attack = "pgd";
  double eps = 4.0;
  int steps = 100;
  std::string step_size = "auto";
  double overshoot = 0.02;
  double cw_const = 1.0;
  bool no_random_start = false;
  std::uint64_t seed = 0;
  std::string out = "ttp_out";
  int workers = 1;
  int limit = 0;

  // sweeps and plotting
  std::vector<int> sizes{0, 8, 16, 24, 32, 48, 64};
  double grid_lo = 0.0;
  double grid_hi = 1.0;
  double grid_step = 0.01;
  std::string table;
  std::string title;
};

struct Workspace {
  EncoderHandle encoder;
  ClassPrototypeSet protos;
  std::vector<LabeledImage> samples;
  std::string dataset_name;
};

TtpConfig ttp_config(const Options& o) {
  TtpConfig cfg;
  cfg.detector.threshold = o.threshold;
  cfg.detector.pad_width = o.pad_size;
  try {
    cfg.detector.pattern.kind = parse_padding_kind(o.pattern);
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  cfg.detector.pattern.seed = o.seed;
  cfg.pad_width = std::max(o.pad_size, 1);
  cfg.adaptation.num_views = o.views;
  cfg.adaptation.select_fraction = o.select_frac;
  cfg.adaptation.lr = o.lr;
  cfg.classifier.temperature = o.temperature;
  cfg.validate();
  return cfg;
}

std::optional<AttackConfig> attack_config(const Options& o) {
  if (o.attack == "none") return std::nullopt;
  AttackConfig a;
  try {
    a.kind = parse_attack_kind(o.attack);
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  a.epsilon = o.eps / 255.0;
  a.steps = o.steps;
  if (o.step_size != "auto") {
    try {
      a.step_size = std::stod(o.step_size) / 255.0;
    } catch (const std::logic_error&) {
      throw ConfigError("--step-size must be a number of intensity levels or 'auto'");
    }
  }
  a.overshoot = o.overshoot;
  a.margin_const = o.cw_const;
  a.random_start = !o.no_random_start;
  a.seed = o.seed;
  try {
    a.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  return a;
}

AttackConfig require_attack(const Options& o) {
  auto a = attack_config(o);
  if (!a) throw ConfigError("this command needs an attack (--attack fgsm|pgd|cw|deepfool)");
  return *a;
}

Workspace open_workspace(const Options& o) {
  if (o.dataset.empty()) throw ConfigError("--dataset is required (a directory or 'synthetic')");
  Workspace w;
  w.encoder = make_encoder(o.backend);
  if (o.dataset == "synthetic") {
    SyntheticConfig sc;
    sc.classes = o.synthetic_classes;
    sc.per_class = o.synthetic_per_class;
    sc.image_size = o.synthetic_size > 0 ? o.synthetic_size : w.encoder->input_resolution();
    sc.seed = o.seed;
    w.protos = encode_text_prototypes(*w.encoder, synthetic_class_names(sc.classes), o.prompt_template);
    w.samples = make_synthetic_samples(*w.encoder, w.protos, sc);
    w.dataset_name = "synthetic";
  } else {
    const auto manifest = load_dataset(o.dataset, o.prompt_template);
    w.protos = encode_text_prototypes(*w.encoder, manifest.class_names, o.prompt_template);
    w.samples = load_samples(manifest);
    w.dataset_name = fs::path(o.dataset).lexically_normal().filename().string();
    if (w.dataset_name.empty()) w.dataset_name = fs::path(o.dataset).parent_path().filename().string();
  }
  if (o.limit > 0 && static_cast<std::size_t>(o.limit) < w.samples.size()) w.samples.resize(o.limit);
  return w;
}

fs::path prepare_out(const Options& o, const CLI::App& app) {
  const fs::path out(o.out);
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw IoError("cannot create output directory " + out.string() + ": " + ec.message());
  write_text(out / "run_config.ini", app.config_to_str(true, false));
  return out;
}

void print_summary(const MetricsSummary& m) {
  auto show = [](const char* name, const std::optional<double>& v) {
    std::cout << "  " << name << ": " << (v ? format_optional(v, "%.2f") + "%" : std::string("n/a")) << '\n';
  };
  show("clean accuracy", m.clean_accuracy);
  show("robust accuracy", m.robust_accuracy);
  show("detection accuracy", m.detection_accuracy);
  std::cout << "  evaluated: " << m.evaluated() << ", failures: " << m.failures << '\n';
}

int cmd_eval(const Options& o, const CLI::App& app) {
  const auto cfg = ttp_config(o);
  const auto attack = attack_config(o);
  const fs::path out = prepare_out(o, app);
  const Workspace w = open_workspace(o);

  BenchmarkConfig bcfg{cfg, attack, o.seed, o.workers};
  std::ofstream live(out / "records.partial.jsonl", std::ios::binary);
  const auto result = run_benchmark(w.encoder, w.protos, w.samples, bcfg, [&](const EvaluationRecord& r) {
    live << to_json_line(r) << '\n';
    live.flush();
  });
  live.close();
  fs::remove(out / "records.partial.jsonl");
  if (result.records.empty()) throw IngestionError("no samples to evaluate");

  const RunInfo info{w.dataset_name, w.encoder->name(), attack ? std::string(to_string(attack->kind)) : "none",
                     attack ? o.eps : 0.0};
  emit_report(result.summary, result.records, out, info);
  std::cout << "eval: " << w.samples.size() << " samples, " << result.records.size() << " records -> "
            << out.string() << '\n';
  print_summary(result.summary);
  return result.summary.failures == result.records.size() ? 1 : 0;
}

int cmd_attack(const Options& o, const CLI::App& app) {
  const auto cfg = ttp_config(o);
  const auto attack = require_attack(o);
  const fs::path out = prepare_out(o, app);
  const Workspace w = open_workspace(o);

  const auto adv = make_attacked_pool(*w.encoder, w.protos, cfg.classifier, w.samples, attack, o.seed, o.workers);
  const fs::path images = out / "images";
  fs::create_directories(images);
  std::ofstream manifest(out / "manifest.jsonl", std::ios::binary);
  if (!manifest) throw IoError("cannot write " + (out / "manifest.jsonl").string());
  for (std::size_t i = 0; i < adv.size(); ++i) {
    const auto& s = adv[i];
    const std::string cls = w.protos.class_names[s.label];
    const fs::path file = images / cls / (fs::path(s.id).stem().string() + "_" + std::to_string(i) + ".png");
    fs::create_directories(file.parent_path());
    save_image(file, s.image);
    const AttackConfig per = attack_for_sample(attack, sample_seed(o.seed, s.id));
    nlohmann::ordered_json j;
    j["source"] = w.samples[i].id;
    j["label"] = s.label;
    j["class"] = cls;
    j["output"] = fs::relative(file, out).generic_string();
    j["attack"] = std::string(to_string(attack.kind));
    j["config_hash"] = per.hash();
    manifest << j.dump() << '\n';
  }
  std::ostringstream order;
  for (const auto& c : w.protos.class_names) order << c << '\n';
  write_text(images / "classes.txt", order.str());
  std::cout << "attack: wrote " << adv.size() << " " << to_string(attack.kind) << " images to " << images.string()
            << '\n';
  return 0;
}

int cmd_detect(const Options& o, const CLI::App& app) {
  const auto cfg = ttp_config(o);
  const fs::path out = prepare_out(o, app);
  const Workspace w = open_workspace(o);
  const auto sims = similarity_pool(*w.encoder, w.samples, cfg.detector, o.workers);
  std::ostringstream csv;
  csv << "sample_id,similarity,verdict\n";
  std::size_t flagged = 0;
  for (std::size_t i = 0; i < sims.size(); ++i) {
    const auto v = detect(sims[i], cfg.detector);
    flagged += v.is_clean() ? 0 : 1;
    csv << csv_field(w.samples[i].id) << ',' << format_number(sims[i]) << ',' << to_string(v.label) << '\n';
  }
  write_text(out / "detections.csv", csv.str());
  std::cout << "detect: " << flagged << " of " << sims.size() << " flagged adversarial at threshold "
            << cfg.detector.threshold << '\n';
  return 0;
}

ThresholdSweep run_threshold_sweep(const Options& o, const TtpConfig& cfg, const Workspace& w) {
  const auto attack = require_attack(o);
  const auto adv = make_attacked_pool(*w.encoder, w.protos, cfg.classifier, w.samples, attack, o.seed, o.workers);
  const auto grid = make_grid(o.grid_lo, o.grid_hi, o.grid_step);
  return sweep_threshold(*w.encoder, w.samples, adv, cfg.detector, grid, o.workers);
}

int cmd_calibrate(const Options& o, const CLI::App& app) {
  const auto cfg = ttp_config(o);
  const fs::path out = prepare_out(o, app);
  const Workspace w = open_workspace(o);
  const auto sweep = run_threshold_sweep(o, cfg, w);
  nlohmann::ordered_json j;
  j["threshold"] = sweep.calibration.best_threshold;
  j["accuracy"] = sweep.calibration.best_accuracy;
  j["clean_samples"] = sweep.clean_similarities.size();
  j["attacked_samples"] = sweep.adversarial_similarities.size();
  j["pad_size"] = cfg.detector.pad_width;
  write_text(out / "calibration.json", j.dump(2) + "\n");
  std::cout << "calibrate: threshold " << format_number(sweep.calibration.best_threshold) << " (accuracy "
            << format_number(100.0 * sweep.calibration.best_accuracy) << "%)\n";
  return 0;
}

int cmd_sweep_threshold(const Options& o, const CLI::App& app) {
  const auto cfg = ttp_config(o);
  const fs::path out = prepare_out(o, app);
  const Workspace w = open_workspace(o);
  const auto sweep = run_threshold_sweep(o, cfg, w);
  Table t = threshold_table(sweep.calibration);
  for (auto& row : t.rows) row[1] *= 100.0;
  write_table_csv(out / "threshold_sweep.csv", t);
  write_text(out / "threshold_sweep.svg", table_chart_svg(t, "Detection accuracy vs threshold"));
  std::cout << "sweep-threshold: " << t.rows.size() << " thresholds, best "
            << format_number(sweep.calibration.best_threshold) << '\n';
  return 0;
}

int cmd_sweep_pad(const Options& o, const CLI::App& app) {
  const auto cfg = ttp_config(o);
  const auto attack = require_attack(o);
  const fs::path out = prepare_out(o, app);
  const Workspace w = open_workspace(o);
  const auto adv = make_attacked_pool(*w.encoder, w.protos, cfg.classifier, w.samples, attack, o.seed, o.workers);
  BenchmarkConfig bcfg{cfg, attack, o.seed, o.workers};
  const auto rows = sweep_padding_size(w.encoder, w.protos, w.samples, adv, bcfg, o.sizes, true);
  const Table t = pad_sweep_table(rows);
  write_table_csv(out / "pad_sweep.csv", t);
  write_text(out / "pad_sweep.svg", table_chart_svg(t, "Padding size sweep"));
  std::cout << "sweep-pad: " << rows.size() << " sizes -> " << (out / "pad_sweep.csv").string() << '\n';
  return 0;
}

int cmd_plot(const Options& o, const CLI::App&) {
  if (o.table.empty()) throw ConfigError("plot needs --table <csv>");
  const fs::path in(o.table);
  const Table t = read_table_csv(in);
  fs::path target = fs::path(o.out);
  if (target.extension() != ".svg") {
    fs::create_directories(target);
    target /= in.stem().string() + ".svg";
  }
  write_text(target, table_chart_svg(t, o.title.empty() ? in.stem().string() : o.title));
  std::cout << "plot: " << target.string() << '\n';
  return 0;
}

void add_shared(CLI::App& app, Options& o) {
  app.add_option("--dataset", o.dataset, "Dataset root (<root>/<class>/<image>) or 'synthetic'");
  app.add_option("--backend", o.backend, "Encoder backend id, e.g. toy or toy:seed=1,dim=32,res=224");
  app.add_option("--template", o.prompt_template, "Prompt template containing [CLASS]");
  app.add_option("--synthetic-classes", o.synthetic_classes, "Classes in the synthetic dataset")->check(CLI::PositiveNumber);
  app.add_option("--synthetic-per-class", o.synthetic_per_class, "Images per synthetic class")->check(CLI::PositiveNumber);
  app.add_option("--synthetic-size", o.synthetic_size, "Synthetic image size (0: backend resolution)");
  app.add_option("--pad-size", o.pad_size, "Padding width in pixels")->check(CLI::NonNegativeNumber);
  app.add_option("--pattern", o.pattern, "Detection padding pattern: zero|white|random");
  app.add_option("--threshold", o.threshold, "Detection threshold on the similarity shift");
  app.add_option("--views", o.views, "Augmented views per adversarial input");
  app.add_option("--select-frac", o.select_frac, "Fraction of lowest-entropy views kept");
  app.add_option("--lr", o.lr, "Padding learning rate");
  app.add_option("--temperature", o.temperature, "Softmax temperature of the zero-shot classifier");
  app.add_option("--attack", o.attack, "none|fgsm|pgd|cw|deepfool");
  app.add_option("--eps", o.eps, "Attack budget in 8-bit intensity levels");
  app.add_option("--steps", o.steps, "Attack iterations");
  app.add_option("--step-size", o.step_size, "Attack step in intensity levels, or auto");
  app.add_option("--overshoot", o.overshoot, "DeepFool overshoot");
  app.add_option("--cw-const", o.cw_const, "CW trade-off constant");
  app.add_flag("--no-random-start", o.no_random_start, "Disable the PGD random start");
  app.add_option("--seed", o.seed, "Run seed");
  app.add_option("--out", o.out, "Output directory (plot: directory or .svg path)");
  app.add_option("--workers", o.workers, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--limit", o.limit, "Evaluate only the first N samples (0: all)");
  app.add_option("--sizes", o.sizes, "Padding sizes for sweep-pad")->delimiter(',');
  app.add_option("--grid-lo", o.grid_lo, "Threshold grid start");
  app.add_option("--grid-hi", o.grid_hi, "Threshold grid end");
  app.add_option("--grid-step", o.grid_step, "Threshold grid step");
  app.add_option("--table", o.table, "CSV table to plot");
  app.add_option("--title", o.title, "Plot title");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Test-time padding: detect and repair adversarial inputs to zero-shot image classifiers", "ttp"};
  app.set_config("--config", "", "Read options from an INI file; command-line flags take precedence");
  app.require_subcommand(1);
  app.fallthrough();
  app.option_defaults()->always_capture_default();
  Options o;
  add_shared(app, o);

  using Handler = int (*)(const Options&, const CLI::App&);
  const std::vector<std::tuple<std::string, std::string, Handler>> commands{
      {"eval", "Run the defense on clean (and attacked) samples and write records and metrics", cmd_eval},
      {"attack", "Generate adversarial images with a manifest", cmd_attack},
      {"detect", "Score images with the similarity-shift detector", cmd_detect},
      {"calibrate", "Pick the detection threshold that best separates clean from attacked samples", cmd_calibrate},
      {"sweep-pad", "Detection and robustness as a function of padding size", cmd_sweep_pad},
      {"sweep-threshold", "Detection accuracy over a threshold grid", cmd_sweep_threshold},
      {"plot", "Render a sweep CSV as an SVG line chart", cmd_plot},
  };
  for (const auto& [name, help, fn] : commands) app.add_subcommand(name, help);

  CLI11_PARSE(app, argc, argv);

  try {
    for (const auto& [name, help, fn] : commands)
      if (app.got_subcommand(name)) return fn(o, app);
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 2;
  } catch (const IngestionError& e) {
    std::cerr << "dataset error: " << e.what() << '\n';
    return 3;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
