#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "support/stubs.hpp"
#include "ttp/harness/benchmark.hpp"
#include "ttp/harness/image_io.hpp"
#include "ttp/harness/report.hpp"
#include "ttp/harness/synthetic.hpp"

using namespace ttp;
using namespace ttp::harness;
using ttp::testing::random_image;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("ttp_harness_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t count_lines(const fs::path& p) {
  const std::string s = slurp(p);
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

EvaluationRecord rec(std::string id, std::size_t label, bool attacked, bool correct, VerdictLabel verdict) {
  EvaluationRecord r;
  r.sample_id = std::move(id);
  r.true_label = label;
  r.attack = attacked ? "pgd" : "none";
  r.correct = correct;
  r.predicted_class = correct ? label : label + 1;
  r.verdict = verdict;
  return r;
}

struct ToyRun {
  EncoderHandle enc = make_toy_encoder(1, 16, 32);
  ClassPrototypeSet protos = encode_text_prototypes(*enc, synthetic_class_names(5));
  std::vector<LabeledImage> samples;

  ToyRun() {
    SyntheticConfig sc;
    sc.image_size = 32;
    samples = make_synthetic_samples(*enc, protos, sc);
  }

  BenchmarkConfig config() const {
    BenchmarkConfig cfg;
    cfg.ttp.detector.pad_width = 8;
    cfg.ttp.pad_width = 8;
    cfg.ttp.adaptation.num_views = 8;
    cfg.attack = AttackConfig{};
    cfg.attack->steps = 2;
    cfg.seed = 3;
    return cfg;
  }
};

}  // namespace

TEST(Dataset, LexicographicClassesAndSortedFiles) {
  const fs::path root = scratch("lex");
  for (const char* cls : {"zebra", "apple"}) {
    fs::create_directories(root / cls);
    for (int k = 2; k >= 0; --k)
      save_image(root / cls / ("img" + std::to_string(k) + ".png"), random_image(6, 5, static_cast<std::uint64_t>(k)));
  }
  std::ofstream(root / "apple" / "notes.txt") << "ignored";
  const auto m = load_dataset(root);
  EXPECT_EQ(m.class_names, (std::vector<std::string>{"apple", "zebra"}));
  ASSERT_EQ(m.sample_count(), 6u);
  EXPECT_EQ(m.samples[0].path.filename(), "img0.png");
  EXPECT_EQ(m.samples[0].label, 0u);
  EXPECT_EQ(m.samples[5].label, 1u);

  const auto samples = load_samples(m);
  EXPECT_EQ(samples[0].id, "apple/img0.png");
  EXPECT_EQ(samples[0].image, quantize(random_image(6, 5, 0)));
}

TEST(Dataset, ClassesFileFixesOrder) {
  const fs::path root = scratch("order");
  for (const char* cls : {"b", "a"}) {
    fs::create_directories(root / cls);
    save_image(root / cls / "x.png", random_image(4, 4, 1));
  }
  std::ofstream(root / "classes.txt") << "b\na\n";
  EXPECT_EQ(load_dataset(root).class_names, (std::vector<std::string>{"b", "a"}));
  std::ofstream(root / "classes.txt") << "b\nmissing\n";
  EXPECT_THROW(load_dataset(root), IngestionError);
}

TEST(Dataset, EmptyOrMissingRootIsAnIngestionError) {
  const fs::path root = scratch("empty");
  EXPECT_THROW(load_dataset(root), IngestionError);
  fs::create_directories(root / "cls");
  EXPECT_THROW(load_dataset(root), IngestionError);
  EXPECT_THROW(load_dataset(root / "nope"), IngestionError);
}

TEST(ImageIo, UndecodableFileIsAnIoError) {
  const fs::path root = scratch("io");
  std::ofstream(root / "bad.png") << "not a png";
  EXPECT_THROW(load_image(root / "bad.png"), IoError);
}

TEST(Metrics, TwoOfThreeCorrect) {
  const std::vector<EvaluationRecord> r{rec("a", 0, false, true, VerdictLabel::clean),
                                        rec("b", 1, false, true, VerdictLabel::clean),
                                        rec("c", 1, false, false, VerdictLabel::clean)};
  const auto m = compute_metrics(r);
  EXPECT_NEAR(*m.clean_accuracy, 66.67, 0.005);
  EXPECT_FALSE(m.robust_accuracy.has_value());
  EXPECT_EQ(*m.detection_accuracy, 100.0);
}

TEST(Metrics, Boundaries) {
  EXPECT_THROW(compute_metrics({}), InvalidArgument);
  std::vector<EvaluationRecord> all{rec("a", 0, true, true, VerdictLabel::adversarial)};
  EXPECT_EQ(*compute_metrics(all).robust_accuracy, 100.0);
  EXPECT_FALSE(compute_metrics(all).clean_accuracy.has_value());
  std::vector<EvaluationRecord> none{rec("a", 0, true, false, VerdictLabel::clean)};
  EXPECT_EQ(*compute_metrics(none).robust_accuracy, 0.0);
  EXPECT_EQ(*compute_metrics(none).detection_accuracy, 0.0);
}

TEST(Metrics, PerfectCleanAndFullyBrokenAttacked) {
  std::vector<EvaluationRecord> r;
  for (int i = 0; i < 4; ++i) {
    r.push_back(rec("s" + std::to_string(i), static_cast<std::size_t>(i % 2), false, true, VerdictLabel::clean));
    r.push_back(rec("s" + std::to_string(i), static_cast<std::size_t>(i % 2), true, false, VerdictLabel::adversarial));
  }
  const auto m = compute_metrics(r);
  EXPECT_EQ(*m.clean_accuracy, 100.0);
  EXPECT_EQ(*m.robust_accuracy, 0.0);
  EXPECT_EQ(*m.detection_accuracy, 100.0);
  EXPECT_EQ(m.per_class[0].clean_total + m.per_class[1].clean_total, m.n_clean);
}

TEST(Metrics, HandCountedMixedPool) {
  std::vector<EvaluationRecord> r{rec("a", 0, false, true, VerdictLabel::clean),
                                  rec("b", 1, false, false, VerdictLabel::adversarial),
                                  rec("a", 0, true, true, VerdictLabel::adversarial),
                                  rec("b", 1, true, false, VerdictLabel::clean)};
  auto failed = rec("c", 2, true, false, VerdictLabel::clean);
  failed.error = "boom";
  r.push_back(failed);
  const auto m = compute_metrics(r);
  EXPECT_EQ(*m.clean_accuracy, 50.0);
  EXPECT_EQ(*m.robust_accuracy, 50.0);
  EXPECT_EQ(*m.detection_accuracy, 50.0);
  EXPECT_EQ(m.failures, 1u);
  EXPECT_EQ(m.evaluated(), 4u);
  ASSERT_EQ(m.per_class.size(), 3u);
  EXPECT_EQ(m.per_class[0].clean_correct, 1u);
  EXPECT_EQ(m.per_class[1].attacked_total, 1u);
  EXPECT_EQ(m.per_class[2].attacked_total, 0u);
}

TEST(Records, JsonRoundTrip) {
  auto r = rec("x/1.png", 3, true, false, VerdictLabel::adversarial);
  r.loss_before = 0.25;
  r.similarity = 0.123456789012345;
  EXPECT_EQ(record_from_json(to_json(r)), r);
  const auto line = to_json_line(r);
  EXPECT_EQ(line.find('\n'), std::string::npos);
  EXPECT_EQ(line.rfind("{\"sample_id\"", 0), 0u);
}

TEST(Synthetic, SamplesAreLabelledCorrectlyByTheToyClassifier) {
  ToyRun run;
  ASSERT_EQ(run.samples.size(), 10u);
  for (const auto& s : run.samples)
    EXPECT_EQ(argmax(classify(run.enc->encode_image(s.image), run.protos)), s.label) << s.id;
}

TEST(Benchmark, ToySmokeRunWritesDeterministicReport) {
  ToyRun run;
  std::vector<std::string> streamed;
  const auto result =
      run_benchmark(run.enc, run.protos, run.samples, run.config(), [&](const EvaluationRecord& r) {
        streamed.push_back(r.sample_id + "|" + r.attack);
      });
  ASSERT_EQ(result.records.size(), 20u);
  ASSERT_EQ(streamed.size(), 20u);
  EXPECT_EQ(streamed[0], run.samples[0].id + "|none");
  EXPECT_EQ(streamed[1], run.samples[0].id + "|pgd");
  for (const auto& r : result.records) EXPECT_FALSE(r.failed()) << r.error;

  const fs::path a = scratch("report_a"), b = scratch("report_b");
  RunInfo info{"synthetic", run.enc->name(), "pgd", 4.0};
  const auto files = emit_report(result.summary, result.records, a, info);
  EXPECT_EQ(count_lines(files.records), 20u);
  const std::string summary = slurp(files.summary);
  EXPECT_EQ(summary.substr(0, summary.find('\n')), kSummaryHeader);

  auto again = run_benchmark(run.enc, run.protos, run.samples, run.config());
  BenchmarkConfig two = run.config();
  two.workers = 3;
  auto parallel = run_benchmark(run.enc, run.protos, run.samples, two);
  emit_report(again.summary, again.records, b, info);
  for (const char* f : {"records.jsonl", "summary.csv", "per_class.csv", "similarity.csv", "similarity_hist.svg"})
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  EXPECT_EQ(parallel.summary, result.summary);

  auto reread = read_records_jsonl(files.records);
  auto original = result.records;
  for (auto& r : original) r.wall_time_ms = 0.0;
  EXPECT_EQ(reread, original);
  EXPECT_EQ(compute_metrics(reread), result.summary);
}

TEST(Benchmark, CleanOnlyRunHasOneRecordPerSample) {
  ToyRun run;
  auto cfg = run.config();
  cfg.attack.reset();
  const auto result = run_benchmark(run.enc, run.protos, run.samples, cfg);
  EXPECT_EQ(result.records.size(), 10u);
  EXPECT_FALSE(result.summary.robust_accuracy.has_value());
}

TEST(Benchmark, BadSampleBecomesAFailedRecord) {
  ToyRun run;
  run.samples[1].image.values()[0] = -4.0;
  std::vector<std::string> warnings;
  auto previous = log::set_sink([&](log::Level, std::string_view m) { warnings.emplace_back(m); });
  const auto result = run_benchmark(run.enc, run.protos, run.samples, run.config());
  log::set_sink(previous);
  EXPECT_EQ(result.records.size(), 20u);
  EXPECT_EQ(result.summary.failures, 2u);
  EXPECT_EQ(warnings.size(), 2u);
}

TEST(Sweeps, PaddingSizeRowsAndSeparableGap) {
  auto enc = std::make_shared<ttp::testing::BrightnessEncoder>(16);
  const auto protos = encode_text_prototypes(*enc, {"dark", "bright"});
  std::vector<LabeledImage> clean, adv;
  for (std::uint64_t s = 0; s < 6; ++s) {
    clean.push_back({"c" + std::to_string(s), 0, random_image(32, 32, s, 0.0, 10.0)});
    adv.push_back({"a" + std::to_string(s), 1, random_image(32, 32, s + 50, 200.0, 255.0)});
  }
  const std::vector<int> sizes{0, 4, 8, 16};
  BenchmarkConfig cfg;
  const auto rows = sweep_padding_size(enc, protos, clean, adv, cfg, sizes, false);
  ASSERT_EQ(rows.size(), sizes.size());
  EXPECT_NEAR(rows[0].clean_similarity, 1.0, 1e-12);
  EXPECT_NEAR(rows[0].adversarial_similarity, 1.0, 1e-12);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(rows[i].pad_size, sizes[i]);
    EXPECT_GE(rows[i].clean_similarity - rows[i].adversarial_similarity, 0.0);
    EXPECT_FALSE(rows[i].robust_accuracy.has_value());
  }
  const auto table = pad_sweep_table(rows);
  EXPECT_EQ(table.rows.size(), 4u);
  EXPECT_NE(table_chart_svg(table, "pad").find("<svg"), std::string::npos);
}

TEST(Sweeps, ThresholdSweepMatchesCalibration) {
  auto enc = std::make_shared<ttp::testing::BrightnessEncoder>(16);
  std::vector<LabeledImage> clean, adv;
  for (std::uint64_t s = 0; s < 6; ++s) {
    clean.push_back({"c", 0, random_image(32, 32, s, 0.0, 10.0)});
    adv.push_back({"a", 1, random_image(32, 32, s + 50, 200.0, 255.0)});
  }
  DetectorConfig det;
  det.pad_width = 8;
  const auto grid = make_grid(0.0, 1.0, 0.01);
  const auto sweep = sweep_threshold(*enc, clean, adv, det, grid);
  EXPECT_EQ(sweep.calibration.curve.size(), grid.size());
  EXPECT_EQ(sweep.calibration.best_accuracy, 1.0);
  const auto direct = calibrate_threshold(sweep.clean_similarities, sweep.adversarial_similarities, grid);
  EXPECT_EQ(direct.best_threshold, sweep.calibration.best_threshold);

  const std::vector<double> one{0.5};
  EXPECT_EQ(sweep_threshold(*enc, clean, adv, det, one).calibration.curve.size(), 1u);

  const fs::path dir = scratch("table");
  write_table_csv(dir / "t.csv", threshold_table(sweep.calibration));
  const auto back = read_table_csv(dir / "t.csv");
  EXPECT_EQ(back.header, (std::vector<std::string>{"threshold", "accuracy"}));
  EXPECT_EQ(back.rows.size(), grid.size());
}

TEST(Report, SummaryQuotesFieldsWithCommas) {
  const std::vector<EvaluationRecord> r{rec("a", 0, false, true, VerdictLabel::clean)};
  const std::string csv = summary_csv({"set", "toy:seed=0,dim=16", "none", 0.0}, compute_metrics(r), 1);
  const std::string row = csv.substr(csv.find('\n') + 1);
  EXPECT_EQ(row, "set,\"toy:seed=0,dim=16\",none,0,100.0000,,100.0000,1,0\n");
  EXPECT_EQ(csv_field("say \"hi\""), "\"say \"\"hi\"\"\"");
}
