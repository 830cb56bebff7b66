#include <gtest/gtest.h>

#include "hs/pipeline.hpp"
#include "oracles.hpp"

using namespace hs;
using namespace hs::pipeline;

namespace {

PipelineConfig small_config(const std::filesystem::path& dir) {
  PipelineConfig c;
  c.participants = 6;
  c.weeks = 2;
  c.record_seconds_per_day = 30;
  c.har_windows_per_class = 8;
  c.cnn_epochs = 1;
  c.sentiment_docs_per_class = 30;
  c.lambda_grid = 8;
  c.data_dir = dir.string();
  return c;
}

std::size_t section_rows(const std::string& report, const std::string& section) {
  const auto at = report.find("[" + section + "]\n");
  if (at == std::string::npos) return 0;
  std::size_t n = 0;
  for (auto line : split(std::string_view(report).substr(at), '\n')) {
    if (trim(line).empty()) break;
    ++n;
  }
  return n - 2;  // section line and header
}

}  // namespace

TEST(Config, SerializeRoundTrips) {
  PipelineConfig c;
  c.seed = 99;
  c.cnn_lr = 0.0125;
  c.keywords = "sad|low";
  c.classifier = "knn";
  const auto text = c.serialize();
  const auto back = PipelineConfig::parse(text);
  EXPECT_EQ(back.serialize(), text);
  EXPECT_EQ(back.seed, 99u);
  EXPECT_DOUBLE_EQ(back.cnn_lr, 0.0125);
  EXPECT_EQ(back.keywords, "sad|low");
}

TEST(Config, ParseSkipsCommentsAndLayersOnBase) {
  PipelineConfig base;
  base.weeks = 3;
  const auto c = PipelineConfig::parse("# comment\n\nparticipants = 9\n", base);
  EXPECT_EQ(c.participants, 9);
  EXPECT_EQ(c.weeks, 3);
}

TEST(Config, RejectsBadInput) {
  PipelineConfig c;
  EXPECT_THROW(c.set("no_such_key", "1"), SpecError);
  EXPECT_THROW(c.set("weeks", "three"), SpecError);
  EXPECT_THROW(PipelineConfig::parse("weeks"), ParseError);
  c.classifier = "tree";
  EXPECT_THROW(c.validate(), SpecError);
  c = PipelineConfig{};
  c.gravity_cutoff_hz = 15;
  EXPECT_THROW(c.validate(), SpecError);
  EXPECT_NO_THROW(PipelineConfig{}.validate());
}

TEST(Stages, MissingArtifactNamesProducer) {
  oracle::TempDir dir("pipe_missing");
  const auto cfg = small_config(dir.path);
  try {
    run_fit_gds(cfg);
    FAIL();
  } catch (const MissingArtifactError& e) {
    EXPECT_EQ(e.producer(), "featurize");
  }
  try {
    run_preprocess(cfg);
    FAIL();
  } catch (const MissingArtifactError& e) {
    EXPECT_EQ(e.producer(), "generate");
  }
  EXPECT_THROW(run_stage("bake", cfg), PreconditionError);
}

TEST(Stages, SegmentsRoundTrip) {
  oracle::TempDir dir("pipe_segs");
  std::vector<StoredSegment> segs(2);
  segs[0].participant_id = "P01";
  segs[0].week_index = 3;
  segs[0].segment.t0_ns = 1554537600000000000LL;
  segs[0].segment.period_ns = 50'000'000;
  // float storage: use exactly representable values
  segs[0].segment.body = {{0.5, -1, 2}, {0, 0.25, -0.125}};
  segs[1].participant_id = "P12";
  const auto p = dir.path / "s.bin";
  write_segments(p, segs);
  const auto back = read_segments(p);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].participant_id, "P01");
  EXPECT_EQ(back[0].week_index, 3);
  EXPECT_EQ(back[0].segment.t0_ns, segs[0].segment.t0_ns);
  EXPECT_EQ(back[0].segment.period_ns, 50'000'000);
  ASSERT_EQ(back[0].segment.body.size(), 2u);
  EXPECT_EQ(back[0].segment.body[1], (signal::Triple{0, 0.25, -0.125}));
  EXPECT_TRUE(back[1].segment.body.empty());
}

TEST(Stages, EndToEndIsDeterministicAndRerunnable) {
  oracle::TempDir dir("pipe_e2e");
  const auto cfg = small_config(dir.path / "run");
  const auto summaries = run_all(cfg);
  ASSERT_EQ(summaries.size(), stage_names().size());
  const auto first = read_file(cfg.path(artifact::kReport).string());
  EXPECT_EQ(first.rfind("# hsdep report generated ", 0), 0u);
  const auto body = report_body(first);
  EXPECT_NE(body.find(cfg.serialize()), std::string::npos);
  EXPECT_EQ(section_rows(body, "feature_correlation"), 27u);
  EXPECT_EQ(section_rows(body, "roc"), 3u);
  EXPECT_NE(body.find("participant_weeks=12\n"), std::string::npos);

  // generating over an existing store is absorbed by deduplication
  EXPECT_NE(run_generate(cfg).summary.find(" 0 envelopes stored"), std::string::npos);
  run_all(cfg);
  EXPECT_EQ(report_body(read_file(cfg.path(artifact::kReport).string())), body);

  std::filesystem::remove_all(cfg.dir());
  run_all(cfg);
  EXPECT_EQ(report_body(read_file(cfg.path(artifact::kReport).string())), body);

  // a single downstream stage re-runs in isolation
  run_stage("classify", cfg);
  run_stage("evaluate", cfg);
  EXPECT_EQ(report_body(render_report(cfg, "t")), body);
}
