#pragma once

#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "hs/classifiers.hpp"
#include "hs/cohort.hpp"
#include "hs/error.hpp"
#include "hs/features.hpp"
#include "hs/har.hpp"
#include "hs/ingest.hpp"
#include "hs/lasso.hpp"
#include "hs/metrics.hpp"
#include "hs/signal.hpp"
#include "hs/text.hpp"
#include "hs/types.hpp"
#include "hs/util.hpp"
#include "hs/validation.hpp"

namespace hs::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

// ------------------------------------------------------------------ config

struct PipelineConfig {
  std::uint64_t seed = 7;
  int participants = 33;
  int weeks = 8;
  double record_seconds_per_day = 120.0;
  double bout_seconds = 15.0;

  double sample_rate_hz = signal::kSampleRateHz;
  double gravity_cutoff_hz = signal::kGravityCutoffHz;
  double noise_cutoff_hz = signal::kNoiseCutoffHz;
  double max_gap_s = signal::kMaxGapSeconds;

  int har_windows_per_class = 600;
  int cnn_epochs = 12;
  int cnn_batch = 10;
  double cnn_lr = 0.05;

  int sentiment_docs_per_class = 400;
  double nb_gamma = 1.0;
  std::string keywords = "Depression|Anxiety|Sad|mental health";  // '|'-separated, empty admits all

  int lambda_folds = 5;
  int lambda_grid = 30;
  double lambda_min_ratio = 1e-2;
  std::string lambda_rule = "1se";  // 1se | min

  std::string classifier = "svm";  // svm | knn | mlp
  double svm_c = 10.0;
  double svm_gamma = 0.0;  // 0 = 1 / median squared distance
  int knn_k = 5;
  int mlp_hidden1 = 64;
  int mlp_hidden2 = 32;
  int mlp_epochs = 100;
  double mlp_lr = 0.1;
  int mlp_batch = 8;
  std::string balance = "oversample";  // oversample | undersample | none

  std::string data_dir = "hsdata";

  /// Applies one key=value setting; unknown keys and malformed values throw SpecError.
  void set(std::string_view key, std::string_view value);
  /// key=value lines in a fixed order. Parsing the result reproduces the config.
  std::string serialize() const;
  static PipelineConfig parse(std::string_view text) { return parse(text, PipelineConfig()); }
  static PipelineConfig parse(std::string_view text, PipelineConfig base);
  void validate() const;

  fs::path dir() const { return fs::path(data_dir); }
  fs::path path(std::string_view artifact) const { return dir() / std::string(artifact); }

  cohort::CohortConfig cohort() const {
    cohort::CohortConfig c;
    c.participants = participants;
    c.weeks = weeks;
    c.seed = seed;
    c.record_seconds_per_day = record_seconds_per_day;
    c.bout_seconds = bout_seconds;
    return c;
  }
  signal::PreprocessConfig preprocess() const {
    signal::PreprocessConfig p;
    p.sample_rate_hz = sample_rate_hz;
    p.gravity_cutoff_hz = gravity_cutoff_hz;
    p.noise_cutoff_hz = noise_cutoff_hz;
    p.max_gap_s = max_gap_s;
    return p;
  }
  features::TimeCredit time_credit() const {
    const auto p = preprocess();
    return {p.window_len / p.sample_rate_hz};
  }
  har::TrainConfig har_train() const {
    har::TrainConfig t;
    t.epochs = cnn_epochs;
    t.batch_size = cnn_batch;
    t.learning_rate = cnn_lr;
    t.seed = cohort::mix_seed(seed, 0x4A5);
    return t;
  }
  text::KeywordFilter keyword_filter() const {
    std::vector<std::string> terms;
    for (auto t : split(keywords, '|'))
      if (!trim(t).empty()) terms.emplace_back(trim(t));
    return text::KeywordFilter(std::move(terms));
  }
  predict::LambdaSearch lambda_search() const {
    predict::LambdaSearch s;
    s.folds = lambda_folds;
    s.grid_points = lambda_grid;
    s.min_ratio = lambda_min_ratio;
    s.rule = lambda_rule == "min" ? predict::LambdaRule::MinError : predict::LambdaRule::OneStandardError;
    s.seed = cohort::mix_seed(seed, 0x1A5);
    return s;
  }
  predict::ClassifierKind classifier_kind() const { return predict::parse_classifier_kind(classifier); }
  predict::ClassifierOptions classifier_options() const {
    predict::ClassifierOptions o;
    o.svm.c = svm_c;
    o.svm.gamma = svm_gamma;
    o.knn.k = knn_k;
    o.mlp.hidden1 = mlp_hidden1;
    o.mlp.hidden2 = mlp_hidden2;
    o.mlp.epochs = mlp_epochs;
    o.mlp.learning_rate = mlp_lr;
    o.mlp.batch_size = mlp_batch;
    o.mlp.seed = cohort::mix_seed(seed, 0x3E9);
    return o;
  }
  predict::LoocvOptions loocv() const {
    predict::LoocvOptions o;
    o.balance = balance == "undersample" ? predict::Balance::Undersample
                : balance == "none"      ? predict::Balance::None
                                         : predict::Balance::Oversample;
    o.seed = cohort::mix_seed(seed, 0x100C);
    return o;
  }
};

namespace detail {

struct Field {
  std::string name;
  std::function<std::string(const PipelineConfig&)> get;
  std::function<void(PipelineConfig&, std::string_view)> set;
};

template <typename T>
Field field(std::string name, T PipelineConfig::*member) {
  Field f;
  f.name = name;
  f.get = [member](const PipelineConfig& c) {
    if constexpr (std::is_same_v<T, std::string>)
      return c.*member;
    else if constexpr (std::is_floating_point_v<T>)
      return format_double(c.*member);
    else
      return std::to_string(c.*member);
  };
  f.set = [member, name](PipelineConfig& c, std::string_view v) {
    if constexpr (std::is_same_v<T, std::string>) {
      c.*member = std::string(v);
    } else {
      try {
        c.*member = parse_number<T>(v);
      } catch (const ParseError&) {
        throw SpecError("config: '" + name + "' has malformed value '" + std::string(v) + "'");
      }
    }
  };
  return f;
}

inline const std::vector<Field>& fields() {
  using C = PipelineConfig;
  static const std::vector<Field> f = {
      field("seed", &C::seed),
      field("participants", &C::participants),
      field("weeks", &C::weeks),
      field("record_seconds_per_day", &C::record_seconds_per_day),
      field("bout_seconds", &C::bout_seconds),
      field("sample_rate_hz", &C::sample_rate_hz),
      field("gravity_cutoff_hz", &C::gravity_cutoff_hz),
      field("noise_cutoff_hz", &C::noise_cutoff_hz),
      field("max_gap_s", &C::max_gap_s),
      field("har_windows_per_class", &C::har_windows_per_class),
      field("cnn_epochs", &C::cnn_epochs),
      field("cnn_batch", &C::cnn_batch),
      field("cnn_lr", &C::cnn_lr),
      field("sentiment_docs_per_class", &C::sentiment_docs_per_class),
      field("nb_gamma", &C::nb_gamma),
      field("keywords", &C::keywords),
      field("lambda_folds", &C::lambda_folds),
      field("lambda_grid", &C::lambda_grid),
      field("lambda_min_ratio", &C::lambda_min_ratio),
      field("lambda_rule", &C::lambda_rule),
      field("classifier", &C::classifier),
      field("svm_c", &C::svm_c),
      field("svm_gamma", &C::svm_gamma),
      field("knn_k", &C::knn_k),
      field("mlp_hidden1", &C::mlp_hidden1),
      field("mlp_hidden2", &C::mlp_hidden2),
      field("mlp_epochs", &C::mlp_epochs),
      field("mlp_lr", &C::mlp_lr),
      field("mlp_batch", &C::mlp_batch),
      field("balance", &C::balance),
      field("data_dir", &C::data_dir),
  };
  return f;
}

}  // namespace detail

inline void PipelineConfig::set(std::string_view key, std::string_view value) {
  key = trim(key);
  value = trim(value);
  for (const auto& f : detail::fields())
    if (f.name == key) return f.set(*this, value);
  throw SpecError("config: unknown key '" + std::string(key) + "'");
}

inline std::string PipelineConfig::serialize() const {
  std::string out;
  for (const auto& f : detail::fields()) out += f.name + "=" + f.get(*this) + "\n";
  return out;
}

inline PipelineConfig PipelineConfig::parse(std::string_view text, PipelineConfig base) {
  std::size_t line_no = 0;
  for (auto line : split(text, '\n')) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError("config: expected key=value", line_no);
    base.set(line.substr(0, eq), line.substr(eq + 1));
  }
  return base;
}

inline void PipelineConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw SpecError("config: " + what);
  };
  require(participants >= 3, "participants must be >= 3");
  require(weeks >= 1, "weeks must be >= 1");
  require(record_seconds_per_day >= 0 && bout_seconds > 0, "recording budget must be >= 0 and bouts > 0");
  require(sample_rate_hz > 0, "sample_rate_hz must be > 0");
  require(gravity_cutoff_hz > 0 && gravity_cutoff_hz < sample_rate_hz / 2, "gravity cutoff must lie in (0, Nyquist)");
  require(noise_cutoff_hz > 0 && noise_cutoff_hz < sample_rate_hz / 2, "noise cutoff must lie in (0, Nyquist)");
  require(max_gap_s > 0, "max_gap_s must be > 0");
  require(har_windows_per_class >= 1 && cnn_epochs >= 1 && cnn_batch >= 1 && cnn_lr > 0, "CNN settings out of range");
  require(sentiment_docs_per_class >= 2 && nb_gamma >= 0, "sentiment settings out of range");
  require(lambda_folds >= 2 && lambda_grid >= 1 && lambda_min_ratio > 0 && lambda_min_ratio < 1,
          "lambda search settings out of range");
  require(lambda_rule == "1se" || lambda_rule == "min", "lambda_rule must be 1se or min");
  require(classifier == "svm" || classifier == "knn" || classifier == "mlp", "classifier must be svm, knn or mlp");
  require(svm_c > 0 && svm_gamma >= 0 && knn_k >= 1, "SVM/KNN settings out of range");
  require(mlp_hidden1 >= 1 && mlp_hidden2 >= 1 && mlp_epochs >= 1 && mlp_lr > 0 && mlp_batch >= 1,
          "MLP settings out of range");
  require(balance == "oversample" || balance == "undersample" || balance == "none",
          "balance must be oversample, undersample or none");
  require(!data_dir.empty(), "data_dir must be set");
}

// --------------------------------------------------------------- artifacts

namespace artifact {
inline constexpr std::string_view kStore = "store";
inline constexpr std::string_view kCohort = "cohort.tsv";
inline constexpr std::string_view kHarLabeled = "har_labeled.csv";
inline constexpr std::string_view kSentimentLabeled = "sentiment_labeled.tsv";
inline constexpr std::string_view kLexicon = "lexicon.tsv";
inline constexpr std::string_view kSegments = "body_segments.bin";
inline constexpr std::string_view kHarModel = "har_model.bin";
inline constexpr std::string_view kNbModel = "nb_model.json";
inline constexpr std::string_view kWeekly = "weekly_features.csv";
inline constexpr std::string_view kSelected = "selected_features.txt";
inline constexpr std::string_view kGdsModel = "gds_model.json";
inline constexpr std::string_view kGdsLoocv = "gds_loocv.csv";
inline constexpr std::string_view kPredictions = "severity_predictions.csv";
inline constexpr std::string_view kMetrics = "metrics.csv";
inline constexpr std::string_view kRoc = "roc_points.csv";
inline constexpr std::string_view kReport = "report.txt";
}  // namespace artifact

/// Path of an upstream artifact, or MissingArtifactError naming its producer.
inline fs::path require(const PipelineConfig& cfg, std::string_view name, std::string_view producer) {
  const auto p = cfg.path(name);
  if (!fs::exists(p)) throw MissingArtifactError(p.string(), std::string(producer));
  return p;
}

// -------------------------------------------------------- in-memory stages

/// Everything the featurizer needs for one participant-week.
struct WeekInput {
  std::string participant_id;
  int week_index = 0;
  features::Date week_start{};
  std::optional<GdsScore> gds;
  std::vector<signal::ActivityWindow> windows;
  std::vector<text::Tweet> tweets;
};

struct WeekOutcome {
  features::WeekRow row;
  std::size_t windows = 0;
  std::size_t tweets_used = 0;
  std::size_t tweets_filtered = 0;  // failed the keyword filter or fell outside the week
};

/// HAR labels per window and NB labels per tweet, aggregated into the 27-value weekly vector.
inline WeekOutcome featurize_week(const har::CnnModel& har_model, const text::NaiveBayesModel& nb,
                                  const text::KeywordFilter& filter, const WeekInput& in,
                                  const features::TimeCredit& credit) {
  if (!in.gds) throw PreconditionError("featurize_week: week has no GDS score");
  WeekOutcome out;
  const auto labels = har::predict_all(har_model, in.windows);
  std::map<features::Date, std::vector<features::WindowPrediction>> by_day;
  for (std::size_t i = 0; i < in.windows.size(); ++i) {
    const auto& w = in.windows[i];
    by_day[features::date_of(w.start_t_ns)].push_back({in.participant_id, w.start_t_ns, labels[i]});
  }
  std::map<features::Date, std::vector<SentimentLabel>> moods;
  const auto week_end = in.week_start + std::chrono::days{7};
  for (const auto& t : in.tweets) {
    const auto d = features::date_of(t.t_ns);
    if (!filter.matches(t.text) || d < in.week_start || d >= week_end) {
      ++out.tweets_filtered;
      continue;
    }
    moods[d].push_back(text::nb_predict(nb, text::tokenize(t.text)).label);
    ++out.tweets_used;
  }
  std::vector<features::DailyFeatures> days;
  for (int k = 0; k < 7; ++k) {
    const auto d = in.week_start + std::chrono::days{k};
    days.push_back(features::aggregate_day(by_day[d], moods[d], in.participant_id, d, credit));
  }
  for (const auto& [d, preds] : by_day)
    if (d < in.week_start || d >= week_end)
      throw GroupingError("window dated " + features::format_date(d) + " outside week " +
                          std::to_string(in.week_index) + " of " + in.participant_id);
  out.row.features = features::build_week_vector(days, in.participant_id, in.week_index, in.week_start);
  out.row.gds = in.gds->value();
  out.windows = in.windows.size();
  return out;
}

inline std::vector<predict::Sample> to_samples(std::span<const features::WeekRow> rows) {
  std::vector<predict::Sample> out;
  out.reserve(rows.size());
  for (const auto& r : rows) {
    predict::Sample s;
    s.participant_id = r.features.participant_id;
    s.x.assign(r.features.values.begin(), r.features.values.end());
    s.gds = r.gds;
    s.level = classify_level(r.gds);
    out.push_back(std::move(s));
  }
  return out;
}

/// Keeps only the listed feature columns, in list order.
inline std::vector<predict::Sample> project(std::span<const predict::Sample> data, std::span<const std::size_t> cols) {
  std::vector<predict::Sample> out(data.begin(), data.end());
  for (auto& s : out) {
    std::vector<double> x;
    x.reserve(cols.size());
    for (auto c : cols) x.push_back(s.x.at(c));
    s.x = std::move(x);
  }
  return out;
}

struct Selection {
  double lambda = 0.0;
  predict::WrapperResult wrapper;
};

/// Lambda chosen once by K-fold CV on all 27 features; the wrapper then scores
/// subsets by participant-level LOOCV RMSD at that lambda.
inline Selection select_features(std::span<const predict::Sample> data, const predict::LambdaSearch& search,
                                 const predict::LoocvOptions& loocv) {
  Selection sel;
  sel.lambda = predict::select_lambda_cv(predict::design_matrix(data), predict::gds_targets(data), search).chosen;
  std::vector<std::size_t> all(data.empty() ? 0 : data.front().x.size());
  std::iota(all.begin(), all.end(), 0);
  sel.wrapper = predict::wrapper_select(all, [&](std::span<const std::size_t> cols) {
    return predict::lasso_loocv_rmsd(data, cols, sel.lambda, loocv);
  });
  return sel;
}

/// LOOCV GDS predictions of a lasso at fixed lambda, in dataset order.
inline std::vector<double> gds_loocv_predictions(std::span<const predict::Sample> data, double lambda,
                                                 const predict::LoocvOptions& opt) {
  auto folds = predict::loocv(
      data,
      [&](std::span<const predict::Sample> train) {
        auto m = predict::fit_lasso(predict::design_matrix(train), predict::gds_targets(train), lambda);
        return [m = std::move(m)](const predict::Sample& s) { return predict::predict_gds(m, s.x); };
      },
      opt);
  return predict::gather<double>(folds, data.size());
}

/// LOOCV severity predictions (level and per-class scores), in dataset order.
inline std::vector<predict::LevelPrediction> classify_loocv(std::span<const predict::Sample> data,
                                                            predict::ClassifierKind kind,
                                                            const predict::ClassifierOptions& copt,
                                                            const predict::LoocvOptions& opt) {
  auto folds = predict::loocv(
      data,
      [&](std::span<const predict::Sample> train) {
        auto m = predict::AnyClassifier::fit(kind, train, copt);
        return [m = std::move(m)](const predict::Sample& s) {
          const auto sc = m.scores(s.x);
          return predict::LevelPrediction{predict::argmax_level(sc), sc};
        };
      },
      opt);
  return predict::gather<predict::LevelPrediction>(folds, data.size());
}

inline predict::EvalReport evaluate_predictions(std::span<const predict::LevelPrediction> preds,
                                                std::span<const DepressionLevel> truths) {
  std::vector<DepressionLevel> levels;
  std::vector<predict::Scores> scores;
  for (const auto& p : preds) {
    levels.push_back(p.level);
    scores.push_back(p.scores);
  }
  return predict::evaluate(levels, truths, scores);
}

/// Per-feature Pearson correlation with GDS over the weekly table.
inline std::vector<std::pair<std::string, std::optional<double>>> feature_correlations(
    std::span<const features::WeekRow> rows) {
  std::vector<std::pair<std::string, std::optional<double>>> out;
  const auto names = features::weekly_feature_names();
  std::vector<double> gds;
  for (const auto& r : rows) gds.push_back(r.gds);
  for (std::size_t j = 0; j < names.size(); ++j) {
    std::vector<double> col;
    for (const auto& r : rows) col.push_back(r.features.values[j]);
    std::optional<double> r;
    if (rows.size() >= 2 && stddev(col) > 0 && stddev(gds) > 0) r = pearson(col, gds);
    out.push_back({names[j], r});
  }
  return out;
}

// ------------------------------------------------------ intermediate files

/// Preprocessed body acceleration of (participant, week), stored as float32.
///   "HSSEG001" u32 count, then per segment:
///   u32 id length, id bytes, i32 week, i64 t0_ns, i64 period_ns, u64 samples, samples x 3 f32
struct StoredSegment {
  std::string participant_id;
  int week_index = 0;
  signal::BodySegment segment;
};

inline void write_segments(const fs::path& path, std::span<const StoredSegment> segs) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error("cannot write '" + path.string() + "'");
  os.write("HSSEG001", 8);
  write_le<std::uint32_t>(os, static_cast<std::uint32_t>(segs.size()));
  for (const auto& s : segs) {
    write_le<std::uint32_t>(os, static_cast<std::uint32_t>(s.participant_id.size()));
    os.write(s.participant_id.data(), static_cast<std::streamsize>(s.participant_id.size()));
    write_le<std::int32_t>(os, s.week_index);
    write_le<std::int64_t>(os, s.segment.t0_ns);
    write_le<std::int64_t>(os, s.segment.period_ns);
    write_le<std::uint64_t>(os, s.segment.body.size());
    for (const auto& t : s.segment.body)
      for (double v : {t.x, t.y, t.z}) write_le<float>(os, static_cast<float>(v));
  }
  if (!os) throw Error("short write to '" + path.string() + "'");
}

inline std::vector<StoredSegment> read_segments(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open '" + path.string() + "'");
  char magic[8];
  if (!is.read(magic, 8) || std::string_view(magic, 8) != "HSSEG001")
    throw ParseError("'" + path.string() + "' is not a segment file", 1);
  const auto count = read_le<std::uint32_t>(is);
  std::vector<StoredSegment> out(count);
  for (auto& s : out) {
    const auto len = read_le<std::uint32_t>(is);
    if (len > 4096) throw ParseError("implausible participant id length", static_cast<std::size_t>(is.tellg()));
    s.participant_id.resize(len);
    if (!is.read(s.participant_id.data(), len)) throw ParseError("truncated segment file");
    s.week_index = read_le<std::int32_t>(is);
    s.segment.t0_ns = read_le<std::int64_t>(is);
    s.segment.period_ns = read_le<std::int64_t>(is);
    const auto n = read_le<std::uint64_t>(is);
    if (n > (1ULL << 32)) throw ParseError("implausible segment length", static_cast<std::size_t>(is.tellg()));
    s.segment.body.resize(n);
    for (auto& t : s.segment.body) {
      t.x = read_le<float>(is);
      t.y = read_le<float>(is);
      t.z = read_le<float>(is);
    }
  }
  return out;
}

inline std::string nb_to_json(const text::NaiveBayesModel& m) {
  json j;
  j["gamma"] = m.gamma;
  j["vocabulary"] = m.vocabulary;
  j["doc_counts"] = m.doc_counts;
  j["token_counts"] = m.token_counts;
  return j.dump() + "\n";
}

inline text::NaiveBayesModel nb_from_json(std::string_view s) {
  try {
    const auto j = json::parse(s);
    text::NaiveBayesModel m;
    m.gamma = j.at("gamma").get<double>();
    m.vocabulary = j.at("vocabulary").get<std::vector<std::string>>();
    m.doc_counts = j.at("doc_counts").get<std::array<double, kNumSentiments>>();
    m.token_counts = j.at("token_counts").get<std::array<std::vector<double>, kNumSentiments>>();
    text::nb_finalize(m);
    return m;
  } catch (const json::exception& e) {
    throw ParseError(std::string("naive bayes model: ") + e.what());
  }
}

inline std::string sentiment_name(SentimentLabel s) {
  switch (s) {
    case SentimentLabel::Negative: return "negative";
    case SentimentLabel::Neutral: return "neutral";
    case SentimentLabel::Positive: return "positive";
  }
  return "?";
}

inline SentimentLabel parse_sentiment_name(std::string_view s, std::size_t line_no) {
  if (s == "negative") return SentimentLabel::Negative;
  if (s == "neutral") return SentimentLabel::Neutral;
  if (s == "positive") return SentimentLabel::Positive;
  throw ParseError("unknown sentiment label '" + std::string(s) + "'", line_no);
}

inline ActivityLabel parse_activity_name(std::string_view s, std::size_t line_no) {
  for (int a = 0; a < kNumActivities; ++a)
    if (s == to_string(static_cast<ActivityLabel>(a))) return static_cast<ActivityLabel>(a);
  throw ParseError("unknown activity '" + std::string(s) + "'", line_no);
}

inline std::vector<std::string> read_selected(const fs::path& p) {
  std::vector<std::string> names;
  const std::string contents = read_file(p.string());
  for (auto line : split(contents, '\n')) {
    line = trim(line);
    if (line.empty() || line.front() == '#') continue;
    names.emplace_back(line);
  }
  return names;
}

inline std::vector<std::size_t> feature_columns(std::span<const std::string> names) {
  const auto all = features::weekly_feature_names();
  std::vector<std::size_t> cols;
  for (const auto& n : names) {
    const auto it = std::find(all.begin(), all.end(), n);
    if (it == all.end()) throw ParseError("unknown feature '" + n + "'");
    cols.push_back(static_cast<std::size_t>(it - all.begin()));
  }
  return cols;
}

// ------------------------------------------------------------- file stages

struct StageResult {
  std::string summary;  // one line
};

inline int week_of(std::string_view id) { return parse_number<int>(id); }

/// Synthetic cohort routed through the acquisition store, plus labeled HAR
/// bouts, a labeled sentiment corpus, the lexicon and the cohort roster.
inline StageResult run_generate(const PipelineConfig& cfg) {
  cfg.validate();
  fs::create_directories(cfg.dir());
  const auto ccfg = cfg.cohort();
  const auto lex = text::Lexicon::starter();
  const auto profiles = cohort::generate_cohort(cfg.participants, cfg.seed);
  ingest::Store store(cfg.path(artifact::kStore));

  std::string roster = "participant_id\timei\ttwitter_id\ttrue_severity\n";
  std::size_t samples = 0, tweets = 0, stored = 0, duplicates = 0;
  auto tally = [&](const ingest::RouteResult& r) {
    (r.disposition == ingest::Disposition::Stored ? stored : duplicates) += 1;
  };
  for (const auto& p : profiles) {
    const auto id = store.register_participant(p.imei, p.twitter_id);
    if (id != p.participant_id)
      throw Error("store at '" + store.root().string() + "' already holds a different cohort; remove it first");
    roster += p.participant_id + "\t" + p.imei + "\t" + p.twitter_id + "\t" + std::string(to_string(p.true_severity)) + "\n";
    for (int w = 0; w < cfg.weeks; ++w) {
      for (int d = 0; d < 7; ++d) {
        const auto accel = cohort::synth_accel_day(p, cohort::study_day(ccfg, w, d), ccfg);
        if (accel.empty()) continue;
        std::string payload;
        for (const auto& s : accel) payload += signal::format_accel_line(p.participant_id, s) + "\n";
        samples += accel.size();
        tally(store.route({p.imei, "02", w, payload}));
      }
      std::string tw;
      for (const auto& t : cohort::synth_tweets(p, w, ccfg, lex)) tw += text::format_tweet_line(t.tweet) + "\n";
      tweets += static_cast<std::size_t>(std::count(tw.begin(), tw.end(), '\n'));
      if (!tw.empty()) tally(store.route({p.twitter_id, "03", w, tw}));
      const auto report_day = cohort::study_day(ccfg, w, 6);
      const ingest::GdsRecord g{features::midnight_ns(report_day) + 20LL * 3600 * 1'000'000'000,
                                cohort::synth_gds(p, w)};
      tally(store.route({p.imei, "01", w, ingest::format_gds_line(g)}));
    }
  }
  write_file(cfg.path(artifact::kCohort).string(), roster);

  std::string har = "activity,bout,t_ns,x,y,z\n";
  for (const auto& b : cohort::synth_labeled_bouts(cfg.har_windows_per_class, cohort::mix_seed(cfg.seed, 0x4A4),
                                                   cfg.preprocess()))
    for (const auto& s : b.samples)
      har += std::string(to_string(b.activity)) + "," + std::to_string(b.bout) + "," + std::to_string(s.t_ns) + "," +
             format_double(s.x) + "," + format_double(s.y) + "," + format_double(s.z) + "\n";
  write_file(cfg.path(artifact::kHarLabeled).string(), har);

  Rng rng(cohort::mix_seed(cfg.seed, 0x5E7));
  std::string corpus = "label\ttext\n";
  for (int i = 0; i < cfg.sentiment_docs_per_class; ++i)
    for (int s = 0; s < kNumSentiments; ++s) {
      const auto label = sentiment_from_index(s);
      corpus += sentiment_name(label) + "\t" + cohort::synth_tweet_text(label, lex, rng) + "\n";
    }
  write_file(cfg.path(artifact::kSentimentLabeled).string(), corpus);
  write_file(cfg.path(artifact::kLexicon).string(), text::kStarterLexicon);

  return {"generate: " + std::to_string(profiles.size()) + " participants x " + std::to_string(cfg.weeks) +
          " weeks, " + std::to_string(samples) + " accel samples, " + std::to_string(tweets) + " tweets, " +
          std::to_string(stored) + " envelopes stored, " + std::to_string(duplicates) + " duplicates -> " +
          cfg.dir().string()};
}

/// Resample, filter and gravity-split every stored accelerometer week.
inline StageResult run_preprocess(const PipelineConfig& cfg) {
  cfg.validate();
  require(cfg, std::string(artifact::kStore) + "/registry.tsv", "generate");
  const ingest::Store store(cfg.path(artifact::kStore));
  const auto pre = cfg.preprocess();
  std::vector<StoredSegment> segs;
  std::size_t weeks = 0, windows = 0;
  for (const auto& p : store.participants())
    for (int w = 0; w < cfg.weeks; ++w) {
      const auto b = store.fetch_week(p.participant_id, w);
      if (!b.accel_payload) continue;
      ++weeks;
      std::vector<signal::AccelSample> stream;
      for (auto& r : signal::parse_accel_text(*b.accel_payload)) stream.push_back(r.sample);
      for (auto& s : signal::preprocess_segments(stream, pre)) {
        windows += signal::window_count(s.body.size(), pre.window_len, pre.overlap);
        segs.push_back({p.participant_id, w, std::move(s)});
      }
    }
  write_segments(cfg.path(artifact::kSegments), segs);
  return {"preprocess: " + std::to_string(weeks) + " participant-weeks, " + std::to_string(segs.size()) +
          " segments, " + std::to_string(windows) + " windows -> " + cfg.path(artifact::kSegments).string()};
}

inline std::vector<cohort::LabeledBout> read_har_labeled(const fs::path& p) {
  std::vector<cohort::LabeledBout> bouts;
  std::size_t line_no = 0;
  const std::string contents = read_file(p.string());
  for (auto line : split(contents, '\n')) {
    ++line_no;
    if (line_no == 1 || trim(line).empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != 6) throw ParseError("expected activity,bout,t_ns,x,y,z", line_no);
    const auto act = parse_activity_name(f[0], line_no);
    const int bout = parse_number<int>(f[1], line_no);
    if (bouts.empty() || bouts.back().activity != act || bouts.back().bout != bout) bouts.push_back({act, bout, {}});
    signal::AccelSample s{parse_number<std::int64_t>(f[2], line_no), parse_number<double>(f[3], line_no),
                          parse_number<double>(f[4], line_no), parse_number<double>(f[5], line_no)};
    try {
      signal::validate_sample(s);
    } catch (const Error& e) {
      throw ParseError(e.what(), line_no);
    }
    bouts.back().samples.push_back(s);
  }
  return bouts;
}

inline StageResult run_train_har(const PipelineConfig& cfg) {
  cfg.validate();
  const auto labeled = require(cfg, artifact::kHarLabeled, "generate");
  const auto bouts = read_har_labeled(labeled);
  const auto data = cohort::window_bouts(bouts, cfg.har_windows_per_class, cfg.preprocess());
  const auto tcfg = cfg.har_train();
  auto model = har::CnnModel::initialize(har::Architecture{}, cohort::mix_seed(cfg.seed, 0x4A6));
  const auto res = har::train(std::move(model), data, tcfg);
  har::save_checkpoint(res.model, cfg.path(artifact::kHarModel).string());
  return {"train-har: " + std::to_string(data.size()) + " windows, " + std::to_string(tcfg.epochs) +
          " epochs, final loss " + format_fixed(res.loss_trace.back(), 6) + ", training accuracy " +
          format_fixed(har::accuracy(res.model, data), 4) + " -> " + cfg.path(artifact::kHarModel).string()};
}

inline StageResult run_train_sentiment(const PipelineConfig& cfg) {
  cfg.validate();
  const auto corpus_path = require(cfg, artifact::kSentimentLabeled, "generate");
  require(cfg, artifact::kLexicon, "generate");
  std::vector<text::LabeledDocument> train, held_out;
  std::size_t line_no = 0;
  const std::string contents = read_file(corpus_path.string());
  for (auto line : split(contents, '\n')) {
    ++line_no;
    if (line_no == 1 || trim(line).empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string_view::npos) throw ParseError("expected label<TAB>text", line_no);
    text::LabeledDocument doc{text::tokenize(line.substr(tab + 1)), parse_sentiment_name(line.substr(0, tab), line_no)};
    // every fifth document is held out
    (line_no % 5 == 0 ? held_out : train).push_back(std::move(doc));
  }
  const auto nb = text::nb_train(train, cfg.nb_gamma);
  write_file(cfg.path(artifact::kNbModel).string(), nb_to_json(nb));
  return {"train-sentiment: " + std::to_string(train.size()) + " training tweets, vocabulary " +
          std::to_string(nb.vocabulary.size()) + ", held-out accuracy " + format_fixed(text::nb_accuracy(nb, held_out), 4) +
          " -> " + cfg.path(artifact::kNbModel).string()};
}

inline StageResult run_featurize(const PipelineConfig& cfg) {
  cfg.validate();
  require(cfg, std::string(artifact::kStore) + "/registry.tsv", "generate");
  const auto segs_path = require(cfg, artifact::kSegments, "preprocess");
  const auto har_path = require(cfg, artifact::kHarModel, "train-har");
  const auto nb_path = require(cfg, artifact::kNbModel, "train-sentiment");
  const ingest::Store store(cfg.path(artifact::kStore));
  const auto har_model = har::load_checkpoint(har_path.string());
  const auto nb = nb_from_json(read_file(nb_path.string()));
  const auto filter = cfg.keyword_filter();
  const auto pre = cfg.preprocess();
  const auto ccfg = cfg.cohort();

  std::map<std::pair<std::string, int>, std::vector<signal::ActivityWindow>> windows;
  for (const auto& s : read_segments(segs_path))
    for (auto& w : signal::segment_windows(s.segment, s.participant_id, pre))
      windows[{s.participant_id, s.week_index}].push_back(std::move(w));

  std::vector<features::WeekRow> rows;
  std::size_t no_gds = 0, used = 0, filtered = 0;
  for (const auto& p : store.participants())
    for (int w = 0; w < cfg.weeks; ++w) {
      const auto b = store.fetch_week(p.participant_id, w);
      if (!b.gds) {
        ++no_gds;
        continue;
      }
      WeekInput in{p.participant_id, w, cohort::study_day(ccfg, w, 0), b.gds, {}, b.tweets};
      if (auto it = windows.find({p.participant_id, w}); it != windows.end()) in.windows = std::move(it->second);
      const auto o = featurize_week(har_model, nb, filter, in, cfg.time_credit());
      used += o.tweets_used;
      filtered += o.tweets_filtered;
      rows.push_back(o.row);
    }
  write_file(cfg.path(artifact::kWeekly).string(), features::format_weekly_csv(rows));
  return {"featurize: " + std::to_string(rows.size()) + " participant-weeks, " + std::to_string(no_gds) +
          " without GDS skipped, " + std::to_string(used) + " tweets used, " + std::to_string(filtered) +
          " filtered -> " + cfg.path(artifact::kWeekly).string()};
}

inline std::vector<features::WeekRow> load_weekly(const PipelineConfig& cfg) {
  return features::parse_weekly_csv(read_file(require(cfg, artifact::kWeekly, "featurize").string()));
}

inline StageResult run_select_features(const PipelineConfig& cfg) {
  cfg.validate();
  const auto rows = load_weekly(cfg);
  const auto data = to_samples(rows);
  const auto sel = select_features(data, cfg.lambda_search(), cfg.loocv());
  const auto names = features::weekly_feature_names();
  std::string out = "# lambda=" + format_double(sel.lambda) + "\n# loocv_rmsd=" + format_double(sel.wrapper.rmsd) +
                    "\n# full_rmsd=" + format_double(sel.wrapper.full_rmsd) + "\n";
  std::string listed;
  for (auto c : sel.wrapper.selected) {
    out += names[c] + "\n";
    listed += (listed.empty() ? "" : " ") + names[c];
  }
  write_file(cfg.path(artifact::kSelected).string(), out);
  return {"select-features: " + std::to_string(sel.wrapper.selected.size()) + " of 27 selected (" + listed +
          "), LOOCV RMSD " + format_fixed(sel.wrapper.rmsd, 4) + " vs full " + format_fixed(sel.wrapper.full_rmsd, 4) +
          " -> " + cfg.path(artifact::kSelected).string()};
}

inline StageResult run_fit_gds(const PipelineConfig& cfg) {
  cfg.validate();
  const auto rows = load_weekly(cfg);
  const auto names = read_selected(require(cfg, artifact::kSelected, "select-features"));
  const auto cols = feature_columns(names);
  const auto data = project(to_samples(rows), cols);
  const auto x = predict::design_matrix(data);
  const auto y = predict::gds_targets(data);
  const auto search = cfg.lambda_search();
  const double lambda = predict::select_lambda_cv(x, y, search).chosen;
  const auto model = predict::fit_lasso(x, y, lambda, search.fit, names);

  const auto [b0, raw] = model.raw_coefficients();
  json j;
  j["lambda"] = lambda;
  j["intercept"] = b0;
  j["features"] = json::array();
  for (std::size_t k = 0; k < names.size(); ++k) j["features"].push_back({{"name", names[k]}, {"coef", raw[k]}});
  write_file(cfg.path(artifact::kGdsModel).string(), j.dump(2) + "\n");

  const auto pred = gds_loocv_predictions(data, lambda, cfg.loocv());
  std::string csv = "participant_id,week_index,gds,predicted,predicted_gds\n";
  for (std::size_t i = 0; i < rows.size(); ++i)
    csv += rows[i].features.participant_id + "," + std::to_string(rows[i].features.week_index) + "," +
           std::to_string(rows[i].gds) + "," + format_fixed(pred[i], 6) + "," +
           std::to_string(predict::to_gds_score(pred[i]).value()) + "\n";
  write_file(cfg.path(artifact::kGdsLoocv).string(), csv);
  return {"fit-gds: lambda " + format_double(lambda) + ", " + std::to_string(model.support().size()) +
          " nonzero slopes, LOOCV RMSD " + format_fixed(predict::rmsd(pred, y), 4) + " -> " +
          cfg.path(artifact::kGdsModel).string()};
}

inline StageResult run_classify(const PipelineConfig& cfg) {
  cfg.validate();
  const auto rows = load_weekly(cfg);
  const auto cols = feature_columns(read_selected(require(cfg, artifact::kSelected, "select-features")));
  const auto data = project(to_samples(rows), cols);
  const auto preds = classify_loocv(data, cfg.classifier_kind(), cfg.classifier_options(), cfg.loocv());
  std::string csv = "participant_id,week_index,gds,truth,predicted,score_absence,score_mild_moderate,score_severe\n";
  std::size_t hits = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    hits += preds[i].level == data[i].level;
    csv += rows[i].features.participant_id + "," + std::to_string(rows[i].features.week_index) + "," +
           std::to_string(rows[i].gds) + "," + std::string(to_string(data[i].level)) + "," +
           std::string(to_string(preds[i].level));
    for (double s : preds[i].scores) csv += "," + predict::format_threshold(s);
    csv += "\n";
  }
  write_file(cfg.path(artifact::kPredictions).string(), csv);
  return {"classify: " + cfg.classifier + " LOOCV over " + std::to_string(predict::participants_of(data).size()) +
          " participants, " + std::to_string(hits) + "/" + std::to_string(data.size()) + " weeks correct -> " +
          cfg.path(artifact::kPredictions).string()};
}

inline DepressionLevel parse_level_name(std::string_view s, std::size_t line_no) {
  for (int c = 0; c < kNumLevels; ++c)
    if (s == to_string(static_cast<DepressionLevel>(c))) return static_cast<DepressionLevel>(c);
  throw ParseError("unknown depression level '" + std::string(s) + "'", line_no);
}

inline double parse_score(std::string_view s, std::size_t line_no) {
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  return parse_number<double>(s, line_no);
}

inline StageResult run_evaluate(const PipelineConfig& cfg) {
  cfg.validate();
  const auto path = require(cfg, artifact::kPredictions, "classify");
  std::vector<predict::LevelPrediction> preds;
  std::vector<DepressionLevel> truths;
  std::size_t line_no = 0;
  const std::string contents = read_file(path.string());
  for (auto line : split(contents, '\n')) {
    ++line_no;
    if (line_no == 1 || trim(line).empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != 8) throw ParseError("severity prediction row needs 8 fields", line_no);
    truths.push_back(parse_level_name(f[3], line_no));
    predict::LevelPrediction p;
    p.level = parse_level_name(f[4], line_no);
    for (int c = 0; c < kNumLevels; ++c) p.scores[c] = parse_score(f[5 + c], line_no);
    preds.push_back(p);
  }
  const auto rep = evaluate_predictions(preds, truths);
  write_file(cfg.path(artifact::kMetrics).string(), predict::format_metrics_csv(rep));
  write_file(cfg.path(artifact::kRoc).string(), predict::format_roc_csv(rep));
  return {"evaluate: accuracy " + format_fixed(rep.accuracy, 4) + ", macro accuracy " +
          predict::format_rate(rep.macro_accuracy, 4) + ", severe sensitivity " +
          predict::format_rate(rep.per_class[static_cast<int>(DepressionLevel::Severe)].sensitivity, 4) + " -> " +
          cfg.path(artifact::kMetrics).string()};
}

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// First line is the timestamp header; everything after it depends only on the inputs.
inline std::string render_report(const PipelineConfig& cfg, std::string_view timestamp) {
  const auto rows = load_weekly(cfg);
  const auto selected = read_file(require(cfg, artifact::kSelected, "select-features").string());
  const auto gds_loocv = read_file(require(cfg, artifact::kGdsLoocv, "fit-gds").string());
  const auto metrics = read_file(require(cfg, artifact::kMetrics, "evaluate").string());
  const auto roc = read_file(require(cfg, artifact::kRoc, "evaluate").string());

  std::string out = "# hsdep report generated " + std::string(timestamp) + "\n";
  out += "\n[config]\n" + cfg.serialize();

  out += "\n[cohort]\nparticipant_weeks=" + std::to_string(rows.size()) + "\n";
  std::array<std::size_t, kNumLevels> levels{};
  for (const auto& r : rows) ++levels[static_cast<int>(classify_level(r.gds))];
  for (int c = 0; c < kNumLevels; ++c)
    out += std::string(to_string(static_cast<DepressionLevel>(c))) + "_weeks=" + std::to_string(levels[c]) + "\n";

  out += "\n[selected_features]\n" + selected;

  std::vector<double> pred, truth;
  std::size_t line_no = 0;
  for (auto line : split(gds_loocv, '\n')) {
    ++line_no;
    if (line_no == 1 || trim(line).empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != 5) throw ParseError("gds_loocv row needs 5 fields", line_no);
    truth.push_back(parse_number<double>(f[2], line_no));
    pred.push_back(parse_number<double>(f[3], line_no));
  }
  out += "\n[gds_regression]\nloocv_rmsd=" + format_fixed(predict::rmsd(pred, truth), 6) + "\n";

  out += "\n[metrics]\n" + metrics;

  // ROC summary; the full point lists live in roc_points.csv
  out += "\n[roc]\nclass,points\n";
  std::map<std::string, std::size_t> counts;
  line_no = 0;
  for (auto line : split(roc, '\n')) {
    ++line_no;
    if (line_no == 1 || trim(line).empty()) continue;
    ++counts[std::string(split(line, ',').front())];
  }
  for (const auto& [c, n] : counts) out += c + "," + std::to_string(n) + "\n";

  out += "\n[feature_correlation]\nfeature,pearson_r_with_gds\n";
  for (const auto& [name, r] : feature_correlations(rows))
    out += name + "," + (r ? format_fixed(*r, 6) : std::string("undefined")) + "\n";
  return out;
}

inline StageResult run_report(const PipelineConfig& cfg) {
  cfg.validate();
  const auto text = render_report(cfg, utc_timestamp());
  write_file(cfg.path(artifact::kReport).string(), text);
  return {"report: " + cfg.path(artifact::kReport).string()};
}

/// Report text without its timestamp header line.
inline std::string report_body(std::string_view report) {
  const auto nl = report.find('\n');
  return nl == std::string_view::npos ? std::string() : std::string(report.substr(nl + 1));
}

inline const std::vector<std::string>& stage_names() {
  static const std::vector<std::string> names = {"generate",        "preprocess",      "train-har", "train-sentiment",
                                                 "featurize",       "select-features", "fit-gds",   "classify",
                                                 "evaluate",        "report"};
  return names;
}

inline StageResult run_stage(std::string_view name, const PipelineConfig& cfg) {
  if (name == "generate") return run_generate(cfg);
  if (name == "preprocess") return run_preprocess(cfg);
  if (name == "train-har") return run_train_har(cfg);
  if (name == "train-sentiment") return run_train_sentiment(cfg);
  if (name == "featurize") return run_featurize(cfg);
  if (name == "select-features") return run_select_features(cfg);
  if (name == "fit-gds") return run_fit_gds(cfg);
  if (name == "classify") return run_classify(cfg);
  if (name == "evaluate") return run_evaluate(cfg);
  if (name == "report") return run_report(cfg);
  throw PreconditionError("unknown stage '" + std::string(name) + "'");
}

/// Every stage in order; returns the one-line summaries.
inline std::vector<std::string> run_all(const PipelineConfig& cfg) {
  std::vector<std::string> out;
  for (const auto& s : stage_names()) out.push_back(run_stage(s, cfg).summary);
  return out;
}

}  // namespace hs::pipeline
