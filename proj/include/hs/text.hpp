#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "hs/error.hpp"
#include "hs/starter_lexicon.hpp"
#include "hs/types.hpp"
#include "hs/util.hpp"

namespace hs::text {

// ---------------------------------------------------------------- tokens

namespace detail {
inline bool is_word_byte(unsigned char c) { return std::isalnum(c) || c >= 0x80; }

inline std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

inline bool is_url(std::string_view piece) {
  return piece.starts_with("http://") || piece.starts_with("https://") || piece.starts_with("www.");
}
}  // namespace detail

/// Lowercases, drops URLs, and splits on anything that is not a letter or
/// digit. Apostrophes survive only between two word characters; '#' and '@'
/// sigils fall away with the other punctuation.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  const std::string lower = detail::ascii_lower(text);
  std::size_t i = 0;
  while (i < lower.size()) {
    while (i < lower.size() && std::isspace(static_cast<unsigned char>(lower[i]))) ++i;
    std::size_t j = i;
    while (j < lower.size() && !std::isspace(static_cast<unsigned char>(lower[j]))) ++j;
    const std::string_view piece(lower.data() + i, j - i);
    i = j;
    if (piece.empty() || detail::is_url(piece)) continue;
    std::string cur;
    for (std::size_t k = 0; k < piece.size(); ++k) {
      const auto c = static_cast<unsigned char>(piece[k]);
      if (detail::is_word_byte(c)) {
        cur += static_cast<char>(c);
      } else if (c == '\'' && !cur.empty() && k + 1 < piece.size() &&
                 detail::is_word_byte(static_cast<unsigned char>(piece[k + 1]))) {
        cur += '\'';
      } else if (!cur.empty()) {
        tokens.push_back(std::move(cur));
        cur.clear();
      }
    }
    if (!cur.empty()) tokens.push_back(std::move(cur));
  }
  return tokens;
}

// --------------------------------------------------------------- lexicon

/// Words never scored negative, however a lexicon file lists them.
inline const std::set<std::string, std::less<>>& negation_words() {
  static const std::set<std::string, std::less<>> words = {"no", "not", "never", "none", "neither"};
  return words;
}

class Lexicon {
 public:
  Lexicon() = default;

  /// Parses word<TAB>polarity lines. Blank lines and lines starting with '#' are skipped.
  static Lexicon parse(std::string_view tsv) {
    Lexicon lex;
    std::size_t line_no = 0;
    for (auto line : split(tsv, '\n')) {
      ++line_no;
      const auto t = trim(line);
      if (t.empty() || t.front() == '#') continue;
      const auto cols = split(t, '\t');
      if (cols.size() != 2) throw ParseError("lexicon line needs word<TAB>polarity", line_no);
      const int pol = parse_number<int>(cols[1], line_no);
      if (pol < -1 || pol > 1) throw ParseError("polarity must be -1, 0 or +1", line_no);
      const auto word = detail::ascii_lower(trim(cols[0]));
      if (word.empty()) throw ParseError("empty lexicon word", line_no);
      lex.set(word, pol);
    }
    return lex;
  }

  static Lexicon load(const std::string& path) { return parse(read_file(path)); }
  static Lexicon starter() { return parse(kStarterLexicon); }

  void set(const std::string& word, int polarity) {
    if (polarity < 0 && negation_words().contains(word)) polarity = 0;
    polarity_[word] = polarity;
  }

  int polarity(std::string_view word) const {
    const auto it = polarity_.find(word);
    return it == polarity_.end() ? 0 : it->second;
  }

  std::vector<std::string> words_with(int polarity) const {
    std::vector<std::string> out;
    for (const auto& [w, p] : polarity_)
      if (p == polarity) out.push_back(w);
    return out;
  }

  std::size_t size() const { return polarity_.size(); }

 private:
  std::map<std::string, int, std::less<>> polarity_;
};

/// Sum of word polarities, every word weighted 1.
inline long polarity_score(std::span<const std::string> tokens, const Lexicon& lex) {
  long score = 0;
  for (const auto& t : tokens) score += lex.polarity(t);
  return score;
}

inline SentimentLabel polarity_label(std::span<const std::string> tokens, const Lexicon& lex) {
  return sentiment_from_score(polarity_score(tokens, lex));
}

// ----------------------------------------------------------- Naive Bayes

struct LabeledDocument {
  std::vector<std::string> tokens;
  SentimentLabel label = SentimentLabel::Neutral;
};

/// Multinomial model over token counts, indexed [class][word] with classes in
/// Negative, Neutral, Positive order.
struct NaiveBayesModel {
  double gamma = 1.0;
  std::vector<std::string> vocabulary;  // sorted
  std::array<double, kNumSentiments> doc_counts{};
  std::array<double, kNumSentiments> token_totals{};             // N_c
  std::array<std::vector<double>, kNumSentiments> token_counts;  // N_ci
  std::array<double, kNumSentiments> log_prior{};
  std::array<std::vector<double>, kNumSentiments> log_likelihood;  // ln alpha_ci

  std::ptrdiff_t word_index(std::string_view w) const {
    const auto it = std::lower_bound(vocabulary.begin(), vocabulary.end(), w);
    if (it == vocabulary.end() || *it != w) return -1;
    return it - vocabulary.begin();
  }

  /// alpha_ci; may be zero when gamma == 0.
  double alpha(int cls, std::size_t word) const { return std::exp(log_likelihood[cls][word]); }
};

/// Fills token_totals, log_prior and log_likelihood from gamma, vocabulary,
/// doc_counts and token_counts.
inline void nb_finalize(NaiveBayesModel& m) {
  if (!(m.gamma >= 0.0)) throw PreconditionError("naive bayes: gamma must be >= 0");
  const std::size_t n = m.vocabulary.size();
  if (!std::is_sorted(m.vocabulary.begin(), m.vocabulary.end()) ||
      std::adjacent_find(m.vocabulary.begin(), m.vocabulary.end()) != m.vocabulary.end())
    throw PreconditionError("naive bayes: vocabulary must be sorted and unique");
  double docs = 0.0;
  for (int c = 0; c < kNumSentiments; ++c) {
    if (m.token_counts[c].size() != n) throw ShapeError("naive bayes: token counts do not match vocabulary");
    if (m.doc_counts[c] <= 0)
      throw TrainingError("naive bayes: no documents labeled " + std::string(to_string(sentiment_from_index(c))));
    docs += m.doc_counts[c];
    m.token_totals[c] = 0.0;
    for (double v : m.token_counts[c]) m.token_totals[c] += v;
  }
  for (int c = 0; c < kNumSentiments; ++c) {
    m.log_prior[c] = std::log(m.doc_counts[c] / docs);
    const double denom = m.token_totals[c] + m.gamma * static_cast<double>(n);
    m.log_likelihood[c].resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double num = m.token_counts[c][i] + m.gamma;
      m.log_likelihood[c][i] = num > 0 ? std::log(num / denom) : -std::numeric_limits<double>::infinity();
    }
  }
}

/// alpha_ci = (N_ci + gamma) / (N_c + gamma * n), priors from document frequency.
inline NaiveBayesModel nb_train(std::span<const LabeledDocument> corpus, double gamma = 1.0) {
  if (!(gamma >= 0.0)) throw PreconditionError("nb_train: gamma must be >= 0");
  NaiveBayesModel m;
  m.gamma = gamma;
  std::set<std::string, std::less<>> vocab;
  for (const auto& d : corpus) vocab.insert(d.tokens.begin(), d.tokens.end());
  m.vocabulary.assign(vocab.begin(), vocab.end());
  for (auto& c : m.token_counts) c.assign(m.vocabulary.size(), 0.0);
  for (const auto& d : corpus) {
    const int c = sentiment_index(d.label);
    m.doc_counts[c] += 1;
    for (const auto& t : d.tokens) m.token_counts[c][static_cast<std::size_t>(m.word_index(t))] += 1;
  }
  nb_finalize(m);
  return m;
}

struct NbPrediction {
  SentimentLabel label = SentimentLabel::Neutral;
  std::array<double, kNumSentiments> log_joint{};  // ln P(S_c) + sum ln alpha
  std::array<double, kNumSentiments> posterior{};  // normalized
};

/// Out-of-vocabulary tokens are ignored. Ties go to Neutral, otherwise to the
/// lowest class index.
inline NbPrediction nb_predict(const NaiveBayesModel& m, std::span<const std::string> tokens) {
  NbPrediction p;
  p.log_joint = m.log_prior;
  for (const auto& t : tokens) {
    const auto i = m.word_index(t);
    if (i < 0) continue;
    for (int c = 0; c < kNumSentiments; ++c) p.log_joint[c] += m.log_likelihood[c][static_cast<std::size_t>(i)];
  }
  const double best = *std::max_element(p.log_joint.begin(), p.log_joint.end());
  const int neutral = sentiment_index(SentimentLabel::Neutral);
  int chosen = -1;
  if (p.log_joint[neutral] == best) {
    chosen = neutral;
  } else {
    for (int c = 0; c < kNumSentiments && chosen < 0; ++c)
      if (p.log_joint[c] == best) chosen = c;
  }
  p.label = sentiment_from_index(chosen);

  if (std::isfinite(best)) {
    double z = 0.0;
    for (int c = 0; c < kNumSentiments; ++c) z += std::exp(p.log_joint[c] - best);
    for (int c = 0; c < kNumSentiments; ++c) p.posterior[c] = std::exp(p.log_joint[c] - best) / z;
  }
  return p;
}

inline double nb_accuracy(const NaiveBayesModel& m, std::span<const LabeledDocument> docs) {
  if (docs.empty()) return 0.0;
  std::size_t hit = 0;
  for (const auto& d : docs) hit += nb_predict(m, d.tokens).label == d.label;
  return static_cast<double>(hit) / static_cast<double>(docs.size());
}

// ------------------------------------------------------------ tweet format

struct Tweet {
  std::string twitter_id;
  std::string tweet_id;  // 18 digits
  std::int64_t t_ns = 0;
  std::string text;
  friend bool operator==(const Tweet&, const Tweet&) = default;
};

inline bool valid_tweet_id(std::string_view id) { return id.size() == 18 && all_digits(id); }

inline void validate_tweet(const Tweet& t, std::size_t line_no = 0) {
  if (!valid_tweet_id(t.tweet_id)) throw ParseError("tweet id must be exactly 18 digits", line_no);
  if (trim(t.text).empty()) throw ParseError("tweet text is empty", line_no);
}

/// twitter_id<TAB>tweet_id<TAB>t_ns<TAB>text; newlines in the text become spaces.
inline std::string format_tweet_line(const Tweet& t) {
  std::string text = t.text;
  std::replace(text.begin(), text.end(), '\n', ' ');
  std::replace(text.begin(), text.end(), '\r', ' ');
  return t.twitter_id + '\t' + t.tweet_id + '\t' + std::to_string(t.t_ns) + '\t' + text;
}

inline Tweet parse_tweet_line(std::string_view line, std::size_t line_no = 0) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  std::array<std::string_view, 3> head;
  for (auto& h : head) {
    const auto tab = line.find('\t');
    if (tab == std::string_view::npos) throw ParseError("tweet record needs 4 tab-separated fields", line_no);
    h = line.substr(0, tab);
    line.remove_prefix(tab + 1);
  }
  Tweet t{std::string(trim(head[0])), std::string(trim(head[1])), parse_number<std::int64_t>(head[2], line_no),
          std::string(line)};
  if (t.twitter_id.empty()) throw ParseError("empty twitter id", line_no);
  validate_tweet(t, line_no);
  return t;
}

inline std::vector<Tweet> parse_tweet_text(std::string_view text) {
  std::vector<Tweet> out;
  std::size_t line_no = 0;
  for (auto line : split(text, '\n')) {
    ++line_no;
    if (trim(line).empty()) continue;
    out.push_back(parse_tweet_line(line, line_no));
  }
  return out;
}

/// Case-insensitive substring allowlist; an empty list admits everything.
class KeywordFilter {
 public:
  KeywordFilter() = default;
  explicit KeywordFilter(std::vector<std::string> terms) {
    for (auto& t : terms) terms_.push_back(detail::ascii_lower(t));
  }

  /// The acquisition stream's track list.
  static KeywordFilter default_track() { return KeywordFilter({"Depression", "Anxiety", "Sad", "mental health"}); }

  bool matches(std::string_view text) const {
    if (terms_.empty()) return true;
    const auto lower = detail::ascii_lower(text);
    return std::any_of(terms_.begin(), terms_.end(),
                       [&](const std::string& t) { return lower.find(t) != std::string::npos; });
  }

  const std::vector<std::string>& terms() const { return terms_; }

 private:
  std::vector<std::string> terms_;
};

}  // namespace hs::text
