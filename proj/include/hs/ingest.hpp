#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "hs/error.hpp"
#include "hs/signal.hpp"
#include "hs/text.hpp"
#include "hs/types.hpp"
#include "hs/util.hpp"

namespace hs::ingest {

namespace fs = std::filesystem;

enum class Cn { Gds = 1, Accel = 2, Tweets = 3 };

inline std::string cn_code(Cn cn) {
  char buf[4];
  std::snprintf(buf, sizeof(buf), "%02d", static_cast<int>(cn));
  return buf;
}

/// Why an envelope or registration was refused.
enum class Rejection { MalformedKey, KeyCollision, UnknownKey, UnknownCn, MalformedPayload, UnknownParticipant };

inline const char* to_string(Rejection r) {
  switch (r) {
    case Rejection::MalformedKey: return "malformed-key";
    case Rejection::KeyCollision: return "key-collision";
    case Rejection::UnknownKey: return "unknown-key";
    case Rejection::UnknownCn: return "unknown-cn";
    case Rejection::MalformedPayload: return "malformed-payload";
    case Rejection::UnknownParticipant: return "unknown-participant";
  }
  return "?";
}

class IngestError : public Error {
 public:
  IngestError(Rejection reason, const std::string& what, std::size_t position = 0)
      : Error(std::string(to_string(reason)) + ": " + what), reason_(reason), position_(position) {}
  Rejection reason() const noexcept { return reason_; }
  /// Line of the offending payload record, 0 when not a payload error.
  std::size_t position() const noexcept { return position_; }

 private:
  Rejection reason_;
  std::size_t position_;
};

inline bool valid_imei(std::string_view s) { return s.size() == 15 && all_digits(s); }
inline bool valid_twitter_id(std::string_view s) { return s.size() == 18 && all_digits(s); }

/// "01" / "02" / "03" (or 1 / 2 / 3); anything else is rejected.
inline Cn parse_cn(std::string_view s) {
  s = trim(s);
  if (s == "01" || s == "1") return Cn::Gds;
  if (s == "02" || s == "2") return Cn::Accel;
  if (s == "03" || s == "3") return Cn::Tweets;
  throw IngestError(Rejection::UnknownCn, "cn '" + std::string(s) + "' is not one of 01, 02, 03");
}

// ------------------------------------------------------------- GDS payload

struct GdsRecord {
  std::int64_t t_ns = 0;
  GdsScore score{0};
};

/// t_ns,gds
inline std::string format_gds_line(const GdsRecord& r) {
  return std::to_string(r.t_ns) + "," + std::to_string(r.score.value()) + "\n";
}

inline std::vector<GdsRecord> parse_gds_text(std::string_view text) {
  std::vector<GdsRecord> out;
  std::size_t line_no = 0;
  for (auto line : split(text, '\n')) {
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != 2) throw ParseError("expected t_ns,gds", line_no);
    const auto t = parse_number<std::int64_t>(f[0], line_no);
    const auto g = parse_number<int>(f[1], line_no);
    if (g < 0 || g > 15) throw ParseError("GDS outside 0..15", line_no);
    out.push_back({t, GdsScore(g)});
  }
  return out;
}

// ---------------------------------------------------------------- registry

struct ParticipantRecord {
  std::string participant_id;
  std::string imei;
  std::string twitter_id;
  std::int64_t registered_at = 0;  // unix seconds
};

struct Envelope {
  std::string source_key;
  std::string cn;  // raw code as received
  int week_index = 0;
  std::string payload;
};

enum class Disposition { Stored, Duplicate };

struct RouteResult {
  Disposition disposition = Disposition::Stored;
  std::string participant_id;
  Cn cn = Cn::Gds;
  int week_index = 0;
  fs::path path;
  std::size_t records = 0;
};

struct WeekBundle {
  std::string participant_id;
  int week_index = 0;
  std::optional<GdsScore> gds;  // last reported score of the week
  std::optional<std::string> gds_payload;
  std::optional<fs::path> accel_path;
  std::optional<std::string> accel_payload;
  std::optional<std::string> tweet_payload;
  std::vector<text::Tweet> tweets;
  std::vector<std::string> missing;  // "gds", "accel", "tweets"
};

using Clock = std::function<std::int64_t()>;

inline std::int64_t system_seconds() {
  return std::chrono::duration_cast<std::chrono::seconds>(std::chrono::system_clock::now().time_since_epoch()).count();
}

/// File-backed acquisition store:
///   <root>/registry.tsv                       participant_id, imei, twitter_id, registered_at
///   <root>/<pid>/week_<W>_cn<CC>.txt          accepted payloads, appended in arrival order
///   <root>/<pid>/week_<W>_cn<CC>.hashes       one payload hash per accepted envelope
class Store {
 public:
  explicit Store(fs::path root, Clock clock = system_seconds) : root_(std::move(root)), clock_(std::move(clock)) {
    fs::create_directories(root_);
    load_registry();
  }

  const fs::path& root() const { return root_; }

  std::string register_participant(const std::string& imei, const std::string& twitter_id) {
    if (!valid_imei(imei)) throw IngestError(Rejection::MalformedKey, "IMEI must be 15 digits");
    if (!valid_twitter_id(twitter_id)) throw IngestError(Rejection::MalformedKey, "twitter_id must be 18 digits");
    std::unique_lock lock(registry_mutex_);
    const auto by_imei = by_imei_.find(imei);
    const auto by_tw = by_twitter_.find(twitter_id);
    if (by_imei != by_imei_.end() && by_tw != by_twitter_.end() && by_imei->second == by_tw->second)
      return records_[by_imei->second].participant_id;
    if (by_imei != by_imei_.end()) throw IngestError(Rejection::KeyCollision, "IMEI already registered");
    if (by_tw != by_twitter_.end()) throw IngestError(Rejection::KeyCollision, "twitter_id already registered");

    char id[16];
    std::snprintf(id, sizeof(id), "P%02zu", records_.size() + 1);
    ParticipantRecord rec{id, imei, twitter_id, clock_()};
    auto next = records_;
    next.push_back(rec);
    persist_registry(next);  // durable before visible
    records_ = std::move(next);
    by_imei_[imei] = records_.size() - 1;
    by_twitter_[twitter_id] = records_.size() - 1;
    fs::create_directories(root_ / rec.participant_id);
    return rec.participant_id;
  }

  std::vector<ParticipantRecord> participants() const {
    std::shared_lock lock(registry_mutex_);
    return records_;
  }

  std::optional<ParticipantRecord> find_participant(std::string_view id) const {
    std::shared_lock lock(registry_mutex_);
    for (const auto& r : records_)
      if (r.participant_id == id) return r;
    return std::nullopt;
  }

  RouteResult route(const Envelope& env) {
    const Cn cn = parse_cn(env.cn);
    if (env.week_index < 0) throw IngestError(Rejection::MalformedPayload, "week_index must be >= 0");
    const ParticipantRecord who = resolve(env.source_key, cn);

    std::size_t records = 0;
    try {
      switch (cn) {
        case Cn::Gds:
          records = parse_gds_text(env.payload).size();
          break;
        case Cn::Accel: {
          const auto rows = signal::parse_accel_text(env.payload);
          for (std::size_t i = 0; i < rows.size(); ++i)
            if (rows[i].participant_id != who.participant_id)
              throw ParseError("record belongs to '" + rows[i].participant_id + "'", i + 1);
          records = rows.size();
          break;
        }
        case Cn::Tweets: {
          const auto rows = text::parse_tweet_text(env.payload);
          for (std::size_t i = 0; i < rows.size(); ++i)
            if (rows[i].twitter_id != who.twitter_id)
              throw ParseError("tweet from a different twitter_id", i + 1);
          records = rows.size();
          break;
        }
      }
    } catch (const ParseError& e) {
      throw IngestError(Rejection::MalformedPayload, e.what(), e.position());
    }

    std::string payload = env.payload;
    if (!payload.empty() && payload.back() != '\n') payload.push_back('\n');

    RouteResult result{Disposition::Stored, who.participant_id, cn, env.week_index,
                       stream_path(who.participant_id, env.week_index, cn), records};
    const std::string hash = hex_hash(payload);
    auto& m = stream_mutex(result.path);
    std::lock_guard lock(m);
    fs::path hashes = result.path;
    hashes.replace_extension(".hashes");
    if (fs::exists(hashes)) {
      const std::string contents = read_file(hashes.string());
      for (auto line : split(contents, '\n'))
        if (trim(line) == hash) {
          result.disposition = Disposition::Duplicate;
          return result;
        }
    }
    fs::create_directories(result.path.parent_path());
    append(result.path, payload);
    append(hashes, hash + "\n");
    return result;
  }

  WeekBundle fetch_week(const std::string& participant_id, int week_index) const {
    const auto who = find_participant(participant_id);
    if (!who) throw IngestError(Rejection::UnknownParticipant, "no participant '" + participant_id + "'");
    WeekBundle b;
    b.participant_id = participant_id;
    b.week_index = week_index;
    auto slurp = [&](Cn cn) -> std::optional<std::string> {
      const auto p = stream_path(participant_id, week_index, cn);
      if (!fs::exists(p)) return std::nullopt;
      return read_file(p.string());
    };
    b.gds_payload = slurp(Cn::Gds);
    if (b.gds_payload) {
      const auto rows = parse_gds_text(*b.gds_payload);
      if (!rows.empty()) b.gds = rows.back().score;
    }
    if (!b.gds) b.missing.push_back("gds");
    b.accel_payload = slurp(Cn::Accel);
    if (b.accel_payload)
      b.accel_path = stream_path(participant_id, week_index, Cn::Accel);
    else
      b.missing.push_back("accel");
    b.tweet_payload = slurp(Cn::Tweets);
    if (b.tweet_payload)
      b.tweets = text::parse_tweet_text(*b.tweet_payload);
    else
      b.missing.push_back("tweets");
    return b;
  }

  fs::path stream_path(const std::string& participant_id, int week, Cn cn) const {
    return root_ / participant_id / ("week_" + std::to_string(week) + "_cn" + cn_code(cn) + ".txt");
  }

 private:
  ParticipantRecord resolve(const std::string& key, Cn cn) const {
    const bool wants_imei = cn != Cn::Tweets;
    if (wants_imei ? !valid_imei(key) : !valid_twitter_id(key))
      throw IngestError(Rejection::MalformedKey,
                        std::string("cn ") + cn_code(cn) + " expects " + (wants_imei ? "a 15-digit IMEI" : "an 18-digit twitter_id"));
    std::shared_lock lock(registry_mutex_);
    const auto& index = wants_imei ? by_imei_ : by_twitter_;
    const auto it = index.find(key);
    if (it == index.end()) throw IngestError(Rejection::UnknownKey, "source key '" + key + "' is not registered");
    return records_[it->second];
  }

  static std::string hex_hash(std::string_view bytes) {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a(bytes)));
    return buf;
  }

  static void append(const fs::path& p, std::string_view bytes) {
    std::ofstream out(p, std::ios::binary | std::ios::app);
    if (!out) throw Error("cannot append to '" + p.string() + "'");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw Error("short write to '" + p.string() + "'");
  }

  std::mutex& stream_mutex(const fs::path& p) {
    std::lock_guard lock(streams_mutex_);
    auto& slot = stream_mutexes_[p.string()];
    if (!slot) slot = std::make_unique<std::mutex>();
    return *slot;
  }

  void persist_registry(const std::vector<ParticipantRecord>& recs) const {
    std::string body;
    for (const auto& r : recs)
      body += r.participant_id + "\t" + r.imei + "\t" + r.twitter_id + "\t" + std::to_string(r.registered_at) + "\n";
    const auto tmp = root_ / "registry.tsv.tmp";
    write_file(tmp.string(), body);
    fs::rename(tmp, root_ / "registry.tsv");
  }

  void load_registry() {
    const auto path = root_ / "registry.tsv";
    if (!fs::exists(path)) return;
    std::size_t line_no = 0;
    const std::string contents = read_file(path.string());
    for (auto line : split(contents, '\n')) {
      ++line_no;
      if (trim(line).empty()) continue;
      const auto f = split(line, '\t');
      if (f.size() != 4) throw ParseError("registry row needs 4 fields", line_no);
      ParticipantRecord r{std::string(f[0]), std::string(f[1]), std::string(f[2]),
                          parse_number<std::int64_t>(f[3], line_no)};
      by_imei_[r.imei] = records_.size();
      by_twitter_[r.twitter_id] = records_.size();
      records_.push_back(std::move(r));
    }
  }

  fs::path root_;
  Clock clock_;
  mutable std::shared_mutex registry_mutex_;
  std::vector<ParticipantRecord> records_;
  std::map<std::string, std::size_t> by_imei_, by_twitter_;
  std::mutex streams_mutex_;
  std::map<std::string, std::unique_ptr<std::mutex>> stream_mutexes_;
};

}  // namespace hs::ingest
