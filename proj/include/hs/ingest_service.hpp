#pragma once

#include <string>

#include "json.hpp"

#include "hs/ingest.hpp"

namespace hs::ingest {

using nlohmann::json;

struct Response {
  int status = 200;
  json body;
};

inline int http_status(Rejection r) {
  switch (r) {
    case Rejection::MalformedKey:
    case Rejection::UnknownCn:
      return 400;
    case Rejection::KeyCollision: return 409;
    case Rejection::UnknownKey:
    case Rejection::UnknownParticipant:
      return 404;
    case Rejection::MalformedPayload: return 422;
  }
  return 400;
}

namespace detail {
inline Response reject(const IngestError& e) {
  json body{{"error", to_string(e.reason())}, {"message", e.what()}};
  if (e.position()) body["position"] = e.position();
  return {http_status(e.reason()), body};
}

inline Response bad_request(const std::string& msg) { return {400, json{{"error", "bad-request"}, {"message", msg}}}; }

template <typename F>
Response guarded(F&& f) {
  try {
    return f();
  } catch (const IngestError& e) {
    return reject(e);
  } catch (const json::exception& e) {
    return bad_request(e.what());
  }
}
}  // namespace detail

/// POST /participants  {"imei": "...", "twitter_id": "..."}
inline Response handle_register(Store& store, const std::string& body) {
  return detail::guarded([&] {
    const auto j = json::parse(body);
    const auto id = store.register_participant(j.at("imei").get<std::string>(), j.at("twitter_id").get<std::string>());
    return Response{200, json{{"participant_id", id}}};
  });
}

/// POST /ingest  {"source_key": "...", "cn": "02", "week": 0, "payload": "..."}
inline Response handle_ingest(Store& store, const std::string& body) {
  return detail::guarded([&] {
    const auto j = json::parse(body);
    Envelope env;
    env.source_key = j.at("source_key").get<std::string>();
    const auto& cn = j.at("cn");
    env.cn = cn.is_string() ? cn.get<std::string>() : std::to_string(cn.get<int>());
    env.week_index = j.at("week").get<int>();
    env.payload = j.at("payload").get<std::string>();
    const auto r = store.route(env);
    const bool dup = r.disposition == Disposition::Duplicate;
    json out{{"status", dup ? "duplicate" : "stored"},
             {"participant_id", r.participant_id},
             {"cn", cn_code(r.cn)},
             {"week", r.week_index},
             {"records", r.records},
             {"path", r.path.string()}};
    if (dup) out["notice"] = "identical payload already stored for this participant, cn and week";
    return Response{200, out};
  });
}

/// GET /participants/{id}/weeks/{w}
inline Response handle_fetch(const Store& store, const std::string& participant_id, int week) {
  return detail::guarded([&] {
    const auto b = store.fetch_week(participant_id, week);
    json out{{"participant_id", b.participant_id}, {"week", b.week_index}, {"missing", b.missing}};
    out["gds"] = b.gds ? json(b.gds->value()) : json(nullptr);
    out["accel"] = b.accel_path ? json{{"path", b.accel_path->string()}, {"bytes", b.accel_payload->size()}}
                                : json(nullptr);
    json tweets = json::array();
    for (const auto& t : b.tweets) tweets.push_back({{"tweet_id", t.tweet_id}, {"t_ns", t.t_ns}, {"text", t.text}});
    out["tweets"] = tweets;
    return Response{200, out};
  });
}

}  // namespace hs::ingest
