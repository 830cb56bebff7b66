#include <gtest/gtest.h>

#include <thread>

#include "hs/ingest_service.hpp"
#include "oracles.hpp"

using namespace hs;
using namespace hs::ingest;

namespace {

const std::string kImei = "356938035643809";
const std::string kTwitter = "123456789012345678";
const std::string kImei2 = "356938035643810";
const std::string kTwitter2 = "123456789012345679";

std::string accel_payload(const std::string& pid, int n, std::int64_t t0 = 0) {
  std::string s;
  for (int i = 0; i < n; ++i) s += signal::format_accel_line(pid, {t0 + i * 50'000'000LL, 0.1 * i, 9.8, -0.5}) + "\n";
  return s;
}

std::string tweet_payload(const std::string& twitter_id, int n) {
  std::string s;
  for (int i = 0; i < n; ++i)
    s += text::format_tweet_line({twitter_id, std::to_string(100000000000000000ULL + i), 1554537600000000000LL + i,
                                  "mental health day " + std::to_string(i)}) +
         "\n";
  return s;
}

Rejection rejection_of(auto&& f) {
  try {
    f();
  } catch (const IngestError& e) {
    return e.reason();
  }
  ADD_FAILURE() << "expected an ingest rejection";
  return Rejection::MalformedKey;
}

struct Fixture : ::testing::Test {
  oracle::TempDir dir{"ingest"};
  Store store{dir.path, [] { return std::int64_t{1700000000}; }};
  std::string pid = store.register_participant(kImei, kTwitter);
};

}  // namespace

TEST(Cn, AcceptsOnlyTheThreeCodes) {
  EXPECT_EQ(parse_cn("01"), Cn::Gds);
  EXPECT_EQ(parse_cn("02"), Cn::Accel);
  EXPECT_EQ(parse_cn("03"), Cn::Tweets);
  EXPECT_EQ(parse_cn("2"), Cn::Accel);
  for (auto bad : {"00", "04", "99", "", "1a", "002"}) EXPECT_EQ(rejection_of([&] { parse_cn(bad); }), Rejection::UnknownCn);
}

TEST_F(Fixture, RegisterIsIdempotentAndGuardsKeys) {
  EXPECT_EQ(pid, "P01");
  EXPECT_EQ(store.register_participant(kImei, kTwitter), "P01");
  EXPECT_EQ(store.register_participant(kImei2, kTwitter2), "P02");
  EXPECT_EQ(rejection_of([&] { store.register_participant("35693803564380", kTwitter); }), Rejection::MalformedKey);
  EXPECT_EQ(rejection_of([&] { store.register_participant(kImei, "999999999999999999"); }), Rejection::KeyCollision);
  EXPECT_EQ(rejection_of([&] { store.register_participant("111111111111111", kTwitter); }), Rejection::KeyCollision);
  // registry survives a reopen
  Store again(dir.path);
  ASSERT_EQ(again.participants().size(), 2u);
  EXPECT_EQ(again.participants()[1].imei, kImei2);
  EXPECT_EQ(again.participants()[0].registered_at, 1700000000);
}

TEST_F(Fixture, RoutesByCode) {
  const auto a = store.route({kImei, "02", 3, accel_payload(pid, 5)});
  EXPECT_EQ(a.disposition, Disposition::Stored);
  EXPECT_EQ(a.cn, Cn::Accel);
  EXPECT_EQ(a.records, 5u);
  EXPECT_EQ(a.path, dir.path / "P01" / "week_3_cn02.txt");
  const auto g = store.route({kImei, "01", 3, "1554800400000000000,7\n"});
  EXPECT_EQ(g.path.filename(), "week_3_cn01.txt");
  const auto t = store.route({kTwitter, "03", 3, tweet_payload(kTwitter, 2)});
  EXPECT_EQ(t.records, 2u);
  const auto b = store.fetch_week(pid, 3);
  EXPECT_TRUE(b.missing.empty());
  ASSERT_TRUE(b.gds);
  EXPECT_EQ(b.gds->value(), 7);
  EXPECT_EQ(b.tweets.size(), 2u);
}

TEST_F(Fixture, Rejections) {
  EXPECT_EQ(rejection_of([&] { store.route({kImei, "99", 0, "x"}); }), Rejection::UnknownCn);
  EXPECT_EQ(rejection_of([&] { store.route({kImei2, "02", 0, accel_payload(pid, 1)}); }), Rejection::UnknownKey);
  EXPECT_EQ(rejection_of([&] { store.route({"12345", "02", 0, accel_payload(pid, 1)}); }), Rejection::MalformedKey);
  // tweets are keyed by twitter_id, not IMEI
  EXPECT_EQ(rejection_of([&] { store.route({kImei, "03", 0, tweet_payload(kTwitter, 1)}); }), Rejection::MalformedKey);
  try {
    store.route({kImei, "02", 0, accel_payload(pid, 2) + "P01,broken\n"});
    FAIL();
  } catch (const IngestError& e) {
    EXPECT_EQ(e.reason(), Rejection::MalformedPayload);
    EXPECT_EQ(e.position(), 3u);
  }
  EXPECT_EQ(rejection_of([&] { store.route({kImei, "02", 0, accel_payload("P09", 1)}); }), Rejection::MalformedPayload);
  EXPECT_EQ(rejection_of([&] { store.route({kTwitter, "03", 0, tweet_payload(kTwitter2, 1)}); }),
            Rejection::MalformedPayload);
  EXPECT_EQ(rejection_of([&] { store.route({kImei, "01", 0, "5,16\n"}); }), Rejection::MalformedPayload);
  EXPECT_EQ(rejection_of([&] { store.fetch_week("P77", 0); }), Rejection::UnknownParticipant);
  // nothing was written by any rejected envelope
  EXPECT_EQ(store.fetch_week(pid, 0).missing.size(), 3u);
}

TEST_F(Fixture, RoundTripIsByteIdentical) {
  const auto accel = accel_payload(pid, 40);
  const auto tweets = tweet_payload(kTwitter, 3);
  const std::string gds = "1554800400000000000,12\n";
  store.route({kImei, "02", 1, accel});
  store.route({kTwitter, "03", 1, tweets});
  store.route({kImei, "01", 1, gds});
  const auto b = store.fetch_week(pid, 1);
  EXPECT_EQ(*b.accel_payload, accel);
  EXPECT_EQ(*b.tweet_payload, tweets);
  EXPECT_EQ(*b.gds_payload, gds);
  EXPECT_EQ(read_file(b.accel_path->string()), accel);
}

TEST_F(Fixture, ReplayIsDeduplicated) {
  const auto accel = accel_payload(pid, 10);
  EXPECT_EQ(store.route({kImei, "02", 0, accel}).disposition, Disposition::Stored);
  const auto before = read_file(store.stream_path(pid, 0, Cn::Accel).string());
  EXPECT_EQ(store.route({kImei, "02", 0, accel}).disposition, Disposition::Duplicate);
  EXPECT_EQ(store.route({kImei, "2", 0, accel}).disposition, Disposition::Duplicate);
  EXPECT_EQ(read_file(store.stream_path(pid, 0, Cn::Accel).string()), before);
  // a different day of the same week appends
  const auto more = accel_payload(pid, 10, 86'400'000'000'000LL);
  EXPECT_EQ(store.route({kImei, "02", 0, more}).disposition, Disposition::Stored);
  EXPECT_EQ(*store.fetch_week(pid, 0).accel_payload, accel + more);
  // the same bytes in another week are a separate record
  EXPECT_EQ(store.route({kImei, "02", 1, accel}).disposition, Disposition::Stored);
}

TEST_F(Fixture, MissingStreamsFlagged) {
  store.route({kTwitter, "03", 2, tweet_payload(kTwitter, 1)});
  const auto b = store.fetch_week(pid, 2);
  EXPECT_EQ(b.missing, (std::vector<std::string>{"gds", "accel"}));
  EXPECT_FALSE(b.accel_path);
  EXPECT_EQ(b.tweets.size(), 1u);
}

TEST_F(Fixture, ConcurrentRoutesAllLand) {
  std::vector<std::thread> threads;
  for (int k = 0; k < 8; ++k)
    threads.emplace_back([&, k] { store.route({kImei, "02", 5, accel_payload(pid, 3, k * 1'000'000'000'000LL)}); });
  for (auto& t : threads) t.join();
  const auto rows = signal::parse_accel_text(*store.fetch_week(pid, 5).accel_payload);
  EXPECT_EQ(rows.size(), 24u);
}

TEST_F(Fixture, ServiceHandlers) {
  auto r = handle_register(store, R"({"imei":"356938035643810","twitter_id":"123456789012345679"})");
  EXPECT_EQ(r.status, 200);
  EXPECT_EQ(r.body["participant_id"], "P02");
  EXPECT_EQ(handle_register(store, R"({"imei":"1","twitter_id":"2"})").status, 400);
  EXPECT_EQ(handle_register(store, R"({"imei":"356938035643809","twitter_id":"999999999999999999"})").status, 409);
  EXPECT_EQ(handle_register(store, "not json").status, 400);

  json env{{"source_key", kImei}, {"cn", "02"}, {"week", 0}, {"payload", accel_payload(pid, 4)}};
  r = handle_ingest(store, env.dump());
  EXPECT_EQ(r.status, 200);
  EXPECT_EQ(r.body["status"], "stored");
  EXPECT_EQ(r.body["records"], 4);
  r = handle_ingest(store, env.dump());
  EXPECT_EQ(r.body["status"], "duplicate");
  EXPECT_TRUE(r.body.contains("notice"));
  env["cn"] = 1;
  env["payload"] = "1554800400000000000,3\n";
  EXPECT_EQ(handle_ingest(store, env.dump()).body["cn"], "01");
  env["cn"] = "99";
  EXPECT_EQ(handle_ingest(store, env.dump()).status, 400);
  env["cn"] = "02";
  env["payload"] = "garbage";
  r = handle_ingest(store, env.dump());
  EXPECT_EQ(r.status, 422);
  EXPECT_EQ(r.body["position"], 1);
  env["source_key"] = "111111111111111";
  EXPECT_EQ(handle_ingest(store, env.dump()).status, 404);

  r = handle_fetch(store, pid, 0);
  EXPECT_EQ(r.status, 200);
  EXPECT_EQ(r.body["gds"], 3);
  EXPECT_EQ(r.body["missing"], json::array({"tweets"}));
  EXPECT_EQ(handle_fetch(store, "P50", 0).status, 404);
}
