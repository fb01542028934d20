// Copyright 2026 The podfed Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <filesystem>
#include <fstream>
#include <unistd.h>
#include <random>

#include <gtest/gtest.h>
#include <httplib.h>
#include <nlohmann/json.hpp>

#include "podfed/api/deployment.hpp"
#include "podfed/api/http_gateway.hpp"
#include "podfed/common/error.hpp"
#include "test_support.hpp"

using namespace podfed;
using namespace podfed::api;
using nlohmann::json;
using namespace std::chrono_literals;

namespace {

template <typename F>
std::optional<Errc> code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return std::nullopt;
}

DeploymentOptions headless() {
  DeploymentOptions o;
  o.start_http = false;
  o.start_driver = false;
  o.users = podfed::testing::test_users();
  return o;
}

std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("podfed-test-" + name + "-" + std::to_string(::getpid()));
  std::filesystem::remove_all(p);
  return p;
}

class ServiceTest : public ::testing::Test {
 protected:
  ManualClock clock;
  std::filesystem::path uploads = scratch_dir("uploads");
  std::unique_ptr<Deployment> d;
  std::string alice, bob, root;
  std::string rsv;  // alice, node-1, open now

  ServiceConfig config() {
    ServiceConfig c = podfed::testing::test_config(28000);
    c.upload_dir = uploads.string();
    c.upload_max_bytes = 1024;
    return c;
  }
  void SetUp() override {
    d = std::make_unique<Deployment>(config(), clock, headless());
    auto& svc = d->service();
    alice = svc.authenticate("alice", "alice-pw").token;
    bob = svc.authenticate("bob", "bob-pw").token;
    root = svc.authenticate("root", "root-pw").token;
    rsv = reserve(alice, "node-1", "usrp-1", -10, 3600);
  }
  void TearDown() override {
    d->stop();
    std::filesystem::remove_all(uploads);
  }
  std::string reserve(const std::string& token, const std::string& node, const std::string& dev,
                      std::int64_t from, std::int64_t to) {
    const std::int64_t now = unix_seconds(clock.now());
    return d->service().reserve(token, {"", "sdr", node, {dev}, {now + from, now + to}}).reservation_id;
  }
};

}  // namespace

TEST(Config, PrecedenceEnvOverFileOverDefault) {
  const auto dir = scratch_dir("config");
  std::filesystem::create_directories(dir);
  const auto file = dir / "podfed.json";
  std::ofstream(file) << R"({"http_port": 9000, "seed": 5, "login_throttle_s": 2.5})";
  const auto env = [](const std::string& name) -> std::optional<std::string> {
    if (name == "PODFED_HTTP_PORT") return "9100";
    return std::nullopt;
  };
  const ServiceConfig c = ServiceConfig::load(file, env);
  EXPECT_EQ(c.http_port, 9100);             // env
  EXPECT_EQ(c.seed, 5u);                    // file
  EXPECT_DOUBLE_EQ(c.login_throttle_s, 2.5);
  EXPECT_EQ(c.store, "memory");             // default
  EXPECT_EQ(ServiceConfig::load(std::nullopt, ServiceConfig::no_env).http_port, 8080);
  std::filesystem::remove_all(dir);
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  EXPECT_EQ(code_of([] { (void)ServiceConfig::from_json(json{{"htp_port", 1}}); }), Errc::invalid_argument);
  EXPECT_EQ(code_of([] { (void)ServiceConfig::from_json(json{{"http_port", "x"}}); }), Errc::invalid_argument);
  const auto bad_env = [](const std::string& n) -> std::optional<std::string> {
    if (n == "PODFED_SEED") return "many";
    return std::nullopt;
  };
  EXPECT_EQ(code_of([&] { (void)ServiceConfig::from_json(json::object(), bad_env); }), Errc::invalid_argument);
  EXPECT_EQ(code_of([] { (void)ServiceConfig::load(std::filesystem::path("/nonexistent/podfed.json")); }),
            Errc::io);
}

TEST(Config, AppRanges) {
  ServiceConfig c;
  const auto ranges = c.app_ranges();
  ASSERT_EQ(ranges.size(), 2u);
  EXPECT_EQ(ranges.at("gnuradio").remote_base, 2200);
  EXPECT_EQ(ranges.at("oai").web_base, 6180);
  EXPECT_EQ(ranges.at("oai").max_index, 64u);
  c.apps = "a:2200:6080:64,b:2210:7000:64";
  EXPECT_THROW((void)c.app_ranges(), Error);
  c.apps = "a:2200:6080";
  EXPECT_THROW((void)c.app_ranges(), Error);
  c.apps = "a:2200:6080:0";
  EXPECT_THROW((void)c.app_ranges(), Error);
  const json j = to_json(ServiceConfig{});
  EXPECT_EQ(ServiceConfig::from_json(j).apps, ServiceConfig{}.apps);
}

TEST(Auth, CredentialsLockAndExpiry) {
  ManualClock clock;
  Authenticator auth(clock, podfed::testing::test_users(), 1h, 0s);
  EXPECT_EQ(code_of([&] { (void)auth.authenticate("alice", "nope"); }), Errc::unauthorized);
  EXPECT_EQ(code_of([&] { (void)auth.authenticate("nobody", "x"); }), Errc::unauthorized);
  EXPECT_EQ(code_of([&] { (void)auth.authenticate("eve", "eve-pw"); }), Errc::locked);
  EXPECT_EQ(code_of([&] { (void)auth.authenticate("eve", "wrong"); }), Errc::unauthorized);
  const ApiToken t = auth.authenticate("root", "root-pw");
  EXPECT_EQ(t.role, Role::admin);
  EXPECT_EQ(t.token.size(), 48u);
  EXPECT_EQ(auth.validate(t.token).user_id, "root");
  clock.advance(1h);
  EXPECT_EQ(code_of([&] { (void)auth.validate(t.token); }), Errc::unauthorized);
  const ApiToken u = auth.authenticate("alice", "alice-pw");
  auth.revoke(u.token);
  EXPECT_EQ(code_of([&] { (void)auth.validate(u.token); }), Errc::unauthorized);
}

TEST(Auth, ThrottlesRepeatedFailures) {
  ManualClock clock;
  Authenticator auth(clock, podfed::testing::test_users(), 1h, 1s);
  const Instant start = clock.now();
  for (int i = 0; i < 5; ++i) EXPECT_THROW((void)auth.authenticate("alice", "guess" + std::to_string(i)), Error);
  EXPECT_GE(clock.now() - start, 4s);
  EXPECT_EQ(auth.failed_attempts("alice"), 5u);
  (void)auth.authenticate("alice", "alice-pw");
  EXPECT_EQ(auth.failed_attempts("alice"), 0u);
  const Instant after = clock.now();
  (void)auth.authenticate("alice", "alice-pw");
  EXPECT_EQ(clock.now(), after);  // cleared
  // Another user is unaffected.
  (void)auth.authenticate("bob", "bob-pw");
  EXPECT_EQ(clock.now(), after);
}

TEST(Auth, PasswordHash) {
  // SHA-256("") and SHA-256("abc") from FIPS 180-2.
  EXPECT_EQ(hash_password("", ""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(hash_password("a", "bc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  EXPECT_EQ(random_hex(8).size(), 16u);
  EXPECT_NE(random_hex(16), random_hex(16));
}

TEST(Auth, UserStoreJson) {
  const json doc = {{"users",
                     {{{"user_id", "u"}, {"role", "admin"}, {"salt", "s"}, {"password_sha256", hash_password("s", "p")},
                       {"locked", false}}}}};
  const UserStore s = UserStore::from_json(doc);
  ASSERT_NE(s.find("u"), nullptr);
  EXPECT_EQ(s.find("u")->role, Role::admin);
  EXPECT_TRUE(s.verify(*s.find("u"), "p"));
  EXPECT_FALSE(s.verify(*s.find("u"), "P"));
  EXPECT_THROW((void)UserStore::from_json(json{{"users", {{{"user_id", "u"}, {"role", "root"}}}}}), Error);
}

TEST(FileNames, Sanitize) {
  EXPECT_EQ(sanitize_file_name("flowgraph.grc"), "flowgraph.grc");
  EXPECT_EQ(sanitize_file_name("a-b_c.1"), "a-b_c.1");
  for (const std::string& bad : std::vector<std::string>{"", ".", "..", "../x", "a/b", "a b", "a\\b", std::string(256, 'a'), std::string("a\0b", 3)}) {
    EXPECT_THROW((void)sanitize_file_name(bad), Error) << bad;
  }
}

TEST(HttpStatus, Mapping) {
  EXPECT_EQ(http_status(Errc::unauthorized), 401);
  EXPECT_EQ(http_status(Errc::forbidden), 403);
  EXPECT_EQ(http_status(Errc::locked), 403);
  EXPECT_EQ(http_status(Errc::not_found), 404);
  EXPECT_EQ(http_status(Errc::conflict), 409);
  EXPECT_EQ(http_status(Errc::too_large), 413);
  EXPECT_EQ(http_status(Errc::exhausted), 503);
  EXPECT_EQ(http_status(Errc::timeout), 504);
  const json body = error_body(ApiError(Errc::unavailable, "busy", json{{"k", 1}}));
  EXPECT_EQ(body.at("error"), "unavailable");
  EXPECT_EQ(body.at("retryable"), true);
  EXPECT_EQ(body.at("details").at("k"), 1);
  EXPECT_EQ(error_body(Error(Errc::forbidden, "no")).at("retryable"), false);
}

TEST_F(ServiceTest, ConnectGoesLiveAndReusesOnReconnect) {
  auto& svc = d->service();
  const SessionDescriptor s = svc.connect(alice, {rsv, "gnuradio"});
  EXPECT_EQ(s.state, SessionState::live);
  ASSERT_TRUE(s.pod_name.has_value());
  ASSERT_TRUE(s.web_port.has_value());
  EXPECT_EQ(*s.web_port, 28100);
  // The pod is pinned to the reserved node.
  EXPECT_EQ(d->lifecycle().pod(*s.pod_name)->node_id, "node-1");
  const std::string page = podfed::testing::round_trip(*s.web_port, "GET / HTTP/1.1\r\nHost: x\r\n\r\n");
  EXPECT_NE(page.find("pod=" + *s.pod_name), std::string::npos);

  const SessionDescriptor again = svc.connect(alice, {rsv, "gnuradio", s.session_id});
  EXPECT_EQ(again.session_id, s.session_id);
  EXPECT_EQ(again.pod_name, s.pod_name);
  EXPECT_EQ(d->lifecycle().pod_count(), 1u);
  EXPECT_EQ(svc.sessions(alice).size(), 1u);
  EXPECT_TRUE(svc.sessions(bob).empty());
  EXPECT_EQ(svc.sessions(root).size(), 1u);
  EXPECT_EQ(to_json(again).at("state"), "Live");
}

TEST_F(ServiceTest, ConnectGates) {
  auto& svc = d->service();
  // Someone else's reservation.
  EXPECT_EQ(code_of([&] { (void)svc.connect(bob, {rsv, "gnuradio"}); }), Errc::forbidden);
  // Window not open yet: details carry the next window.
  const std::string later = reserve(alice, "node-2", "usrp-4", 3600, 7200);
  try {
    (void)svc.connect(alice, {later, "gnuradio"});
    FAIL();
  } catch (const ApiError& e) {
    EXPECT_EQ(e.code(), Errc::forbidden);
    EXPECT_EQ(e.details().at("next_window").at("start"), unix_seconds(clock.now()) + 3600);
  }
  EXPECT_EQ(code_of([&] { (void)svc.connect(alice, {rsv, "matlab"}); }), Errc::not_found);
  EXPECT_EQ(code_of([&] { (void)svc.connect(alice, {"rsv-999", "gnuradio"}); }), Errc::not_found);
  EXPECT_EQ(code_of([&] { (void)svc.connect("bogus", {rsv, "gnuradio"}); }), Errc::unauthorized);
  // Another user's session cannot be reattached.
  const SessionDescriptor s = svc.connect(alice, {rsv, "gnuradio"});
  const std::string bobs = reserve(bob, "node-3", "usrp-7", -10, 3600);
  EXPECT_EQ(code_of([&] { (void)svc.connect(bob, {bobs, "gnuradio", s.session_id}); }), Errc::forbidden);
  // Admins may connect on any reservation.
  EXPECT_NO_THROW((void)svc.connect(root, {rsv, "oai"}));
  // After the window closes, connecting is refused.
  clock.advance(2h);
  EXPECT_EQ(code_of([&] { (void)svc.connect(alice, {rsv, "gnuradio"}); }), Errc::forbidden);
}

TEST_F(ServiceTest, ReservationConflictCarriesBlocker) {
  try {
    (void)reserve(bob, "node-1", "usrp-2", 0, 60);
    FAIL();
  } catch (const ApiError& e) {
    EXPECT_EQ(e.code(), Errc::conflict);
    EXPECT_EQ(e.details().at("blocking").at("reservation_id"), rsv);
  }
  EXPECT_EQ(d->service().reservations(bob, "sdr").at("reservations").size(), 1u);
  EXPECT_EQ(code_of([&] { d->service().cancel_reservation(bob, rsv); }), Errc::forbidden);
  d->service().cancel_reservation(alice, rsv);
  EXPECT_TRUE(d->service().reservations(bob, "").at("reservations").empty());
}

TEST_F(ServiceTest, DisconnectIsIdempotentAndFreesEverything) {
  auto& svc = d->service();
  const ResourceCounters before = svc.counters();
  const SessionDescriptor s = svc.connect(alice, {rsv, "gnuradio"});
  EXPECT_NE(svc.counters(), before);
  EXPECT_EQ(svc.disconnect(alice, s.session_id).state, SessionState::closed);
  EXPECT_EQ(svc.disconnect(alice, s.session_id).state, SessionState::closed);
  EXPECT_EQ(svc.counters(), before);
  EXPECT_FALSE(d->ports().lookup_session(s.session_id).has_value());
  EXPECT_TRUE(svc.sessions(alice).empty());
  EXPECT_EQ(code_of([&] { (void)svc.disconnect(alice, "sess-404"); }), Errc::not_found);
}

TEST_F(ServiceTest, RandomPairsRestoreCounters) {
  auto& svc = d->service();
  const ResourceCounters before = svc.counters();
  std::mt19937_64 rng(17);
  std::vector<std::string> open;
  for (int i = 0; i < 40; ++i) {
    if (open.size() < 6 && (open.empty() || rng() % 2)) {
      open.push_back(svc.connect(alice, {rsv, rng() % 2 ? "gnuradio" : "oai"}).session_id);
    } else {
      const auto k = rng() % open.size();
      (void)svc.disconnect(alice, open[k]);
      open.erase(open.begin() + static_cast<long>(k));
    }
  }
  for (const auto& s : open) (void)svc.disconnect(alice, s);
  EXPECT_EQ(svc.counters(), before);
}

TEST_F(ServiceTest, ClusterViewDependsOnRole) {
  auto& svc = d->service();
  (void)svc.connect(alice, {rsv, "gnuradio"});
  const json user = svc.cluster_status(alice);
  EXPECT_FALSE(user.contains("nodes"));
  EXPECT_FALSE(user.contains("counters"));
  EXPECT_EQ(user.at("pods").size(), 1u);
  bool reserved = false;
  for (const auto& dev : user.at("devices")) reserved |= dev.at("reserved_by") == rsv;
  EXPECT_TRUE(reserved);
  const json admin = svc.cluster_status(root);
  EXPECT_EQ(admin.at("nodes").size(), 3u);  // workers
  EXPECT_EQ(admin.at("tunnels").size(), 1u);
  EXPECT_EQ(admin.at("counters").at("pods"), 1);
}

TEST_F(ServiceTest, PendingPodExplainsItself) {
  auto& svc = d->service();
  // Fill node-1 (4000m at 500m per pod) so the next pinned pod waits.
  std::vector<SessionDescriptor> live;
  for (int i = 0; i < 8; ++i) live.push_back(svc.connect(alice, {rsv, i % 2 ? "oai" : "gnuradio"}));
  const SessionDescriptor waiting = svc.connect(alice, {rsv, "gnuradio"});
  EXPECT_EQ(waiting.state, SessionState::provisioning);
  EXPECT_NE(waiting.reason.find("Insufficient cpu"), std::string::npos);
  const json st = svc.pod_status(alice, *waiting.pod_name);
  EXPECT_NE(st.at("pending_reason").get<std::string>().find("Insufficient cpu"), std::string::npos);
  EXPECT_EQ(code_of([&] { (void)svc.pod_status(bob, *waiting.pod_name); }), Errc::forbidden);
  EXPECT_NO_THROW((void)svc.pod_status(root, *waiting.pod_name));
  EXPECT_EQ(code_of([&] { (void)svc.pod_status(alice, "gnuradio-63"); }), Errc::not_found);

  (void)svc.disconnect(alice, live[0].session_id);
  d->tick();
  const auto mine = svc.sessions(alice);
  const auto it = std::find_if(mine.begin(), mine.end(), [&](const auto& s) { return s.session_id == waiting.session_id; });
  ASSERT_NE(it, mine.end());
  EXPECT_EQ(it->state, SessionState::live);
}

TEST_F(ServiceTest, UploadsIntoPodDirectory) {
  auto& svc = d->service();
  const SessionDescriptor s = svc.connect(alice, {rsv, "gnuradio"});
  const UploadResult r = svc.upload(alice, s.session_id, "flow.grc", "payload");
  EXPECT_EQ(r.bytes, 7u);
  EXPECT_EQ(r.pod_name, *s.pod_name);
  std::ifstream in(r.path);
  std::string got((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  EXPECT_EQ(got, "payload");
  EXPECT_EQ(std::filesystem::path(r.path).parent_path(), uploads / *s.pod_name);
  EXPECT_EQ(code_of([&] { (void)svc.upload(alice, s.session_id, "big.bin", std::string(1025, 'x')); }), Errc::too_large);
  EXPECT_EQ(code_of([&] { (void)svc.upload(alice, s.session_id, "../escape", "x"); }), Errc::invalid_argument);
  EXPECT_EQ(code_of([&] { (void)svc.upload(bob, s.session_id, "a.txt", "x"); }), Errc::forbidden);
}

TEST_F(ServiceTest, MetricsExposition) {
  auto& svc = d->service();
  (void)svc.connect(alice, {rsv, "gnuradio"});
  clock.advance(30s);
  const std::string text = svc.metrics();
  EXPECT_NE(text.find("pod_memory_bytes"), std::string::npos);
  EXPECT_EQ(text.back(), '\n');
}

// Every mutating endpoint rejects every malformed or unknown token.
TEST(Http, TokenFuzzIsAlwaysRejected) {
  ManualClock clock;
  DeploymentOptions o = headless();
  o.start_http = true;
  ServiceConfig cfg = podfed::testing::test_config(29000);
  Deployment d(cfg, clock, o);
  httplib::Client http("127.0.0.1", d.http()->port());
  http.set_read_timeout(5, 0);
  const std::string good = d.service().authenticate("alice", "alice-pw").token;
  const std::int64_t now = unix_seconds(clock.now());
  const std::string rsv =
      d.service().reserve(good, {"", "sdr", "node-1", {"usrp-1"}, {now - 5, now + 3600}}).reservation_id;
  const ResourceCounters before = d.service().counters();

  std::mt19937_64 rng(23);
  std::vector<std::string> tokens{"", " ", good.substr(1), good + "0", std::string(good.size(), '0'), "null",
                                  std::string(4096, 'a')};
  for (int i = 0; i < 40; ++i) {
    std::string t;
    const auto n = rng() % 64;
    for (std::size_t k = 0; k < n; ++k) t += static_cast<char>(0x21 + rng() % 94);
    tokens.push_back(t);
  }
  const json rbody = {{"testbed_id", "sdr"}, {"node_id", "node-2"}, {"device_ids", {"usrp-4"}}, {"start", now}, {"end", now + 60}};
  const json sbody = {{"reservation_id", rsv}, {"app", "gnuradio"}};
  int attempts = 0, rejected = 0;
  for (const auto& t : tokens) {
    const httplib::Headers h{{"Authorization", "Bearer " + t}};
    std::vector<httplib::Result> rs;
    rs.push_back(http.Post("/reservations", h, rbody.dump(), "application/json"));
    rs.push_back(http.Delete("/reservations/" + rsv, h));
    rs.push_back(http.Post("/sessions", h, sbody.dump(), "application/json"));
    rs.push_back(http.Delete("/sessions/sess-1", h));
    rs.push_back(http.Post("/sessions/sess-1/files?name=a.txt", h, "x", "application/octet-stream"));
    for (auto& r : rs) {
      ++attempts;
      if (r && r->status == 401 && json::parse(r->body).at("error") == "unauthorized") ++rejected;
    }
  }
  EXPECT_EQ(rejected, attempts);
  EXPECT_EQ(d.service().counters(), before);
  EXPECT_EQ(d.service().reservations(good, "").at("reservations").size(), 1u);

  // No header at all.
  auto r = http.Post("/sessions", sbody.dump(), "application/json");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 401);
  // The metrics endpoint needs no token.
  auto m = http.Get("/metrics");
  ASSERT_TRUE(m);
  EXPECT_EQ(m->status, 200);
  d.stop();
}

TEST(Http, EndpointsAndStatusCodes) {
  ManualClock clock;
  DeploymentOptions o = headless();
  o.start_http = true;
  const auto uploads = scratch_dir("http-uploads");
  ServiceConfig cfg = podfed::testing::test_config(29500);
  cfg.upload_dir = uploads.string();
  Deployment d(cfg, clock, o);
  httplib::Client http("127.0.0.1", d.http()->port());
  http.set_read_timeout(10, 0);

  auto bad = http.Post("/auth", R"({"user_id":"alice","password":"x"})", "application/json");
  ASSERT_TRUE(bad);
  EXPECT_EQ(bad->status, 401);
  auto locked = http.Post("/auth", R"({"user_id":"eve","password":"eve-pw"})", "application/json");
  EXPECT_EQ(locked->status, 403);
  auto malformed = http.Post("/auth", "{not json", "application/json");
  EXPECT_EQ(malformed->status, 400);

  auto ok = http.Post("/auth", R"({"user_id":"bob","password":"bob-pw"})", "application/json");
  ASSERT_EQ(ok->status, 200);
  const httplib::Headers h{{"Authorization", "Bearer " + json::parse(ok->body).at("token").get<std::string>()}};

  auto inv = http.Get("/inventory?testbed=sdr", h);
  ASSERT_EQ(inv->status, 200);
  EXPECT_FALSE(json::parse(inv->body).empty());

  const std::int64_t now = unix_seconds(clock.now());
  const json rbody = {{"testbed_id", "sdr"}, {"node_id", "node-3"}, {"device_ids", {"usrp-7"}},
                      {"start", now - 1}, {"end", now + 600}};
  auto created = http.Post("/reservations", h, rbody.dump(), "application/json");
  ASSERT_EQ(created->status, 201);
  const std::string rid = json::parse(created->body).at("reservation_id");
  auto clash = http.Post("/reservations", h, rbody.dump(), "application/json");
  EXPECT_EQ(clash->status, 409);
  EXPECT_TRUE(json::parse(clash->body).at("details").contains("blocking"));

  auto sess = http.Post("/sessions", h, json{{"reservation_id", rid}, {"app", "oai"}}.dump(), "application/json");
  ASSERT_EQ(sess->status, 200);
  const json sj = json::parse(sess->body);
  EXPECT_EQ(sj.at("state"), "Live");
  const std::string sid = sj.at("session_id");
  const std::string pod = sj.at("pod_name");

  EXPECT_EQ(json::parse(http.Get("/sessions", h)->body).at("sessions").size(), 1u);
  EXPECT_EQ(http.Get("/pods/" + pod, h)->status, 200);
  EXPECT_EQ(http.Get("/pods/nope-1", h)->status, 404);
  EXPECT_EQ(http.Get("/cluster", h)->status, 200);

  auto up = http.Post("/sessions/" + sid + "/files?name=cfg.conf", h, "abc", "application/octet-stream");
  EXPECT_EQ(up->status, 201);
  auto up_bad = http.Post("/sessions/" + sid + "/files?name=..", h, "abc", "application/octet-stream");
  EXPECT_EQ(up_bad->status, 400);

  auto closed = http.Delete("/sessions/" + sid, h);
  ASSERT_EQ(closed->status, 200);
  EXPECT_EQ(json::parse(closed->body).at("state"), "Closed");
  EXPECT_EQ(http.Delete("/sessions/" + sid, h)->status, 200);
  EXPECT_EQ(http.Delete("/reservations/" + rid, h)->status, 204);
  EXPECT_EQ(http.Delete("/reservations/" + rid, h)->status, 404);

  auto metrics = http.Get("/metrics");
  EXPECT_EQ(metrics->get_header_value("Content-Type").rfind("text/plain", 0), 0u);
  d.stop();
  std::filesystem::remove_all(uploads);
}
