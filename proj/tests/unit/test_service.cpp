#include <gtest/gtest.h>

#include <httplib.h>

#include <filesystem>
#include <fstream>
#include <thread>

#include "synth.hpp"
#include "trackmate/llm/prompt.hpp"
#include "trackmate/service/service.hpp"

using namespace trackmate;
using namespace trackmate::service;
namespace fs = std::filesystem;

namespace {

const std::string kFixture = TRACKMATE_DATA_DIR "/fixtures/mock_backend.json";

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("trackmate-test-" + name + "-" + std::to_string(::getpid()));
  fs::remove_all(dir);
  return dir;
}

std::string wav_bytes(const AudioClip& clip) {
  const auto bytes = encode_wav(clip);
  return {bytes.begin(), bytes.end()};
}

ServiceConfig config_for(const fs::path& store, bool mock = true) {
  ServiceConfig cfg;
  cfg.store_dir = store.string();
  cfg.port = 0;
  if (mock) cfg.mock_fixture = kFixture;
  return cfg;
}

struct Running {
  explicit Running(ServiceConfig cfg) : svc(cfg, make_backend(cfg)), port(svc.start_background()), client("127.0.0.1", port) {
    client.set_read_timeout(std::chrono::seconds(120));
  }
  FeedbackService svc;
  int port;
  httplib::Client client;
};

httplib::Result upload(httplib::Client& c, const std::string& bytes, const std::string& name = "track.wav") {
  httplib::MultipartFormDataItems items = {{"file", bytes, name, "audio/wav"}};
  return c.Post("/tracks", items);
}

nlohmann::ordered_json body(const httplib::Result& r) { return nlohmann::ordered_json::parse(r->body); }

httplib::Result post_json(httplib::Client& c, const std::string& path, const nlohmann::json& doc) {
  return c.Post(path, doc.dump(), "application/json");
}

}  // namespace

class ServiceTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() { track_ = new std::string(wav_bytes(trackmate::testing::pop_mix(3, 12.0))); }
  static void TearDownTestSuite() { delete track_; }
  static std::string* track_;
};
std::string* ServiceTest::track_ = nullptr;

TEST_F(ServiceTest, HealthAndUploadContract) {
  const auto dir = fresh_dir("upload");
  Running r(config_for(dir));
  auto h = r.client.Get("/healthz");
  ASSERT_TRUE(h);
  EXPECT_EQ(h->status, 200);

  auto res = upload(r.client, *track_);
  ASSERT_TRUE(res);
  ASSERT_EQ(res->status, 201) << res->body;
  const auto doc = body(res);
  const auto id = doc["track_id"].get<std::string>();
  EXPECT_EQ(id.size(), 64u);
  EXPECT_EQ(doc["original_filename"], "track.wav");
  EXPECT_TRUE(doc["report"].contains("harmony"));
  EXPECT_EQ(doc["depth"], 3);  // fixture evaluator answers DEPTH: 3

  auto again = upload(r.client, *track_, "renamed.wav");
  ASSERT_TRUE(again);
  EXPECT_EQ(again->status, 200);
  EXPECT_EQ(body(again)["track_id"], id);
  EXPECT_EQ(std::distance(fs::directory_iterator(dir / "tracks"), fs::directory_iterator()), 1);

  for (int d = 1; d <= 3; ++d) {
    auto rep = r.client.Get("/tracks/" + id + "/report?depth=" + std::to_string(d));
    ASSERT_TRUE(rep);
    EXPECT_EQ(rep->status, 200);
    EXPECT_EQ(body(rep)["depth"], d);
  }
  EXPECT_EQ(r.client.Get("/tracks/" + id + "/report?depth=7")->status, 400);
  EXPECT_EQ(r.client.Get("/tracks/" + std::string(64, 'a') + "/report")->status, 404);
  EXPECT_EQ(r.client.Get("/tracks/../../etc/report")->status, 404);
}

TEST_F(ServiceTest, RejectsBadUploads) {
  const auto dir = fresh_dir("reject");
  auto cfg = config_for(dir);
  cfg.max_upload_bytes = 200000;
  Running r(cfg);
  auto text = upload(r.client, "just some text, not audio at all", "notes.wav");
  ASSERT_TRUE(text);
  EXPECT_EQ(text->status, 415);
  auto big = upload(r.client, *track_);
  ASSERT_TRUE(big);
  EXPECT_EQ(big->status, 413);
  auto tiny = upload(r.client, wav_bytes(AudioClip::mono(trackmate::testing::sine(440, 0.5), trackmate::testing::kRate)));
  ASSERT_TRUE(tiny);
  EXPECT_EQ(tiny->status, 422);
  EXPECT_EQ(std::distance(fs::directory_iterator(dir / "tracks"), fs::directory_iterator()), 0);
  EXPECT_EQ(post_json(r.client, "/tracks", {{"source_url", "ftp://example.com/a.wav"}})->status, 400);
}

TEST_F(ServiceTest, SessionLifecycleAndRestart) {
  const auto dir = fresh_dir("session");
  std::string id, sid, report_before, session_before;
  {
    Running r(config_for(dir));
    id = body(upload(r.client, *track_))["track_id"].get<std::string>();
    EXPECT_EQ(post_json(r.client, "/sessions", {{"track_id", std::string(64, 'b')}})->status, 404);
    EXPECT_EQ(r.client.Post("/sessions", "nope", "application/json")->status, 400);

    auto created = post_json(r.client, "/sessions", {{"track_id", id}});
    ASSERT_TRUE(created);
    ASSERT_EQ(created->status, 201) << created->body;
    const auto doc = body(created);
    sid = doc["session_id"].get<std::string>();
    const auto dump = doc["scores"].dump();
    for (auto name : llm::kRubricNames) EXPECT_NE(dump.find(name), std::string::npos) << name;
    const auto opening = doc["opening_message"].get<std::string>();
    ASSERT_FALSE(opening.empty());
    EXPECT_EQ(opening.back(), '?');

    const auto len0 = body(r.client.Get("/sessions/" + sid))["session"]["history"].size();
    auto msg = post_json(r.client, "/sessions/" + sid + "/messages", {{"text", "How can I make the chorus hit harder?"}});
    ASSERT_TRUE(msg);
    ASSERT_EQ(msg->status, 200);
    EXPECT_FALSE(body(msg)["reply"].get<std::string>().empty());
    const auto after = body(r.client.Get("/sessions/" + sid));
    EXPECT_EQ(after["session"]["history"].size(), len0 + 2);

    EXPECT_EQ(post_json(r.client, "/sessions/" + sid + "/messages", {{"text", ""}})->status, 400);
    EXPECT_EQ(post_json(r.client, "/sessions/" + sid + "/messages", {{"txt", "hi"}})->status, 400);
    EXPECT_EQ(post_json(r.client, "/sessions/" + std::string(32, 'c') + "/messages", {{"text", "hi"}})->status, 404);
    EXPECT_EQ(r.client.Get("/sessions/" + std::string(32, 'c'))->status, 404);

    report_before = r.client.Get("/tracks/" + id + "/report")->body;
    session_before = r.client.Get("/sessions/" + sid)->body;
  }
  Running again(config_for(dir));
  EXPECT_EQ(again.client.Get("/tracks/" + id + "/report")->body, report_before);
  EXPECT_EQ(again.client.Get("/sessions/" + sid)->body, session_before);
}

TEST_F(ServiceTest, ConcurrentPostsAreSerialised) {
  const auto dir = fresh_dir("concurrent");
  Running r(config_for(dir));
  const auto id = body(upload(r.client, *track_))["track_id"].get<std::string>();
  const auto sid = body(post_json(r.client, "/sessions", {{"track_id", id}}))["session_id"].get<std::string>();
  const auto before = body(r.client.Get("/sessions/" + sid))["session"]["history"].size();
  std::vector<std::thread> threads;
  std::vector<int> status(4, 0);
  for (int i = 0; i < 4; ++i) {
    threads.emplace_back([&, i] {
      httplib::Client c("127.0.0.1", r.port);
      auto res = post_json(c, "/sessions/" + sid + "/messages", {{"text", "question " + std::to_string(i)}});
      status[i] = res ? res->status : -1;
    });
  }
  for (auto& t : threads) t.join();
  for (int s : status) EXPECT_EQ(s, 200);
  const auto hist = body(r.client.Get("/sessions/" + sid))["session"]["history"];
  ASSERT_EQ(hist.size(), before + 8);
  std::set<std::string> asked;
  for (std::size_t i = before; i < hist.size(); i += 2) {
    EXPECT_EQ(hist[i]["role"], "user");
    EXPECT_EQ(hist[i + 1]["role"], "assistant");
    asked.insert(hist[i]["content"].get<std::string>());
  }
  EXPECT_EQ(asked.size(), 4u);
}

TEST_F(ServiceTest, BackendFailuresAndAbsence) {
  const auto dir = fresh_dir("failures");
  const auto failing = dir / "failing.json";
  fs::create_directories(dir);
  std::ofstream(failing) << R"([{"match": "", "reply": "", "error": true}])";
  auto cfg = config_for(dir / "store");
  cfg.mock_fixture = failing.string();
  std::string id;
  {
    Running r(cfg);
    auto up = upload(r.client, *track_);
    ASSERT_EQ(up->status, 201);  // refinement failure falls back to depth 3
    const auto doc = body(up);
    id = doc["track_id"].get<std::string>();
    EXPECT_EQ(doc["depth"], 3);
    EXPECT_TRUE(doc.contains("refinement_note"));
    EXPECT_EQ(post_json(r.client, "/sessions", {{"track_id", id}})->status, 502);
    EXPECT_FALSE(fs::exists(dir / "store" / "sessions") && !fs::is_empty(dir / "store" / "sessions"));
  }
  Running none(config_for(dir / "store", false));
  EXPECT_EQ(post_json(none.client, "/sessions", {{"track_id", id}})->status, 503);
}

TEST_F(ServiceTest, SlowAnalysisAnswers202ThenPolls) {
  const auto dir = fresh_dir("async");
  auto cfg = config_for(dir);
  cfg.sync_wait_s = 0.0;
  Running r(cfg);
  auto up = upload(r.client, *track_);
  ASSERT_TRUE(up);
  ASSERT_EQ(up->status, 202);
  const auto id = body(up)["track_id"].get<std::string>();
  int status = 202;
  for (int i = 0; i < 600 && status == 202; ++i) {
    std::this_thread::sleep_for(std::chrono::milliseconds(100));
    status = r.client.Get("/tracks/" + id + "/report")->status;
  }
  EXPECT_EQ(status, 200);
}

TEST(Store, AtomicWritesAndIdValidation) {
  const auto dir = fresh_dir("store");
  FileStore store(dir);
  EXPECT_FALSE(FileStore::valid_id("../x"));
  EXPECT_FALSE(FileStore::valid_id("ABC"));
  EXPECT_TRUE(FileStore::valid_id("0a1b"));
  write_file_atomic(dir / "x.json", "one");
  write_file_atomic(dir / "x.json", "two");
  EXPECT_EQ(read_file(dir / "x.json"), "two");
  for (const auto& e : fs::directory_iterator(dir)) EXPECT_EQ(e.path().extension() == ".tmp", false);
  EXPECT_EQ(sha256_hex({}), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST(Config, FileAndEnvironment) {
  const auto dir = fresh_dir("config");
  fs::create_directories(dir);
  std::ofstream(dir / "c.json") << R"({"port": 9123, "producer_tone": false, "model": "m1"})";
  ServiceConfig cfg;
  cfg.apply_file((dir / "c.json").string());
  EXPECT_EQ(cfg.port, 9123);
  EXPECT_FALSE(cfg.producer_tone);
  ::setenv("TRACKMATE_MODEL", "m2", 1);
  ::setenv("TRACKMATE_STORE", "/tmp/s", 1);
  cfg.apply_env();
  ::unsetenv("TRACKMATE_MODEL");
  ::unsetenv("TRACKMATE_STORE");
  EXPECT_EQ(cfg.model, "m2");
  EXPECT_EQ(cfg.store_dir, "/tmp/s");
  EXPECT_FALSE(cfg.has_backend());
  std::ofstream(dir / "bad.json") << R"({"colour": "red"})";
  EXPECT_THROW(cfg.apply_file((dir / "bad.json").string()), std::runtime_error);
}
