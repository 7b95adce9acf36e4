#include "trackmate/service/service.hpp"

#include <httplib.h>

#include <algorithm>
#include <cctype>
#include <chrono>

#include "trackmate/llm/refine.hpp"
#include "trackmate/llm/session.hpp"
#include "trackmate/semantics.hpp"

namespace trackmate::service {

using nlohmann::ordered_json;

TrackRecord process_track(const AudioClip& clip, const std::string& track_id, const std::string& filename,
                          const ServiceConfig& config, llm::ChatBackend* backend, FileStore& store) {
  std::unique_ptr<SubprocessPlugin> plugin;
  if (!config.plugin_cmd.empty()) plugin = std::make_unique<SubprocessPlugin>(config.plugin_cmd);
  AnalyzeOptions options;
  options.source_hash = track_id;
  options.plugin = plugin.get();
  const AnalysisBundle bundle = analyze_track(clip, options);

  TrackRecord rec;
  rec.track_id = track_id;
  rec.original_filename = filename;
  rec.created_at = utc_timestamp();
  for (int d = 1; d <= 3; ++d) store.put_report(track_id, d, build_report(bundle, d));

  if (backend) {
    try {
      auto refined = llm::refine_report(bundle, *backend);
      rec.depth = refined.depth;
      rec.stored_report = std::move(refined.report);
      rec.interpretation = std::move(refined.interpretation);
      rec.depth_defaulted = refined.defaulted;
    } catch (const llm::BackendError& e) {
      rec.refinement_note = std::string("refinement skipped: ") + e.what();
    }
  } else {
    rec.refinement_note = "refinement skipped: no chat backend configured";
  }
  if (rec.stored_report.is_null()) {
    rec.depth = 3;
    rec.stored_report = build_report(bundle, 3);
  }
  store.put_track(rec);
  return rec;
}

SessionRecord open_track_session(const TrackRecord& track, const ServiceConfig& config, const llm::ThoughtGraph& graph,
                                 llm::ChatBackend& backend) {
  auto prompt = llm::PromptTemplate::standard();
  prompt.producer_tone = config.producer_tone;
  SessionRecord rec;
  rec.session_id = llm::new_session_id();
  rec.track_id = track.track_id;
  rec.session = llm::start_session(rec.session_id, track.stored_report, prompt);
  llm::open_session(rec.session, graph, backend);
  rec.updated_at = utc_timestamp();
  return rec;
}

namespace {

void send_json(httplib::Response& res, int status, const ordered_json& body) {
  res.status = status;
  res.set_content(body.dump(2), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message) {
  send_json(res, status, ordered_json{{"error", message}});
}

std::string lower_extension(const std::string& filename) {
  const auto dot = filename.find_last_of('.');
  if (dot == std::string::npos) return "";
  std::string ext = filename.substr(dot + 1);
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext;
}

bool is_blank(const std::string& s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

struct Fetched {
  int status = 200;  // non-200 means failure, with message
  std::string message;
  std::string body;
  std::string filename;
};

Fetched fetch_source(const std::string& url, std::size_t limit) {
  Fetched out;
  const auto scheme_end = url.find("://");
  const std::string scheme = scheme_end == std::string::npos ? "" : url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") return {400, "source_url must be an http(s) URL", {}, {}};
  const auto path_start = url.find('/', scheme_end + 3);
  const std::string origin = url.substr(0, path_start);
  const std::string path = path_start == std::string::npos ? "/" : url.substr(path_start);
  httplib::Client client(origin);
  client.set_follow_location(true);
  client.set_connection_timeout(std::chrono::seconds(10));
  client.set_read_timeout(std::chrono::seconds(60));
  bool too_big = false;
  auto res = client.Get(path, [&](const char* data, std::size_t n) {
    if (out.body.size() + n > limit) {
      too_big = true;
      return false;
    }
    out.body.append(data, n);
    return true;
  });
  if (too_big) return {413, "remote file exceeds the upload limit", {}, {}};
  if (!res) return {502, "could not fetch source_url: " + httplib::to_string(res.error()), {}, {}};
  if (res->status != 200) return {502, "source_url returned HTTP " + std::to_string(res->status), {}, {}};
  const auto query = path.find_first_of("?#");
  const std::string clean = path.substr(0, query);
  out.filename = clean.substr(clean.find_last_of('/') + 1);
  return out;
}

}  // namespace

FeedbackService::FeedbackService(ServiceConfig config, std::unique_ptr<llm::ChatBackend> backend)
    : config_(std::move(config)),
      backend_(std::move(backend)),
      store_(config_.store_dir),
      server_(std::make_unique<httplib::Server>()),
      workers_(std::clamp(config_.workers, 1, 64)) {
  if (backend_) graph_ = llm::ThoughtGraph::from_file(config_.resolved_graph_path());
  server_->set_payload_max_length(config_.max_upload_bytes);
  if (!config_.static_dir.empty()) server_->set_mount_point("/", config_.static_dir);
  routes();
}

FeedbackService::~FeedbackService() {
  stop();
  std::vector<std::thread> threads;
  {
    std::lock_guard lock(jobs_mutex_);
    threads.swap(job_threads_);
  }
  for (auto& t : threads) t.join();
}

int FeedbackService::bind() {
  if (config_.port == 0) return config_.port = server_->bind_to_any_port(config_.host);
  if (!server_->bind_to_port(config_.host, config_.port)) {
    throw std::runtime_error("cannot bind " + config_.host + ":" + std::to_string(config_.port));
  }
  return config_.port;
}

void FeedbackService::run() { server_->listen_after_bind(); }

void FeedbackService::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

int FeedbackService::start_background() {
  const int port = bind();
  if (port <= 0) throw std::runtime_error("cannot bind " + config_.host);
  thread_ = std::thread([this] { run(); });
  server_->wait_until_ready();
  return port;
}

std::shared_ptr<std::mutex> FeedbackService::session_lock(const std::string& id) {
  std::lock_guard lock(sessions_mutex_);
  auto& slot = session_locks_[id];
  if (!slot) slot = std::make_shared<std::mutex>();
  return slot;
}

std::shared_ptr<FeedbackService::Job> FeedbackService::job_for(const std::string& track_id) {
  std::lock_guard lock(jobs_mutex_);
  const auto it = jobs_.find(track_id);
  return it == jobs_.end() ? nullptr : it->second;
}

void FeedbackService::routes() {
  auto& srv = *server_;

  srv.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    std::string what = "internal error";
    try {
      std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      what = e.what();
    } catch (...) {
    }
    send_error(res, 500, what);
  });

  srv.Get("/healthz", [this](const httplib::Request&, httplib::Response& res) {
    send_json(res, 200, {{"status", "ok"}, {"backend", backend_ ? "configured" : "none"}});
  });

  srv.Post("/tracks", [this](const httplib::Request& req, httplib::Response& res) {
    std::string bytes;
    std::string filename = "upload";
    if (req.is_multipart_form_data()) {
      if (!req.has_file("file")) return send_error(res, 400, "multipart upload needs a 'file' part");
      const auto file = req.get_file_value("file");
      bytes = file.content;
      if (!file.filename.empty()) filename = file.filename;
    } else if (req.get_header_value("Content-Type").rfind("application/json", 0) == 0) {
      const auto doc = nlohmann::json::parse(req.body, nullptr, false);
      if (doc.is_discarded() || !doc.is_object() || !doc.contains("source_url") || !doc["source_url"].is_string()) {
        return send_error(res, 400, "JSON upload needs a string 'source_url'");
      }
      auto fetched = fetch_source(doc["source_url"].get<std::string>(), config_.max_upload_bytes);
      if (fetched.status != 200) return send_error(res, fetched.status, fetched.message);
      bytes = std::move(fetched.body);
      if (!fetched.filename.empty()) filename = fetched.filename;
    } else {
      bytes = req.body;
      if (req.has_param("filename")) filename = req.get_param_value("filename");
    }
    if (bytes.empty()) return send_error(res, 400, "empty upload");
    if (bytes.size() > config_.max_upload_bytes) return send_error(res, 413, "upload exceeds the size limit");

    const std::span<const std::uint8_t> raw(reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size());
    const std::string id = sha256_hex(raw);
    auto processing = [&] {
      send_json(res, 202, {{"track_id", id}, {"status", "processing"}, {"poll", "/tracks/" + id + "/report"}});
    };

    if (auto existing = store_.get_track(id)) return send_json(res, 200, existing->to_json());
    if (auto job = job_for(id); job && job->state == Job::State::kRunning) return processing();

    AudioClip clip;
    try {
      const auto ext = lower_extension(filename);
      clip = decode_audio(raw, ext.empty() ? std::nullopt : std::optional<std::string_view>(ext));
    } catch (const DecodeError& e) {
      return send_error(res, 415, std::string("unsupported or unreadable audio: ") + e.what());
    }

    auto job = std::make_shared<Job>();
    {
      std::lock_guard lock(jobs_mutex_);
      auto& slot = jobs_[id];
      if (slot && slot->state == Job::State::kRunning) return processing();
      slot = job;
      job_threads_.emplace_back([this, job, id, filename, clip = std::move(clip)] {
        workers_.acquire();
        Job::State state = Job::State::kDone;
        int status = 201;
        std::string error;
        try {
          process_track(clip, id, filename, config_, backend_.get(), store_);
        } catch (const AnalysisError& e) {
          state = Job::State::kFailed;
          status = 422;
          error = e.what();
        } catch (const std::exception& e) {
          state = Job::State::kFailed;
          status = 500;
          error = e.what();
        }
        workers_.release();
        {
          std::lock_guard lock(jobs_mutex_);
          job->state = state;
          job->http_status = status;
          job->error = std::move(error);
        }
        jobs_cv_.notify_all();
      });
    }

    std::unique_lock lock(jobs_mutex_);
    const bool finished = jobs_cv_.wait_for(lock, std::chrono::duration<double>(config_.sync_wait_s),
                                            [&] { return job->state != Job::State::kRunning; });
    if (!finished) {
      lock.unlock();
      return processing();
    }
    const auto state = job->state;
    const auto status = job->http_status;
    const auto error = job->error;
    lock.unlock();
    if (state == Job::State::kFailed) return send_error(res, status, error);
    const auto rec = store_.get_track(id);
    if (!rec) return send_error(res, 500, "track record missing after analysis");
    send_json(res, 201, rec->to_json());
  });

  srv.Get(R"(/tracks/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1];
    if (!FileStore::valid_id(id)) return send_error(res, 404, "unknown track");
    const auto text = read_file(store_.root() / "tracks" / id / "track.json");
    if (!text) return send_error(res, 404, "unknown track");
    res.set_content(*text, "application/json");
  });

  srv.Get(R"(/tracks/([^/]+)/report)", [this](const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1];
    if (!FileStore::valid_id(id)) return send_error(res, 404, "unknown track");
    if (auto job = job_for(id)) {
      std::lock_guard lock(jobs_mutex_);
      if (job->state == Job::State::kRunning) {
        return send_json(res, 202, {{"track_id", id}, {"status", "processing"}});
      }
      if (job->state == Job::State::kFailed && !store_.has_track(id)) {
        return send_error(res, job->http_status, job->error);
      }
    }
    const auto track = store_.get_track(id);
    if (!track) return send_error(res, 404, "unknown track");
    int depth = track->depth;
    if (req.has_param("depth")) {
      const auto value = req.get_param_value("depth");
      if (value != "1" && value != "2" && value != "3") return send_error(res, 400, "depth must be 1, 2 or 3");
      depth = value[0] - '0';
    }
    const auto text = read_file(store_.root() / "tracks" / id / ("report_" + std::to_string(depth) + ".json"));
    if (!text) return send_error(res, 404, "report not found");
    res.set_content(*text, "application/json");
  });

  srv.Post("/sessions", [this](const httplib::Request& req, httplib::Response& res) {
    const auto doc = nlohmann::json::parse(req.body, nullptr, false);
    if (doc.is_discarded() || !doc.is_object() || !doc.contains("track_id") || !doc["track_id"].is_string()) {
      return send_error(res, 400, "body must be {\"track_id\": \"...\"}");
    }
    const auto track_id = doc["track_id"].get<std::string>();
    if (auto job = job_for(track_id)) {
      std::lock_guard lock(jobs_mutex_);
      if (job->state == Job::State::kRunning) return send_error(res, 409, "track analysis still running");
    }
    const auto track = store_.get_track(track_id);
    if (!track) return send_error(res, 404, "unknown track");
    if (!backend_) return send_error(res, 503, "no chat backend configured");
    SessionRecord rec;
    try {
      rec = open_track_session(*track, config_, *graph_, *backend_);
    } catch (const llm::BackendError& e) {
      return send_error(res, 502, std::string("chat backend failed: ") + e.what());
    } catch (const llm::ScoreParseError& e) {
      return send_error(res, 502, std::string("chat backend returned no usable scores: ") + e.what());
    }
    store_.put_session(rec);
    ordered_json body;
    body["session_id"] = rec.session_id;
    body["track_id"] = rec.track_id;
    body["scores"] = rec.session.scores->to_json();
    body["opening_message"] = rec.session.history.back().content;
    body["history_length"] = rec.session.history.size();
    body["updated_at"] = rec.updated_at;
    send_json(res, 201, body);
  });

  srv.Get(R"(/sessions/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1];
    if (!FileStore::valid_id(id)) return send_error(res, 404, "unknown session");
    const auto lock = session_lock(id);
    std::lock_guard guard(*lock);
    const auto text = read_file(store_.root() / "sessions" / id / "session.json");
    if (!text) return send_error(res, 404, "unknown session");
    res.set_content(*text, "application/json");
  });

  srv.Post(R"(/sessions/([^/]+)/messages)", [this](const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1];
    if (!store_.has_session(id)) return send_error(res, 404, "unknown session");
    const auto doc = nlohmann::json::parse(req.body, nullptr, false);
    if (doc.is_discarded() || !doc.is_object() || !doc.contains("text") || !doc["text"].is_string() ||
        is_blank(doc["text"].get<std::string>())) {
      return send_error(res, 400, "body must be {\"text\": \"<non-empty message>\"}");
    }
    if (!backend_) return send_error(res, 503, "no chat backend configured");
    const auto lock = session_lock(id);
    std::lock_guard guard(*lock);
    auto rec = store_.get_session(id);
    if (!rec) return send_error(res, 404, "unknown session");
    std::string reply;
    try {
      reply = llm::chat_turn(rec->session, doc["text"].get<std::string>(), *backend_);
    } catch (const llm::BackendError& e) {
      return send_error(res, 502, std::string("chat backend failed: ") + e.what());
    }
    rec->updated_at = utc_timestamp();
    store_.put_session(*rec);
    send_json(res, 200, {{"session_id", id}, {"reply", reply}, {"history_length", rec->session.history.size()}});
  });
}

}  // namespace trackmate::service
