#pragma once

#include <condition_variable>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "trackmate/llm/got.hpp"
#include "trackmate/service/config.hpp"
#include "trackmate/service/store.hpp"

namespace httplib {
class Server;
}

namespace trackmate::service {

/// Analysis plus optional refinement for one decoded upload. Writes the three
/// depth reports and the track record to the store.
TrackRecord process_track(const AudioClip& clip, const std::string& track_id, const std::string& filename,
                          const ServiceConfig& config, llm::ChatBackend* backend, FileStore& store);

/// New session over a stored track: prompt, scores and the GoT-backed opening turn.
SessionRecord open_track_session(const TrackRecord& track, const ServiceConfig& config, const llm::ThoughtGraph& graph,
                                 llm::ChatBackend& backend);

class FeedbackService {
 public:
  FeedbackService(ServiceConfig config, std::unique_ptr<llm::ChatBackend> backend);
  ~FeedbackService();
  FeedbackService(const FeedbackService&) = delete;
  FeedbackService& operator=(const FeedbackService&) = delete;

  /// Binds config.host:config.port (0 picks a free port) and returns the port.
  int bind();
  /// Blocks until stop().
  void run();
  void stop();
  /// bind() followed by run() on a background thread.
  int start_background();

  llm::ChatBackend* backend() { return backend_.get(); }
  FileStore& store() { return store_; }

 private:
  struct Job {
    enum class State { kRunning, kDone, kFailed } state = State::kRunning;
    int http_status = 0;
    std::string error;
  };

  void routes();
  std::shared_ptr<std::mutex> session_lock(const std::string& id);
  std::shared_ptr<Job> job_for(const std::string& track_id);

  ServiceConfig config_;
  std::unique_ptr<llm::ChatBackend> backend_;
  FileStore store_;
  std::optional<llm::ThoughtGraph> graph_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  std::counting_semaphore<64> workers_;

  std::mutex jobs_mutex_;
  std::condition_variable jobs_cv_;
  std::map<std::string, std::shared_ptr<Job>> jobs_;
  std::vector<std::thread> job_threads_;

  std::mutex sessions_mutex_;
  std::map<std::string, std::shared_ptr<std::mutex>> session_locks_;
};

}  // namespace trackmate::service
