#pragma once

#include <cstddef>
#include <memory>
#include <string>

#include "trackmate/llm/backend.hpp"

namespace trackmate::service {

struct ServiceConfig {
  std::string backend_url;
  std::string api_key;
  std::string model = "gpt-4o-mini";
  std::string mock_fixture;  // when set, a scripted MockBackend replaces the HTTP backend
  bool producer_tone = true;
  std::string plugin_cmd;
  std::string store_dir = "trackmate-store";
  std::string graph_path;  // empty: bundled music feedback graph
  std::string static_dir;  // optional directory served at /
  std::string host = "127.0.0.1";
  int port = 8080;
  int workers = 2;
  std::size_t max_upload_bytes = 100u * 1024u * 1024u;
  double sync_wait_s = 10.0;  // longer analyses answer 202 and are polled

  /// Keys mirror the field names; unknown keys are rejected.
  void apply_file(const std::string& path);
  /// TRACKMATE_BACKEND_URL, TRACKMATE_API_KEY, TRACKMATE_MODEL, TRACKMATE_STORE, TRACKMATE_PLUGIN_CMD.
  void apply_env();

  bool has_backend() const { return !mock_fixture.empty() || !backend_url.empty(); }
  std::string resolved_graph_path() const;
};

/// Null when no backend is configured.
std::unique_ptr<llm::ChatBackend> make_backend(const ServiceConfig& config);

}  // namespace trackmate::service
