#include "trackmate/service/config.hpp"

#include <cstdlib>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#ifndef TRACKMATE_DATA_DIR
#define TRACKMATE_DATA_DIR "data"
#endif

namespace trackmate::service {

void ServiceConfig::apply_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path);
  const auto doc = nlohmann::json::parse(in);
  if (!doc.is_object()) throw std::runtime_error("config file must hold a JSON object");
  for (const auto& [key, value] : doc.items()) {
    if (key == "backend_url") backend_url = value.get<std::string>();
    else if (key == "api_key") api_key = value.get<std::string>();
    else if (key == "model") model = value.get<std::string>();
    else if (key == "mock_fixture") mock_fixture = value.get<std::string>();
    else if (key == "producer_tone") producer_tone = value.get<bool>();
    else if (key == "plugin_cmd") plugin_cmd = value.get<std::string>();
    else if (key == "store_dir") store_dir = value.get<std::string>();
    else if (key == "graph_path") graph_path = value.get<std::string>();
    else if (key == "static_dir") static_dir = value.get<std::string>();
    else if (key == "host") host = value.get<std::string>();
    else if (key == "port") port = value.get<int>();
    else if (key == "workers") workers = value.get<int>();
    else if (key == "max_upload_bytes") max_upload_bytes = value.get<std::size_t>();
    else if (key == "sync_wait_s") sync_wait_s = value.get<double>();
    else throw std::runtime_error("unknown config key: " + key);
  }
}

void ServiceConfig::apply_env() {
  auto set = [](const char* name, std::string& field) {
    if (const char* v = std::getenv(name); v && *v) field = v;
  };
  set("TRACKMATE_BACKEND_URL", backend_url);
  set("TRACKMATE_API_KEY", api_key);
  set("TRACKMATE_MODEL", model);
  set("TRACKMATE_STORE", store_dir);
  set("TRACKMATE_PLUGIN_CMD", plugin_cmd);
}

std::string ServiceConfig::resolved_graph_path() const {
  return graph_path.empty() ? std::string(TRACKMATE_DATA_DIR) + "/graphs/music_feedback.json" : graph_path;
}

std::unique_ptr<llm::ChatBackend> make_backend(const ServiceConfig& config) {
  if (!config.mock_fixture.empty()) {
    return std::make_unique<llm::MockBackend>(llm::MockBackend::rules_from_file(config.mock_fixture));
  }
  if (!config.backend_url.empty()) {
    return std::make_unique<llm::HttpChatBackend>(llm::HttpBackendConfig{config.backend_url, config.api_key, config.model});
  }
  return nullptr;
}

}  // namespace trackmate::service
