#include "trackmate/llm/backend.hpp"

#include <httplib.h>

#include <fstream>
#include <sstream>

namespace trackmate::llm {

std::string_view to_string(Role role) {
  switch (role) {
    case Role::kSystem: return "system";
    case Role::kUser: return "user";
    case Role::kAssistant: return "assistant";
  }
  return "user";
}

Role role_from_string(std::string_view text) {
  if (text == "system") return Role::kSystem;
  if (text == "user") return Role::kUser;
  if (text == "assistant") return Role::kAssistant;
  throw std::invalid_argument("unknown message role: " + std::string(text));
}

nlohmann::json to_json(std::span<const Message> messages) {
  auto out = nlohmann::json::array();
  for (const auto& m : messages) out.push_back({{"role", std::string(to_string(m.role))}, {"content", m.content}});
  return out;
}

std::vector<Message> messages_from_json(const nlohmann::json& doc) {
  std::vector<Message> out;
  for (const auto& m : doc) out.push_back({role_from_string(m.at("role").get<std::string>()), m.at("content").get<std::string>()});
  return out;
}

MockBackend::MockBackend(std::vector<MockRule> rules) : rules_(std::move(rules)) {}

std::vector<MockRule> MockBackend::rules_from_json(const nlohmann::json& doc) {
  if (!doc.is_array()) throw std::invalid_argument("mock fixture must be a JSON array of rules");
  std::vector<MockRule> rules;
  for (const auto& r : doc) {
    MockRule rule;
    rule.match = r.value("match", "");
    rule.reply = r.value("reply", "");
    rule.fail = r.value("error", false);
    rules.push_back(std::move(rule));
  }
  return rules;
}

std::vector<MockRule> MockBackend::rules_from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open mock fixture " + path);
  return rules_from_json(nlohmann::json::parse(in));
}

std::string MockBackend::send(std::span<const Message> messages, double temperature) {
  std::lock_guard lock(mutex_);
  calls_.push_back({{messages.begin(), messages.end()}, temperature});
  const std::string& last = messages.empty() ? std::string() : messages.back().content;
  for (const auto& rule : rules_) {
    if (last.find(rule.match) == std::string::npos) continue;
    if (rule.fail) throw BackendError("mock backend failure");
    return rule.reply;
  }
  throw BackendError("mock backend has no rule for the request");
}

std::vector<MockBackend::Call> MockBackend::calls() const {
  std::lock_guard lock(mutex_);
  return calls_;
}

std::size_t MockBackend::call_count() const {
  std::lock_guard lock(mutex_);
  return calls_.size();
}

void MockBackend::clear_calls() {
  std::lock_guard lock(mutex_);
  calls_.clear();
}

HttpChatBackend::HttpChatBackend(HttpBackendConfig config) : config_(std::move(config)) {
  const auto scheme_end = config_.url.find("://");
  if (scheme_end == std::string::npos) throw std::invalid_argument("backend URL needs a scheme: " + config_.url);
  const auto path_start = config_.url.find('/', scheme_end + 3);
  origin_ = config_.url.substr(0, path_start);
  path_ = path_start == std::string::npos ? "/" : config_.url.substr(path_start);
}

nlohmann::json HttpChatBackend::request_body(std::span<const Message> messages, double temperature) const {
  return {{"model", config_.model}, {"messages", to_json(messages)}, {"temperature", temperature}};
}

std::string HttpChatBackend::parse_response(std::string_view body) {
  try {
    const auto doc = nlohmann::json::parse(body);
    return doc.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw BackendError(std::string("malformed chat completion response: ") + e.what());
  }
}

std::string HttpChatBackend::send(std::span<const Message> messages, double temperature) {
  httplib::Client client(origin_);
  client.set_connection_timeout(config_.timeout);
  client.set_read_timeout(config_.timeout);
  client.set_write_timeout(config_.timeout);
  httplib::Headers headers;
  if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);
  const auto res = client.Post(path_, headers, request_body(messages, temperature).dump(), "application/json");
  if (!res) throw BackendError("chat backend unreachable: " + httplib::to_string(res.error()));
  if (res->status < 200 || res->status >= 300) {
    throw BackendError("chat backend returned HTTP " + std::to_string(res->status));
  }
  return parse_response(res->body);
}

}  // namespace trackmate::llm
