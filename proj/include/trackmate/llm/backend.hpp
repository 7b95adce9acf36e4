#pragma once

#include <chrono>
#include <mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace trackmate::llm {

class BackendError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Role { kSystem, kUser, kAssistant };
std::string_view to_string(Role role);
/// Throws std::invalid_argument for anything but system/user/assistant.
Role role_from_string(std::string_view text);

struct Message {
  Role role = Role::kUser;
  std::string content;

  friend bool operator==(const Message&, const Message&) = default;
};

nlohmann::json to_json(std::span<const Message> messages);
std::vector<Message> messages_from_json(const nlohmann::json& doc);

/// Stateless chat-completion endpoint: all context travels in `messages`.
class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual std::string send(std::span<const Message> messages, double temperature) = 0;
};

struct MockRule {
  std::string match;  // substring of the last message; empty matches anything
  std::string reply;
  bool fail = false;  // raise BackendError instead of replying
};

/// Scripted backend: the first rule whose `match` occurs in the last
/// message's content decides the reply. Every call is logged.
class MockBackend : public ChatBackend {
 public:
  struct Call {
    std::vector<Message> messages;
    double temperature = 0.0;
  };

  explicit MockBackend(std::vector<MockRule> rules);
  /// Fixture format: [{"match": ..., "reply": ..., "error": true?}, ...]
  static std::vector<MockRule> rules_from_json(const nlohmann::json& doc);
  static std::vector<MockRule> rules_from_file(const std::string& path);

  std::string send(std::span<const Message> messages, double temperature) override;

  std::vector<Call> calls() const;
  std::size_t call_count() const;
  void clear_calls();

 private:
  std::vector<MockRule> rules_;
  mutable std::mutex mutex_;
  std::vector<Call> calls_;
};

struct HttpBackendConfig {
  std::string url;  // full endpoint, e.g. https://host/v1/chat/completions
  std::string api_key;
  std::string model;
  std::chrono::seconds timeout{60};
};

/// Chat-completions style HTTP client.
class HttpChatBackend : public ChatBackend {
 public:
  explicit HttpChatBackend(HttpBackendConfig config);
  std::string send(std::span<const Message> messages, double temperature) override;

  /// Request body for the given conversation (exposed for tests).
  nlohmann::json request_body(std::span<const Message> messages, double temperature) const;
  /// Extracts the first choice's message content; throws BackendError.
  static std::string parse_response(std::string_view body);

 private:
  HttpBackendConfig config_;
  std::string origin_;
  std::string path_;
};

}  // namespace trackmate::llm
