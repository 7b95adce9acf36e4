#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>

#include <json.hpp>

#include "trackmate/llm/session.hpp"
#include "trackmate/report.hpp"

namespace trackmate::service {

std::string sha256_hex(std::span<const std::uint8_t> bytes);
std::string utc_timestamp();

struct TrackRecord {
  std::string track_id;  // sha256 of the uploaded bytes
  std::string original_filename;
  std::string created_at;
  int depth = 3;  // depth of stored_report
  MusicReport stored_report;
  std::string interpretation;
  bool depth_defaulted = false;
  std::string refinement_note;  // why refinement was skipped, if it was

  nlohmann::ordered_json to_json() const;
  static TrackRecord from_json(const nlohmann::ordered_json& doc);
};

struct SessionRecord {
  std::string session_id;
  std::string track_id;
  llm::ChatSession session;
  std::string updated_at;

  nlohmann::ordered_json to_json() const;
  static SessionRecord from_json(const nlohmann::ordered_json& doc);
};

/// Directory-per-entity store:
///   tracks/<id>/track.json, tracks/<id>/report_<d>.json, sessions/<id>/session.json
/// Files are replaced atomically (write to a temp file, then rename).
class FileStore {
 public:
  explicit FileStore(std::filesystem::path root);

  const std::filesystem::path& root() const { return root_; }

  bool has_track(const std::string& track_id) const;
  void put_track(const TrackRecord& record);
  std::optional<TrackRecord> get_track(const std::string& track_id) const;

  void put_report(const std::string& track_id, int depth, const MusicReport& report);
  std::optional<MusicReport> get_report(const std::string& track_id, int depth) const;

  void put_session(const SessionRecord& record);
  std::optional<SessionRecord> get_session(const std::string& session_id) const;
  bool has_session(const std::string& session_id) const;

  /// Rejects ids that are not plain lowercase hex.
  static bool valid_id(const std::string& id);

 private:
  std::filesystem::path track_dir(const std::string& id) const;
  std::filesystem::path session_dir(const std::string& id) const;

  std::filesystem::path root_;
};

void write_file_atomic(const std::filesystem::path& path, const std::string& content);
std::optional<std::string> read_file(const std::filesystem::path& path);

}  // namespace trackmate::service
