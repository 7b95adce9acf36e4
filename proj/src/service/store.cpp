#include "trackmate/service/store.hpp"

#include <openssl/evp.h>

#include <atomic>
#include <chrono>
#include <ctime>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <fcntl.h>
#include <unistd.h>

#include <fmt/format.h>

namespace trackmate::service {

namespace fs = std::filesystem;

std::string sha256_hex(std::span<const std::uint8_t> bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 computation failed");
  }
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) out += fmt::format("{:02x}", digest[i]);
  return out;
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const auto t = std::chrono::system_clock::to_time_t(now);
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
  return fmt::format("{}.{:03d}Z", buf, static_cast<int>(ms));
}

nlohmann::ordered_json TrackRecord::to_json() const {
  nlohmann::ordered_json out;
  out["track_id"] = track_id;
  out["original_filename"] = original_filename;
  out["created_at"] = created_at;
  out["depth"] = depth;
  out["depth_defaulted"] = depth_defaulted;
  out["interpretation"] = interpretation;
  if (!refinement_note.empty()) out["refinement_note"] = refinement_note;
  out["report"] = stored_report;
  return out;
}

TrackRecord TrackRecord::from_json(const nlohmann::ordered_json& doc) {
  TrackRecord r;
  r.track_id = doc.at("track_id").get<std::string>();
  r.original_filename = doc.at("original_filename").get<std::string>();
  r.created_at = doc.at("created_at").get<std::string>();
  r.depth = doc.at("depth").get<int>();
  r.depth_defaulted = doc.value("depth_defaulted", false);
  r.interpretation = doc.value("interpretation", "");
  r.refinement_note = doc.value("refinement_note", "");
  r.stored_report = doc.at("report");
  return r;
}

nlohmann::ordered_json SessionRecord::to_json() const {
  nlohmann::ordered_json out;
  out["session_id"] = session_id;
  out["track_id"] = track_id;
  out["updated_at"] = updated_at;
  out["session"] = session.to_json();
  return out;
}

SessionRecord SessionRecord::from_json(const nlohmann::ordered_json& doc) {
  SessionRecord r;
  r.session_id = doc.at("session_id").get<std::string>();
  r.track_id = doc.at("track_id").get<std::string>();
  r.updated_at = doc.at("updated_at").get<std::string>();
  r.session = llm::ChatSession::from_json(doc.at("session"));
  return r;
}

void write_file_atomic(const fs::path& path, const std::string& content) {
  static std::atomic<unsigned> counter{0};
  fs::create_directories(path.parent_path());
  const auto tmp = path.parent_path() /
                   fmt::format(".{}.{}.{}.tmp", path.filename().string(), ::getpid(), counter.fetch_add(1));
  const int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
  if (fd < 0) throw std::runtime_error("cannot write " + tmp.string());
  std::size_t done = 0;
  while (done < content.size()) {
    const auto n = ::write(fd, content.data() + done, content.size() - done);
    if (n < 0) {
      ::close(fd);
      fs::remove(tmp);
      throw std::runtime_error("write failed for " + tmp.string());
    }
    done += static_cast<std::size_t>(n);
  }
  ::fsync(fd);
  ::close(fd);
  fs::rename(tmp, path);
}

std::optional<std::string> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

FileStore::FileStore(fs::path root) : root_(std::move(root)) {
  fs::create_directories(root_ / "tracks");
  fs::create_directories(root_ / "sessions");
}

bool FileStore::valid_id(const std::string& id) {
  if (id.empty() || id.size() > 128) return false;
  for (char c : id)
    if (!((c >= '0' && c <= '9') || (c >= 'a' && c <= 'f'))) return false;
  return true;
}

fs::path FileStore::track_dir(const std::string& id) const {
  if (!valid_id(id)) throw std::invalid_argument("invalid track id");
  return root_ / "tracks" / id;
}

fs::path FileStore::session_dir(const std::string& id) const {
  if (!valid_id(id)) throw std::invalid_argument("invalid session id");
  return root_ / "sessions" / id;
}

bool FileStore::has_track(const std::string& track_id) const {
  return valid_id(track_id) && fs::exists(track_dir(track_id) / "track.json");
}

void FileStore::put_track(const TrackRecord& record) {
  write_file_atomic(track_dir(record.track_id) / "track.json", record.to_json().dump(2));
}

std::optional<TrackRecord> FileStore::get_track(const std::string& track_id) const {
  if (!valid_id(track_id)) return std::nullopt;
  const auto text = read_file(track_dir(track_id) / "track.json");
  if (!text) return std::nullopt;
  return TrackRecord::from_json(nlohmann::ordered_json::parse(*text));
}

void FileStore::put_report(const std::string& track_id, int depth, const MusicReport& report) {
  write_file_atomic(track_dir(track_id) / fmt::format("report_{}.json", depth), report.dump(2));
}

std::optional<MusicReport> FileStore::get_report(const std::string& track_id, int depth) const {
  if (!valid_id(track_id)) return std::nullopt;
  const auto text = read_file(track_dir(track_id) / fmt::format("report_{}.json", depth));
  if (!text) return std::nullopt;
  return MusicReport::parse(*text);
}

bool FileStore::has_session(const std::string& session_id) const {
  return valid_id(session_id) && fs::exists(session_dir(session_id) / "session.json");
}

void FileStore::put_session(const SessionRecord& record) {
  write_file_atomic(session_dir(record.session_id) / "session.json", record.to_json().dump(2));
}

std::optional<SessionRecord> FileStore::get_session(const std::string& session_id) const {
  if (!valid_id(session_id)) return std::nullopt;
  const auto text = read_file(session_dir(session_id) / "session.json");
  if (!text) return std::nullopt;
  return SessionRecord::from_json(nlohmann::ordered_json::parse(*text));
}

}  // namespace trackmate::service
