#include "trackmate/semantics.hpp"

#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <csignal>
#include <cstring>
#include <map>

namespace trackmate {

bool is_genre(std::string_view label) {
  return std::find(std::begin(kGenres), std::end(kGenres), label) != std::end(kGenres);
}

bool is_theme(std::string_view label) {
  return std::find(std::begin(kThemes), std::end(kThemes), label) != std::end(kThemes);
}

nlohmann::json plugin_request(const SemanticsFeatures& features) {
  nlohmann::json doc = nlohmann::json::object();
  doc["tempo_bpm"] = features.tempo_bpm ? nlohmann::json(*features.tempo_bpm) : nlohmann::json(nullptr);
  if (features.key) {
    doc["key"] = {{"tonic", pitch_class_names()[static_cast<std::size_t>(features.key->tonic)]},
                  {"mode", features.key->mode == Mode::kMajor ? "major" : "minor"}};
  } else {
    doc["key"] = nullptr;
  }
  auto sections = nlohmann::json::array();
  for (const auto& s : features.sections) {
    auto inst = nlohmann::json::array();
    for (const auto& t : s.instruments) inst.push_back(std::string(to_string(t.name)));
    sections.push_back({{"start", s.start},
                        {"end", s.end},
                        {"emotion", std::string(to_string(s.emotion.label))},
                        {"instruments", inst}});
  }
  doc["sections"] = sections;
  auto timbre = nlohmann::json::object();
  const auto values = features.timbre.values();
  for (std::size_t i = 0; i < values.size(); ++i) timbre[std::string(TimbralProfile::kNames[i])] = values[i];
  doc["timbre"] = timbre;
  return doc;
}

SubprocessPlugin::SubprocessPlugin(std::string command, std::chrono::milliseconds timeout)
    : command_(std::move(command)), timeout_(timeout) {}

nlohmann::json SubprocessPlugin::classify(const nlohmann::json& request) {
  const auto result = run_process(command_, request.dump() + "\n", timeout_);
  if (result.timed_out) throw PluginError("classifier plugin timed out");
  if (result.exit_code != 0) throw PluginError("classifier plugin exited with code " + std::to_string(result.exit_code));
  try {
    return nlohmann::json::parse(result.out);
  } catch (const nlohmann::json::parse_error& e) {
    throw PluginError(std::string("classifier plugin emitted invalid JSON: ") + e.what());
  }
}

ProcessResult run_process(const std::string& command, std::string_view input, std::chrono::milliseconds timeout) {
  int in_pipe[2];
  int out_pipe[2];
  if (pipe(in_pipe) != 0) throw PluginError("pipe failed");
  if (pipe(out_pipe) != 0) {
    close(in_pipe[0]);
    close(in_pipe[1]);
    throw PluginError("pipe failed");
  }
  const pid_t pid = fork();
  if (pid < 0) throw PluginError("fork failed");
  if (pid == 0) {
    dup2(in_pipe[0], STDIN_FILENO);
    dup2(out_pipe[1], STDOUT_FILENO);
    close(in_pipe[0]);
    close(in_pipe[1]);
    close(out_pipe[0]);
    close(out_pipe[1]);
    execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    _exit(127);
  }
  close(in_pipe[0]);
  close(out_pipe[1]);

  // A plugin that exits without reading stdin must not kill us with SIGPIPE.
  struct sigaction ignore {};
  struct sigaction previous {};
  ignore.sa_handler = SIG_IGN;
  sigaction(SIGPIPE, &ignore, &previous);

  ProcessResult result;
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  std::size_t written = 0;
  int write_fd = in_pipe[1];
  if (input.empty()) {
    close(write_fd);
    write_fd = -1;
  }
  bool reading = true;
  char buf[4096];
  while (reading) {
    const auto remaining =
        std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
    if (remaining.count() <= 0) {
      result.timed_out = true;
      break;
    }
    pollfd fds[2];
    nfds_t count = 0;
    fds[count++] = {out_pipe[0], POLLIN, 0};
    if (write_fd >= 0) fds[count++] = {write_fd, POLLOUT, 0};
    const int ready = poll(fds, count, static_cast<int>(remaining.count()));
    if (ready < 0) {
      if (errno == EINTR) continue;
      break;
    }
    if (ready == 0) continue;
    if (write_fd >= 0 && (fds[1].revents & (POLLOUT | POLLERR | POLLHUP))) {
      const ssize_t n = write(write_fd, input.data() + written, input.size() - written);
      if (n > 0) written += static_cast<std::size_t>(n);
      if (n < 0 || written == input.size()) {
        close(write_fd);
        write_fd = -1;
      }
    }
    if (fds[0].revents & (POLLIN | POLLHUP | POLLERR)) {
      const ssize_t n = read(out_pipe[0], buf, sizeof buf);
      if (n > 0) {
        result.out.append(buf, static_cast<std::size_t>(n));
      } else if (n == 0 || (n < 0 && errno != EINTR)) {
        reading = false;
      }
    }
  }
  if (write_fd >= 0) close(write_fd);
  close(out_pipe[0]);
  if (result.timed_out) kill(pid, SIGKILL);
  int status = 0;
  waitpid(pid, &status, 0);
  sigaction(SIGPIPE, &previous, nullptr);
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return result;
}

double instrument_coverage(std::span<const Section> sections, Instrument instrument) {
  double covered = 0.0, total = 0.0;
  for (const auto& s : sections) {
    total += s.duration();
    const bool tagged = std::any_of(s.instruments.begin(), s.instruments.end(),
                                    [&](const InstrumentTag& t) { return t.name == instrument; });
    if (tagged) covered += s.duration();
  }
  return total > 0.0 ? covered / total : 0.0;
}

namespace {

Emotion dominant_emotion(std::span<const Section> sections) {
  std::map<Emotion, double> weight;
  for (const auto& s : sections) weight[s.emotion.label] += s.duration();
  Emotion best = Emotion::kCalm;
  double best_w = -1.0;
  for (Emotion e : {Emotion::kHappy, Emotion::kTense, Emotion::kSad, Emotion::kCalm}) {
    if (weight[e] > best_w) {
      best = e;
      best_w = weight[e];
    }
  }
  return best;
}

}  // namespace

TrackSemantics heuristic_semantics(const SemanticsFeatures& f) {
  TrackSemantics out;
  out.source = SemanticsSource::kHeuristic;
  const bool drums = instrument_coverage(f.sections, Instrument::kDrums) >= 0.5;
  const bool bass = instrument_coverage(f.sections, Instrument::kBass) >= 0.5;
  const bool harmonic = instrument_coverage(f.sections, Instrument::kHarmonic) >= 0.5;
  const double bpm = f.tempo_bpm.value_or(0.0);
  const bool major = f.key && f.key->mode == Mode::kMajor;
  const auto& t = f.timbre;

  // Decision list, first match wins.
  if (drums && t.sharpness >= 65.0 && bpm >= 120.0 && bpm <= 135.0) out.genre = "electronic";
  else if (drums && bass && bpm >= 80.0 && bpm < 100.0) out.genre = "hip-hop";
  else if (drums && t.roughness >= 60.0 && t.hardness >= 55.0) out.genre = "rock";
  else if (drums && major && bpm >= 100.0 && bpm <= 135.0) out.genre = "pop";
  else if (!drums && harmonic && t.warmth >= 55.0) out.genre = "folk";
  else if (!drums && harmonic && t.brightness < 50.0) out.genre = "classical";
  else out.genre = "other";

  if (f.sections.empty()) {
    out.theme = "other";
    return out;
  }
  switch (dominant_emotion(f.sections)) {
    case Emotion::kHappy: out.theme = drums && bpm >= 115.0 ? "party" : "love"; break;
    case Emotion::kTense: out.theme = "energy"; break;
    case Emotion::kSad: out.theme = "melancholy"; break;
    case Emotion::kCalm: out.theme = "chill"; break;
  }
  return out;
}

TrackSemantics classify_track_semantics(const SemanticsFeatures& features, SemanticsPlugin* plugin) {
  if (plugin == nullptr) return heuristic_semantics(features);
  try {
    const auto reply = plugin->classify(plugin_request(features));
    if (!reply.is_object() || !reply.contains("genre") || !reply.contains("theme") ||
        !reply["genre"].is_string() || !reply["theme"].is_string()) {
      throw PluginError("classifier reply must be an object with string 'genre' and 'theme'");
    }
    const auto genre = reply["genre"].get<std::string>();
    const auto theme = reply["theme"].get<std::string>();
    if (!is_genre(genre)) throw PluginError("classifier genre '" + genre + "' is not in the vocabulary");
    if (!is_theme(theme)) throw PluginError("classifier theme '" + theme + "' is not in the vocabulary");
    TrackSemantics out;
    out.genre = genre;
    out.theme = theme;
    out.source = SemanticsSource::kPlugin;
    return out;
  } catch (const PluginError& e) {
    auto out = heuristic_semantics(features);
    out.warning = std::string("plugin fallback: ") + e.what();
    return out;
  }
}

}  // namespace trackmate
