// trackmate: offline analysis, terminal chat and the HTTP service.

#include <CLI11.hpp>
#include <fmt/format.h>

#include <csignal>
#include <fstream>
#include <iostream>
#include <iterator>

#include "trackmate/llm/refine.hpp"
#include "trackmate/llm/session.hpp"
#include "trackmate/semantics.hpp"
#include "trackmate/service/service.hpp"

namespace {

using namespace trackmate;

constexpr int kExitDecode = 2;
constexpr int kExitAnalysis = 3;
constexpr int kExitBackend = 4;

std::vector<std::uint8_t> read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DecodeError("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

AudioClip decode_path(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  const auto dot = path.find_last_of('.');
  std::string ext = dot == std::string::npos ? "" : path.substr(dot + 1);
  for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return decode_audio(bytes, ext.empty() ? std::nullopt : std::optional<std::string_view>(ext));
}

struct AnalyzeArgs {
  std::string path;
  int depth = 3;
  std::string format = "json";
  std::string output;
  std::string plugin;
};

int run_analyze(const AnalyzeArgs& a) {
  AudioClip clip;
  std::string hash;
  try {
    const auto bytes = read_bytes(a.path);
    hash = service::sha256_hex(bytes);
    clip = decode_path(a.path, bytes);
  } catch (const DecodeError& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitDecode;
  }
  std::unique_ptr<SubprocessPlugin> plugin;
  if (!a.plugin.empty()) plugin = std::make_unique<SubprocessPlugin>(a.plugin);
  AnalyzeOptions options;
  options.source_hash = hash;
  options.plugin = plugin.get();
  MusicReport report;
  try {
    report = build_report(analyze_track(clip, options), a.depth);
  } catch (const AnalysisError& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitAnalysis;
  }
  const std::string text = a.format == "text" ? render_report(report) : report.dump(2) + "\n";
  if (a.output.empty()) {
    std::cout << text;
  } else {
    std::ofstream out(a.output, std::ios::binary);
    if (!out) {
      fmt::print(stderr, "error: cannot write {}\n", a.output);
      return 1;
    }
    out << text;
  }
  return 0;
}

struct CommonArgs {
  std::string config_file;
  std::string mock;
  bool no_tone = false;
};

service::ServiceConfig load_config(const CommonArgs& c) {
  service::ServiceConfig cfg;
  if (!c.config_file.empty()) cfg.apply_file(c.config_file);
  cfg.apply_env();
  if (!c.mock.empty()) cfg.mock_fixture = c.mock;
  if (c.no_tone) cfg.producer_tone = false;
  return cfg;
}

int run_chat(const std::string& path, const CommonArgs& common) {
  auto cfg = load_config(common);
  auto backend = service::make_backend(cfg);
  if (!backend) {
    fmt::print(stderr, "error: no chat backend configured (set TRACKMATE_BACKEND_URL or pass --mock)\n");
    return 1;
  }
  AudioClip clip;
  std::string hash;
  try {
    const auto bytes = read_bytes(path);
    hash = service::sha256_hex(bytes);
    clip = decode_path(path, bytes);
  } catch (const DecodeError& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitDecode;
  }
  std::unique_ptr<SubprocessPlugin> plugin;
  if (!cfg.plugin_cmd.empty()) plugin = std::make_unique<SubprocessPlugin>(cfg.plugin_cmd);
  AnalyzeOptions options;
  options.source_hash = hash;
  options.plugin = plugin.get();
  AnalysisBundle bundle;
  try {
    bundle = analyze_track(clip, options);
  } catch (const AnalysisError& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitAnalysis;
  }

  auto prompt = llm::PromptTemplate::standard();
  prompt.producer_tone = cfg.producer_tone;
  try {
    auto refined = llm::refine_report(bundle, *backend);
    fmt::print("[report depth {}{}]\n", refined.depth, refined.defaulted ? ", evaluator gave no choice" : "");
    auto session = llm::start_session(llm::new_session_id(), std::move(refined.report), prompt);
    const auto graph = llm::ThoughtGraph::from_file(cfg.resolved_graph_path());
    fmt::print("{}\n\n", llm::open_session(session, graph, *backend));
    std::string line;
    while (true) {
      std::cout << "> " << std::flush;
      if (!std::getline(std::cin, line) || line == "/quit" || line == "/exit") break;
      if (line.find_first_not_of(" \t") == std::string::npos) continue;
      try {
        fmt::print("{}\n\n", llm::chat_turn(session, line, *backend));
      } catch (const llm::BackendError& e) {
        fmt::print(stderr, "backend error: {} (message not recorded)\n", e.what());
      }
    }
  } catch (const llm::BackendError& e) {
    fmt::print(stderr, "error: chat backend failed: {}\n", e.what());
    return kExitBackend;
  } catch (const llm::ScoreParseError& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitBackend;
  }
  return 0;
}

service::FeedbackService* g_service = nullptr;

void on_signal(int) {
  if (g_service) g_service->stop();
}

int run_serve(const CommonArgs& common, int port, const std::string& store, const std::string& host,
              const std::string& static_dir) {
  auto cfg = load_config(common);
  if (port >= 0) cfg.port = port;
  if (!store.empty()) cfg.store_dir = store;
  if (!host.empty()) cfg.host = host;
  if (!static_dir.empty()) cfg.static_dir = static_dir;
  auto backend = service::make_backend(cfg);
  service::FeedbackService svc(cfg, std::move(backend));
  const int bound = svc.bind();
  if (bound <= 0) {
    fmt::print(stderr, "error: cannot bind {}:{}\n", cfg.host, cfg.port);
    return 1;
  }
  g_service = &svc;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  fmt::print("listening on http://{}:{} (store {})\n", cfg.host, bound, cfg.store_dir);
  std::fflush(stdout);
  svc.run();
  g_service = nullptr;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Music production feedback: analysis, reports and LLM chat"};
  app.require_subcommand(1);

  AnalyzeArgs analyze;
  auto* a = app.add_subcommand("analyze", "Analyze an audio file and print its report");
  a->add_option("path", analyze.path, "Audio file (WAV)")->required();
  a->add_option("--depth", analyze.depth, "Report depth")->check(CLI::Range(1, 3));
  a->add_option("--format", analyze.format, "json or text")->check(CLI::IsMember({"json", "text"}));
  a->add_option("-o,--output", analyze.output, "Write to a file instead of stdout");
  a->add_option("--plugin", analyze.plugin, "Genre/theme classifier command")->envname("TRACKMATE_PLUGIN_CMD");

  CommonArgs common;
  auto add_common = [&common](CLI::App* sub) {
    sub->add_option("--config", common.config_file, "JSON config file");
    sub->add_option("--mock", common.mock, "Scripted mock backend fixture");
    sub->add_flag("--no-producer-tone", common.no_tone, "Drop the casual producer tone from the prompt");
  };

  std::string chat_path;
  auto* c = app.add_subcommand("chat", "Analyze a file and chat about it in the terminal");
  c->add_option("path", chat_path, "Audio file (WAV)")->required();
  add_common(c);

  int port = -1;
  std::string store, host, static_dir;
  auto* s = app.add_subcommand("serve", "Run the HTTP service");
  s->add_option("--port", port, "Listen port (0 picks a free one)");
  s->add_option("--store-dir", store, "File store directory");
  s->add_option("--host", host, "Listen address");
  s->add_option("--static-dir", static_dir, "Directory served at /");
  add_common(s);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (a->parsed()) return run_analyze(analyze);
    if (c->parsed()) return run_chat(chat_path, common);
    if (s->parsed()) return run_serve(common, port, store, host, static_dir);
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 1;
  }
  return 1;
}
