#include "trackmate/llm/got.hpp"

#include <algorithm>
#include <exception>
#include <fstream>
#include <future>
#include <map>
#include <set>

namespace trackmate::llm {

std::string_view to_string(Transformation t) {
  switch (t) {
    case Transformation::kGenerate: return "generate";
    case Transformation::kAggregate: return "aggregate";
    case Transformation::kRefine: return "refine";
  }
  return "generate";
}

Transformation transformation_from_string(std::string_view text) {
  if (text == "generate") return Transformation::kGenerate;
  if (text == "aggregate") return Transformation::kAggregate;
  if (text == "refine") return Transformation::kRefine;
  throw GraphError("unknown transformation: " + std::string(text));
}

ThoughtGraph ThoughtGraph::from_json(const nlohmann::json& doc) {
  ThoughtGraph g;
  try {
    std::map<std::string, std::size_t, std::less<>> ids;
    for (const auto& n : doc.at("nodes")) {
      ThoughtNode node;
      node.id = n.at("id").get<std::string>();
      node.kind = transformation_from_string(n.at("transformation").get<std::string>());
      node.k = n.value("k", 1);
      node.prompt = n.at("prompt").get<std::string>();
      node.stage = n.value("stage", "");
      if (node.id.empty()) throw GraphError("node id must not be empty");
      if (!ids.emplace(node.id, g.nodes_.size()).second) throw GraphError("duplicate node id " + node.id);
      g.nodes_.push_back(std::move(node));
    }
    std::set<std::pair<std::size_t, std::size_t>> seen;
    for (const auto& e : doc.value("edges", nlohmann::json::array())) {
      if (!e.is_array() || e.size() != 2) throw GraphError("edge must be a [from, to] pair");
      const auto from = ids.find(e[0].get<std::string>());
      const auto to = ids.find(e[1].get<std::string>());
      if (from == ids.end() || to == ids.end()) throw GraphError("edge references unknown node: " + e.dump());
      if (!seen.emplace(from->second, to->second).second) throw GraphError("duplicate edge " + e.dump());
      g.nodes_[to->second].parents.push_back(from->second);
    }
  } catch (const nlohmann::json::exception& e) {
    throw GraphError(std::string("malformed graph document: ") + e.what());
  }
  for (auto& n : g.nodes_) std::sort(n.parents.begin(), n.parents.end());
  g.validate();
  return g;
}

ThoughtGraph ThoughtGraph::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw GraphError("cannot open graph file " + path);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw GraphError(std::string("graph file is not valid JSON: ") + e.what());
  }
  return from_json(doc);
}

void ThoughtGraph::validate() {
  for (const auto& n : nodes_) {
    switch (n.kind) {
      case Transformation::kGenerate:
        if (n.k < 1) throw GraphError("generate node " + n.id + " needs k >= 1");
        break;
      case Transformation::kAggregate:
        if (n.parents.size() < 2) throw GraphError("aggregate node " + n.id + " needs at least 2 parents");
        break;
      case Transformation::kRefine:
        if (n.parents.size() != 1) throw GraphError("refine node " + n.id + " needs exactly 1 parent");
        break;
    }
  }
  const std::size_t n = nodes_.size();
  std::vector<std::size_t> indegree(n);
  std::vector<std::vector<std::size_t>> children(n);
  for (std::size_t i = 0; i < n; ++i) {
    indegree[i] = nodes_[i].parents.size();
    for (auto p : nodes_[i].parents) children[p].push_back(i);
  }
  levels_.clear();
  std::vector<std::size_t> frontier;
  for (std::size_t i = 0; i < n; ++i)
    if (indegree[i] == 0) frontier.push_back(i);
  std::size_t placed = 0;
  while (!frontier.empty()) {
    placed += frontier.size();
    std::vector<std::size_t> next;
    for (auto i : frontier)
      for (auto c : children[i])
        if (--indegree[c] == 0) next.push_back(c);
    std::sort(next.begin(), next.end());
    levels_.push_back(std::move(frontier));
    frontier = std::move(next);
  }
  if (placed != n) throw GraphError("graph contains a cycle");
}

const ThoughtNode& ThoughtGraph::node(std::string_view id) const { return nodes_[index_of(id)]; }

std::size_t ThoughtGraph::index_of(std::string_view id) const {
  for (std::size_t i = 0; i < nodes_.size(); ++i)
    if (nodes_[i].id == id) return i;
  throw GraphError("unknown node " + std::string(id));
}

std::size_t ThoughtGraph::expected_calls() const {
  std::size_t total = 0;
  for (const auto& n : nodes_) total += n.kind == Transformation::kGenerate ? static_cast<std::size_t>(n.k) : 1;
  return total;
}

std::vector<std::size_t> ThoughtGraph::sinks() const {
  std::vector<bool> has_child(nodes_.size(), false);
  for (const auto& n : nodes_)
    for (auto p : n.parents) has_child[p] = true;
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < nodes_.size(); ++i)
    if (!has_child[i]) out.push_back(i);
  return out;
}

void ThoughtGraph::clear_results() {
  for (auto& n : nodes_) {
    n.results.clear();
    n.executed = false;
  }
}

nlohmann::ordered_json ThoughtGraph::results_json() const {
  nlohmann::ordered_json out = nlohmann::ordered_json::object();
  for (const auto& n : nodes_)
    if (n.executed) out[n.id] = n.results;
  return out;
}

std::string node_prompt(const ThoughtGraph& graph, std::size_t index, int variant) {
  const auto& node = graph.nodes()[index];
  std::string out = "[node " + node.id + "] ";
  out += node.prompt;
  for (auto p : node.parents) {
    const auto& parent = graph.nodes()[p];
    if (!parent.executed) throw GraphError("parent " + parent.id + " of " + node.id + " has no results yet");
    for (std::size_t r = 0; r < parent.results.size(); ++r) {
      out += "\n\n## Input from " + parent.id;
      if (parent.results.size() > 1) out += " (" + std::to_string(r + 1) + "/" + std::to_string(parent.results.size()) + ")";
      out += "\n";
      out += parent.results[r];
    }
  }
  if (node.kind == Transformation::kGenerate && node.k > 1) {
    out += "\n\nVariant " + std::to_string(variant) + " of " + std::to_string(node.k) +
           ": take an angle that differs from the other variants.";
  }
  return out;
}

namespace {

std::vector<std::string> run_node(const ThoughtGraph& graph, std::size_t index, std::string_view context,
                                  ChatBackend& backend) {
  const auto& node = graph.nodes()[index];
  const int calls = node.kind == Transformation::kGenerate ? node.k : 1;
  const double temperature = node.kind == Transformation::kGenerate ? kGenerateTemperature : kAggregateTemperature;
  std::vector<std::string> results;
  for (int v = 1; v <= calls; ++v) {
    const std::vector<Message> messages = {{Role::kSystem, std::string(context)},
                                           {Role::kUser, node_prompt(graph, index, v)}};
    results.push_back(backend.send(messages, temperature));
  }
  return results;
}

}  // namespace

void execute_got(ThoughtGraph& graph, std::string_view context, ChatBackend& backend, GotOptions options) {
  graph.clear_results();
  for (const auto& level : graph.levels()) {
    std::exception_ptr first_error;
    if (options.parallel && level.size() > 1) {
      std::vector<std::future<std::vector<std::string>>> jobs;
      jobs.reserve(level.size());
      for (auto i : level) {
        jobs.push_back(std::async(std::launch::async, [&graph, i, context, &backend] {
          return run_node(graph, i, context, backend);
        }));
      }
      for (std::size_t j = 0; j < level.size(); ++j) {
        try {
          auto& node = graph.nodes()[level[j]];
          node.results = jobs[j].get();
          node.executed = true;
        } catch (...) {
          if (!first_error) first_error = std::current_exception();
        }
      }
    } else {
      for (auto i : level) {
        try {
          auto& node = graph.nodes()[i];
          node.results = run_node(graph, i, context, backend);
          node.executed = true;
        } catch (...) {
          first_error = std::current_exception();
          break;
        }
      }
    }
    if (first_error) std::rethrow_exception(first_error);
  }
}

std::string final_output(const ThoughtGraph& graph) {
  std::string out;
  for (auto i : graph.sinks()) {
    for (const auto& r : graph.nodes()[i].results) {
      if (!out.empty()) out += "\n\n";
      out += r;
    }
  }
  return out;
}

}  // namespace trackmate::llm
