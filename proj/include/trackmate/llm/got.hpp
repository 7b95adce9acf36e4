#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "trackmate/llm/backend.hpp"

namespace trackmate::llm {

class GraphError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Transformation { kGenerate, kAggregate, kRefine };

std::string_view to_string(Transformation t);
Transformation transformation_from_string(std::string_view text);

struct ThoughtNode {
  std::string id;
  Transformation kind = Transformation::kGenerate;
  int k = 1;  // outputs for generate nodes
  std::string prompt;
  std::string stage;                 // free-form tag such as "T1"
  std::vector<std::size_t> parents;  // indices, declaration order
  std::vector<std::string> results;
  bool executed = false;
};

inline constexpr double kGenerateTemperature = 0.7;
inline constexpr double kAggregateTemperature = 0.2;

class ThoughtGraph {
 public:
  /// Format: {nodes: [{id, transformation, k?, prompt, stage?}], edges: [[from, to], ...]}.
  /// Validates; throws GraphError.
  static ThoughtGraph from_json(const nlohmann::json& doc);
  static ThoughtGraph from_file(const std::string& path);

  std::vector<ThoughtNode>& nodes() { return nodes_; }
  const std::vector<ThoughtNode>& nodes() const { return nodes_; }
  const ThoughtNode& node(std::string_view id) const;
  std::size_t index_of(std::string_view id) const;

  /// Topological levels (Kahn); nodes within a level are independent.
  const std::vector<std::vector<std::size_t>>& levels() const { return levels_; }

  /// Sum of k over generate nodes plus one per other node.
  std::size_t expected_calls() const;

  /// Nodes nobody depends on, declaration order.
  std::vector<std::size_t> sinks() const;

  void clear_results();
  nlohmann::ordered_json results_json() const;

 private:
  void validate();

  std::vector<ThoughtNode> nodes_;
  std::vector<std::vector<std::size_t>> levels_;
};

struct GotOptions {
  bool parallel = true;  // run nodes of one level concurrently
};

/// Prompt sent for one call of a node; `variant` is 1-based, only shown when k > 1.
std::string node_prompt(const ThoughtGraph& graph, std::size_t index, int variant);

/// Executes every node once in level order. On a backend failure the results of
/// finished nodes stay in the graph and the first error is rethrown.
void execute_got(ThoughtGraph& graph, std::string_view context, ChatBackend& backend, GotOptions options = {});

/// Results of the sink nodes joined by blank lines.
std::string final_output(const ThoughtGraph& graph);

}  // namespace trackmate::llm
