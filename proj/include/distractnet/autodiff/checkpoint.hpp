#pragma once

// Parameter checkpoints: `<stem>.json` (node list, parameter shapes, seed,
// precision) and `<stem>.bin` (float32 little-endian values in declaration
// order, batch-norm running statistics included).

#include <filesystem>
#include <json.hpp>
#include <string>
#include <type_traits>
#include <vector>

#include "distractnet/autodiff/graph.hpp"
#include "distractnet/sigcore/io.hpp"

namespace distractnet::ad {

template <typename T>
constexpr const char* precision_name() {
  return std::is_same_v<T, double> ? "f64" : "f32";
}

template <typename T>
nlohmann::json checkpoint_header(Graph<T>& graph) {
  auto params = nlohmann::json::array();
  std::size_t offset = 0;
  for (std::size_t i = 1; i < graph.size(); ++i) {
    for (auto* p : graph.node(i).op->params()) {
      params.push_back({{"node", graph.node(i).name},
                        {"name", p->name},
                        {"shape", p->value.shape},
                        {"trainable", p->trainable},
                        {"offset", offset}});
      offset += p->value.size();
    }
  }
  return {{"nodes", graph.describe()},
          {"params", params},
          {"input_shape", graph.input_shape()},
          {"seed", graph.seed()},
          {"mode", precision_name<T>()},
          {"dtype", "f32le"},
          {"count", offset}};
}

template <typename T>
void save_checkpoint(const std::filesystem::path& stem, Graph<T>& graph) {
  auto header = checkpoint_header(graph);
  header["payload"] = io::payload_path(stem).filename().string();
  std::vector<double> flat;
  for (auto* p : graph.parameters()) flat.insert(flat.end(), p->value.values.begin(), p->value.values.end());
  io::write_json(io::header_path(stem), header);
  io::write_f32(io::payload_path(stem), flat.data(), flat.size());
}

/// Loads values into a graph of identical structure.
template <typename T>
void load_checkpoint(const std::filesystem::path& stem, Graph<T>& graph) {
  const auto header = io::read_json(io::header_path(stem));
  const auto expect = checkpoint_header(graph);
  if (header.at("params") != expect.at("params"))
    throw InputError("checkpoint '" + stem.string() + "' does not match the graph structure");
  const auto count = header.at("count").get<std::size_t>();
  const auto flat = io::read_f32(stem.parent_path() / header.at("payload").get<std::string>(), count);
  std::size_t off = 0;
  for (auto* p : graph.parameters())
    for (auto& v : p->value.values) v = static_cast<T>(flat[off++]);
}

}  // namespace distractnet::ad
