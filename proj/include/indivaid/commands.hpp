#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace indivaid {

// Exit statuses shared by every command.
inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitInput = 2;

struct PrepareOptions {
  std::filesystem::path root;
  std::filesystem::path out;
};

struct TrainOptions {
  int stage = 1;
  std::filesystem::path config;
  std::filesystem::path root;
  std::filesystem::path out;
  // Stage-One checkpoint to start Stage Two from.
  std::filesystem::path init;
  // Checkpoint of the same stage to continue.
  std::filesystem::path resume;
  std::optional<std::uint64_t> seed;
  // Individual TrainConfig fields given on the command line.
  nlohmann::json overrides = nlohmann::json::object();
  std::string command_line;
};

struct EvalOptions {
  std::vector<std::filesystem::path> checkpoints;
  std::filesystem::path config;  // zero-shot evaluation when no checkpoint
  std::filesystem::path root;
  std::filesystem::path out;
  std::filesystem::path per_query_csv;
  int runs = 1;
  std::optional<std::uint64_t> seed;
  std::string command_line;
};

struct EmbedOptions {
  std::filesystem::path checkpoint;
  std::filesystem::path config;
  std::vector<std::filesystem::path> images;
  std::filesystem::path image_list;  // one path per line
  std::filesystem::path out;
  std::optional<std::uint64_t> seed;
  std::string command_line;
};

struct RankOptions {
  std::filesystem::path query;
  std::filesystem::path gallery;
  int top = 10;
  std::filesystem::path out;
  std::string command_line;
};

// Each returns the path of its main artifact; failures throw InputError
// (exit 2) or RuntimeFailure (exit 1).
std::filesystem::path cmd_prepare(const PrepareOptions& options);
std::filesystem::path cmd_train(const TrainOptions& options);
std::filesystem::path cmd_eval(const EvalOptions& options);
std::filesystem::path cmd_embed(const EmbedOptions& options);
std::filesystem::path cmd_rank(const RankOptions& options);

// Runs `fn`, mapping exceptions to an exit status and a one-line JSON
// error record on stderr.
int run_guarded(const std::function<void()>& fn);

}  // namespace indivaid
