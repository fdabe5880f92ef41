// Copyright 2026 The SketchComm Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Human-receiver evaluation service. Sessions are fixed lists of rounds;
// every state change is appended to a JSON-lines event log (fsync'd before
// the HTTP response) and replayed on startup.

#ifndef SKETCHCOMM_SERVICE_HPP_
#define SKETCHCOMM_SERVICE_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <nlohmann/json.hpp>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

namespace httplib {
class Server;
}

namespace sketchcomm {

struct SessionSpec {
  std::string checkpoint;
  std::string setting = "default";  // label used to group stats
  std::string variant;              // empty: the checkpoint's own variant
  std::string split = "test";
  int rounds = 30;
  bool feedback = false;
  uint64_t seed = 1;

  nlohmann::json ToJson() const;
  static SessionSpec FromJson(const nlohmann::json& j);  // throws std::invalid_argument
};

// One round before the display shuffle: candidates in pool order.
struct ProvidedRound {
  std::string sketch_id;
  std::vector<std::string> candidate_ids;
  int target = 0;
  std::vector<int> labels;  // per candidate; may be empty
};

using PngStore = std::map<std::string, std::vector<uint8_t>>;

// Produces rounds and their images. Must be deterministic in the spec.
class RoundProvider {
 public:
  virtual ~RoundProvider() = default;
  virtual std::vector<ProvidedRound> MakeRounds(const SessionSpec& spec, PngStore& images) = 0;
};

// Rounds from a trained checkpoint: its sender draws the sketches and the
// candidates come from the checkpoint's dataset split.
class ModelRoundProvider : public RoundProvider {
 public:
  explicit ModelRoundProvider(std::string default_checkpoint = "");
  ~ModelRoundProvider() override;
  std::vector<ProvidedRound> MakeRounds(const SessionSpec& spec, PngStore& images) override;

 private:
  struct Loaded;
  std::string default_checkpoint_;
  std::mutex mu_;
  std::map<std::string, std::unique_ptr<Loaded>> cache_;
};

struct SessionRound {
  std::string sketch_id;
  std::vector<std::string> candidate_ids;  // display order
  int target = 0;                          // display index
  std::vector<int> labels;                 // display order
};

struct GuessRecord {
  int index = 0;
  int guess = 0;
  double elapsed_ms = 0.0;
  int64_t received_ms = 0;
  bool correct = false;
  bool class_correct = false;
};

struct Session {
  std::string token;
  SessionSpec spec;
  std::vector<SessionRound> rounds;
  std::vector<GuessRecord> guesses;
  PngStore images;
  int64_t created_ms = 0;
  mutable std::mutex mu;

  bool complete() const { return guesses.size() == rounds.size(); }
};

struct ApiResponse {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
};

// Candidate order for round `round` of a session seeded with `seed`.
std::vector<int> DisplayOrder(uint64_t seed, int round, int candidates);

class SessionStore {
 public:
  // Replays `log_path` if it exists. An empty path keeps events in memory.
  SessionStore(std::filesystem::path log_path, std::shared_ptr<RoundProvider> provider);
  ~SessionStore();
  SessionStore(const SessionStore&) = delete;
  SessionStore& operator=(const SessionStore&) = delete;

  std::string CreateSession(const SessionSpec& spec);

  ApiResponse GetRound(const std::string& token, int index) const;
  ApiResponse SubmitGuess(const std::string& token, const nlohmann::json& body);
  ApiResponse GetImage(const std::string& token, const std::string& id) const;
  nlohmann::json Stats() const;

  size_t session_count() const;
  // Copy of a session's guesses; empty if unknown.
  std::vector<GuessRecord> Guesses(const std::string& token) const;
  // Target display index, for tests and audit.
  std::optional<int> TargetOf(const std::string& token, int index) const;

 private:
  std::shared_ptr<Session> Find(const std::string& token) const;
  std::shared_ptr<Session> Build(const std::string& token, const SessionSpec& spec, int64_t created_ms);
  void Append(const nlohmann::json& event);
  void Replay();

  std::filesystem::path log_path_;
  std::shared_ptr<RoundProvider> provider_;
  mutable std::shared_mutex mu_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::mutex log_mu_;
  int log_fd_ = -1;
};

// Constant-time string comparison; false when either side is empty.
bool TokenEquals(const std::string& a, const std::string& b);

// 128 random bits as 32 hex characters.
std::string NewToken();

// Registers the HTTP API on `server`. An empty admin token disables the
// admin endpoints.
void RegisterRoutes(httplib::Server& server, SessionStore& store, const std::string& admin_token);

struct ServiceOptions {
  std::string checkpoint;
  std::string static_dir;
  std::string store_path;  // default: $SKETCHCOMM_STORE_PATH or sketchcomm_events.jsonl
  std::string bind;        // default: $SKETCHCOMM_BIND or 127.0.0.1:8080
};

int RunService(const ServiceOptions& options);

}  // namespace sketchcomm

#endif  // SKETCHCOMM_SERVICE_HPP_
