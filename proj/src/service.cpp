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

#include "sketchcomm/service.hpp"

#include <fcntl.h>
#include <spdlog/spdlog.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <httplib.h>
#include <random>

#include "sketchcomm/game.hpp"
#include "sketchcomm/image.hpp"
#include "sketchcomm/rng.hpp"
#include "sketchcomm/trainer.hpp"

namespace sketchcomm {

namespace {

constexpr uint64_t kDisplayStream = 0x5E55;
constexpr uint64_t kRoundStream = 21;

int64_t NowMs() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch())
      .count();
}

ApiResponse Json(int status, const nlohmann::json& body) { return {status, "application/json", body.dump()}; }
ApiResponse Error(int status, const std::string& message) { return Json(status, {{"error", message}}); }

std::string ImageUrl(const std::string& token, const std::string& id) {
  return "/session/" + token + "/images/" + id + ".png";
}

// Nearest-rank percentile of a sorted, non-empty sample.
double Percentile(const std::vector<double>& sorted, double p) {
  const auto rank = static_cast<size_t>(std::ceil(p / 100.0 * static_cast<double>(sorted.size())));
  return sorted[std::clamp<size_t>(rank, 1, sorted.size()) - 1];
}

struct Tally {
  size_t sessions = 0;
  size_t completed = 0;
  size_t rounds = 0;
  size_t correct = 0;
  size_t class_correct = 0;
  std::vector<double> elapsed;

  void Add(const Session& s) {
    ++sessions;
    completed += s.complete();
    for (const auto& g : s.guesses) {
      ++rounds;
      correct += g.correct;
      class_correct += g.class_correct;
      elapsed.push_back(g.elapsed_ms);
    }
  }

  nlohmann::json ToJson() const {
    nlohmann::json j = {{"sessions", sessions}, {"completed", completed}, {"answered", rounds}};
    auto rate = [&](size_t hits) -> nlohmann::json {
      if (rounds == 0) return nullptr;
      return static_cast<double>(hits) / static_cast<double>(rounds);
    };
    j["comm_rate"] = rate(correct);
    j["class_comm_rate"] = rate(class_correct);
    nlohmann::json timing = {{"mean", nullptr}, {"p50", nullptr}, {"p90", nullptr}};
    if (!elapsed.empty()) {
      std::vector<double> sorted = elapsed;
      std::sort(sorted.begin(), sorted.end());
      double sum = 0.0;
      for (double v : sorted) sum += v;
      timing = {{"mean", sum / static_cast<double>(sorted.size())},
                {"p50", Percentile(sorted, 50)},
                {"p90", Percentile(sorted, 90)}};
    }
    j["elapsed_ms"] = timing;
    return j;
  }
};

}  // namespace

nlohmann::json SessionSpec::ToJson() const {
  return {{"checkpoint", checkpoint}, {"setting", setting}, {"variant", variant}, {"split", split},
          {"rounds", rounds},         {"feedback", feedback}, {"seed", seed}};
}

SessionSpec SessionSpec::FromJson(const nlohmann::json& j) {
  if (!j.is_object()) throw std::invalid_argument("session spec must be a JSON object");
  SessionSpec s;
  try {
    s.checkpoint = j.value("checkpoint", s.checkpoint);
    s.setting = j.value("setting", s.setting);
    s.variant = j.value("variant", s.variant);
    s.split = j.value("split", s.split);
    s.rounds = j.value("rounds", s.rounds);
    s.feedback = j.value("feedback", s.feedback);
    s.seed = j.value("seed", s.seed);
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("session spec: ") + e.what());
  }
  if (s.rounds < 1) throw std::invalid_argument("session spec: rounds must be >= 1");
  if (s.split != "train" && s.split != "test") throw std::invalid_argument("session spec: split is train or test");
  if (!s.variant.empty()) ParseGameVariant(s.variant);
  return s;
}

struct ModelRoundProvider::Loaded {
  LoadedModel model;
  DatasetSplits splits;
};

ModelRoundProvider::ModelRoundProvider(std::string default_checkpoint)
    : default_checkpoint_(std::move(default_checkpoint)) {}

ModelRoundProvider::~ModelRoundProvider() = default;

std::vector<ProvidedRound> ModelRoundProvider::MakeRounds(const SessionSpec& spec, PngStore& images) {
  const std::string path = spec.checkpoint.empty() ? default_checkpoint_ : spec.checkpoint;
  if (path.empty()) throw std::invalid_argument("session spec: no checkpoint given and no default configured");
  std::lock_guard lock(mu_);
  auto& slot = cache_[path];
  if (!slot) {
    auto loaded = std::make_unique<Loaded>();
    loaded->model = LoadModel(path);
    loaded->splits = LoadData(loaded->model.config.data);
    slot = std::move(loaded);
  }
  const AgentPair& agents = *slot->model.agents;
  const Dataset& data = spec.split == "train" ? slot->splits.train : slot->splits.test;
  GameConfig game = slot->model.config.game;
  if (!spec.variant.empty()) game.variant = ParseGameVariant(spec.variant);
  GameSampler sampler(data, game);
  Rng rng(spec.seed, kRoundStream);
  const RasterConfig& raster = agents.raster_config();

  NoGradGuard no_grad;
  std::vector<ProvidedRound> rounds;
  for (int r = 0; r < spec.rounds; ++r) {
    GameRound round = sampler.SampleRound(rng);
    ProvidedRound out;
    out.sketch_id = "sketch-" + std::to_string(r);
    const int idx = round.sender_target;
    SenderOutput sent = agents.SenderForward(NormalizedBatch(data, std::span<const int>(&idx, 1), agents.stats()));
    SketchRaster sketch{raster.width, raster.height, {sent.sketches.data().begin(), sent.sketches.data().end()}};
    images[out.sketch_id] = EncodePng(Image{raster.width, raster.height, 1, SketchToGrey8(sketch)});
    for (int p : round.pool) {
      const std::string id = "photo-" + std::to_string(p);
      out.candidate_ids.push_back(id);
      if (!images.count(id)) images[id] = EncodePng(data.image(static_cast<size_t>(p)));
    }
    out.target = round.target;
    out.labels = round.labels;
    rounds.push_back(std::move(out));
  }
  return rounds;
}

std::vector<int> DisplayOrder(uint64_t seed, int round, int candidates) {
  Rng rng(seed, kDisplayStream + static_cast<uint64_t>(round));
  return rng.Permutation(candidates);
}

bool TokenEquals(const std::string& a, const std::string& b) {
  if (a.empty() || b.empty()) return false;
  const size_t n = std::max(a.size(), b.size());
  unsigned diff = static_cast<unsigned>(a.size() ^ b.size());
  for (size_t i = 0; i < n; ++i) {
    const unsigned char x = i < a.size() ? static_cast<unsigned char>(a[i]) : 0;
    const unsigned char y = i < b.size() ? static_cast<unsigned char>(b[i]) : 0;
    diff |= static_cast<unsigned>(x ^ y);
  }
  return diff == 0;
}

std::string NewToken() {
  std::random_device rd;
  static const char* kHex = "0123456789abcdef";
  std::string token;
  for (int word = 0; word < 4; ++word) {
    uint32_t v = rd();
    for (int k = 0; k < 8; ++k) {
      token.push_back(kHex[v & 0xF]);
      v >>= 4;
    }
  }
  return token;
}

SessionStore::SessionStore(std::filesystem::path log_path, std::shared_ptr<RoundProvider> provider)
    : log_path_(std::move(log_path)), provider_(std::move(provider)) {
  if (log_path_.empty()) return;
  Replay();
  if (log_path_.has_parent_path()) std::filesystem::create_directories(log_path_.parent_path());
  log_fd_ = ::open(log_path_.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
  if (log_fd_ < 0) {
    throw std::runtime_error("service: cannot open event log " + log_path_.string() + ": " + std::strerror(errno));
  }
}

SessionStore::~SessionStore() {
  if (log_fd_ >= 0) ::close(log_fd_);
}

void SessionStore::Replay() {
  std::ifstream in(log_path_);
  if (!in) return;
  std::string line;
  size_t line_no = 0;
  size_t sessions = 0, guesses = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json ev;
    try {
      ev = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception&) {
      if (in.peek() == EOF) {
        spdlog::warn("event log: ignoring torn final line {}", line_no);
        break;
      }
      throw std::runtime_error("event log: corrupt line " + std::to_string(line_no));
    }
    const std::string type = ev.value("type", "");
    const std::string token = ev.value("token", "");
    if (type == "session") {
      sessions_[token] = Build(token, SessionSpec::FromJson(ev.at("spec")), ev.value("created_ms", int64_t{0}));
      ++sessions;
    } else if (type == "guess") {
      auto it = sessions_.find(token);
      if (it == sessions_.end()) throw std::runtime_error("event log: guess for unknown session at line " +
                                                          std::to_string(line_no));
      GuessRecord g;
      g.index = ev.at("index").get<int>();
      g.guess = ev.at("guess").get<int>();
      g.elapsed_ms = ev.at("elapsed_ms").get<double>();
      g.received_ms = ev.value("received_ms", int64_t{0});
      g.correct = ev.at("correct").get<bool>();
      g.class_correct = ev.at("class_correct").get<bool>();
      if (g.index != static_cast<int>(it->second->guesses.size())) {
        throw std::runtime_error("event log: out-of-order guess at line " + std::to_string(line_no));
      }
      it->second->guesses.push_back(g);
      ++guesses;
    } else {
      throw std::runtime_error("event log: unknown event at line " + std::to_string(line_no));
    }
  }
  if (line_no) spdlog::info("event log: replayed {} sessions and {} guesses", sessions, guesses);
}

std::shared_ptr<Session> SessionStore::Build(const std::string& token, const SessionSpec& spec,
                                             int64_t created_ms) {
  auto session = std::make_shared<Session>();
  session->token = token;
  session->spec = spec;
  session->created_ms = created_ms;
  std::vector<ProvidedRound> provided = provider_->MakeRounds(spec, session->images);
  if (static_cast<int>(provided.size()) != spec.rounds) {
    throw std::runtime_error("service: provider returned " + std::to_string(provided.size()) + " rounds, expected " +
                             std::to_string(spec.rounds));
  }
  for (size_t r = 0; r < provided.size(); ++r) {
    const ProvidedRound& p = provided[r];
    const int n = static_cast<int>(p.candidate_ids.size());
    if (p.target < 0 || p.target >= n) throw std::runtime_error("service: provider target out of range");
    SessionRound round;
    round.sketch_id = p.sketch_id;
    for (int slot : DisplayOrder(spec.seed, static_cast<int>(r), n)) {
      if (slot == p.target) round.target = static_cast<int>(round.candidate_ids.size());
      round.candidate_ids.push_back(p.candidate_ids[static_cast<size_t>(slot)]);
      if (!p.labels.empty()) round.labels.push_back(p.labels[static_cast<size_t>(slot)]);
    }
    session->rounds.push_back(std::move(round));
  }
  return session;
}

void SessionStore::Append(const nlohmann::json& event) {
  if (log_fd_ < 0) return;
  const std::string line = event.dump() + "\n";
  std::lock_guard lock(log_mu_);
  size_t written = 0;
  while (written < line.size()) {
    const ssize_t n = ::write(log_fd_, line.data() + written, line.size() - written);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw std::runtime_error(std::string("event log: write failed: ") + std::strerror(errno));
    }
    written += static_cast<size_t>(n);
  }
  if (::fsync(log_fd_) != 0) throw std::runtime_error(std::string("event log: fsync failed: ") + std::strerror(errno));
}

std::string SessionStore::CreateSession(const SessionSpec& spec) {
  if (spec.rounds < 1) throw std::invalid_argument("session spec: rounds must be >= 1");
  const std::string token = NewToken();
  const int64_t created = NowMs();
  auto session = Build(token, spec, created);
  Append({{"type", "session"}, {"token", token}, {"spec", spec.ToJson()}, {"created_ms", created}});
  std::unique_lock lock(mu_);
  sessions_[token] = std::move(session);
  return token;
}

std::shared_ptr<Session> SessionStore::Find(const std::string& token) const {
  std::shared_lock lock(mu_);
  auto it = sessions_.find(token);
  return it == sessions_.end() ? nullptr : it->second;
}

ApiResponse SessionStore::GetRound(const std::string& token, int index) const {
  auto session = Find(token);
  if (!session) return Error(404, "unknown session");
  std::lock_guard lock(session->mu);
  const int next = static_cast<int>(session->guesses.size());
  if (session->complete()) return Error(409, "session complete");
  if (index != next) return Error(409, "round " + std::to_string(next) + " is the next unanswered round");
  const SessionRound& round = session->rounds[static_cast<size_t>(index)];
  nlohmann::json candidates = nlohmann::json::array();
  for (const auto& id : round.candidate_ids) candidates.push_back(ImageUrl(token, id));
  return Json(200, {{"sketch_url", ImageUrl(token, round.sketch_id)},
                    {"candidates", candidates},
                    {"index", index},
                    {"total", session->rounds.size()},
                    {"feedback_mode", session->spec.feedback}});
}

ApiResponse SessionStore::SubmitGuess(const std::string& token, const nlohmann::json& body) {
  auto session = Find(token);
  if (!session) return Error(404, "unknown session");
  if (!body.is_object() || !body.contains("index") || !body.contains("guess") || !body.contains("elapsed_ms") ||
      !body["index"].is_number_integer() || !body["guess"].is_number_integer() || !body["elapsed_ms"].is_number()) {
    return Error(400, "expected {index, guess, elapsed_ms}");
  }
  const int index = body["index"].get<int>();
  const int guess = body["guess"].get<int>();
  const double elapsed = body["elapsed_ms"].get<double>();
  if (!std::isfinite(elapsed) || elapsed < 0) return Error(400, "elapsed_ms must be a non-negative number");

  std::lock_guard lock(session->mu);
  const int next = static_cast<int>(session->guesses.size());
  if (index < next) return Error(409, "round already answered");
  if (index != next || session->complete()) return Error(409, "round " + std::to_string(index) + " is not open");
  const SessionRound& round = session->rounds[static_cast<size_t>(index)];
  if (guess < 0 || guess >= static_cast<int>(round.candidate_ids.size())) return Error(400, "guess out of range");

  GuessRecord g;
  g.index = index;
  g.guess = guess;
  g.elapsed_ms = elapsed;
  g.received_ms = NowMs();
  g.correct = guess == round.target;
  g.class_correct = round.labels.empty() ? g.correct
                                         : round.labels[static_cast<size_t>(guess)] ==
                                               round.labels[static_cast<size_t>(round.target)];
  Append({{"type", "guess"},
          {"token", token},
          {"index", g.index},
          {"guess", g.guess},
          {"elapsed_ms", g.elapsed_ms},
          {"received_ms", g.received_ms},
          {"correct", g.correct},
          {"class_correct", g.class_correct}});
  session->guesses.push_back(g);
  nlohmann::json feedback = nullptr;
  if (session->spec.feedback) feedback = {{"correct", g.correct}, {"target", round.target}};
  return Json(200, {{"accepted", true}, {"feedback", feedback}});
}

ApiResponse SessionStore::GetImage(const std::string& token, const std::string& id) const {
  auto session = Find(token);
  if (!session) return Error(404, "unknown session");
  auto it = session->images.find(id);
  if (it == session->images.end()) return Error(404, "unknown image");
  return {200, "image/png", std::string(it->second.begin(), it->second.end())};
}

nlohmann::json SessionStore::Stats() const {
  std::vector<std::shared_ptr<Session>> sessions;
  {
    std::shared_lock lock(mu_);
    for (const auto& [_, s] : sessions_) sessions.push_back(s);
  }
  std::map<std::pair<std::string, bool>, Tally> by_setting;
  nlohmann::json per_session = nlohmann::json::array();
  for (const auto& s : sessions) {
    std::lock_guard lock(s->mu);
    Tally t;
    t.Add(*s);
    by_setting[{s->spec.setting, s->spec.feedback}].Add(*s);
    nlohmann::json j = t.ToJson();
    j.erase("sessions");
    j.erase("completed");
    j["token"] = s->token;
    j["setting"] = s->spec.setting;
    j["feedback"] = s->spec.feedback;
    j["rounds"] = s->rounds.size();
    j["complete"] = s->complete();
    per_session.push_back(j);
  }
  nlohmann::json per_setting = nlohmann::json::array();
  for (const auto& [key, t] : by_setting) {
    nlohmann::json j = t.ToJson();
    j["setting"] = key.first;
    j["feedback"] = key.second;
    per_setting.push_back(j);
  }
  return {{"session_count", sessions.size()}, {"sessions", per_session}, {"settings", per_setting}};
}

size_t SessionStore::session_count() const {
  std::shared_lock lock(mu_);
  return sessions_.size();
}

std::vector<GuessRecord> SessionStore::Guesses(const std::string& token) const {
  auto s = Find(token);
  if (!s) return {};
  std::lock_guard lock(s->mu);
  return s->guesses;
}

std::optional<int> SessionStore::TargetOf(const std::string& token, int index) const {
  auto s = Find(token);
  if (!s || index < 0 || index >= static_cast<int>(s->rounds.size())) return std::nullopt;
  return s->rounds[static_cast<size_t>(index)].target;
}

void RegisterRoutes(httplib::Server& server, SessionStore& store, const std::string& admin_token) {
  auto send = [](httplib::Response& res, const ApiResponse& r) {
    res.status = r.status;
    res.set_content(r.body, r.content_type);
  };
  auto authorized = [admin_token](const httplib::Request& req) {
    std::string presented = req.get_header_value("X-Admin-Token");
    const std::string auth = req.get_header_value("Authorization");
    if (presented.empty() && auth.rfind("Bearer ", 0) == 0) presented = auth.substr(7);
    return TokenEquals(presented, admin_token);
  };

  server.Post("/admin/sessions", [&store, send, authorized](const httplib::Request& req, httplib::Response& res) {
    if (!authorized(req)) return send(res, Error(401, "unauthorized"));
    SessionSpec spec;
    try {
      spec = SessionSpec::FromJson(req.body.empty() ? nlohmann::json::object() : nlohmann::json::parse(req.body));
    } catch (const std::exception& e) {
      return send(res, Error(400, e.what()));
    }
    try {
      send(res, Json(200, {{"token", store.CreateSession(spec)}}));
    } catch (const std::exception& e) {
      spdlog::warn("create session failed: {}", e.what());
      send(res, Error(400, e.what()));
    }
  });

  server.Get(R"(/session/([0-9A-Za-z]+)/round/(\d+))", [&store, send](const httplib::Request& req,
                                                                     httplib::Response& res) {
    int index = 0;
    try {
      index = std::stoi(req.matches[2].str());
    } catch (const std::exception&) {
      return send(res, Error(400, "bad round index"));
    }
    send(res, store.GetRound(req.matches[1].str(), index));
  });

  server.Post(R"(/session/([0-9A-Za-z]+)/guess)", [&store, send](const httplib::Request& req,
                                                                httplib::Response& res) {
    nlohmann::json body;
    try {
      body = nlohmann::json::parse(req.body);
    } catch (const nlohmann::json::exception&) {
      return send(res, Error(400, "body is not JSON"));
    }
    try {
      send(res, store.SubmitGuess(req.matches[1].str(), body));
    } catch (const std::exception& e) {
      spdlog::error("guess failed: {}", e.what());
      send(res, Error(500, "could not record guess"));
    }
  });

  server.Get(R"(/session/([0-9A-Za-z]+)/images/([A-Za-z0-9_-]+)\.png)",
             [&store, send](const httplib::Request& req, httplib::Response& res) {
               send(res, store.GetImage(req.matches[1].str(), req.matches[2].str()));
             });

  server.Get("/admin/stats", [&store, send, authorized](const httplib::Request& req, httplib::Response& res) {
    if (!authorized(req)) return send(res, Error(401, "unauthorized"));
    send(res, Json(200, store.Stats()));
  });
}

int RunService(const ServiceOptions& options) {
  auto env = [](const char* name) {
    const char* v = std::getenv(name);
    return v ? std::string(v) : std::string();
  };
  std::string store_path = options.store_path.empty() ? env("SKETCHCOMM_STORE_PATH") : options.store_path;
  if (store_path.empty()) store_path = "sketchcomm_events.jsonl";
  std::string bind = options.bind.empty() ? env("SKETCHCOMM_BIND") : options.bind;
  if (bind.empty()) bind = "127.0.0.1:8080";
  const auto colon = bind.rfind(':');
  if (colon == std::string::npos) throw std::invalid_argument("bind address must be host:port, got '" + bind + "'");
  const std::string host = bind.substr(0, colon);
  const int port = std::stoi(bind.substr(colon + 1));
  const std::string admin = env("SKETCHCOMM_ADMIN_TOKEN");
  if (admin.empty()) spdlog::warn("SKETCHCOMM_ADMIN_TOKEN is unset; admin endpoints will refuse every request");

  SessionStore store(store_path, std::make_shared<ModelRoundProvider>(options.checkpoint));
  httplib::Server server;
  RegisterRoutes(server, store, admin);
  if (!options.static_dir.empty() && !server.set_mount_point("/", options.static_dir)) {
    throw std::invalid_argument("static dir " + options.static_dir + " does not exist");
  }
  spdlog::info("serving on {}:{} with event log {}", host, port, store_path);
  if (!server.listen(host, port)) {
    spdlog::error("cannot listen on {}", bind);
    return 1;
  }
  return 0;
}

}  // namespace sketchcomm
