#include "alterforge/gateway.hpp"

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdio>
#include <map>
#include <mutex>
#include <shared_mutex>
#include <thread>

#include <httplib.h>

#include "alterforge/conversation_analytics.hpp"
#include "alterforge/eval_stats.hpp"

namespace alterforge {

int http_status_for(Errc code) noexcept {
  switch (code) {
    case Errc::unknown_record:
      return 404;
    case Errc::invalid_state:
    case Errc::conflict:
      return 409;
    case Errc::compile_failed:
      return 422;
    case Errc::transport:
    case Errc::missing_fixture:
    case Errc::empty_completion:
    case Errc::too_many_lines:
      return 502;
    case Errc::storage_io:
      return 500;
    default:
      return 400;
  }
}

nlohmann::json record_view(const MotionRecord& record) {
  auto doc = record_to_json(record);
  doc.erase("embedding");
  doc.erase("label_embedding");
  doc["script"] = script_to_json(record.script);
  doc["duration_ms"] = total_duration_ms(record.script);
  return doc;
}

namespace {

enum class SessionKind { motion_playback, conversation };
enum class SessionState { idle, running, finished };

std::string_view to_string(SessionKind k) { return k == SessionKind::motion_playback ? "motion_playback" : "conversation"; }
std::string_view to_string(SessionState s) {
  switch (s) {
    case SessionState::idle:
      return "idle";
    case SessionState::running:
      return "running";
    case SessionState::finished:
      return "finished";
  }
  return "idle";
}

// Event log of one session. Readers replay from the start and then follow.
class EventLog {
 public:
  void push(const nlohmann::json& event) {
    {
      std::lock_guard lock(mutex_);
      if (closed_) return;
      lines_.push_back(event.dump() + "\n");
    }
    cv_.notify_all();
  }
  void close(const nlohmann::json& final_event) {
    {
      std::lock_guard lock(mutex_);
      if (closed_) return;
      lines_.push_back(final_event.dump() + "\n");
      closed_ = true;
    }
    cv_.notify_all();
  }
  // Waits briefly for lines past `cursor`. Returns false once closed and drained.
  bool next(std::size_t& cursor, std::vector<std::string>& out, std::chrono::milliseconds wait) {
    std::unique_lock lock(mutex_);
    cv_.wait_for(lock, wait, [&] { return cursor < lines_.size() || closed_; });
    while (cursor < lines_.size()) out.push_back(lines_[cursor++]);
    return !(closed_ && cursor >= lines_.size());
  }
  std::size_t size() const {
    std::lock_guard lock(mutex_);
    return lines_.size();
  }

 private:
  mutable std::mutex mutex_;
  std::condition_variable cv_;
  std::vector<std::string> lines_;
  bool closed_ = false;
};

struct Session {
  std::string id;
  SessionKind kind;
  std::atomic<SessionState> state{SessionState::idle};
  EventLog events;
  std::string motion_id;

  // Conversation sessions only; guarded by op_mutex.
  std::mutex op_mutex;
  std::unique_ptr<AgentSociety> society;
  std::atomic<bool> stop_requested{false};

  std::jthread worker;

  // idle -> running -> finished, never backwards.
  bool transition(SessionState from, SessionState to) { return state.compare_exchange_strong(from, to); }

  nlohmann::json view() const {
    nlohmann::json doc = {{"id", id}, {"kind", to_string(kind)}, {"state", to_string(state.load())}};
    if (!motion_id.empty()) doc["motion_id"] = motion_id;
    doc["stream"] = "/v1/stream/" + id;
    return doc;
  }
};

struct HttpError {
  int status;
  std::string message;
};

nlohmann::json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return nlohmann::json::object();
  try {
    auto doc = nlohmann::json::parse(req.body);
    if (!doc.is_object()) throw HttpError{400, "request body must be a JSON object"};
    return doc;
  } catch (const nlohmann::json::exception& e) {
    throw HttpError{400, std::string("malformed JSON: ") + e.what()};
  }
}

std::string require_string(const nlohmann::json& body, const char* field) {
  if (!body.contains(field) || !body[field].is_string() || body[field].get<std::string>().empty()) {
    throw HttpError{400, std::string("field '") + field + "' must be a non-empty string"};
  }
  return body[field].get<std::string>();
}

void send_json(httplib::Response& res, int status, const nlohmann::json& doc) {
  res.status = status;
  res.set_content(doc.dump(), "application/json");
}

nlohmann::json parse_error_json(const ParseError& e) {
  return {{"line", e.line}, {"column", e.column}, {"kind", to_string(e.kind)}, {"message", e.message}};
}

}  // namespace

struct Gateway::Impl {
  GatewayDeps deps;
  GatewayOptions options;
  httplib::Server server;
  std::thread server_thread;

  std::shared_mutex sessions_mutex;
  std::map<std::string, std::shared_ptr<Session>> sessions;
  std::uint64_t next_session = 1;

  Impl(GatewayDeps d, GatewayOptions o) : deps(std::move(d)), options(std::move(o)) {
    if (!deps.client || !deps.embedder || !deps.store) {
      throw Error(Errc::invalid_argument, "gateway needs a client, an embedder and a store");
    }
    options.engine.validate();
    routes();
  }

  ~Impl() {
    server.stop();
    if (server_thread.joinable()) server_thread.join();
    std::unique_lock lock(sessions_mutex);
    for (auto& [id, s] : sessions) {
      s->stop_requested = true;
      s->worker.request_stop();
    }
    for (auto& [id, s] : sessions) {
      if (s->worker.joinable()) s->worker.join();
    }
  }

  std::shared_ptr<Session> new_session(SessionKind kind) {
    auto s = std::make_shared<Session>();
    s->kind = kind;
    std::unique_lock lock(sessions_mutex);
    char buf[32];
    std::snprintf(buf, sizeof buf, "s-%06llu", static_cast<unsigned long long>(next_session++));
    s->id = buf;
    sessions.emplace(s->id, s);
    return s;
  }

  std::shared_ptr<Session> find_session(const std::string& id) {
    std::shared_lock lock(sessions_mutex);
    auto it = sessions.find(id);
    if (it == sessions.end()) throw HttpError{404, "no session with id '" + id + "'"};
    return it->second;
  }

  template <class F>
  httplib::Server::Handler guarded(F&& f) {
    return [f = std::forward<F>(f)](const httplib::Request& req, httplib::Response& res) {
      try {
        f(req, res);
      } catch (const HttpError& e) {
        send_json(res, e.status, {{"error", e.message}});
      } catch (const CompileFailed& e) {
        nlohmann::json errors = nlohmann::json::array();
        for (const auto& pe : e.parse_errors()) errors.push_back(parse_error_json(pe));
        nlohmann::json issues = nlohmann::json::array();
        for (const auto& attempt : e.attempts()) {
          for (const auto& issue : attempt.issues) issues.push_back({{"kind", to_string(issue.kind)}, {"message", issue.message}});
        }
        send_json(res, 422, {{"error", e.what()}, {"code", "compile_failed"}, {"parse_errors", errors}, {"issues", issues}});
      } catch (const Error& e) {
        send_json(res, http_status_for(e.code()), {{"error", e.what()}, {"code", to_string(e.code())}});
      } catch (const std::exception& e) {
        send_json(res, 500, {{"error", e.what()}});
      }
    };
  }

  // --- playback ----------------------------------------------------------------

  void start_playback(const std::shared_ptr<Session>& session, MotionScript script) {
    const auto engine = options.engine;
    const bool fast = options.fast;
    session->worker = std::jthread([session, script = std::move(script), engine, fast](std::stop_token stop) {
      session->transition(SessionState::idle, SessionState::running);
      try {
        const auto trace = execute(script, neutral_pose(), engine);
        const auto marks = segment_marks(script);
        const auto begin = std::chrono::steady_clock::now();
        std::size_t mark = 0;
        std::optional<std::string> label;
        for (const auto& sample : trace.samples) {
          if (stop.stop_requested()) break;
          if (!fast) std::this_thread::sleep_until(begin + std::chrono::milliseconds(sample.t_ms));
          while (mark < marks.size() && marks[mark].start_ms <= sample.t_ms) label = marks[mark++].label;
          const auto values = sample.pose.values();
          session->events.push({{"type", "pose"},
                                {"session_id", session->id},
                                {"t_ms", sample.t_ms},
                                {"pose", std::vector<int>(values.begin(), values.end())},
                                {"segment_label", label ? nlohmann::json(*label) : nlohmann::json()}});
        }
        session->state = SessionState::finished;
        session->events.close({{"type", "finished"}, {"session_id", session->id}, {"t_ms", trace.duration_ms()}});
      } catch (const std::exception& e) {
        session->state = SessionState::finished;
        session->events.close({{"type", "finished"}, {"session_id", session->id}, {"error", e.what()}});
      }
    });
  }

  // --- conversations -----------------------------------------------------------

  static nlohmann::json turn_event(const Session& s, const ChatTurn& turn) {
    auto doc = turn_to_json(turn);
    doc["type"] = "turn";
    doc["session_id"] = s.id;
    return doc;
  }

  void start_conversation(const std::shared_ptr<Session>& session) {
    session->worker = std::jthread([session](std::stop_token stop) {
      session->transition(SessionState::idle, SessionState::running);
      try {
        for (;;) {
          std::lock_guard lock(session->op_mutex);
          if (stop.stop_requested() || session->stop_requested || session->society->done()) break;
          const auto turn = session->society->advance();
          session->events.push(turn_event(*session, turn));
        }
        session->events.push({{"type", "idle"}, {"session_id", session->id},
                              {"turns", session->society->transcript().size()}});
      } catch (const std::exception& e) {
        session->state = SessionState::finished;
        session->events.close({{"type", "finished"}, {"session_id", session->id}, {"error", e.what()}});
      }
    });
  }

  // --- routes ------------------------------------------------------------------

  void routes() {
    server.Get("/v1/health", guarded([](const httplib::Request&, httplib::Response& res) {
                 send_json(res, 200, {{"status", "ok"}});
               }));

    server.Get("/v1/body", guarded([](const httplib::Request&, httplib::Response& res) {
                 nlohmann::json axes = nlohmann::json::array();
                 for (const auto& a : default_table()) {
                   axes.push_back({{"id", a.id.value()},
                                   {"name", a.name},
                                   {"neutral", a.neutral},
                                   {"low", a.low_label},
                                   {"high", a.high_label},
                                   {"group", std::string(to_string(a.group))}});
                 }
                 send_json(res, 200, {{"axes", axes}});
               }));

    server.Post("/v1/motions/generate", guarded([this](const httplib::Request& req, httplib::Response& res) {
                  const auto body = parse_body(req);
                  const auto instruction = require_string(body, "instruction");
                  // No store lock is held while the model works.
                  auto generated = generate(instruction, *deps.client, options.pipeline, deps.store->table());
                  const auto label = body.value("label", instruction);
                  const auto record = deps.store->store(label, std::move(generated.description),
                                                        std::move(generated.script), generated.provenance.to_json());
                  send_json(res, 200, {{"record", record_view(record)}});
                }));

    server.Get("/v1/motions", guarded([this](const httplib::Request& req, httplib::Response& res) {
                 if (!req.has_param("query")) {
                   nlohmann::json all = nlohmann::json::array();
                   for (const auto& r : deps.store->list()) all.push_back(record_view(r));
                   send_json(res, 200, {{"records", all}});
                   return;
                 }
                 std::size_t k = 5;
                 double threshold = options.retrieval_threshold;
                 try {
                   if (req.has_param("k")) k = std::stoul(req.get_param_value("k"));
                   if (req.has_param("threshold")) threshold = std::stod(req.get_param_value("threshold"));
                 } catch (const std::exception&) {
                   throw HttpError{400, "k and threshold must be numbers"};
                 }
                 nlohmann::json hits = nlohmann::json::array();
                 for (const auto& h : deps.store->retrieve(req.get_param_value("query"), k, threshold)) {
                   hits.push_back({{"score", h.score}, {"record", record_view(h.record)}});
                 }
                 send_json(res, 200, {{"results", hits}});
               }));

    server.Get("/v1/motions/:id", guarded([this](const httplib::Request& req, httplib::Response& res) {
                 send_json(res, 200, {{"record", record_view(deps.store->fetch(req.path_params.at("id")))}});
               }));

    server.Post("/v1/motions/:id/feedback", guarded([this](const httplib::Request& req, httplib::Response& res) {
                  const auto body = parse_body(req);
                  const auto text = require_string(body, "text");
                  const auto record = deps.store->revise(req.path_params.at("id"), text, *deps.client, options.pipeline);
                  send_json(res, 200, {{"record", record_view(record)}});
                }));

    server.Post("/v1/motions/:id/play", guarded([this](const httplib::Request& req, httplib::Response& res) {
                  const auto record = deps.store->fetch(req.path_params.at("id"));
                  if (has_errors(validate(record.script, deps.store->table()))) {
                    throw HttpError{400, "stored script does not validate"};
                  }
                  auto session = new_session(SessionKind::motion_playback);
                  session->motion_id = record.id;
                  start_playback(session, record.script);
                  send_json(res, 201, {{"session", session->view()}});
                }));

    server.Get("/v1/sessions/:id", guarded([this](const httplib::Request& req, httplib::Response& res) {
                 send_json(res, 200, {{"session", find_session(req.path_params.at("id"))->view()}});
               }));

    server.Get("/v1/stream/:id", guarded([this](const httplib::Request& req, httplib::Response& res) {
                 auto session = find_session(req.path_params.at("id"));
                 auto cursor = std::make_shared<std::size_t>(0);
                 res.status = 200;
                 res.set_chunked_content_provider(
                     "application/x-ndjson", [session, cursor](std::size_t, httplib::DataSink& sink) {
                       std::vector<std::string> lines;
                       const bool more = session->events.next(*cursor, lines, std::chrono::milliseconds(200));
                       for (const auto& line : lines) {
                         if (!sink.write(line.data(), line.size())) return false;
                       }
                       if (!more) sink.done();
                       return sink.is_writable();
                     });
               }));

    server.Post("/v1/conversations", guarded([this](const httplib::Request& req, httplib::Response& res) {
                  const auto config = SessionConfig::from_json(parse_body(req));
                  auto session = new_session(SessionKind::conversation);
                  session->society = std::make_unique<AgentSociety>(config, deps.embedder, *deps.client,
                                                                    deps.store.get(), options.society);
                  start_conversation(session);
                  auto view = session->view();
                  view["config"] = config.to_json();
                  send_json(res, 201, {{"session", view}});
                }));

    server.Get("/v1/conversations/:id", guarded([this](const httplib::Request& req, httplib::Response& res) {
                 auto session = conversation(req.path_params.at("id"));
                 std::lock_guard lock(session->op_mutex);
                 nlohmann::json turns = nlohmann::json::array();
                 for (const auto& t : session->society->transcript()) turns.push_back(turn_to_json(t));
                 send_json(res, 200, {{"session", session->view()}, {"transcript", turns}});
               }));

    server.Post("/v1/conversations/:id/say", guarded([this](const httplib::Request& req, httplib::Response& res) {
                  auto session = conversation(req.path_params.at("id"));
                  const auto text = require_string(parse_body(req), "text");
                  std::lock_guard lock(session->op_mutex);
                  if (session->state.load() == SessionState::finished) {
                    throw HttpError{409, "conversation " + session->id + " is finished"};
                  }
                  const auto human = session->society->add_human_turn(text);
                  session->events.push(turn_event(*session, human));
                  const auto reply = session->society->take_turn(session->society->next_speaker());
                  session->events.push(turn_event(*session, reply));
                  send_json(res, 200, {{"turns", {turn_to_json(human), turn_to_json(reply)}}});
                }));

    server.Post("/v1/conversations/:id/finish", guarded([this](const httplib::Request& req, httplib::Response& res) {
                  auto session = conversation(req.path_params.at("id"));
                  session->stop_requested = true;
                  std::lock_guard lock(session->op_mutex);
                  if (session->state.load() == SessionState::finished) {
                    throw HttpError{409, "conversation " + session->id + " is already finished"};
                  }
                  session->state = SessionState::finished;
                  session->events.close({{"type", "finished"},
                                         {"session_id", session->id},
                                         {"turns", session->society->transcript().size()}});
                  send_json(res, 200, {{"session", session->view()}});
                }));

    server.Get("/v1/conversations/:id/analytics", guarded([this](const httplib::Request& req, httplib::Response& res) {
                 auto session = conversation(req.path_params.at("id"));
                 Transcript transcript;
                 {
                   std::lock_guard lock(session->op_mutex);
                   transcript = session->society->transcript();
                 }
                 AnalysisOptions opts;
                 try {
                   if (req.has_param("window")) opts.attractor_window = std::stoi(req.get_param_value("window"));
                   if (req.has_param("fraction")) opts.attractor_fraction = std::stod(req.get_param_value("fraction"));
                   if (req.has_param("width")) opts.word_window = std::stoi(req.get_param_value("width"));
                 } catch (const std::exception&) {
                   throw HttpError{400, "window, fraction and width must be numbers"};
                 }
                 send_json(res, 200, analyze_transcript(transcript, *deps.embedder, opts).to_json());
               }));

    server.Post("/v1/stats", guarded([](const httplib::Request& req, httplib::Response& res) {
                  double alpha = 0.001;
                  bool ties = false;
                  try {
                    if (req.has_param("alpha")) alpha = std::stod(req.get_param_value("alpha"));
                  } catch (const std::exception&) {
                    throw HttpError{400, "alpha must be a number"};
                  }
                  if (req.has_param("tie_correction")) ties = req.get_param_value("tie_correction") == "true";
                  const auto report = significance_report(parse_ratings_csv(req.body), alpha, ties);
                  auto doc = report.to_json();
                  doc["text"] = report.text();
                  send_json(res, 200, doc);
                }));
  }

  std::shared_ptr<Session> conversation(const std::string& id) {
    auto s = find_session(id);
    if (s->kind != SessionKind::conversation) throw HttpError{404, "session " + id + " is not a conversation"};
    return s;
  }
};

Gateway::Gateway(GatewayDeps deps, GatewayOptions options)
    : impl_(std::make_unique<Impl>(std::move(deps), std::move(options))) {}

Gateway::~Gateway() = default;

int Gateway::start(const std::string& host, int port) {
  int bound = port;
  if (port == 0) {
    bound = impl_->server.bind_to_any_port(host);
  } else if (!impl_->server.bind_to_port(host, port)) {
    bound = -1;
  }
  if (bound < 0) throw Error(Errc::storage_io, "cannot bind " + host + ":" + std::to_string(port));
  impl_->server_thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return bound;
}

void Gateway::listen(const std::string& host, int port) {
  if (!impl_->server.listen(host, port)) {
    throw Error(Errc::storage_io, "cannot listen on " + host + ":" + std::to_string(port));
  }
}

void Gateway::stop() { impl_->server.stop(); }

}  // namespace alterforge
