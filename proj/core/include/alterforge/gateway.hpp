#pragma once

#include <memory>
#include <string>

#include <nlohmann/json.hpp>

#include "alterforge/agent_society.hpp"
#include "alterforge/completion.hpp"
#include "alterforge/embedder.hpp"
#include "alterforge/llm_pipeline.hpp"
#include "alterforge/motion_engine.hpp"
#include "alterforge/motion_memory.hpp"

namespace alterforge {

struct GatewayOptions {
  EngineConfig engine;
  bool fast = false;  // emit playback ticks without sleeping
  PipelineConfig pipeline;
  SocietyParams society;
  double retrieval_threshold = kDefaultRetrievalThreshold;
};

struct GatewayDeps {
  std::shared_ptr<CompletionClient> client;
  std::shared_ptr<const Embedder> embedder;
  std::shared_ptr<MotionStore> store;
};

// HTTP service under /v1. Playback and conversation sessions each own their
// engine or society; the motion store is the only shared state.
class Gateway {
 public:
  Gateway(GatewayDeps deps, GatewayOptions options = {});
  ~Gateway();
  Gateway(const Gateway&) = delete;
  Gateway& operator=(const Gateway&) = delete;

  // Binds and serves on a background thread. Port 0 picks a free port.
  // Returns the bound port; throws storage_io when binding fails.
  int start(const std::string& host = "127.0.0.1", int port = 0);
  // Serves on the calling thread until stop().
  void listen(const std::string& host, int port);
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// API view of a record: the stored fields without the embedding vectors,
// plus the structured script.
nlohmann::json record_view(const MotionRecord& record);

int http_status_for(Errc code) noexcept;

}  // namespace alterforge
