#include <benchmark/benchmark.h>

#include <random>
#include <string>
#include <vector>

#include "alterforge/conversation_analytics.hpp"
#include "alterforge/embedder.hpp"
#include "alterforge/eval_stats.hpp"
#include "alterforge/motion_engine.hpp"
#include "alterforge/motion_memory.hpp"
#include "alterforge/motion_script.hpp"
#include "alterforge/wire_codec.hpp"

using namespace alterforge;

namespace {

// A long script: n segments, each a batch of three moves and a wait.
MotionScript sample_script(int segments) {
  MotionScript s{"bench", {}};
  for (int i = 0; i < segments; ++i) {
    s.steps.push_back(SegmentStart{"segment " + std::to_string(i)});
    s.steps.push_back(Move{1, (i * 37) % 256, 400});
    s.steps.push_back(Move{4, (i * 91) % 256, 400});
    s.steps.push_back(Move{27, (i * 13) % 256, 400});
    s.steps.push_back(Wait{100});
  }
  return s;
}

void BM_Parse(benchmark::State& state) {
  const auto text = serialize(sample_script(static_cast<int>(state.range(0))));
  for (auto _ : state) benchmark::DoNotOptimize(parse(text));
  state.SetBytesProcessed(static_cast<int64_t>(state.iterations() * text.size()));
}
BENCHMARK(BM_Parse)->Arg(10)->Arg(100);

void BM_Execute(benchmark::State& state) {
  const auto script = sample_script(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(execute(script, neutral_pose()));
}
BENCHMARK(BM_Execute)->Arg(10)->Arg(100);

void BM_Encode(benchmark::State& state) {
  const auto trace = execute(sample_script(static_cast<int>(state.range(0))), neutral_pose());
  for (auto _ : state) benchmark::DoNotOptimize(frames_to_bytes(encode_frames(trace)));
}
BENCHMARK(BM_Encode)->Arg(10)->Arg(100);

void BM_Decode(benchmark::State& state) {
  const auto bytes = frames_to_bytes(encode_frames(execute(sample_script(100), neutral_pose())));
  for (auto _ : state) benchmark::DoNotOptimize(decode_frames(bytes));
  state.SetBytesProcessed(static_cast<int64_t>(state.iterations() * bytes.size()));
}
BENCHMARK(BM_Decode);

void BM_Friedman(benchmark::State& state) {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> score(1, 5);
  RatingMatrix m;
  const auto n = static_cast<std::size_t>(state.range(0));
  m.values.assign(n, std::vector<int>(9));
  for (auto& row : m.values)
    for (auto& v : row) v = score(rng);
  for (int j = 0; j < 9; ++j) m.motion_labels.push_back("m" + std::to_string(j));
  for (std::size_t i = 0; i < n; ++i) m.subject_ids.push_back(std::to_string(i));
  for (auto _ : state) {
    benchmark::DoNotOptimize(friedman(m));
    benchmark::DoNotOptimize(nemenyi(m));
  }
}
BENCHMARK(BM_Friedman)->Arg(20)->Arg(200);

void BM_Project2d(benchmark::State& state) {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> normal;
  std::vector<std::vector<double>> rows(static_cast<std::size_t>(state.range(0)), std::vector<double>(256));
  for (auto& r : rows)
    for (auto& v : r) v = normal(rng);
  for (auto _ : state) benchmark::DoNotOptimize(project_2d(rows));
}
BENCHMARK(BM_Project2d)->Arg(50)->Arg(500);

void BM_Retrieve(benchmark::State& state) {
  MotionStore store(std::make_shared<HashingEmbedder>(), std::nullopt, [] { return std::int64_t{0}; });
  const auto script = sample_script(2);
  for (int i = 0; i < state.range(0); ++i) {
    MotionDescription d;
    d.lines = {"motion number " + std::to_string(i), "wave and nod"};
    store.store("motion " + std::to_string(i), d, script);
  }
  for (auto _ : state) benchmark::DoNotOptimize(store.retrieve("wave hello", 3));
}
BENCHMARK(BM_Retrieve)->Arg(100)->Arg(1000);

}  // namespace

BENCHMARK_MAIN();
