// Acceptance run: one PASS/FAIL line per primary criterion. Exit status is
// the number of failed criteria.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "alterforge/agent_society.hpp"
#include "alterforge/completion.hpp"
#include "alterforge/conversation_analytics.hpp"
#include "alterforge/embedder.hpp"
#include "alterforge/eval_stats.hpp"
#include "alterforge/llm_pipeline.hpp"
#include "alterforge/motion_engine.hpp"
#include "alterforge/motion_memory.hpp"
#include "alterforge/motion_script.hpp"
#include "alterforge/transcript.hpp"
#include "alterforge/wire_codec.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace alterforge;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok && pass) {
      pass = false;
      detail = what;
    }
  }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

RatingMatrix to_matrix(std::vector<std::vector<int>> values) {
  RatingMatrix m;
  m.values = std::move(values);
  for (std::size_t j = 0; j < m.values.front().size(); ++j) m.motion_labels.push_back("m" + std::to_string(j + 1));
  for (std::size_t i = 0; i < m.values.size(); ++i) m.subject_ids.push_back(std::to_string(i + 1));
  return m;
}

RatingMatrix random_ratings(std::mt19937_64& rng, int n, int k) {
  std::uniform_int_distribution<int> score(1, 5);
  std::vector<std::vector<int>> v(static_cast<std::size_t>(n), std::vector<int>(static_cast<std::size_t>(k)));
  for (auto& row : v)
    for (auto& x : row) x = score(rng);
  return to_matrix(std::move(v));
}

// --- criteria ------------------------------------------------------------------

Outcome dsl_round_trip() {
  Outcome o;
  const auto start = Clock::now();
  std::mt19937_64 rng(1001);
  int identical = 0;
  for (int i = 0; i < 10000; ++i) {
    const auto script = oracle::random_script(rng, i % 2 == 0);
    const auto parsed = parse(serialize(script));
    if (parsed.ok() && parsed.value() == script) ++identical;
  }
  o.require(identical == 10000, std::to_string(10000 - identical) + " scripts changed under round-trip");

  std::uniform_int_distribution<int> len(0, 256), byte(0, 255);
  int rejected = 0;
  for (int i = 0; i < 10000; ++i) {
    std::string noise(static_cast<std::size_t>(len(rng)), '\0');
    for (auto& c : noise) c = static_cast<char>(byte(rng));
    const auto r = parse(noise);
    if (!r.ok() && r.error().line >= 1 && r.error().column >= 1) ++rejected;
  }
  o.require(rejected == 10000, std::to_string(10000 - rejected) + " noise inputs were not rejected");
  const double elapsed = seconds_since(start);
  o.require(elapsed < 30.0, "took " + fmt(elapsed) + " s");
  if (o.pass) o.detail = "10000 identities, 10000 noise rejections, " + fmt(elapsed) + " s";
  return o;
}

Outcome engine_math() {
  Outcome o;
  const auto trace = execute(MotionScript{"mid", {Move{1, 255, 1000}}}, neutral_pose());
  o.require(trace.samples.size() == 11 && trace.samples[5].t_ms == 500 && trace.samples[5].pose.at(1) == 160,
            "midpoint sample is not 160 at 500 ms");
  std::mt19937_64 rng(1002);
  int mismatched = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto script = oracle::random_script(rng, i % 4 != 0, 30);
    const auto t = execute(script, neutral_pose());
    bool same = true;
    for (int axis = 1; axis <= kAxisCount && same; ++axis) {
      const auto ref = oracle::axis_track(script, axis, neutral_pose().at(axis), t.tick_ms, t.duration_ms());
      if (ref.size() != t.samples.size()) {
        same = false;
        break;
      }
      for (std::size_t k = 0; k < ref.size(); ++k) {
        if (ref[k] != t.samples[k].pose.at(axis)) {
          same = false;
          break;
        }
      }
    }
    if (!same) ++mismatched;
  }
  o.require(mismatched == 0, std::to_string(mismatched) + " of 1000 traces differ from the per-axis reference");
  if (o.pass) o.detail = "midpoint 160; 1000 random scripts byte-exact";
  return o;
}

Outcome wire_codec() {
  Outcome o;
  std::mt19937_64 rng(1003);
  int broken = 0;
  std::size_t corruption_trials = 0, resync_total = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto trace = execute(oracle::random_script(rng, true, 20), neutral_pose());
    const auto frames = encode_frames(trace);
    const auto bytes = frames_to_bytes(frames);
    const auto decoded = decode_frames(bytes);
    if (decoded.frames != frames || decoded.resyncs != 0) ++broken;

    // Corrupt one byte and check that everything after the damaged frame survives.
    std::uniform_int_distribution<std::size_t> where(0, bytes.size() - 1);
    std::uniform_int_distribution<int> flip(1, 255);
    auto damaged = bytes;
    const auto pos = where(rng);
    damaged[pos] = static_cast<std::uint8_t>(damaged[pos] ^ flip(rng));
    const auto recovered = decode_frames(damaged);
    ++corruption_trials;
    const std::size_t hit = pos / kFrameSize;
    const std::size_t tail = frames.size() - hit - 1;
    bool ok = recovered.frames.size() >= tail && recovered.resyncs >= 1;
    for (std::size_t k = 0; ok && k < tail; ++k) {
      ok = recovered.frames[recovered.frames.size() - tail + k] == frames[hit + 1 + k];
    }
    resync_total += recovered.resyncs;
    if (!ok) ++broken;
  }
  o.require(broken == 0, std::to_string(broken) + " round-trip or corruption cases failed");
  if (o.pass) {
    o.detail = "1000 identities; " + std::to_string(corruption_trials) + " corruptions recovered, " +
               std::to_string(resync_total) + " resyncs";
  }
  return o;
}

Outcome friedman_criterion() {
  Outcome o;
  const auto flat = friedman(to_matrix({{3, 3, 3, 3}, {1, 1, 1, 1}, {5, 5, 5, 5}, {2, 2, 2, 2}}));
  o.require(flat.statistic == 0.0 && flat.p_value == 1.0, "all-equal matrix gave F_r=" + fmt(flat.statistic));
  const auto hand = friedman(to_matrix({{1, 2, 3}, {1, 2, 3}, {1, 2, 3}}));
  o.require(hand.statistic == 6.0, "3x3 case gave F_r=" + fmt(hand.statistic));
  o.require(std::fabs(hand.p_value - 0.0498) < 1e-3, "3x3 case gave p=" + fmt(hand.p_value));

  std::mt19937_64 rng(1004);
  std::uniform_int_distribution<int> ns(2, 20), ks(3, 6);
  double worst_f = 0, worst_p = 0;
  for (int i = 0; i < 500; ++i) {
    const auto m = random_ratings(rng, ns(rng), ks(rng));
    const auto f = friedman(m);
    const double expected = oracle::friedman_statistic(m.values);
    worst_f = std::max(worst_f, std::fabs(f.statistic - expected));
    worst_p = std::max(worst_p, std::fabs(f.p_value - oracle::chi2_sf(expected, static_cast<int>(m.motions()) - 1)));
  }
  o.require(worst_f < 1e-9, "statistic off by " + fmt(worst_f));
  o.require(worst_p < 1e-6, "p-value off by " + fmt(worst_p));
  if (o.pass) o.detail = "F_r=0/p=1, F_r=6/p=" + fmt(hand.p_value) + ", 500 random max |dF|=" + fmt(worst_f) +
                         " |dp|=" + fmt(worst_p);
  return o;
}

Outcome nemenyi_criterion() {
  Outcome o;
  std::mt19937_64 rng(1005);
  int bad = 0;
  for (int i = 0; i < 100; ++i) {
    const auto m = random_ratings(rng, 4 + i % 17, 3 + i % 4);
    const auto r = nemenyi(m);
    for (std::size_t a = 0; a < m.motions(); ++a) {
      if (r.p_matrix[a][a] != 1.0) ++bad;
      for (std::size_t b = 0; b < m.motions(); ++b) {
        if (r.p_matrix[a][b] != r.p_matrix[b][a] || r.p_matrix[a][b] < 0 || r.p_matrix[a][b] > 1) ++bad;
      }
    }
  }
  o.require(bad == 0, std::to_string(bad) + " symmetry or diagonal violations");

  // One motion uniformly rated 5, the others cycling through 1..3, plus a
  // milder case where the columns overlap.
  std::vector<std::vector<int>> strong, mild;
  for (int i = 0; i < 10; ++i) strong.push_back({1 + i % 3, 1 + (i + 1) % 3, 1 + (i + 2) % 3, 5});
  for (int i = 0; i < 12; ++i) mild.push_back({1 + i % 4, 2 + i % 3, 1 + (i * 5) % 5, 3 + i % 3, 2});
  double worst_z = 0;
  int cases = 0;
  std::uint64_t seed = 77;
  for (const auto* values : {&strong, &mild}) {
    const auto r = nemenyi(to_matrix(*values));
    const auto k = r.mean_ranks.size();
    for (std::size_t a = 0; a + 1 < k; a += 2) {
      const std::size_t b = k - 1;
      const auto mc = oracle::studentized_range_sf_mc(r.q_matrix[a][b], static_cast<int>(k), 1'000'000, seed++);
      const double z = std::fabs(r.p_matrix[a][b] - mc.p) / mc.standard_error;
      worst_z = std::max(worst_z, z);
      ++cases;
    }
  }
  o.require(worst_z < 3.0, "a case is " + fmt(worst_z) + " standard errors from the simulation");
  if (o.pass) o.detail = "100 random matrices clean; " + std::to_string(cases) + " cases within " + fmt(worst_z) + " SE";
  return o;
}

Outcome pipeline_end_to_end() {
  Outcome o;
  const auto start = Clock::now();
  auto fixtures = FixtureClient::from_file(testing_support::fixture_dir() / "recorded_completions.json");
  MotionStore store(std::make_shared<HashingEmbedder>());
  const std::vector<std::string> instructions = {
      "take a selfie", "pretend a ghost",
      "I was enjoying a movie while eating popcorn at the theater when I realized that I was actually eating the "
      "popcorn of the person next to me.",
      "In the park, as I jogged, the world seemed to narrate an ancient tale of survival, each footfall echoing eons "
      "of existence."};
  std::vector<std::string> ids;
  std::string segments;
  try {
    for (const auto& instruction : instructions) {
      const auto g = generate(instruction, fixtures);
      o.require(!has_errors(validate(g.script)), "script for '" + instruction + "' does not validate");
      const auto n = segment_marks(g.script).size();
      o.require(n >= 8, "'" + instruction + "' has only " + std::to_string(n) + " segments");
      segments += (segments.empty() ? "" : "/") + std::to_string(n);
      ids.push_back(store.store(instruction, g.description, g.script, g.provenance.to_json()).id);
    }
  } catch (const std::exception& e) {
    o.require(false, std::string("pipeline threw: ") + e.what());
    return o;
  }
  for (const auto& id : ids) o.require(store.get(id).has_value(), "record " + id + " is not retrievable");
  const auto hits = store.retrieve("take a selfie", 1);
  o.require(!hits.empty() && hits[0].record.id == ids[0], "selfie query did not return the selfie record");
  const double score = hits.empty() ? 0.0 : hits[0].score;
  o.require(score > kDefaultRetrievalThreshold, "selfie score " + fmt(score) + " not above threshold");
  const double elapsed = seconds_since(start);
  o.require(elapsed < 5.0, "took " + fmt(elapsed) + " s");
  if (o.pass) o.detail = "segments " + segments + ", selfie score " + fmt(score) + ", " + fmt(elapsed) + " s";
  return o;
}

Outcome feedback_criterion() {
  Outcome o;
  class Refusing final : public CompletionClient {
   public:
    std::string send(const ChatRequest&) override { throw Error(Errc::transport, "unexpected completion request"); }
  } refusing;
  auto fixtures = FixtureClient::from_file(testing_support::fixture_dir() / "recorded_completions.json");
  const auto g = generate("pretend a ghost", fixtures);
  MotionStore store(std::make_shared<HashingEmbedder>());
  const auto original = store.store("pretend a ghost", g.description, g.script);
  CountingClient counted(refusing);
  MotionRecord first, second;
  try {
    first = store.revise(original.id, "Set axis 16 to 255", counted);
    MotionStore twin(std::make_shared<HashingEmbedder>());
    const auto copy = twin.store("pretend a ghost", g.description, g.script);
    second = twin.revise(copy.id, "Set axis 16 to 255", counted);
  } catch (const std::exception& e) {
    o.require(false, std::string("revision threw: ") + e.what());
    return o;
  }
  o.require(counted.calls() == 0, std::to_string(counted.calls()) + " completion calls");
  o.require(first.script == second.script, "direct edit is not deterministic");
  bool pegged = true;
  int axis16 = 0;
  for (const auto& step : first.script.steps) {
    if (const auto* m = std::get_if<Move>(&step); m && m->axis == 16) {
      ++axis16;
      pegged = pegged && m->target == 255;
    }
  }
  o.require(axis16 > 0 && pegged, "axis 16 targets were not all set to 255");

  std::mt19937_64 rng(1006);
  std::vector<int> axes;
  for (const auto& step : g.script.steps) {
    if (const auto* m = std::get_if<Move>(&step); m && std::find(axes.begin(), axes.end(), m->axis) == axes.end()) {
      axes.push_back(m->axis);
    }
  }
  std::uniform_int_distribution<std::size_t> axis(0, axes.size() - 1);
  std::uniform_int_distribution<int> value(0, 255), len(1, 15), scoped(0, 3);
  const auto labels = segment_marks(g.script);
  std::uniform_int_distribution<std::size_t> label_pick(0, labels.size() - 1);
  int broken = 0;
  for (int run = 0; run < 100; ++run) {
    MotionStore s(std::make_shared<HashingEmbedder>());
    const auto r0 = s.store("pretend a ghost", g.description, g.script);
    const int edits = len(rng);
    for (int e = 0; e < edits; ++e) {
      std::string cmd = "set axis " + std::to_string(axes[axis(rng)]) + " to " + std::to_string(value(rng));
      if (scoped(rng) == 0) {
        std::string quoted;
        for (char c : labels[label_pick(rng)].label) {
          if (c == '"' || c == '\\') quoted += '\\';
          quoted += c;
        }
        cmd += " in segment \"" + quoted + "\"";
      }
      s.revise(r0.id, cmd, counted);
    }
    const auto r = s.fetch(r0.id);
    bool chain = static_cast<int>(r.revisions.size()) == edits && r.revisions.front().prior_script == r0.script &&
                 r.revisions.back().new_script == r.script;
    for (std::size_t i = 1; chain && i < r.revisions.size(); ++i) {
      chain = r.revisions[i].prior_script == r.revisions[i - 1].new_script;
    }
    if (!chain) ++broken;
  }
  o.require(broken == 0, std::to_string(broken) + " of 100 revision histories break the chain");
  o.require(counted.calls() == 0, "edit sequences reached the completion client");
  if (o.pass) o.detail = "0 completion calls, " + std::to_string(axis16) + " axis-16 moves at 255, 100 chains intact";
  return o;
}

std::string run_cli(const std::string& args) {
  const std::string command = std::string("env -u ALTERFORGE_LLM -u ALTERFORGE_FIXTURES -u ALTERFORGE_CONFIG ") +
                              "-u ALTERFORGE_TICK_MS -u ALTERFORGE_STORE '" + ALTERFORGE_CLI_PATH + "' " + args;
  std::string out;
  if (FILE* pipe = ::popen(command.c_str(), "r")) {
    std::array<char, 4096> buf{};
    std::size_t n;
    while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) out.append(buf.data(), n);
    if (::pclose(pipe) != 0) out = "<exit status non-zero>\n" + out;
  }
  return out;
}

Outcome conversation_criterion() {
  Outcome o;
  const auto a = run_cli("converse --turns 50 --seed 1");
  const auto b = run_cli("converse --turns 50 --seed 1");
  const auto transcript = read_transcript(a);
  o.require(transcript.size() == 50, "CLI produced " + std::to_string(transcript.size()) + " turns");
  o.require(a == b, "two CLI runs differ");

  const auto profiles = default_profiles();
  SessionConfig fixed;
  fixed.turns = 60;
  fixed.mode = SchedulerMode::fixed_round_robin;
  fixed.motion_hook = false;
  SyntheticClient synthetic;
  AgentSociety periodic(fixed, std::make_shared<HashingEmbedder>(), synthetic);
  const auto turns = periodic.run();
  bool exact = turns.size() == 60;
  for (std::size_t i = 0; exact && i < turns.size(); ++i) exact = turns[i].speaker == profiles[i % 6].name;
  o.require(exact, "fixed-mode speakers are not periodic");

  // Same backend as the CLI mock: recorded completions first, synthetic otherwise.
  auto embedder = std::make_shared<HashingEmbedder>();
  FallbackClient backend(std::make_shared<FixtureClient>(std::map<std::string, std::string>{}),
                         std::make_shared<SyntheticClient>());
  MotionStore store(embedder);
  SessionConfig random;
  random.turns = 50;
  random.seed = 1;
  AgentSociety society(random, embedder, backend, &store);
  const auto t = society.run();
  std::set<std::vector<double>> distinct;
  for (const auto& turn : t) distinct.insert(embedder->embed(turn.text));
  o.require(store.size() == distinct.size(), "store grew by " + std::to_string(store.size()) + " for " +
                                                 std::to_string(distinct.size()) + " distinct turn embeddings");
  o.require(transcript_to_jsonl(t) == a, "in-process transcript differs from the CLI run");
  if (o.pass) {
    o.detail = "byte-identical 50-turn runs, period 6 over 60 turns, store +" + std::to_string(store.size()) +
               " for " + std::to_string(distinct.size()) + " distinct embeddings";
  }
  return o;
}

Outcome attractor_criterion() {
  Outcome o;
  const char* topics[] = {"quarks", "rust", "closures", "sonnets", "light", "ponies", "entropy", "enzymes"};
  Transcript t;
  for (int i = 0; i < 100; ++i) {
    t.push_back({i, "Amin", std::string("Let us discuss ") + topics[i % 8] + " again, item " + std::to_string(i), {}, {},
                 {}});
  }
  const Transcript varied = t;
  for (int i = 100; i < 150; ++i) t.push_back({i, "Amin", "Goodbye, everyone!", {}, {}, {}});
  const auto r = detect_goodbye_attractor(t);
  o.require(r.detected && r.entry_turn && *r.entry_turn >= 100 && *r.entry_turn <= 120,
            "attractor entry " + (r.entry_turn ? std::to_string(*r.entry_turn) : std::string("none")));
  o.require(!detect_goodbye_attractor(varied).detected, "zero-farewell transcript was flagged");

  std::mt19937_64 rng(1007);
  std::uniform_int_distribution<int> len(20, 200), coin(0, 2);
  int violations = 0;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<bool> flags(static_cast<std::size_t>(len(rng)));
    for (auto&& f : flags) f = coin(rng) != 0;
    const auto before = detect_attractor_from_flags(flags);
    auto augmented = flags;
    std::uniform_int_distribution<std::size_t> pos(0, flags.size() - 1);
    for (int k = 0; k < 15; ++k) augmented[pos(rng)] = true;
    const auto after = detect_attractor_from_flags(augmented);
    if (before.detected && (!after.detected || *after.entry_turn > *before.entry_turn)) ++violations;
  }
  o.require(violations == 0, std::to_string(violations) + " augmentations broke monotonicity");
  if (o.pass) o.detail = "entry_turn " + std::to_string(*r.entry_turn) + ", no false positive, 100 augmentations monotone";
  return o;
}

Outcome pca_criterion() {
  Outcome o;
  std::mt19937_64 rng(1008);
  std::normal_distribution<double> normal;
  double worst = 0;
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::vector<double>> m(50, std::vector<double>(256));
    for (auto& row : m)
      for (auto& v : row) v = normal(rng);
    const auto p = project_2d(m);
    const auto ref = oracle::pca_scores(m);
    for (int c = 0; c < 2; ++c) {
      double dot = 0;
      for (std::size_t i = 0; i < 50; ++i) dot += ref[i][c] * (c == 0 ? p.points[i].x : p.points[i].y);
      const double sign = dot >= 0 ? 1.0 : -1.0;
      for (std::size_t i = 0; i < 50; ++i) {
        const double got = c == 0 ? p.points[i].x : p.points[i].y;
        worst = std::max(worst, std::fabs(got - sign * ref[i][c]));
      }
    }
  }
  o.require(worst < 1e-6, "projection differs from the oracle by " + fmt(worst));

  const std::size_t d = 64;
  std::vector<double> centre(d), u(d), w(d);
  for (auto& x : centre) x = normal(rng);
  for (auto& x : u) x = normal(rng);
  for (auto& x : w) x = normal(rng);
  std::vector<std::vector<double>> plane;
  for (int i = 0; i < 40; ++i) {
    const double a = 2 * normal(rng), b = normal(rng);
    std::vector<double> r(d);
    for (std::size_t j = 0; j < d; ++j) r[j] = centre[j] + a * u[j] + b * w[j];
    plane.push_back(r);
  }
  const auto p = project_2d(plane);
  double recon = 0;
  for (std::size_t i = 0; i < plane.size(); ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      const double back = p.mean[j] + p.points[i].x * p.components[0][j] + p.points[i].y * p.components[1][j];
      recon = std::max(recon, std::fabs(back - plane[i][j]));
    }
  }
  o.require(recon < 1e-8, "planar reconstruction error " + fmt(recon));
  if (o.pass) o.detail = "50 matrices within " + fmt(worst) + ", planar error " + fmt(recon);
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"dsl round-trip", dsl_round_trip},
      {"engine math", engine_math},
      {"wire codec", wire_codec},
      {"friedman", friedman_criterion},
      {"nemenyi", nemenyi_criterion},
      {"pipeline end-to-end", pipeline_end_to_end},
      {"feedback", feedback_criterion},
      {"conversation reproducibility", conversation_criterion},
      {"attractor", attractor_criterion},
      {"pca projection", pca_criterion},
  };
  int failed = 0;
  for (const auto& [name, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("threw: ") + e.what();
    }
    if (!o.pass) ++failed;
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
  }
  return failed;
}
