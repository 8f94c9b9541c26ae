#include <doctest.h>

#include <cmath>
#include <random>
#include <set>
#include <thread>

#include <nlohmann/json.hpp>

#include "alterforge/completion.hpp"
#include "alterforge/embedder.hpp"
#include "alterforge/error.hpp"
#include "alterforge/motion_memory.hpp"
#include "fixtures.hpp"

using namespace alterforge;

namespace {

std::shared_ptr<const Embedder> hashing() { return std::make_shared<HashingEmbedder>(); }

Clock ticking() {
  auto t = std::make_shared<std::int64_t>(1'000);
  return [t] { return (*t)++; };
}

MotionScript sample_script() {
  return MotionScript{"guitar",
                      {SegmentStart{"Holding the guitar"}, Move{16, 100, 500}, Move{33, 180, 500},
                       SegmentStart{"Strum"}, Move{16, 140, 300}, Move{36, 60, 300}}};
}

MotionDescription sample_description() { return MotionDescription{{"Hold the guitar", "Strum"}}; }

class RefusingClient final : public CompletionClient {
 public:
  std::string send(const ChatRequest&) override {
    ++calls;
    throw Error(Errc::transport, "should not be called");
  }
  int calls = 0;
};

}  // namespace

TEST_CASE("offline embedder basics") {
  HashingEmbedder e;
  const auto a = e.embed("Take a selfie!");
  const auto b = e.embed("take a SELFIE");
  REQUIRE(a.size() == 256);
  CHECK(cosine(a, b) == doctest::Approx(1.0).epsilon(1e-12));
  double norm = 0;
  for (double v : a) norm += v * v;
  CHECK(std::sqrt(norm) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(tokenize_words("Don't STOP-now, 42x") == std::vector<std::string>{"dont", "stop", "now", "42x"});
  const auto zero = e.embed("!!!");
  CHECK(cosine(zero, a) == 0.0);
}

TEST_CASE("store and fetch") {
  MotionStore store(hashing(), std::nullopt, ticking());
  const auto r = store.store("take a selfie", sample_description(), sample_script());
  CHECK(r.id == "m-000001");
  CHECK(serialize(store.fetch(r.id).script) == serialize(sample_script()));
  const auto dup = store.store("take a selfie", sample_description(), sample_script());
  CHECK(dup.id != r.id);
  CHECK(store.size() == 2);
  CHECK_THROWS_AS(store.store("", sample_description(), sample_script()), Error);
  CHECK_THROWS_AS(store.store("bad", sample_description(), MotionScript{"x", {Move{1, 1, 0}}}), Error);
  CHECK_FALSE(store.get("m-999999").has_value());
  try {
    store.fetch("m-999999");
    FAIL("expected unknown_record");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::unknown_record);
  }
}

TEST_CASE("retrieval ranks by cosine with a threshold") {
  MotionStore store(hashing(), std::nullopt, ticking());
  CHECK(store.retrieve("anything").empty());
  store.store("take a selfie", MotionDescription{{"Smile", "Raise the phone"}}, sample_script());
  store.store("pretend the ghost", MotionDescription{{"Look scared", "Flutter the hands"}}, sample_script());
  auto hits = store.retrieve("take a selfie", 2, 0.0);
  REQUIRE(hits.size() == 2);
  CHECK(hits[0].record.label == "take a selfie");
  CHECK(hits[0].score == doctest::Approx(1.0).epsilon(1e-9));
  hits = store.retrieve("selfie", 2, 0.0);
  REQUIRE(!hits.empty());
  CHECK(hits[0].record.label == "take a selfie");
  CHECK(store.retrieve("quantum chromodynamics", 1).empty());
}

TEST_CASE("retrieval ties go to the newer record") {
  MotionStore store(hashing(), std::nullopt, ticking());
  const auto older = store.store("wave", sample_description(), sample_script());
  const auto newer = store.store("wave", sample_description(), sample_script());
  const auto hits = store.retrieve("wave", 2, 0.0);
  REQUIRE(hits.size() == 2);
  CHECK(hits[0].record.id == newer.id);
  CHECK(hits[1].record.id == older.id);
}

TEST_CASE("direct commands") {
  auto e = parse_direct_command("Set axis 16 to 255");
  REQUIRE(e.has_value());
  CHECK(e->axis == 16);
  CHECK(e->target == 255);
  CHECK_FALSE(e->segment.has_value());
  e = parse_direct_command("set AXIS 16 to 0 in segment \"Holding the guitar\".");
  REQUIRE(e.has_value());
  CHECK(e->segment == std::optional<std::string>("Holding the guitar"));
  e = parse_direct_command("Set axis 3 to 9 for \"Strum\"");
  REQUIRE(e.has_value());
  CHECK(e->segment == std::optional<std::string>("Strum"));
  CHECK_FALSE(parse_direct_command("Move your arm more energetically.").has_value());
  CHECK_FALSE(parse_direct_command("please set axis 16 to 255 and smile").has_value());
}

TEST_CASE("a direct command revises without the completion client") {
  MotionStore store(hashing(), std::nullopt, ticking());
  const auto r = store.store("play the guitar", sample_description(), sample_script());
  RefusingClient client;
  CountingClient counted(client);
  const auto revised = store.revise(r.id, "Set axis 16 to 255", counted);
  CHECK(counted.calls() == 0);
  REQUIRE(revised.revisions.size() == 1);
  CHECK(revised.revisions[0].kind == RevisionKind::direct_edit);
  CHECK(revised.revisions[0].prior_script == sample_script());
  for (const auto& step : revised.script.steps) {
    if (const auto* m = std::get_if<Move>(&step); m && m->axis == 16) CHECK(m->target == 255);
  }
  CHECK(revised.updated_at > r.updated_at);

  const auto again = store.revise(r.id, "Set axis 16 to 255", counted);
  CHECK(again.script == revised.script);

  try {
    store.revise("m-404", "Set axis 16 to 255", counted);
    FAIL("expected unknown_record");
  } catch (const Error& err) {
    CHECK(err.code() == Errc::unknown_record);
  }
}

TEST_CASE("free-form feedback goes through the revise stage") {
  auto fixtures = FixtureClient::from_file(testing_support::fixture_dir() / "recorded_completions.json");
  MotionStore store(hashing(), std::nullopt, ticking());
  const auto g = generate("take a selfie", fixtures);
  const auto r = store.store("take a selfie", g.description, g.script);
  CountingClient counted(fixtures);
  const auto revised = store.revise(r.id, "Move your arm more energetically.", counted);
  CHECK(counted.calls() == 1);
  REQUIRE(revised.revisions.size() == 1);
  CHECK(revised.revisions[0].kind == RevisionKind::llm_revision);
  CHECK(revised.script != g.script);
}

TEST_CASE("revision history forms a chain under random edit sequences") {
  std::mt19937_64 rng(41);
  std::uniform_int_distribution<int> axis_pick(0, 2), value(0, 255), len(1, 12), scope(0, 2);
  const int axes[] = {16, 33, 36};
  for (int run = 0; run < 100; ++run) {
    MotionStore store(hashing(), std::nullopt, ticking());
    RefusingClient client;
    const auto original = store.store("guitar", sample_description(), sample_script());
    const int edits = len(rng);
    for (int i = 0; i < edits; ++i) {
      std::string cmd = "set axis " + std::to_string(axes[axis_pick(rng)]) + " to " + std::to_string(value(rng));
      const int s = scope(rng);
      if (s == 1) cmd += " in segment \"Holding the guitar\"";
      if (s == 2) cmd += " for \"Strum\"";
      store.revise(original.id, cmd, client);
    }
    const auto r = store.fetch(original.id);
    REQUIRE(static_cast<int>(r.revisions.size()) == edits);
    CHECK(r.revisions.front().prior_script == original.script);
    for (std::size_t i = 1; i < r.revisions.size(); ++i) {
      CHECK(r.revisions[i].prior_script == r.revisions[i - 1].new_script);
      CHECK(r.revisions[i].timestamp >= r.revisions[i - 1].timestamp);
    }
    CHECK(r.revisions.back().new_script == r.script);
    CHECK(client.calls == 0);
  }
}

TEST_CASE("persistence survives reopening") {
  testing_support::TempDir dir("store");
  const auto file = dir / "store.json";
  std::string id;
  {
    auto store = MotionStore::open(file, hashing());
    id = store->store("take a selfie", sample_description(), sample_script()).id;
    RefusingClient client;
    store->revise(id, "Set axis 16 to 255", client);
  }
  auto reopened = MotionStore::open(file, hashing());
  REQUIRE(reopened->size() == 1);
  const auto r = reopened->fetch(id);
  CHECK(r.revisions.size() == 1);
  CHECK(r.label == "take a selfie");
  const auto next = reopened->store("second", sample_description(), sample_script());
  CHECK(next.id != id);
  CHECK_FALSE(std::filesystem::exists(file.string() + ".tmp"));
}

TEST_CASE("export and import") {
  testing_support::TempDir dir("export");
  MotionStore source(hashing(), std::nullopt, ticking());
  CHECK(source.export_store(dir / "empty.json") == 0);
  MotionStore empty_target(hashing());
  CHECK(empty_target.import_store(dir / "empty.json") == 0);

  source.store("take a selfie", sample_description(), sample_script());
  source.store("pretend a ghost", sample_description(), sample_script());
  CHECK(source.export_store(dir / "two.json") == 2);

  MotionStore target(hashing());
  CHECK(target.import_store(dir / "two.json") == 2);
  REQUIRE(target.size() == 2);
  for (const auto& r : source.list()) CHECK(serialize(target.fetch(r.id).script) == serialize(r.script));

  CHECK(target.import_store(dir / "two.json") == 2);
  CHECK(target.size() == 4);
  std::set<std::string> ids;
  for (const auto& r : target.list()) ids.insert(r.id);
  CHECK(ids.size() == 4);

  MotionStore other_dim(std::make_shared<HashingEmbedder>(64));
  other_dim.import_store(dir / "two.json");
  CHECK(other_dim.list()[0].embedding.size() == 64);

  auto doc = source.to_json();
  doc["version"] = 99;
  try {
    target.import_json(doc);
    FAIL("expected schema_version_mismatch");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::schema_version_mismatch);
  }
}

TEST_CASE("record json round-trip") {
  MotionStore store(hashing(), std::nullopt, ticking());
  const auto r = store.store("take a selfie", sample_description(), sample_script(), {{"model", "m"}});
  const auto back = record_from_json(record_to_json(r));
  CHECK(back.id == r.id);
  CHECK(back.script == r.script);
  CHECK(back.description == r.description);
  CHECK(back.embedding == r.embedding);
  CHECK(back.provenance == r.provenance);
  CHECK(back.created_at == r.created_at);
}

TEST_CASE("concurrent writers keep every record") {
  MotionStore store(hashing());
  std::vector<std::thread> threads;
  for (int t = 0; t < 4; ++t) {
    threads.emplace_back([&store, t] {
      RefusingClient client;
      for (int i = 0; i < 25; ++i) {
        const auto r = store.store("motion " + std::to_string(t), sample_description(), sample_script());
        store.revise(r.id, "set axis 16 to " + std::to_string(i), client);
        (void)store.retrieve("motion", 3);
      }
    });
  }
  for (auto& th : threads) th.join();
  CHECK(store.size() == 100);
  for (const auto& r : store.list()) CHECK(r.revisions.size() == 1);
}
