#include "cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "alterforge/agent_society.hpp"
#include "alterforge/body_model.hpp"
#include "alterforge/completion.hpp"
#include "alterforge/conversation_analytics.hpp"
#include "alterforge/embedder.hpp"
#include "alterforge/error.hpp"
#include "alterforge/eval_stats.hpp"
#include "alterforge/gateway.hpp"
#include "alterforge/llm_pipeline.hpp"
#include "alterforge/motion_engine.hpp"
#include "alterforge/motion_memory.hpp"
#include "alterforge/motion_script.hpp"
#include "alterforge/wire_codec.hpp"

namespace alterforge::cli {

namespace {

namespace fs = std::filesystem;

// Flag values as parsed; unset options fall back to env, then config file, then defaults.
struct Flags {
  std::string config;
  std::string store;
  std::string llm;
  std::string fixtures;
  std::string prompts;
  std::string model;
  std::string embedder;
  int tick_ms = 0;
  bool fast = false;
};

struct Settings {
  std::string store = "alterforge_store.json";
  std::string llm = "mock";
  std::string fixtures;
  std::string prompts;
  std::string model = "gpt-4-0314";
  std::string embedder = "hash";
  int tick_ms = 100;
  bool fast = false;
  int port = 8080;
  std::string host = "127.0.0.1";
};

std::optional<std::string> env(const char* name) {
  const char* v = std::getenv(name);
  if (v == nullptr || *v == '\0') return std::nullopt;
  return std::string(v);
}

nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::storage_io, "cannot read " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::malformed, path + ": " + e.what());
  }
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::storage_io, "cannot read " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::storage_io, "cannot write " + path);
  out << text;
  if (!out) throw Error(Errc::storage_io, "write failed for " + path);
}

class Context {
 public:
  Context(const Flags& flags, const CLI::App& app, std::ostream& out, std::ostream& err)
      : out(out), err(err) {
    nlohmann::json file = nlohmann::json::object();
    const auto config_path = !flags.config.empty() ? std::optional(flags.config) : env("ALTERFORGE_CONFIG");
    if (config_path) file = read_json_file(*config_path);

    auto pick = [&](const char* option, const std::string& flag, const char* env_name, const char* key,
                    std::string& target) {
      if (app.count(option) > 0) {
        target = flag;
      } else if (auto e = env(env_name)) {
        target = *e;
      } else if (file.contains(key) && file[key].is_string()) {
        target = file[key].get<std::string>();
      }
    };
    pick("--store", flags.store, "ALTERFORGE_STORE", "store", settings.store);
    pick("--llm", flags.llm, "ALTERFORGE_LLM", "llm", settings.llm);
    pick("--fixtures", flags.fixtures, "ALTERFORGE_FIXTURES", "fixtures", settings.fixtures);
    pick("--prompts", flags.prompts, "ALTERFORGE_PROMPTS", "prompts", settings.prompts);
    pick("--model", flags.model, "ALTERFORGE_MODEL", "model", settings.model);
    pick("--embedder", flags.embedder, "ALTERFORGE_EMBEDDER", "embedder", settings.embedder);

    if (app.count("--tick") > 0) {
      settings.tick_ms = flags.tick_ms;
    } else if (auto e = env("ALTERFORGE_TICK_MS")) {
      settings.tick_ms = std::stoi(*e);
    } else if (file.contains("tick_ms")) {
      settings.tick_ms = file["tick_ms"].get<int>();
    }
    if (app.count("--fast") > 0) {
      settings.fast = flags.fast;
    } else if (auto e = env("ALTERFORGE_FAST")) {
      settings.fast = *e == "1" || *e == "true";
    } else if (file.contains("fast")) {
      settings.fast = file["fast"].get<bool>();
    }
    if (auto e = env("ALTERFORGE_PORT")) {
      settings.port = std::stoi(*e);
    } else if (file.contains("port")) {
      settings.port = file["port"].get<int>();
    }
    if (file.contains("host") && file["host"].is_string()) settings.host = file["host"].get<std::string>();

    if (settings.llm != "mock" && settings.llm != "live") {
      throw Error(Errc::invalid_argument, "--llm must be 'mock' or 'live'");
    }
    if (settings.embedder != "hash" && settings.embedder != "live") {
      throw Error(Errc::invalid_argument, "--embedder must be 'hash' or 'live'");
    }
    pipeline.model = settings.model;
    engine.tick_ms = settings.tick_ms;
    engine.validate();
    templates = settings.prompts.empty() ? PromptTemplates::builtin() : PromptTemplates::load(settings.prompts);
  }

  std::shared_ptr<CompletionClient> client() {
    if (!client_) {
      if (settings.llm == "live") {
        client_ = HttpCompletionClient::from_environment();
      } else {
        auto fixtures = settings.fixtures.empty() ? std::make_shared<FixtureClient>(std::map<std::string, std::string>{})
                                                  : std::make_shared<FixtureClient>(FixtureClient::from_file(settings.fixtures));
        client_ = std::make_shared<FallbackClient>(fixtures, std::make_shared<SyntheticClient>());
      }
    }
    return client_;
  }

  std::shared_ptr<const Embedder> embedder() {
    if (!embedder_) {
      if (settings.embedder == "live") {
        const auto url = env("ALTERFORGE_LLM_URL");
        if (!url) throw Error(Errc::invalid_argument, "ALTERFORGE_LLM_URL is not set");
        embedder_ = std::make_shared<HttpEmbedder>(*url, env("ALTERFORGE_LLM_KEY").value_or(""));
      } else {
        embedder_ = std::make_shared<HashingEmbedder>();
      }
    }
    return embedder_;
  }

  std::shared_ptr<MotionStore> store() {
    if (!store_) store_ = MotionStore::open(settings.store, embedder());
    return store_;
  }

  Settings settings;
  PipelineConfig pipeline;
  EngineConfig engine;
  PromptTemplates templates;
  std::ostream& out;
  std::ostream& err;

 private:
  std::shared_ptr<CompletionClient> client_;
  std::shared_ptr<const Embedder> embedder_;
  std::shared_ptr<MotionStore> store_;
};

void print_record(std::ostream& out, const MotionRecord& r) {
  out << "id: " << r.id << "\n";
  out << "label: " << r.label << "\n";
  out << "segments: " << segment_marks(r.script).size() << ", duration: " << format_duration(total_duration_ms(r.script))
      << " s, revisions: " << r.revisions.size() << "\n";
  out << "description:\n";
  for (std::size_t i = 0; i < r.description.lines.size(); ++i) out << "  " << i + 1 << ". " << r.description.lines[i] << "\n";
  out << "script:\n" << serialize(r.script);
}

MotionScript load_script_arg(Context& ctx, const std::string& arg, std::string& label) {
  std::error_code ec;
  if (fs::is_regular_file(arg, ec)) {
    auto parsed = parse(read_text_file(arg));
    if (!parsed) throw Error(Errc::invalid_script, arg + ": " + parsed.error().describe());
    label = parsed->name.empty() ? fs::path(arg).stem().string() : parsed->name;
    return parsed.value();
  }
  const auto record = ctx.store()->fetch(arg);
  label = record.label;
  return record.script;
}

std::vector<HumanMessage> parse_humans(const std::vector<std::string>& specs) {
  std::vector<HumanMessage> humans;
  for (const auto& spec : specs) {
    const auto colon = spec.find(':');
    if (colon == std::string::npos || colon == 0) {
      throw Error(Errc::invalid_argument, "--human expects INDEX:TEXT, got '" + spec + "'");
    }
    HumanMessage h;
    try {
      h.index = std::stoi(spec.substr(0, colon));
    } catch (const std::exception&) {
      throw Error(Errc::invalid_argument, "--human index must be an integer: '" + spec + "'");
    }
    h.text = spec.substr(colon + 1);
    humans.push_back(std::move(h));
  }
  return humans;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"alterforge: language-driven motion generation for a 43-axis android"};
  app.require_subcommand(1);
  app.fallthrough();  // global options may follow the verb
  app.set_help_all_flag("--help-all", "Show help for every verb");

  Flags flags;
  app.add_option("--config", flags.config, "JSON config file (ALTERFORGE_CONFIG)");
  app.add_option("--store", flags.store, "Motion store file (ALTERFORGE_STORE)");
  app.add_option("--llm", flags.llm, "Completion backend: mock or live (ALTERFORGE_LLM)");
  app.add_option("--fixtures", flags.fixtures, "Recorded completions for the mock backend (ALTERFORGE_FIXTURES)");
  app.add_option("--prompts", flags.prompts, "Directory overriding the built-in prompt templates");
  app.add_option("--model", flags.model, "Model name sent to the live backend");
  app.add_option("--embedder", flags.embedder, "Embedder: hash or live");
  app.add_option("--tick", flags.tick_ms, "Engine tick in ms, 100..150 (ALTERFORGE_TICK_MS)");
  app.add_flag("--fast", flags.fast, "Playback without real-time pacing");

  // generate
  auto* gen = app.add_subcommand("generate", "Describe, compile and store a motion for an instruction");
  std::string instruction, gen_label;
  bool gen_json = false;
  gen->add_option("instruction", instruction, "Instruction, e.g. \"take a selfie\"")->required();
  gen->add_option("--label", gen_label, "Store under this label instead of the instruction");
  gen->add_flag("--json", gen_json, "Print the record as JSON");

  // play
  auto* play = app.add_subcommand("play", "Execute a stored motion or a .motion file");
  std::string play_target, trace_path, frames_path;
  bool play_json = false;
  play->add_option("target", play_target, "Record id or script file")->required();
  play->add_option("--trace", trace_path, "Write the sampled trace as CSV");
  play->add_option("--frames", frames_path, "Write the encoded wire frames");
  play->add_flag("--json", play_json, "Print the trace as JSON");

  // feedback
  auto* fb = app.add_subcommand("feedback", "Revise a stored motion from verbal feedback");
  std::string fb_id;
  std::vector<std::string> fb_words;
  fb->add_option("id", fb_id, "Record id")->required();
  fb->add_option("text", fb_words, "Feedback, e.g. \"Set axis 16 to 255\"")->required();

  // memory
  auto* mem = app.add_subcommand("memory", "Inspect and move the motion store");
  mem->require_subcommand(1);
  auto* mem_list = mem->add_subcommand("list", "List records");
  auto* mem_show = mem->add_subcommand("show", "Show one record");
  std::string show_id;
  bool show_json = false;
  mem_show->add_option("id", show_id)->required();
  mem_show->add_flag("--json", show_json);
  auto* mem_export = mem->add_subcommand("export", "Write every record to a file");
  std::string export_path;
  mem_export->add_option("path", export_path)->required();
  auto* mem_import = mem->add_subcommand("import", "Add records from an exported file");
  std::string import_path;
  mem_import->add_option("path", import_path)->required();
  auto* mem_search = mem->add_subcommand("search", "Retrieve records similar to a query");
  std::string search_query;
  std::size_t search_k = 5;
  double search_threshold = kDefaultRetrievalThreshold;
  mem_search->add_option("query", search_query)->required();
  mem_search->add_option("-k", search_k);
  mem_search->add_option("--threshold", search_threshold);

  // converse
  auto* conv = app.add_subcommand("converse", "Run an agent conversation and print its transcript");
  int turns = 12;
  std::string mode = "random";
  std::uint64_t seed = 1;
  std::string conv_out, session_file;
  std::vector<std::string> human_specs;
  bool no_motion = false, persist = false;
  conv->add_option("--turns", turns, "Number of turns")->check(CLI::PositiveNumber);
  conv->add_option("--mode", mode, "fixed or random")->check(CLI::IsMember({"fixed", "random"}));
  conv->add_option("--seed", seed, "Scheduler seed");
  conv->add_option("--out", conv_out, "Write the JSONL transcript here instead of stdout");
  conv->add_option("--session", session_file, "Session config file (turns, mode, seed, humans)");
  conv->add_option("--human", human_specs, "Scheduled human message INDEX:TEXT (repeatable)");
  conv->add_flag("--no-motion", no_motion, "Do not attach motions to turns");
  conv->add_flag("--persist", persist, "Keep generated motions in the configured store");

  // analyze
  auto* an = app.add_subcommand("analyze", "Trajectory, attractor and word windows of a transcript");
  std::string transcript_path, traj_csv, words_csv;
  AnalysisOptions an_opts;
  bool an_json = false;
  an->add_option("transcript", transcript_path)->required();
  an->add_option("--window", an_opts.attractor_window, "Attractor window in turns")->check(CLI::PositiveNumber);
  an->add_option("--fraction", an_opts.attractor_fraction, "Farewell fraction threshold");
  an->add_option("--width", an_opts.word_window, "Word window width in turns")->check(CLI::PositiveNumber);
  an->add_option("--trajectory", traj_csv, "Write turn,x,y CSV");
  an->add_option("--words", words_csv, "Write window,word,count CSV");
  an->add_flag("--json", an_json);

  // stats
  auto* stats = app.add_subcommand("stats", "Friedman and Nemenyi tests on a rating matrix");
  stats->require_subcommand(1);
  auto* stats_run = stats->add_subcommand("run", "Run the significance report");
  std::string ratings_path;
  double alpha = 0.001;
  bool stats_json = false, tie_correction = false;
  stats_run->add_option("ratings", ratings_path, "CSV: labels row, then one row per subject")->required();
  stats_run->add_option("--alpha", alpha, "Significance level");
  stats_run->add_flag("--json", stats_json);
  stats_run->add_flag("--tie-correction", tie_correction, "Apply the tie correction factor");

  // serve
  auto* serve = app.add_subcommand("serve", "Run the HTTP service");
  int port = 0;
  std::string host;
  serve->add_option("--port", port, "Port (ALTERFORGE_PORT, default 8080)");
  serve->add_option("--host", host, "Bind address (default 127.0.0.1)");

  // table
  auto* table = app.add_subcommand("table", "Print the axis table as TSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    Context ctx(flags, app, out, err);

    if (*gen) {
      auto generated = generate(instruction, *ctx.client(), ctx.pipeline, default_table(), ctx.templates);
      const auto record = ctx.store()->store(gen_label.empty() ? instruction : gen_label,
                                             std::move(generated.description), std::move(generated.script),
                                             generated.provenance.to_json());
      if (gen_json) {
        out << record_view(record).dump(2) << "\n";
      } else {
        print_record(out, record);
      }
    } else if (*play) {
      std::string label;
      const auto script = load_script_arg(ctx, play_target, label);
      const auto trace = execute(script, neutral_pose(), ctx.engine);
      if (!trace_path.empty()) write_text_file(trace_path, trace_to_csv(trace));
      if (!frames_path.empty()) {
        std::ofstream fout(frames_path, std::ios::binary | std::ios::trunc);
        if (!fout) throw Error(Errc::storage_io, "cannot write " + frames_path);
        write_frames(fout, encode_frames(trace));
      }
      if (play_json) {
        out << trace_to_json(trace).dump() << "\n";
      } else {
        out << "played '" << label << "': " << trace.samples.size() << " samples, " << trace.duration_ms()
            << " ms, tick " << trace.tick_ms << " ms\n";
        for (const auto& e : trace.events) out << "  " << e.t_ms << " ms  " << e.segment_label << "\n";
      }
    } else if (*fb) {
      std::string text;
      for (const auto& w : fb_words) text += (text.empty() ? "" : " ") + w;
      const auto record = ctx.store()->revise(fb_id, text, *ctx.client(), ctx.pipeline, ctx.templates);
      out << "revision " << record.revisions.size() << " (" << to_string(record.revisions.back().kind) << ")\n";
      out << serialize(record.script);
    } else if (*mem) {
      auto store = ctx.store();
      if (*mem_list) {
        for (const auto& r : store->list()) {
          out << r.id << "\t" << r.label << "\t" << segment_marks(r.script).size() << " segments\t"
              << r.revisions.size() << " revisions\n";
        }
      } else if (*mem_show) {
        const auto r = store->fetch(show_id);
        if (show_json) {
          out << record_to_json(r).dump(2) << "\n";
        } else {
          print_record(out, r);
        }
      } else if (*mem_export) {
        out << "exported " << store->export_store(export_path) << " records\n";
      } else if (*mem_import) {
        out << "imported " << store->import_store(import_path) << " records\n";
      } else if (*mem_search) {
        for (const auto& h : store->retrieve(search_query, search_k, search_threshold)) {
          char score[32];
          std::snprintf(score, sizeof score, "%.6f", h.score);
          out << h.record.id << "\t" << score << "\t" << h.record.label << "\n";
        }
      }
    } else if (*conv) {
      SessionConfig session;
      if (!session_file.empty()) session = SessionConfig::from_json(read_json_file(session_file));
      if (conv->count("--turns") > 0 || session_file.empty()) session.turns = turns;
      if (conv->count("--mode") > 0 || session_file.empty()) session.mode = parse_scheduler_mode(mode);
      if (conv->count("--seed") > 0 || session_file.empty()) session.seed = seed;
      for (auto& h : parse_humans(human_specs)) session.human_queue.push_back(std::move(h));
      if (no_motion) session.motion_hook = false;

      std::shared_ptr<MotionStore> motions =
          persist ? ctx.store() : std::make_shared<MotionStore>(ctx.embedder(), std::nullopt, [] { return std::int64_t{0}; });
      SocietyParams params;
      params.pipeline = ctx.pipeline;
      AgentSociety society(session, ctx.embedder(), *ctx.client(), motions.get(), params, default_profiles(),
                           ctx.templates);
      const auto transcript = society.run();
      if (conv_out.empty()) {
        write_transcript_jsonl(out, transcript);
      } else {
        write_text_file(conv_out, transcript_to_jsonl(transcript));
        err << "wrote " << transcript.size() << " turns to " << conv_out << "; motion store holds " << motions->size()
            << " records\n";
      }
    } else if (*an) {
      const auto transcript = load_transcript(transcript_path);
      const auto report = analyze_transcript(transcript, *ctx.embedder(), an_opts);
      if (!traj_csv.empty()) write_text_file(traj_csv, trajectory_to_csv(report.trajectory));
      if (!words_csv.empty()) write_text_file(words_csv, word_windows_to_csv(report.windows));
      if (an_json) {
        out << report.to_json().dump(2) << "\n";
      } else {
        out << "turns: " << transcript.size() << "\n";
        out << "trajectory points: " << report.trajectory.size() << "\n";
        if (report.attractor.detected) {
          out << "good-bye attractor: detected at turn " << *report.attractor.entry_turn << "\n";
        } else {
          out << "good-bye attractor: not detected\n";
        }
        out << "word windows: " << report.windows.size() << "\n";
        for (const auto& w : report.windows) {
          std::vector<std::pair<std::string, int>> top(w.counts.begin(), w.counts.end());
          std::stable_sort(top.begin(), top.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
          out << "  [" << w.window_start << ", " << w.window_end << "):";
          for (std::size_t i = 0; i < top.size() && i < 5; ++i) out << " " << top[i].first << "=" << top[i].second;
          out << "\n";
        }
      }
    } else if (*stats) {
      const auto report = significance_report(load_ratings_csv(ratings_path), alpha, tie_correction);
      if (stats_json) {
        out << report.to_json().dump(2) << "\n";
      } else {
        out << report.text();
      }
    } else if (*serve) {
      GatewayOptions options;
      options.engine = ctx.engine;
      options.fast = ctx.settings.fast;
      options.pipeline = ctx.pipeline;
      options.society.pipeline = ctx.pipeline;
      Gateway gateway({ctx.client(), ctx.embedder(), ctx.store()}, options);
      const int bind_port = serve->count("--port") > 0 ? port : ctx.settings.port;
      const std::string bind_host = host.empty() ? ctx.settings.host : host;
      err << "serving /v1 on http://" << bind_host << ":" << bind_port << " (llm=" << ctx.settings.llm << ")\n";
      gateway.listen(bind_host, bind_port);
    } else if (*table) {
      out << render_table_tsv(default_table());
    }
    return 0;
  } catch (const Error& e) {
    err << "error [" << to_string(e.code()) << "]: " << e.what() << "\n";
    if (const auto* cf = dynamic_cast<const CompileFailed*>(&e)) {
      for (const auto& pe : cf->parse_errors()) err << "  " << pe.describe() << "\n";
    }
    return e.code() == Errc::invalid_argument ? 2 : 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace alterforge::cli
