// attncausal: simulate, discover, explain, metrics and record.
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"

#include "attncausal/harness.hpp"
#include "attncausal/json_io.hpp"

using namespace attncausal;

namespace {

struct Common {
  double alpha = 0.05;
  std::string mode = "exact";
  double n_eff = kDefaultEffectiveSamples;
  std::string head_agg = "mean";
  std::uint64_t seed = 0;
  std::string out;
};

void add_common(CLI::App* app, Common& c, bool with_seed) {
  app->add_option("--alpha", c.alpha, "CI significance level")->check(CLI::Range(0.0, 1.0));
  app->add_option("--mode", c.mode, "CI mode: exact or fisher");
  app->add_option("--n-eff", c.n_eff, "effective sample size for Fisher-z");
  app->add_option("--head-agg", c.head_agg, "mean, max or head:K");
  if (with_seed) app->add_option("--seed", c.seed, "first seed");
  app->add_option("--out", c.out, "output path");
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream f(path);
  if (!f) throw ArgumentError("cannot write " + path);
  f << text;
}

std::vector<std::vector<std::string>> read_sessions(const std::string& path) {
  std::vector<std::vector<std::string>> out;
  for (const auto& j : read_jsonl_file(path)) {
    try {
      out.push_back(j.is_object() ? j.at("session").get<std::vector<std::string>>()
                                  : j.get<std::vector<std::string>>());
    } catch (const nlohmann::json::exception& e) {
      throw ArgumentError("sessions file " + path + ": " + e.what());
    }
  }
  return out;
}

std::string jsonl(const std::vector<nlohmann::json>& lines) {
  std::string s;
  for (const auto& l : lines) s += l.dump() + "\n";
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Causal discovery over attention and explanations of model predictions"};
  app.require_subcommand(1);

  Common sim_c;
  SimulateOptions sim;
  auto* simulate = app.add_subcommand("simulate", "learned PAG vs ground truth over random SCMs");
  simulate->add_option("--n", sim.n, "nodes per SCM");
  simulate->add_option("--density", sim.density, "edge probability");
  simulate->add_option("--latent", sim.n_latent, "latent confounders to place");
  simulate->add_option("--seeds", sim.seeds, "number of SCMs");
  add_common(simulate, sim_c, true);

  Common disc_c;
  std::string attention_path;
  auto* discover = app.add_subcommand("discover", "learn a PAG from an attention tensor");
  discover->add_option("attention", attention_path, "attention tensor JSON")->required();
  add_common(discover, disc_c, false);

  Common exp_c;
  std::string trace_path, method = "cleann", target = "append", sessions_path, topk_out;
  std::optional<std::string> mask;
  CleannConfig cfg;
  auto* explain = app.add_subcommand("explain", "explain each session of a replay trace");
  explain->add_option("trace", trace_path, "trace JSONL")->required();
  explain->add_option("--method", method, "cleann, pure or smart");
  explain->add_option("--target", target, "append or class_token");
  explain->add_option("--class-position", cfg.class_position, "class token position");
  explain->add_option("--mask", mask, "mask token");
  explain->add_option("--k", cfg.k, "predictions per query");
  explain->add_option("--max-cond", cfg.max_cond, "largest conditioning set (-1: unbounded)");
  explain->add_option("--cap", cfg.cap, "candidate sets per radius");
  explain->add_option("--sessions", sessions_path, "JSONL of sessions to explain");
  explain->add_option("--top-k-out", topk_out, "write the original top-k lists here");
  add_common(explain, exp_c, false);

  std::vector<std::string> result_paths;
  std::string topk_path, metrics_out;
  auto* metrics = app.add_subcommand("metrics", "set-size and replacement-position tables");
  metrics->add_option("--results", result_paths, "explain output JSONL")->required();
  metrics->add_option("--top-k", topk_path, "original top-k JSONL")->required();
  metrics->add_option("--out", metrics_out, "output directory")->required();

  std::string rec_model, rec_sequences, rec_resume, rec_out, rec_host = "127.0.0.1";
  int rec_port = 0, rec_depth = 2, rec_k = 5;
  bool rec_abduction = false;
  std::optional<std::string> rec_mask;
  auto* record = app.add_subcommand("record", "record a replay trace from a synthetic or HTTP oracle");
  record->add_option("--model", rec_model, "synthetic oracle JSON {scm, labels, candidates}");
  record->add_option("--host", rec_host, "HTTP oracle host");
  record->add_option("--port", rec_port, "HTTP oracle port (selects the HTTP oracle)");
  record->add_option("--sequences", rec_sequences, "JSONL of token lists")->required();
  record->add_option("--depth", rec_depth, "deletion closure depth");
  record->add_option("--k", rec_k, "predictions per query");
  record->add_flag("--abduction", rec_abduction, "also record the abduced sequence");
  record->add_option("--mask", rec_mask, "mask token");
  record->add_option("--resume", rec_resume, "continue from this trace");
  record->add_option("--out", rec_out, "trace output")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*simulate) {
      sim.alpha = sim_c.alpha;
      sim.mode = parse_ci_mode(sim_c.mode);
      sim.n_eff = sim_c.n_eff;
      sim.first_seed = sim_c.seed;
      const auto summary = cmd_simulate(sim);
      const nlohmann::json j{{"seeds", sim.seeds},
                             {"matches", static_cast<int>(std::lround(summary.match_rate * sim.seeds))},
                             {"match_rate", summary.match_rate},
                             {"learner", kPagLearnerName},
                             {"mode", ci_mode_name(sim.mode)}};
      std::cout << j.dump() << '\n';
      if (!sim_c.out.empty()) write_text(sim_c.out, simulate_csv(summary));
    } else if (*discover) {
      DiscoverOptions o;
      o.alpha = disc_c.alpha;
      o.mode = parse_ci_mode(disc_c.mode);
      o.n_eff = disc_c.n_eff;
      o.head_agg = HeadAggregation::parse(disc_c.head_agg);
      const auto res = cmd_discover(read_json_file(attention_path), o);
      for (const auto& w : res.warnings) std::cerr << "warning: " << w << '\n';
      write_text(disc_c.out, res.json.dump(2) + "\n");
      std::cerr << render_marks(res.pag);
    } else if (*explain) {
      cfg.alpha = exp_c.alpha;
      cfg.mode = parse_ci_mode(exp_c.mode);
      cfg.n_eff = exp_c.n_eff;
      cfg.head_agg = HeadAggregation::parse(exp_c.head_agg);
      cfg.target_policy = parse_target_policy(target);
      cfg.mask_token = mask;
      const OracleTrace trace = load_trace_file(trace_path);
      const auto sessions = sessions_path.empty() ? std::vector<std::vector<std::string>>{} : read_sessions(sessions_path);
      const auto run = cmd_explain(trace, parse_method(method), cfg, sessions);
      for (const auto& w : run.warnings) std::cerr << "warning: " << w << '\n';
      write_text(exp_c.out, jsonl(run.results));
      if (!topk_out.empty()) write_text(topk_out, jsonl(run.top_k));
    } else if (*metrics) {
      std::vector<nlohmann::json> results;
      for (const auto& p : result_paths) {
        auto part = read_jsonl_file(p);
        results.insert(results.end(), part.begin(), part.end());
      }
      const auto report = cmd_metrics(results, read_jsonl_file(topk_path));
      write_metrics(report, metrics_out);
      std::cout << nlohmann::json{{"records", report.records}, {"k", report.k}}.dump() << '\n';
    } else if (*record) {
      std::unique_ptr<ModelOracle> oracle;
      if (rec_port > 0) {
        HttpOracleOptions ho;
        ho.host = rec_host;
        ho.port = rec_port;
        auto http = std::make_unique<HttpOracle>(ho);
        http->info();
        oracle = std::move(http);
      } else if (!rec_model.empty()) {
        const auto j = read_json_file(rec_model);
        std::optional<std::string> m;
        if (j.contains("mask") && !j.at("mask").is_null()) m = j.at("mask").get<std::string>();
        oracle = std::make_unique<SyntheticOracle>(scm_from_json(j.at("scm")), j.at("labels").get<std::vector<std::string>>(),
                                                   j.at("candidates").get<std::vector<int>>(), m,
                                                   j.value("normalize_rows", false));
      } else {
        throw ArgumentError("record: give --model or --port");
      }
      RecordOptions ro;
      ro.closure_depth = rec_depth;
      ro.include_abduction = rec_abduction;
      ro.mask_token = rec_mask;
      OracleTrace resume;
      if (!rec_resume.empty()) resume = load_trace_file(rec_resume);
      const auto res = record_trace(*oracle, read_sessions(rec_sequences), rec_k, ro, std::move(resume));
      save_trace_file(rec_out, res.trace);
      if (res.partial) {
        std::cerr << "error: recording stopped early, partial trace written: " << res.error << '\n';
        return 3;
      }
    }
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
