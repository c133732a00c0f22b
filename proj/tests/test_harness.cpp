#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "attncausal/errors.hpp"
#include "attncausal/harness.hpp"
#include "attncausal/json_io.hpp"
#include "support/brute.hpp"
#include "support/fixtures.hpp"

using namespace attncausal;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

using Tokens = std::vector<std::string>;

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("attncausal_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

int run_cli(const std::string& args) {
  const std::string cmd = std::string(ATTNCAUSAL_CLI) + " " + args + " 2>/dev/null >/dev/null";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

json result(const Tokens& session, const std::string& method, const std::string& status, std::vector<int> set = {},
            const std::string& alt = "") {
  json j{{"session", session}, {"method", method}, {"status", status}, {"set", set}, {"length", session.size()}};
  j["alternative"] = alt.empty() ? json(nullptr) : json{{"token", alt}, {"score", 0.5}};
  return j;
}

}  // namespace

TEST(Simulate, EmptyGraphsAlwaysMatch) {
  SimulateOptions o;
  o.n = 5;
  o.density = 0.0;
  o.seeds = 10;
  const auto s = cmd_simulate(o);
  EXPECT_EQ(s.match_rate, 1.0);
  EXPECT_EQ(s.rows.size(), 10u);
  for (const auto& r : s.rows) EXPECT_EQ(r.learned_edges, 0);
  const std::string csv = simulate_csv(s);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "seed,observed,latent,true_edges,learned_edges,match,ci_tests");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 11);
}

TEST(Simulate, ExactModeRecoversTruthWithLatents) {
  SimulateOptions o;
  o.n = 6;
  o.density = 0.4;
  o.n_latent = 1;
  o.seeds = 25;
  EXPECT_EQ(cmd_simulate(o).match_rate, 1.0);
  o.seeds = -1;
  EXPECT_THROW(cmd_simulate(o), ArgumentError);
}

TEST(Discover, IdentityAttentionGivesEmptyGraph) {
  const auto t = AttentionTensor::from_matrix(Eigen::MatrixXd::Identity(3, 3), {"a", "b", "c"}, true);
  const auto res = cmd_discover(attention_to_json(t), {});
  EXPECT_EQ(res.pag.edge_count(), 0);
  EXPECT_EQ(res.json["meta"]["mode"], "exact");
  EXPECT_EQ(res.json["labels"][2], "c");
}

TEST(Discover, ChainAttentionGivesChain) {
  const auto t = AttentionTensor::from_matrix(total_effect_matrix(fixtures::chain3()), {"a", "b", "c"}, false);
  const auto res = cmd_discover(attention_to_json(t), {});
  Pag expected(3);
  expected.add_edge(0, 1, Mark::circle, Mark::circle);
  expected.add_edge(1, 2, Mark::circle, Mark::circle);
  EXPECT_TRUE(pag_equal(res.pag, expected));
  EXPECT_EQ(pag_from_json(res.json), res.pag);
}

TEST(Discover, MalformedFileReportsLine) {
  const auto dir = scratch("discover");
  spit(dir / "bad.json", "{\n \"layers\": [\n  [1, 2,\n");
  try {
    read_json_file((dir / "bad.json").string());
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_GE(e.line(), 3u);
  }
  EXPECT_EQ(run_cli("discover " + (dir / "bad.json").string() + " --out " + (dir / "out.json").string()), 2);
}

TEST(Explain, EmptyTraceWarns) {
  const auto run = cmd_explain(OracleTrace{}, ExplainMethod::cleann, {});
  EXPECT_TRUE(run.results.empty());
  ASSERT_EQ(run.warnings.size(), 1u);
  EXPECT_NE(run.warnings[0].find("empty"), std::string::npos);
}

TEST(Explain, RunsEachMethodAndRecordsErrors) {
  const Tokens s{"I1", "I2", "I3", "I4"};
  Tokens abduced = s;
  abduced.push_back("A");
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(5, 5);
  a(4, 2) = 0.7;
  a(4, 1) = 0.6;
  auto trace = brute::scripted_trace(s, abduced, a, [](const std::vector<int>& r) {
    const bool flip = std::find(r.begin(), r.end(), 2) != r.end();
    std::vector<Prediction> p{{"A", 1.0, 0}, {"B", 0.5, 0}};
    if (flip) std::swap(p[0].token, p[1].token);
    return p;
  });
  trace.meta.sessions.push_back({"missing"});
  for (auto m : {ExplainMethod::cleann, ExplainMethod::pure, ExplainMethod::smart}) {
    const auto run = cmd_explain(trace, m, {});
    ASSERT_EQ(run.results.size(), 2u);
    const auto& ok = run.results[0];
    EXPECT_EQ(ok["status"], "found") << method_name(m);
    EXPECT_EQ(ok["set"], json({2})) << method_name(m);
    EXPECT_EQ(ok["method"], method_name(m));
    EXPECT_EQ(ok["length"], 4);
    EXPECT_EQ(run.results[1]["status"], "error");
    EXPECT_NE(run.results[1]["error"].get<std::string>().find("trace miss"), std::string::npos);
    ASSERT_EQ(run.top_k.size(), 1u);
    EXPECT_EQ(run.top_k[0]["top_k"], json({"A", "B"}));
  }
  EXPECT_EQ(parse_method("smart"), ExplainMethod::smart);
  EXPECT_THROW(parse_method("lime"), ArgumentError);
}

TEST(Metrics, TablesFromHandWrittenResults) {
  const Tokens s1{"a", "b"}, s2{"a", "b", "c"}, s3{"c"};
  const std::vector<json> topk{{{"session", s1}, {"top_k", {"x", "y", "z"}}},
                               {{"session", s2}, {"top_k", {"y", "x", "w"}}},
                               {{"session", s3}, {"top_k", {"x", "y", "z"}}}};
  const std::vector<json> results{result(s1, "cleann", "found", {0}, "y"),
                                  result(s2, "cleann", "found", {0, 2}, "q"),
                                  result(s3, "cleann", "none-at-alpha"),
                                  result(s2, "pure", "found", {0, 1}, "x"),
                                  result(s1, "pure", "found", {1}, "z")};
  const auto rep = cmd_metrics(results, topk);
  EXPECT_EQ(rep.records, 5);
  EXPECT_EQ(rep.k, 3);
  EXPECT_EQ(rep.set_sizes.at("cleann"), (std::vector<int>{1, 2}));
  EXPECT_EQ(rep.set_sizes.at("pure"), (std::vector<int>{1, 2}));
  using Row = std::vector<std::pair<std::string, int>>;
  EXPECT_EQ(rep.positions.at("cleann"), (Row{{"1", 0}, {"2", 1}, {"3", 0}, {"out", 1}, {"none", 1}}));
  EXPECT_EQ(rep.positions.at("pure"), (Row{{"1", 0}, {"2", 1}, {"3", 1}, {"out", 0}, {"none", 0}}));
  ASSERT_EQ(rep.buckets.size(), 5u);
  EXPECT_EQ(rep.buckets[0].method, "cleann");
  EXPECT_EQ(rep.buckets[0].length, 1);
  EXPECT_EQ(rep.buckets[0].found, 0);

  const auto dir = scratch("metrics");
  write_metrics(rep, dir.string());
  EXPECT_EQ(slurp(dir / "set_sizes.csv"), "method,index,set_size\ncleann,1,1\ncleann,2,2\npure,1,1\npure,2,2\n");
  const std::string pos = slurp(dir / "replacement_positions.csv");
  EXPECT_NE(pos.find("cleann,out,1\n"), std::string::npos);
  EXPECT_NE(pos.find("pure,3,1\n"), std::string::npos);
  EXPECT_NE(slurp(dir / "length_buckets.csv").find("cleann,2,1,1,1,0\n"), std::string::npos);
}

TEST(Metrics, StdIsPopulation) {
  const Tokens s{"a", "b", "c", "d"};
  const std::vector<json> topk{{{"session", s}, {"top_k", {"x"}}}};
  const std::vector<json> results{result(s, "m", "found", {0}, "x"), result(s, "m", "found", {0, 1, 2}, "x")};
  const auto rep = cmd_metrics(results, topk);
  ASSERT_EQ(rep.buckets.size(), 1u);
  EXPECT_EQ(rep.buckets[0].mean, 2.0);
  EXPECT_EQ(rep.buckets[0].std, 1.0);
}

TEST(Metrics, MissingTopKIsAnError) {
  const std::vector<json> results{result({"a"}, "cleann", "found", {0}, "y")};
  EXPECT_THROW(cmd_metrics(results, {}), ArgumentError);
  EXPECT_THROW(cmd_metrics(results, {json{{"session", 3}}}), ArgumentError);
}

TEST(Cli, RecordExplainMetricsPipeline) {
  const auto dir = scratch("cli");
  const auto scm = fixtures::make_scm(5, {{0, 3, 0.9}, {1, 4, 0.5}, {2, 4, 0.6}}, {0, 1, 2, 3, 4});
  const json model{{"scm", scm_to_json(scm)}, {"labels", {"x0", "x1", "x2", "y", "z"}}, {"candidates", {3, 4}}};
  spit(dir / "model.json", model.dump());
  spit(dir / "seqs.jsonl", "[\"x0\", \"x1\", \"x2\"]\n[\"x1\", \"x0\"]\n");
  const std::string d = dir.string() + "/";
  ASSERT_EQ(run_cli("record --model " + d + "model.json --sequences " + d + "seqs.jsonl --depth 2 --abduction --out " +
                    d + "trace.jsonl"),
            0);
  const auto trace = load_trace_file(d + "trace.jsonl");
  EXPECT_EQ(trace.meta.sessions.size(), 2u);

  for (const std::string m : {"cleann", "pure", "smart"})
    ASSERT_EQ(run_cli("explain " + d + "trace.jsonl --method " + m + " --out " + d + m + ".jsonl --top-k-out " + d +
                      "topk.jsonl"),
              0)
        << m;
  const auto lines = read_jsonl_file(d + "cleann.jsonl");
  ASSERT_EQ(lines.size(), 2u);
  EXPECT_EQ(lines[0]["status"], "found");
  EXPECT_EQ(lines[0]["set_tokens"], json({"x1"}));

  ASSERT_EQ(run_cli("metrics --results " + d + "cleann.jsonl --results " + d + "pure.jsonl --results " + d +
                    "smart.jsonl --top-k " + d + "topk.jsonl --out " + d + "tables"),
            0);
  EXPECT_TRUE(fs::exists(dir / "tables" / "set_sizes.csv"));
  EXPECT_TRUE(fs::exists(dir / "tables" / "length_buckets.csv"));
  EXPECT_TRUE(fs::exists(dir / "tables" / "replacement_positions.csv"));

  spit(dir / "empty.jsonl", "");
  EXPECT_EQ(run_cli("explain " + d + "empty.jsonl --out " + d + "none.jsonl"), 0);
  EXPECT_TRUE(read_jsonl_file(d + "none.jsonl").empty());
  EXPECT_EQ(run_cli("explain " + d + "missing.jsonl --out " + d + "x.jsonl"), 1);
  EXPECT_EQ(run_cli("record --sequences " + d + "seqs.jsonl --out " + d + "t2.jsonl"), 1);
}
