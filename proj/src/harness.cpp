#include "attncausal/harness.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "attncausal/fci.hpp"
#include "attncausal/json_io.hpp"
#include "attncausal/scm.hpp"

namespace attncausal {

namespace {

std::string num(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace

SimulateSummary cmd_simulate(const SimulateOptions& o) {
  if (o.seeds < 0) throw ArgumentError("simulate: seed count must be >= 0");
  SimulateSummary out;
  int matches = 0;
  for (int s = 0; s < o.seeds; ++s) {
    RandomScmParams params;
    params.n = o.n;
    params.edge_density = o.density;
    params.n_latent = o.n_latent;
    params.seed = o.first_seed + static_cast<std::uint64_t>(s);
    const ScmModel scm = random_scm(params);
    const Pag truth = ground_truth_pag(scm);

    const Eigen::MatrixXd full =
        scm.has_identity_noise() ? output_covariance(total_effect_matrix(scm)) : analytic_covariance(scm);
    const auto obs = scm.observed();
    const auto m = static_cast<Eigen::Index>(obs.size());
    Eigen::MatrixXd cov(m, m);
    for (Eigen::Index i = 0; i < m; ++i)
      for (Eigen::Index j = 0; j < m; ++j) cov(i, j) = full(obs[i], obs[j]);
    const CorrelationModel corr = correlation_from_cov(cov, o.n_eff, o.mode);
    const PagLearning learned = learn_pag_detailed(make_ci_oracle(corr, o.alpha), static_cast<int>(m));

    SimulateRow row;
    row.seed = params.seed;
    row.observed = static_cast<int>(m);
    row.latent = static_cast<int>(scm.latent().size());
    row.true_edges = truth.edge_count();
    row.learned_edges = learned.pag.edge_count();
    row.match = pag_equal(learned.pag, truth);
    row.ci_tests = learned.ci_tests;
    matches += row.match ? 1 : 0;
    out.rows.push_back(row);
  }
  out.match_rate = o.seeds == 0 ? 1.0 : static_cast<double>(matches) / o.seeds;
  return out;
}

std::string simulate_csv(const SimulateSummary& s) {
  std::ostringstream os;
  os << "seed,observed,latent,true_edges,learned_edges,match,ci_tests\n";
  for (const auto& r : s.rows)
    os << r.seed << ',' << r.observed << ',' << r.latent << ',' << r.true_edges << ',' << r.learned_edges << ','
       << (r.match ? 1 : 0) << ',' << r.ci_tests << '\n';
  return os.str();
}

DiscoverResult cmd_discover(const nlohmann::json& attention, const DiscoverOptions& o) {
  const AttentionTensor t = attention_from_json(attention);
  const AggregatedAttention a = deepest_attention(t, o.head_agg);
  const CorrelationModel corr = correlation_from_cov(output_covariance(a.matrix), o.n_eff, o.mode);
  PagLearning learned = learn_pag_detailed(make_ci_oracle(corr, o.alpha), corr.size(), {}, t.tokens());
  DiscoverResult out{learned.pag, learned.warnings, pag_to_json(learned.pag)};
  out.json["meta"] = {{"learner", kPagLearnerName},
                      {"head_agg", o.head_agg.to_string()},
                      {"mode", ci_mode_name(o.mode)},
                      {"alpha", o.alpha},
                      {"n_eff", o.n_eff},
                      {"ci_tests", learned.ci_tests},
                      {"warnings", learned.warnings}};
  return out;
}

ExplainMethod parse_method(std::string_view text) {
  if (text == "cleann") return ExplainMethod::cleann;
  if (text == "pure") return ExplainMethod::pure;
  if (text == "smart") return ExplainMethod::smart;
  throw ArgumentError("method: expected cleann, pure or smart, got '" + std::string(text) + "'");
}

const char* method_name(ExplainMethod m) {
  switch (m) {
    case ExplainMethod::cleann: return "cleann";
    case ExplainMethod::pure: return "pure";
    case ExplainMethod::smart: return "smart";
  }
  return "cleann";
}

ExplainRun cmd_explain(const OracleTrace& trace, ExplainMethod method, const CleannConfig& config,
                       const std::vector<std::vector<std::string>>& sessions) {
  ExplainRun run;
  const auto& list = sessions.empty() ? trace.meta.sessions : sessions;
  if (list.empty()) {
    run.warnings.push_back(trace.records.empty() ? "trace is empty; nothing to explain"
                                                 : "trace lists no sessions; nothing to explain");
    return run;
  }
  ReplayOracle oracle(trace);
  for (const auto& s : list) {
    int length = 0;
    for (const auto& tok : s)
      if (!config.mask_token || tok != *config.mask_token) ++length;
    nlohmann::json line;
    try {
      ExplanationResult r;
      switch (method) {
        case ExplainMethod::cleann: r = cleann(s, oracle, config).result; break;
        case ExplainMethod::pure: r = pure_attention_baseline(s, oracle, config); break;
        case ExplainMethod::smart: r = smart_attention_baseline(s, oracle, config); break;
      }
      line = explanation_to_json(r);
    } catch (const Error& e) {
      line = {{"set", nlohmann::json::array()},
              {"set_tokens", nlohmann::json::array()},
              {"alternative", nullptr},
              {"radius", 0},
              {"queries", 0},
              {"status", "error"},
              {"error", e.what()}};
    }
    line["session"] = s;
    line["method"] = method_name(method);
    line["length"] = length;
    run.results.push_back(std::move(line));

    if (!s.empty()) {
      const auto it = trace.records.find(canonical_key(s));
      if (it != trace.records.end()) {
        std::vector<std::string> tokens;
        for (const auto& p : it->second.top_k) tokens.push_back(p.token);
        run.top_k.push_back({{"session", s}, {"top_k", tokens}});
      }
    }
  }
  return run;
}

MetricsReport cmd_metrics(const std::vector<nlohmann::json>& results, const std::vector<nlohmann::json>& top_k) {
  std::map<std::string, std::vector<std::string>> lists;
  int k = 0;
  for (const auto& j : top_k) {
    try {
      const auto s = j.at("session").get<std::vector<std::string>>();
      auto l = j.at("top_k").get<std::vector<std::string>>();
      k = std::max(k, static_cast<int>(l.size()));
      lists[canonical_key(s)] = std::move(l);
    } catch (const nlohmann::json::exception& e) {
      throw ArgumentError(std::string("metrics: bad top-k record: ") + e.what());
    }
  }

  MetricsReport rep;
  rep.k = k;
  std::map<std::pair<std::string, int>, std::pair<int, std::vector<int>>> by_length;
  std::map<std::string, std::vector<int>> pos_counts;  // size k + 2
  for (const auto& j : results) {
    std::vector<std::string> session;
    std::string method;
    int length = 0;
    bool found = false;
    std::vector<int> set;
    std::optional<std::string> alt;
    try {
      session = j.at("session").get<std::vector<std::string>>();
      method = j.value("method", std::string("unknown"));
      length = j.value("length", static_cast<int>(session.size()));
      const std::string status = j.value("status", std::string("error"));
      found = !j.contains("error") && status == "found";
      if (found) {
        set = j.at("set").get<std::vector<int>>();
        alt = j.at("alternative").at("token").get<std::string>();
      }
    } catch (const nlohmann::json::exception& e) {
      throw ArgumentError(std::string("metrics: bad result record: ") + e.what());
    }
    const auto it = lists.find(canonical_key(session));
    if (it == lists.end())
      throw ArgumentError("metrics: no original top-k for session [" + printable_key(canonical_key(session)) + "]");

    ++rep.records;
    auto& bucket = by_length[{method, length}];
    ++bucket.first;
    auto& counts = pos_counts[method];
    counts.resize(static_cast<std::size_t>(k) + 2, 0);
    if (!found) {
      ++counts[k + 1];
      continue;
    }
    bucket.second.push_back(static_cast<int>(set.size()));
    rep.set_sizes[method].push_back(static_cast<int>(set.size()));
    const auto& l = it->second;
    const auto where = std::find(l.begin(), l.end(), *alt);
    if (where == l.end())
      ++counts[k];
    else
      ++counts[where - l.begin()];
  }

  for (auto& [m, sizes] : rep.set_sizes) std::sort(sizes.begin(), sizes.end());
  for (const auto& [key, val] : by_length) {
    LengthBucket b;
    b.method = key.first;
    b.length = key.second;
    b.count = val.first;
    b.found = static_cast<int>(val.second.size());
    if (b.found > 0) {
      double sum = 0.0;
      for (int v : val.second) sum += v;
      b.mean = sum / b.found;
      double sq = 0.0;
      for (int v : val.second) sq += (v - b.mean) * (v - b.mean);
      b.std = std::sqrt(sq / b.found);
    }
    rep.buckets.push_back(b);
  }
  for (const auto& [m, counts] : pos_counts) {
    auto& out = rep.positions[m];
    for (int i = 0; i < k; ++i) out.emplace_back(std::to_string(i + 1), counts[i]);
    out.emplace_back("out", counts[k]);
    out.emplace_back("none", counts[k + 1]);
  }
  return rep;
}

void write_metrics(const MetricsReport& rep, const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  auto open = [&](const std::string& name) {
    std::ofstream f(std::filesystem::path(out_dir) / name);
    if (!f) throw ArgumentError("cannot write " + name + " in " + out_dir);
    return f;
  };
  {
    auto f = open("set_sizes.csv");
    f << "method,index,set_size\n";
    for (const auto& [m, sizes] : rep.set_sizes)
      for (std::size_t i = 0; i < sizes.size(); ++i) f << m << ',' << i + 1 << ',' << sizes[i] << '\n';
  }
  {
    auto f = open("length_buckets.csv");
    f << "method,length,count,found,mean,std\n";
    for (const auto& b : rep.buckets) {
      f << b.method << ',' << b.length << ',' << b.count << ',' << b.found << ',';
      if (b.found > 0) f << num(b.mean) << ',' << num(b.std);
      else f << ',';
      f << '\n';
    }
  }
  {
    auto f = open("replacement_positions.csv");
    f << "method,position,count\n";
    for (const auto& [m, counts] : rep.positions)
      for (const auto& [pos, c] : counts) f << m << ',' << pos << ',' << c << '\n';
  }
}

std::vector<nlohmann::json> read_jsonl_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("cannot open " + path);
  std::vector<nlohmann::json> out;
  std::string line;
  std::size_t no = 0;
  while (std::getline(in, line)) {
    ++no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(parse_json_line(line, no));
  }
  return out;
}

}  // namespace attncausal
