#include "attncausal/cleann.hpp"

#include <algorithm>
#include <deque>
#include <functional>
#include <numeric>
#include <set>

#include "attncausal/fci.hpp"

namespace attncausal {

namespace {

bool arrowish(Mark m) { return m == Mark::head || m == Mark::circle; }

// Whether the triple <u, v, w> may sit inside a PI-path.
bool admits(const Pag& p, int u, int v, int w) {
  return (arrowish(p.mark(u, v)) && arrowish(p.mark(w, v))) || p.adjacent(u, w);
}

bool definite_collider(const Pag& p, int u, int v, int w) {
  return p.mark(u, v) == Mark::head && p.mark(w, v) == Mark::head && !p.adjacent(u, w);
}

void check_node(const Pag& p, int v, const char* what) {
  if (v < 0 || v >= p.size()) throw ArgumentError(std::string(what) + ": node " + std::to_string(v) + " out of range");
}

}  // namespace

bool is_pi_path(const Pag& p, std::span<const int> path) {
  if (path.size() < 2) throw ArgumentError("is_pi_path: a path needs at least two nodes");
  for (int v : path) check_node(p, v, "is_pi_path");
  for (std::size_t i = 0; i + 1 < path.size(); ++i)
    if (!p.adjacent(path[i], path[i + 1]))
      throw ArgumentError("is_pi_path: nodes " + std::to_string(path[i]) + " and " + std::to_string(path[i + 1]) +
                          " are not adjacent");
  std::set<int> seen(path.begin(), path.end());
  if (seen.size() != path.size()) return false;
  for (std::size_t i = 1; i + 1 < path.size(); ++i)
    if (!admits(p, path[i - 1], path[i], path[i + 1])) return false;
  return true;
}

std::vector<int> PiTree::members() const {
  std::vector<int> out;
  for (int v = 0; v < static_cast<int>(depth.size()); ++v)
    if (depth[v] > 0) out.push_back(v);
  std::stable_sort(out.begin(), out.end(), [this](int a, int b) { return depth[a] < depth[b]; });
  return out;
}

PiTree build_pi_tree(const Pag& p, int target) {
  check_node(p, target, "build_pi_tree");
  const int n = p.size();
  PiTree t;
  t.root = target;
  t.parent.assign(n, -1);
  t.depth.assign(n, -1);
  t.depth[target] = 0;

  // Paths are carried to keep them simple; states (prev, cur) are expanded once.
  std::vector<std::vector<int>> frontier{{target}};
  std::set<std::pair<int, int>> seen{{-1, target}};
  for (int level = 1; !frontier.empty(); ++level) {
    std::vector<std::vector<int>> next;
    std::vector<int> best(n, -1);
    for (const auto& path : frontier) {
      const int cur = path.back();
      const int prev = path.size() >= 2 ? path[path.size() - 2] : -1;
      for (int nb : p.neighbors(cur)) {
        if (std::find(path.begin(), path.end(), nb) != path.end()) continue;
        if (prev >= 0 && !admits(p, prev, cur, nb)) continue;
        if (!seen.insert({cur, nb}).second) continue;
        auto ext = path;
        ext.push_back(nb);
        next.push_back(std::move(ext));
        if (t.depth[nb] < 0 && (best[nb] < 0 || cur < best[nb])) best[nb] = cur;
      }
    }
    for (int v = 0; v < n; ++v) {
      if (best[v] >= 0) {
        t.depth[v] = level;
        t.parent[v] = best[v];
      }
    }
    frontier = std::move(next);
  }
  return t;
}

namespace {

// Every member of e reachable from root by a PI-path with internals in e.
bool pi_connected(const Pag& p, int root, const std::vector<int>& e) {
  std::set<int> in(e.begin(), e.end());
  std::set<int> reached;
  std::vector<int> path{root};
  // Depth-first over simple PI-paths inside e; stops once all are reached.
  std::function<void()> dfs = [&]() {
    if (reached.size() == in.size()) return;
    const int cur = path.back();
    const int prev = path.size() >= 2 ? path[path.size() - 2] : -1;
    for (int nb : p.neighbors(cur)) {
      if (!in.count(nb)) continue;
      if (std::find(path.begin(), path.end(), nb) != path.end()) continue;
      if (prev >= 0 && !admits(p, prev, cur, nb)) continue;
      reached.insert(nb);
      path.push_back(nb);
      dfs();
      path.pop_back();
      if (reached.size() == in.size()) return;
    }
  };
  dfs();
  return reached.size() == in.size();
}

// No admissible node outside e is reachable through a chain of definite
// colliders belonging to e.
bool explaining_away_closed(const Pag& p, int root, const std::vector<int>& e, const std::vector<bool>& admissible) {
  std::set<int> in(e.begin(), e.end());
  std::deque<std::pair<int, int>> queue;  // (prev, cur) with cur in e
  std::set<std::pair<int, int>> seen;
  for (int x : p.neighbors(root))
    if (in.count(x) && seen.insert({root, x}).second) queue.emplace_back(root, x);
  while (!queue.empty()) {
    const auto [prev, cur] = queue.front();
    queue.pop_front();
    for (int nb : p.neighbors(cur)) {
      if (nb == prev || nb == root) continue;
      if (!definite_collider(p, prev, cur, nb)) continue;
      if (!in.count(nb)) {
        if (admissible[nb]) return false;
        continue;
      }
      if (seen.insert({cur, nb}).second) queue.emplace_back(cur, nb);
    }
  }
  return true;
}

}  // namespace

std::vector<std::vector<int>> enumerate_pi_sets(const PiTree& t, const Pag& p, int r, const PiSetOptions& options) {
  if (r < 1) throw ArgumentError("enumerate_pi_sets: radius must be >= 1");
  const int n = p.size();
  if (static_cast<int>(t.depth.size()) != n) throw ArgumentError("enumerate_pi_sets: tree and graph sizes differ");
  std::vector<int> time = options.time;
  if (time.empty()) {
    time.resize(n);
    std::iota(time.begin(), time.end(), 0);
  }
  if (static_cast<int>(time.size()) != n) throw ArgumentError("enumerate_pi_sets: time order has the wrong size");

  std::vector<bool> admissible(n, false);
  for (int v = 0; v < n; ++v) admissible[v] = v != t.root && time[v] < time[t.root];
  for (int f : options.frozen) {
    check_node(p, f, "enumerate_pi_sets");
    admissible[f] = false;
  }
  std::vector<int> universe;
  for (int v : t.members())
    if (admissible[v]) universe.push_back(v);
  std::sort(universe.begin(), universe.end());
  if (r > static_cast<int>(universe.size())) return {};

  auto mean_key = [&t](const std::vector<int>& e) {
    long sum = 0;
    for (int v : e) sum += t.depth[v];
    return sum;
  };
  auto finish = [&](const std::set<std::vector<int>>& level, bool apply_closure) {
    std::vector<std::vector<int>> out;
    for (const auto& e : level)
      if (!apply_closure || explaining_away_closed(p, t.root, e, admissible)) out.push_back(e);
    // Same size, so comparing depth sums compares means.
    std::stable_sort(out.begin(), out.end(),
                     [&](const auto& a, const auto& b) { return mean_key(a) < mean_key(b); });
    return out;
  };

  std::set<std::vector<int>> level;
  for (int v : universe)
    if (pi_connected(p, t.root, {v})) level.insert({v});
  for (int size = 2; size <= r; ++size) {
    std::set<std::vector<int>> grown;
    for (const auto& e : level) {
      for (int v : universe) {
        if (std::binary_search(e.begin(), e.end(), v)) continue;
        std::vector<int> cand = e;
        cand.insert(std::upper_bound(cand.begin(), cand.end(), v), v);
        if (grown.count(cand) || !pi_connected(p, t.root, cand)) continue;
        grown.insert(std::move(cand));
        if (size == r && grown.size() > options.cap) {
          auto partial = finish(grown, true);
          if (partial.size() > options.cap) partial.resize(options.cap);
          throw CapacityError("enumerate_pi_sets: more than " + std::to_string(options.cap) +
                                  " candidate sets at radius " + std::to_string(r),
                              std::move(partial));
        }
      }
    }
    level = std::move(grown);
  }
  auto out = finish(level, true);
  if (out.size() > options.cap) {
    out.resize(options.cap);
    throw CapacityError("enumerate_pi_sets: more than " + std::to_string(options.cap) + " candidate sets", out);
  }
  return out;
}

const char* status_name(ExplanationStatus s) { return s == ExplanationStatus::found ? "found" : "none-at-alpha"; }

ExplanationStatus parse_status(std::string_view text) {
  if (text == "found") return ExplanationStatus::found;
  if (text == "none-at-alpha") return ExplanationStatus::none_at_alpha;
  throw ArgumentError("unknown explanation status '" + std::string(text) + "'");
}

namespace {

std::vector<std::string> without(std::span<const std::string> s, const std::vector<int>& e) {
  std::vector<std::string> out;
  for (int i = 0; i < static_cast<int>(s.size()); ++i)
    if (!std::binary_search(e.begin(), e.end(), i)) out.push_back(s[i]);
  return out;
}

}  // namespace

ExplanationResult find_explanation(const Pag& p, int target, const Prediction& prediction, ModelOracle& oracle,
                                   std::span<const std::string> s, const FindOptions& options) {
  check_node(p, target, "find_explanation");
  if (p.size() < static_cast<int>(s.size())) throw ArgumentError("find_explanation: graph smaller than the sequence");
  ExplanationResult res;
  const PiTree tree = build_pi_tree(p, target);
  const int max_radius = static_cast<int>(s.size()) - 1;
  for (int r = 1; r <= max_radius; ++r) {
    std::vector<std::vector<int>> sets;
    try {
      sets = enumerate_pi_sets(tree, p, r, options.pi);
    } catch (const CapacityError& e) {
      sets = e.partial();
      res.warnings.push_back(std::string(e.what()) + "; continuing with " + std::to_string(sets.size()) + " sets");
    }
    for (const auto& e : sets) {
      if (e.back() >= static_cast<int>(s.size())) continue;
      const auto reduced = without(s, e);
      OracleResponse resp = oracle.query(reduced, options.k);
      ++res.queries;
      res.query_log.push_back(e);
      if (resp.top().token != prediction.token) {
        res.set = e;
        for (int v : e) res.set_tokens.push_back(s[v]);
        res.alternative = resp.top();
        res.radius = r;
        res.status = ExplanationStatus::found;
        return res;
      }
    }
  }
  return res;
}

TargetPolicy parse_target_policy(std::string_view text) {
  if (text == "append") return TargetPolicy::append;
  if (text == "class_token" || text == "class-token" || text == "cls") return TargetPolicy::class_token;
  throw ArgumentError("target policy: expected append or class_token, got '" + std::string(text) + "'");
}

const char* target_policy_name(TargetPolicy p) { return p == TargetPolicy::append ? "append" : "class_token"; }

Abduction abduce(std::span<const std::string> s, ModelOracle& oracle, const CleannConfig& config) {
  if (s.empty()) throw ArgumentError("abduce: empty sequence");
  if (config.k < 1) throw ArgumentError("abduce: k must be >= 1");
  Abduction a;
  a.sequence.assign(s.begin(), s.end());
  a.original = oracle.query(s, config.k);
  validate_response(a.original, s.size());
  const std::string& top = a.original.top().token;
  const int n = static_cast<int>(s.size());

  const AttentionTensor* att = &a.original.attention;
  OracleResponse abduced_resp;
  if (config.target_policy == TargetPolicy::append) {
    a.abduced = a.sequence;
    if (config.mask_token && a.abduced.back() == *config.mask_token) {
      a.abduced.back() = top;
      a.target = n - 1;
    } else {
      a.abduced.push_back(top);
      a.target = n;
    }
    abduced_resp = oracle.query(a.abduced, config.k);
    validate_response(abduced_resp, a.abduced.size());
    att = &abduced_resp.attention;
  } else {
    if (config.class_position < 0 || config.class_position >= n)
      throw ArgumentError("abduce: class position out of range");
    a.abduced = a.sequence;
    a.target = config.class_position;
  }
  a.attention = deepest_attention(*att, config.head_agg);

  const int m = static_cast<int>(a.abduced.size());
  a.time.resize(m);
  std::iota(a.time.begin(), a.time.end(), 0);
  if (config.target_policy == TargetPolicy::class_token) a.time[a.target] = m;
  if (config.mask_token)
    for (int i = 0; i < n; ++i)
      if (i != a.target && s[i] == *config.mask_token) a.frozen.push_back(i);
  return a;
}

CleannOutput cleann(std::span<const std::string> s, ModelOracle& oracle, const CleannConfig& config) {
  const Abduction a = abduce(s, oracle, config);
  const Eigen::MatrixXd cov = output_covariance(a.attention.matrix);
  CorrelationModel corr = correlation_from_cov(cov, config.n_eff, config.mode);
  corr.ridge = config.ridge;
  FciOptions fopts;
  fopts.max_cond = config.max_cond;
  PagLearning learned =
      learn_pag_detailed(make_ci_oracle(corr, config.alpha), corr.size(), fopts, a.abduced);

  FindOptions find;
  find.k = config.k;
  find.pi.time = a.time;
  find.pi.frozen = a.frozen;
  find.pi.cap = config.cap;
  CleannOutput out{find_explanation(learned.pag, a.target, a.original.top(), oracle, a.sequence, find),
                   std::move(learned.pag), a.original.top()};
  out.result.warnings.insert(out.result.warnings.begin(), learned.warnings.begin(), learned.warnings.end());
  return out;
}

std::vector<int> attention_order(const Abduction& a) {
  std::vector<int> order;
  for (int i = 0; i < static_cast<int>(a.sequence.size()); ++i)
    if (i != a.target && std::find(a.frozen.begin(), a.frozen.end(), i) == a.frozen.end()) order.push_back(i);
  const auto& m = a.attention.matrix;
  std::stable_sort(order.begin(), order.end(),
                   [&](int x, int y) { return m(a.target, x) > m(a.target, y); });
  return order;
}

nlohmann::json explanation_to_json(const ExplanationResult& r) {
  nlohmann::json j{{"set", r.set},
                   {"set_tokens", r.set_tokens},
                   {"alternative", nullptr},
                   {"radius", r.radius},
                   {"queries", r.queries},
                   {"status", status_name(r.status)},
                   {"query_log", r.query_log}};
  if (r.alternative) j["alternative"] = {{"token", r.alternative->token}, {"score", r.alternative->score}};
  if (!r.warnings.empty()) j["warnings"] = r.warnings;
  return j;
}

ExplanationResult explanation_from_json(const nlohmann::json& j) {
  ExplanationResult r;
  try {
    r.set = j.at("set").get<std::vector<int>>();
    r.set_tokens = j.value("set_tokens", std::vector<std::string>{});
    if (j.contains("alternative") && !j.at("alternative").is_null()) {
      const auto& alt = j.at("alternative");
      r.alternative = Prediction{alt.at("token").get<std::string>(), alt.value("score", 0.0), 1};
    }
    r.radius = j.value("radius", 0);
    r.queries = j.value("queries", 0);
    r.status = parse_status(j.at("status").get<std::string>());
    r.query_log = j.value("query_log", std::vector<std::vector<int>>{});
    r.warnings = j.value("warnings", std::vector<std::string>{});
  } catch (const nlohmann::json::exception& e) {
    throw ArgumentError(std::string("explanation json: ") + e.what());
  }
  return r;
}

}  // namespace attncausal
