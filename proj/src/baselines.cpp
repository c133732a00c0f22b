#include <algorithm>
#include <limits>

#include "attncausal/cleann.hpp"

namespace attncausal {

namespace {

std::vector<std::string> without(const std::vector<std::string>& s, std::vector<int> e) {
  std::sort(e.begin(), e.end());
  std::vector<std::string> out;
  for (int i = 0; i < static_cast<int>(s.size()); ++i)
    if (!std::binary_search(e.begin(), e.end(), i)) out.push_back(s[i]);
  return out;
}

void accept(ExplanationResult& res, const Abduction& a, std::vector<int> set, const Prediction& alt) {
  std::sort(set.begin(), set.end());
  res.set = std::move(set);
  for (int v : res.set) res.set_tokens.push_back(a.sequence[v]);
  res.alternative = alt;
  res.radius = static_cast<int>(res.set.size());
  res.status = ExplanationStatus::found;
}

// Original prediction's score minus its best competitor's.
double score_gap(const OracleResponse& r, const std::string& original) {
  const auto& top = r.top_k;
  if (top.front().token != original) return -std::numeric_limits<double>::infinity();
  if (top.size() < 2) return std::numeric_limits<double>::infinity();
  return top[0].score - top[1].score;
}

}  // namespace

ExplanationResult pure_attention_baseline(std::span<const std::string> s, ModelOracle& oracle,
                                          const CleannConfig& config) {
  const Abduction a = abduce(s, oracle, config);
  const std::string& original = a.original.top().token;
  const std::size_t max_size = a.sequence.size() - 1;
  ExplanationResult res;
  std::vector<int> set;
  for (int pos : attention_order(a)) {
    if (set.size() == max_size) break;
    set.push_back(pos);
    auto sorted = set;
    std::sort(sorted.begin(), sorted.end());
    const OracleResponse r = oracle.query(without(a.sequence, sorted), config.k);
    ++res.queries;
    res.query_log.push_back(sorted);
    if (r.top().token != original) {
      accept(res, a, set, r.top());
      return res;
    }
  }
  return res;
}

ExplanationResult smart_attention_baseline(std::span<const std::string> s, ModelOracle& oracle,
                                           const CleannConfig& config) {
  if (config.k < 2) throw ArgumentError("smart_attention_baseline: needs k >= 2 to measure a score gap");
  const Abduction a = abduce(s, oracle, config);
  if (a.original.top_k.size() < 2)
    throw ArgumentError("smart_attention_baseline: oracle returned fewer than two predictions");
  const std::string& original = a.original.top().token;
  const std::size_t max_size = a.sequence.size() - 1;
  double best = score_gap(a.original, original);
  ExplanationResult res;
  std::vector<int> set;
  for (int pos : attention_order(a)) {
    if (set.size() == max_size) break;
    auto trial = set;
    trial.push_back(pos);
    std::sort(trial.begin(), trial.end());
    const OracleResponse r = oracle.query(without(a.sequence, trial), config.k);
    ++res.queries;
    res.query_log.push_back(trial);
    if (r.top().token != original) {
      accept(res, a, trial, r.top());
      return res;
    }
    const double gap = score_gap(r, original);
    if (gap < best) {
      best = gap;
      set = std::move(trial);
    }
  }
  return res;
}

}  // namespace attncausal
