#include "attncausal/errors.hpp"
#include "attncausal/json_io.hpp"
#include "attncausal/oracle.hpp"

// After Eigen: httplib pulls in system headers that define short macros.
#include "httplib.h"

namespace attncausal {

namespace {

// One round trip with retries. Returns the body of a 200 response.
std::string round_trip(const HttpOracleOptions& o, const std::string& method, const std::string& path,
                       const std::string& body) {
  std::string last_error;
  const int attempts = 1 + std::max(0, o.retries);
  for (int attempt = 1; attempt <= attempts; ++attempt) {
    httplib::Client client(o.host, o.port);
    client.set_connection_timeout(o.timeout);
    client.set_read_timeout(o.timeout);
    client.set_write_timeout(o.timeout);
    auto res = method == "GET" ? client.Get(path) : client.Post(path, body, "application/json");
    if (!res) {
      last_error = method + " " + path + ": " + httplib::to_string(res.error());
      continue;
    }
    if (res->status != 200) {
      last_error = method + " " + path + ": HTTP " + std::to_string(res->status);
      continue;
    }
    return res->body;
  }
  throw TransportError(last_error, attempts);
}

Json parse_body(const std::string& body, const std::string& what) {
  try {
    return parse_json_text(body);
  } catch (const ParseError& e) {
    throw OracleError(what + ": malformed JSON: " + e.what());
  }
}

}  // namespace

HttpOracle::HttpOracle(HttpOracleOptions options) : options_(std::move(options)) {
  if (options_.port <= 0 || options_.port > 65535) throw ArgumentError("HttpOracle: bad port");
}

HttpOracle::Info HttpOracle::info() {
  const Json j = parse_body(round_trip(options_, "GET", "/v1/info", ""), "/v1/info");
  try {
    Info i{j.at("model").get<std::string>(), j.at("n_layers").get<int>(), j.at("n_heads").get<int>()};
    info_ = i;
    return i;
  } catch (const Json::exception& e) {
    throw OracleError(std::string("/v1/info: ") + e.what());
  }
}

std::string HttpOracle::model_id() const { return info_ ? info_->model : "http:" + options_.host + ":" + std::to_string(options_.port); }

OracleResponse HttpOracle::query(std::span<const std::string> tokens, int k) {
  if (tokens.empty()) throw ArgumentError("HttpOracle: empty query");
  if (k < 1) throw ArgumentError("HttpOracle: k must be >= 1");
  const Json request{{"tokens", std::vector<std::string>(tokens.begin(), tokens.end())},
                     {"top_k", k},
                     {"return_attention", "last_layer"}};
  const Json j = parse_body(round_trip(options_, "POST", "/v1/predict", request.dump()), "/v1/predict");
  OracleResponse out;
  try {
    int rank = 1;
    for (const auto& p : j.at("predictions"))
      out.top_k.push_back({p.at("token").get<std::string>(), p.at("score").get<double>(), rank++});
    const Json& att = j.at("attention");
    const int heads = att.at("heads").get<int>();
    const int n = att.at("n").get<int>();
    if (n != static_cast<int>(tokens.size()))
      throw OracleError("/v1/predict: attention n=" + std::to_string(n) + " for " + std::to_string(tokens.size()) +
                        " tokens");
    const Json& mats = att.at("matrix_per_head");
    if (!mats.is_array() || static_cast<int>(mats.size()) != heads)
      throw OracleError("/v1/predict: matrix_per_head has the wrong head count");
    std::vector<Eigen::MatrixXd> layer;
    for (const auto& m : mats) {
      Eigen::MatrixXd a(n, n);
      if (static_cast<int>(m.size()) != n) throw OracleError("/v1/predict: attention matrix has the wrong size");
      for (int r = 0; r < n; ++r) {
        if (static_cast<int>(m[r].size()) != n) throw OracleError("/v1/predict: attention row has the wrong size");
        for (int c = 0; c < n; ++c) a(r, c) = m[r][c].get<double>();
      }
      layer.push_back(std::move(a));
    }
    out.attention = AttentionTensor({std::move(layer)}, std::vector<std::string>(tokens.begin(), tokens.end()), true);
    validate_response(out, tokens.size());
  } catch (const Json::exception& e) {
    throw OracleError(std::string("/v1/predict: ") + e.what());
  } catch (const ArgumentError& e) {
    throw OracleError(std::string("/v1/predict: ") + e.what());
  }
  return out;
}

}  // namespace attncausal
