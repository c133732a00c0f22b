#include "attncausal/json_io.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "attncausal/errors.hpp"

namespace attncausal {

Json parse_json_text(std::string_view text) {
  try {
    return Json::parse(text.begin(), text.end());
  } catch (const Json::parse_error& e) {
    const std::size_t upto = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
    const auto line = 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(upto), '\n'));
    throw ParseError(e.what(), line);
  }
}

Json parse_json_line(std::string_view text, std::size_t line) {
  try {
    return Json::parse(text.begin(), text.end());
  } catch (const Json::parse_error& e) {
    throw ParseError(e.what(), line);
  }
}

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("cannot open " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_json_text(buffer.str());
}

namespace {

Json matrix_to_json(const Eigen::MatrixXd& m) {
  Json rows = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const Json& j, Eigen::Index rows, Eigen::Index cols, const char* what) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows)
    throw ArgumentError(std::string(what) + ": wrong row count");
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const Json& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
      throw ArgumentError(std::string(what) + ": wrong column count in row " + std::to_string(r));
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}

template <typename T>
T field(const Json& j, const char* name) {
  if (!j.is_object() || !j.contains(name)) throw ArgumentError(std::string("missing field '") + name + "'");
  try {
    return j.at(name).get<T>();
  } catch (const Json::exception& e) {
    throw ArgumentError(std::string("bad field '") + name + "': " + e.what());
  }
}

}  // namespace

Json scm_to_json(const ScmModel& scm) {
  Json lambda = Json::array();
  for (Eigen::Index i = 0; i < scm.lambda().size(); ++i) lambda.push_back(scm.lambda()(i));
  return Json{{"n", scm.size()},
              {"order", scm.order()},
              {"g", matrix_to_json(scm.weights())},
              {"lambda", lambda},
              {"cu", scm.has_identity_noise() ? Json(nullptr) : matrix_to_json(scm.noise_covariance())},
              {"latent", scm.latent()}};
}

ScmModel scm_from_json(const Json& j) {
  const int n = field<int>(j, "n");
  if (n < 1) throw ArgumentError("scm json: n must be >= 1");
  auto order = field<std::vector<int>>(j, "order");
  Eigen::MatrixXd g = matrix_from_json(j.at("g"), n, n, "scm json g");
  auto lambda_v = field<std::vector<double>>(j, "lambda");
  if (static_cast<int>(lambda_v.size()) != n) throw ArgumentError("scm json: lambda size != n");
  Eigen::VectorXd lambda = Eigen::Map<Eigen::VectorXd>(lambda_v.data(), n);
  std::optional<Eigen::MatrixXd> cu;
  if (j.contains("cu") && !j.at("cu").is_null()) cu = matrix_from_json(j.at("cu"), n, n, "scm json cu");
  std::vector<int> latent;
  if (j.contains("latent")) latent = field<std::vector<int>>(j, "latent");
  return ScmModel(std::move(order), std::move(g), std::move(lambda), std::move(cu), std::move(latent));
}

Json attention_to_json(const AttentionTensor& t) {
  Json layers = Json::array();
  for (int l = 0; l < t.layers(); ++l) {
    Json heads = Json::array();
    for (int h = 0; h < t.heads(); ++h) heads.push_back(matrix_to_json(t.matrix(l, h)));
    layers.push_back(std::move(heads));
  }
  return Json{{"layers", t.layers()},      {"heads", t.heads()},     {"n", t.size()},
              {"tokens", t.tokens()},      {"attention", layers},    {"softmax_origin", t.softmax_origin()}};
}

AttentionTensor attention_from_json(const Json& j) {
  const int layers = field<int>(j, "layers");
  const int heads = field<int>(j, "heads");
  const int n = field<int>(j, "n");
  auto tokens = field<std::vector<std::string>>(j, "tokens");
  if (static_cast<int>(tokens.size()) != n) throw ArgumentError("attention json: token count != n");
  const Json& att = j.at("attention");
  if (!att.is_array() || static_cast<int>(att.size()) != layers)
    throw ArgumentError("attention json: layer count mismatch");
  std::vector<std::vector<Eigen::MatrixXd>> mats(layers);
  for (int l = 0; l < layers; ++l) {
    const Json& hs = att[l];
    if (!hs.is_array() || static_cast<int>(hs.size()) != heads)
      throw ArgumentError("attention json: head count mismatch in layer " + std::to_string(l));
    for (int h = 0; h < heads; ++h) mats[l].push_back(matrix_from_json(hs[h], n, n, "attention json matrix"));
  }
  const bool softmax = j.contains("softmax_origin") ? field<bool>(j, "softmax_origin") : false;
  return AttentionTensor(std::move(mats), std::move(tokens), softmax);
}

Json pag_to_json(const Pag& p) {
  Json marks = Json::array();
  for (int i = 0; i < p.size(); ++i) {
    Json row = Json::array();
    for (int j = 0; j < p.size(); ++j) row.push_back(i == j ? 0 : static_cast<int>(p.mark(i, j)));
    marks.push_back(std::move(row));
  }
  return Json{{"n", p.size()}, {"labels", p.labels()}, {"marks", marks}};
}

Pag pag_from_json(const Json& j) {
  const int n = field<int>(j, "n");
  std::vector<std::string> labels;
  if (j.contains("labels")) labels = field<std::vector<std::string>>(j, "labels");
  auto marks = field<std::vector<std::vector<int>>>(j, "marks");
  if (static_cast<int>(marks.size()) != n) throw ArgumentError("pag json: marks row count != n");
  Pag p(n, std::move(labels));
  for (int a = 0; a < n; ++a) {
    if (static_cast<int>(marks[a].size()) != n) throw ArgumentError("pag json: marks column count != n");
    for (int b = 0; b < n; ++b)
      if (marks[a][b] < 0 || marks[a][b] > 3) throw ArgumentError("pag json: mark code out of range");
    if (marks[a][a] != 0) throw ArgumentError("pag json: self-edge");
  }
  for (int a = 0; a < n; ++a) {
    for (int b = a + 1; b < n; ++b) {
      const bool ab = marks[a][b] != 0;
      const bool ba = marks[b][a] != 0;
      if (ab != ba) throw ArgumentError("pag json: asymmetric adjacency between " + std::to_string(a) + " and " + std::to_string(b));
      if (ab) p.add_edge(a, b, static_cast<Mark>(marks[b][a]), static_cast<Mark>(marks[a][b]));
    }
  }
  return p;
}

Json response_to_json(const OracleResponse& r) {
  Json top = Json::array();
  for (const auto& p : r.top_k) top.push_back(Json{{"token", p.token}, {"score", p.score}});
  return Json{{"top_k", top}, {"attention", attention_to_json(r.attention)}};
}

OracleResponse response_from_json(const Json& j) {
  OracleResponse r;
  const Json& top = j.at("top_k");
  if (!top.is_array()) throw ArgumentError("response json: top_k is not an array");
  int rank = 1;
  for (const auto& p : top) r.top_k.push_back({field<std::string>(p, "token"), field<double>(p, "score"), rank++});
  r.attention = attention_from_json(j.at("attention"));
  return r;
}

}  // namespace attncausal
