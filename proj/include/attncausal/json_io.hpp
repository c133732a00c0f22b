#pragma once

#include <string>
#include <string_view>

#include "json.hpp"

#include "attncausal/attention.hpp"
#include "attncausal/oracle.hpp"
#include "attncausal/pag.hpp"
#include "attncausal/scm.hpp"

namespace attncausal {

using Json = nlohmann::json;

// Parses text, mapping parser failures to ParseError with a line number.
Json parse_json_text(std::string_view text);
// One line of a JSON Lines file; ParseError reports `line`.
Json parse_json_line(std::string_view text, std::size_t line);
Json read_json_file(const std::string& path);

// {"n", "order", "g", "lambda", "cu" (null for identity), "latent"}
Json scm_to_json(const ScmModel& scm);
ScmModel scm_from_json(const Json& j);

// {"layers", "heads", "n", "tokens", "attention" (layer-major), "softmax_origin"}
Json attention_to_json(const AttentionTensor& t);
AttentionTensor attention_from_json(const Json& j);

// {"n", "labels", "marks"}; marks[i][j] is the mark at j on edge i *-* j,
// 0 absent, 1 circle, 2 head, 3 tail.
Json pag_to_json(const Pag& p);
Pag pag_from_json(const Json& j);

// {"top_k": [{"token", "score"}], "attention": <attention>}
Json response_to_json(const OracleResponse& r);
OracleResponse response_from_json(const Json& j);

}  // namespace attncausal
