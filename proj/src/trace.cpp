#include <fstream>
#include <istream>
#include <ostream>

#include "attncausal/errors.hpp"
#include "attncausal/json_io.hpp"
#include "attncausal/oracle.hpp"

namespace attncausal {

void write_trace(std::ostream& out, const OracleTrace& trace) {
  Json meta{{"model", trace.meta.model}, {"k", trace.meta.k}, {"head_agg", trace.meta.head_agg}};
  if (!trace.meta.sessions.empty()) meta["sessions"] = trace.meta.sessions;
  out << Json{{"meta", meta}}.dump() << '\n';
  for (const auto& key : trace.key_order)
    out << Json{{"key", key}, {"response", response_to_json(trace.records.at(key))}}.dump() << '\n';
}

OracleTrace read_trace(std::istream& in) {
  OracleTrace trace;
  std::string line;
  std::size_t line_no = 0;
  bool have_meta = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const Json j = parse_json_line(line, line_no);
    try {
      if (!have_meta) {
        if (!j.is_object() || !j.contains("meta")) throw ArgumentError("first line must be a meta record");
        const Json& m = j.at("meta");
        trace.meta.model = m.value("model", trace.meta.model);
        trace.meta.k = m.value("k", trace.meta.k);
        trace.meta.head_agg = m.value("head_agg", trace.meta.head_agg);
        if (m.contains("sessions")) trace.meta.sessions = m.at("sessions").get<std::vector<std::vector<std::string>>>();
        have_meta = true;
        continue;
      }
      const std::string key = j.at("key").get<std::string>();
      if (trace.contains(key)) throw ArgumentError("duplicate key [" + printable_key(key) + "]");
      OracleResponse r = response_from_json(j.at("response"));
      validate_response(r, split_key(key).size());
      trace.insert(key, std::move(r));
    } catch (const ParseError&) {
      throw;
    } catch (const Error& e) {
      throw ParseError(e.what(), line_no);
    } catch (const Json::exception& e) {
      throw ParseError(e.what(), line_no);
    }
  }
  return trace;
}

OracleTrace load_trace_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("cannot open trace " + path);
  return read_trace(in);
}

void save_trace_file(const std::string& path, const OracleTrace& trace) {
  std::ofstream out(path);
  if (!out) throw ArgumentError("cannot write trace " + path);
  write_trace(out, trace);
  if (!out) throw ArgumentError("write failed for " + path);
}

}  // namespace attncausal
