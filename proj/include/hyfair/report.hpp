#pragma once

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "hyfair/fairness.hpp"
#include "hyfair/recommender.hpp"
#include "hyfair/simulate.hpp"

namespace hyfair {

// Report schema. Every report is a JSON object whose key order is fixed by the writer:
//   metrics:  {"R@10": x, "MRR@10": x, "NDCG@10": x, ...}            (per K, in K order)
//   fairness: {"A@5": x, "G@5": x, "L@5": x, "D@5": x, ...}           (per K, in K order)
//   trace:    {"turns": [{"turn": t, "accepted": n, "R@10": x, ..., "A@5": x, ...}, ...]}
// Values are numbers or strings. The plain-text table lists one row per key (flat reports) or
// one row per turn (traces).

inline nlohmann::ordered_json ranking_to_json(const std::map<std::size_t, RankingMetrics>& by_k) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& [k, m] : by_k) {
    const auto ks = std::to_string(k);
    j["R@" + ks] = m.recall;
    j["MRR@" + ks] = m.mrr;
    j["NDCG@" + ks] = m.ndcg;
  }
  return j;
}

inline nlohmann::ordered_json trace_to_json(const LoopTrace& trace) {
  nlohmann::ordered_json turns = nlohmann::ordered_json::array();
  for (const auto& t : trace.turns) {
    nlohmann::ordered_json row;
    row["turn"] = t.turn;
    row["accepted"] = t.accepted.size();
    const auto ranking = ranking_to_json(t.ranking);
    const auto fairness = fairness_to_json(t.fairness);
    for (const auto& [k, v] : ranking.items()) row[k] = v;
    for (const auto& [k, v] : fairness.items()) row[k] = v;
    turns.push_back(std::move(row));
  }
  nlohmann::ordered_json j;
  j["turns"] = std::move(turns);
  return j;
}

/// Compact, stable serialization: one JSON document followed by a newline.
inline std::string report_text(const nlohmann::ordered_json& j) { return j.dump(2) + "\n"; }

inline nlohmann::ordered_json parse_report(std::istream& is) {
  try {
    auto j = nlohmann::ordered_json::parse(is);
    if (!j.is_object()) fail(ErrorCode::ParseError, "report must be a JSON object");
    return j;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::ParseError, std::string("report: ") + e.what());
  }
}

inline nlohmann::ordered_json load_report(const std::string& path) {
  std::ifstream is(path);
  if (!is) fail(ErrorCode::IoError, "cannot read " + path);
  return parse_report(is);
}

namespace report_detail {

inline std::string cell(const nlohmann::ordered_json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer() || v.is_number_unsigned()) return v.dump();
  if (v.is_number_float()) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v.get<double>());
    return buf;
  }
  return v.dump();
}

/// Display width in code points, so multi-byte UTF-8 names line up.
inline std::size_t width(const std::string& s) {
  std::size_t w = 0;
  for (unsigned char c : s) w += (c & 0xC0) != 0x80;
  return w;
}

inline std::string pad(const std::string& s, std::size_t w) { return s + std::string(w > width(s) ? w - width(s) : 0, ' '); }

inline std::string render(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> w(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) w[c] = width(header[c]);
  for (const auto& r : rows)
    for (std::size_t c = 0; c < r.size(); ++c) w[c] = std::max(w[c], width(r[c]));
  std::ostringstream os;
  auto line = [&](const std::vector<std::string>& r) {
    std::string s;
    for (std::size_t c = 0; c < r.size(); ++c) s += (c ? "  " : "") + pad(r[c], w[c]);
    while (!s.empty() && s.back() == ' ') s.pop_back();
    os << s << '\n';
  };
  line(header);
  std::vector<std::string> rule;
  for (std::size_t c = 0; c < header.size(); ++c) rule.push_back(std::string(w[c], '-'));
  line(rule);
  for (const auto& r : rows) line(r);
  return os.str();
}

}  // namespace report_detail

/// Plain-text table. An empty report renders as an empty string.
inline std::string render_table(const nlohmann::ordered_json& j) {
  using namespace report_detail;
  if (j.empty()) return {};
  if (j.contains("turns") && j.at("turns").is_array()) {
    std::vector<std::string> header;
    for (const auto& t : j.at("turns"))
      for (const auto& [k, _] : t.items())
        if (std::find(header.begin(), header.end(), k) == header.end()) header.push_back(k);
    std::vector<std::vector<std::string>> rows;
    for (const auto& t : j.at("turns")) {
      std::vector<std::string> r;
      for (const auto& h : header) r.push_back(t.contains(h) ? cell(t.at(h)) : "");
      rows.push_back(std::move(r));
    }
    return render(header, rows);
  }
  std::vector<std::vector<std::string>> rows;
  for (const auto& [k, v] : j.items()) rows.push_back({k, cell(v)});
  return render({"metric", "value"}, rows);
}

}  // namespace hyfair
