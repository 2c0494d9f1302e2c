#include "bolab/report.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace bolab {

CheckRecord make_record(std::string id, const Geometry& g, nlohmann::json params, double lhs,
                        double rhs, double tol, double scale) {
  CheckRecord r{std::move(id), kind_name(g.kind), std::move(params), lhs, rhs};
  r.abs_err = std::abs(lhs - rhs);
  const double den = std::max(std::abs(rhs), scale);
  r.rel_err = den > 0.0 ? r.abs_err / den : r.abs_err;
  r.pass = std::isfinite(r.rel_err) && r.rel_err <= tol;
  return r;
}

nlohmann::json to_json(const CheckRecord& r) {
  return {{"id", r.id},   {"geometry", r.geometry}, {"params", r.params},   {"lhs", r.lhs},
          {"rhs", r.rhs}, {"abs_err", r.abs_err},   {"rel_err", r.rel_err}, {"pass", r.pass}};
}

bool Report::passed() const {
  return std::all_of(records.begin(), records.end(), [](const CheckRecord& r) { return r.pass; });
}

void Report::sort() {
  std::stable_sort(records.begin(), records.end(),
                   [](const CheckRecord& a, const CheckRecord& b) { return a.id < b.id; });
}

nlohmann::json to_json(const Report& r) {
  nlohmann::json recs = nlohmann::json::array();
  for (const auto& c : r.records) recs.push_back(to_json(c));
  nlohmann::json j{{"suite", r.suite}, {"pass", r.passed()}, {"records", recs}};
  if (!r.tables.empty()) j["tables"] = r.tables;
  return j;
}

std::string to_csv(const Report& r) {
  std::ostringstream os;
  os.precision(17);
  os << "id,geometry,params,lhs,rhs,abs_err,rel_err,pass\n";
  for (const auto& c : r.records) {
    std::string p = c.params.dump();
    std::string q;
    for (char ch : p) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
    os << c.id << ',' << c.geometry << ",\"" << q << "\"," << c.lhs << ',' << c.rhs << ','
       << c.abs_err << ',' << c.rel_err << ',' << (c.pass ? "true" : "false") << '\n';
  }
  return os.str();
}

}  // namespace bolab
