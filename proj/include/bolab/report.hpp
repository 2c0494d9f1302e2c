#pragma once

#include <string>
#include <vector>

#include "bolab/spectral.hpp"

namespace bolab {

struct CheckRecord {
  std::string id;
  std::string geometry;
  nlohmann::json params;
  double lhs = 0.0;
  double rhs = 0.0;
  double abs_err = 0.0;
  double rel_err = 0.0;
  bool pass = false;
};

// rel_err = |lhs - rhs| / max(|rhs|, scale); pass iff rel_err <= tol.
CheckRecord make_record(std::string id, const Geometry& g, nlohmann::json params, double lhs,
                        double rhs, double tol, double scale = 0.0);
nlohmann::json to_json(const CheckRecord& r);

struct Report {
  std::string suite;
  std::vector<CheckRecord> records;  // sorted by id
  double wall_time = 0.0;            // seconds; kept out of written files
  nlohmann::json tables = nlohmann::json::object();

  bool passed() const;
  void sort();
};

nlohmann::json to_json(const Report& r);
std::string to_csv(const Report& r);

}  // namespace bolab
