#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "bolab/explicit_virial.hpp"
#include "bolab/report.hpp"

namespace bolab {

struct RunConfig {
  std::string geometry = "box";
  double box_length = 50.0;
  double line_scale = 1.0;
  int modes = 1024;          // grid size n
  int lax_modes = -1;        // -1: default band
  FlowSpec flow{FlowKind::bo, 8.0, {}, 1e-3, 1.0, 100, {}};
  double varkappa = 12.0;
  std::vector<double> kappas;  // beta grid and flow monitors
  std::string init = "soliton c=1";
  std::string out = "bolab_out";
  double tol = -1.0;  // negative: the suite default
  std::uint64_t seed = 0;
  std::string dump_operator;
  std::vector<cplx> z;  // explicit-formula sample points

  Geometry geom() const;
  double kappa() const { return flow.kappa; }
};

// Keys mirror the long flags with '-' replaced by '_'; unknown keys throw.
RunConfig config_from_json(const nlohmann::json& j, RunConfig base = {});
nlohmann::json to_json(const RunConfig& c);
RealField initial_field(const RunConfig& c);
std::vector<cplx> default_sample_points();

// Worker count from BOLAB_THREADS (at least 1, default hardware concurrency).
int pool_size();
using CheckTask = std::function<std::vector<CheckRecord>()>;
// Runs tasks on the pool; records come back sorted by id.
std::vector<CheckRecord> run_pool(const std::vector<CheckTask>& tasks, int threads);

extern const std::vector<std::string> kSuites;
Report run_suite(const std::string& suite, const RunConfig& c);

// Exit codes.
inline constexpr int kExitOk = 0, kExitConfig = 1, kExitNumerical = 2, kExitVerify = 3;

int cmd_evolve(const RunConfig& c);
int cmd_verify(const std::string& suite, const RunConfig& c);
int cmd_beta(const RunConfig& c);
int cmd_explicit(const RunConfig& c);
// Maps exceptions from a command to the exit codes above.
int guarded(const std::function<int()>& cmd);

}  // namespace bolab
