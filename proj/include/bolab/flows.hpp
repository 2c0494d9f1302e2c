#pragma once

#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "bolab/conserved.hpp"

namespace bolab {

enum class FlowKind { bo, hk, beta, diff, phi };

std::string flow_name(FlowKind k);
FlowKind flow_from_name(const std::string& s);

struct FlowSpec {
  FlowKind kind = FlowKind::bo;
  double kappa = 0.0;                             // hk, beta, diff
  std::vector<std::pair<double, double>> phi;     // (c_j, kappa_j)
  double dt = 1e-3;
  double T = 1.0;
  int stride = 100;                               // steps between monitor records
  std::vector<double> monitor_kappas;
};

struct MonitorRecord {
  double t = 0.0;
  double P = 0.0, H_BO = 0.0, H_2 = 0.0, mean = 0.0, tail = 0.0;
  std::map<double, double> beta;  // keyed by the kappa actually used
};

struct Trajectory {
  std::vector<double> t;
  std::vector<RealField> q;
  std::vector<MonitorRecord> monitors;
  // max over records of |X(t) - X(0)| / |X(0)| for the named quantity
  // ("P", "H_BO", "H_2", "mean", or a monitored kappa as "beta:<k>").
  double drift(const std::string& what) const;
};

struct FlowAbort : NumericalError {
  FlowAbort(const std::string& what, double t, RealField last);
  double t;
  RealField last;
};

RealField vector_field(const RealField& q, const FlowSpec& spec);
// One integrating-factor RK4 step (plain RK4 on the line).
RealField step(const RealField& q, const FlowSpec& spec, double dt);

using MonitorSink = std::function<void(const MonitorRecord&, const RealField&)>;
MonitorRecord monitor(const RealField& q, double t, const std::vector<double>& kappas);
Trajectory evolve(const RealField& q0, const FlowSpec& spec, const MonitorSink& sink = {});
// Final state only, no monitors.
RealField integrate_flow(const RealField& q0, const FlowSpec& spec);

struct CommutingError {
  double l2 = 0.0;
  double hm2 = 0.0;  // sigma = -2 norm
};
CommutingError commuting_flows_check(const RealField& q0, double kappa, double t, double dt);

struct GaugeDynamics {
  double residual = 0.0;       // |FD derivative - rhs| / |rhs|
  double form_agreement = 0.0; // BO only: the two rhs forms against each other
  double rhs_norm = 0.0;
};
// Central difference of n(varkappa; q(t)) at t = dt versus the stated rhs.
GaugeDynamics gauge_dynamics_check(const RealField& q0, FlowKind flow, double kappa,
                                   double varkappa, double dt);

}  // namespace bolab
