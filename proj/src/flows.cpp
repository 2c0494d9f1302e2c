#include "bolab/flows.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <spdlog/spdlog.h>

namespace bolab {

std::string flow_name(FlowKind k) {
  switch (k) {
    case FlowKind::bo: return "bo";
    case FlowKind::hk: return "hk";
    case FlowKind::beta: return "beta";
    case FlowKind::diff: return "diff";
    case FlowKind::phi: return "phi";
  }
  return "?";
}

FlowKind flow_from_name(const std::string& s) {
  for (FlowKind k : {FlowKind::bo, FlowKind::hk, FlowKind::beta, FlowKind::diff, FlowKind::phi})
    if (flow_name(k) == s) return k;
  throw ConfigError("unknown flow '" + s + "'");
}

FlowAbort::FlowAbort(const std::string& what, double t_, RealField last_)
    : NumericalError(what), t(t_), last(std::move(last_)) {}

namespace {

RealField from_samples_banded(const Geometry& g, const RVec& s) {
  return band_limit(real_from_samples(g, s), band(g));
}

// (m + conj(m) + |m|^2)' as a real field.
RealField beta_field(const RealField& q, double kappa) {
  GaugeContext ctx(q, kappa, -1, false);
  CVec m = grid_values(ctx.m);
  RVec grad = 2.0 * m.real() + m.cwiseAbs2();
  return derivative(from_samples_banded(q.geom, grad));
}

RealField bo_field(const RealField& q) {
  RealField hq2 = derivative(derivative(hilbert_transform(q)));
  RealField sq = dealiased_product(q, q);
  RealField d = derivative(sq);
  return band_limit(RealField{q.geom, hq2.coeffs - d.coeffs}, band(q.geom));
}

RealField hk_field(const RealField& q, double kappa) {
  RealField b = beta_field(q, kappa);
  double a = kappa;
  if (q.geom.kind == Kind::circle) a += integral(q);
  RealField dq = derivative(q);
  return RealField{q.geom, -kappa * kappa * b.coeffs + a * dq.coeffs};
}

// Linear part of the flow at q = 0, as a Fourier multiplier.
cplx linear_symbol(const FlowSpec& s, double xi) {
  const double a = std::abs(xi);
  auto beta_sym = [&](double k) { return kI * xi / (a + k); };
  switch (s.kind) {
    case FlowKind::bo: return kI * xi * a;
    case FlowKind::hk: return kI * xi * s.kappa * a / (a + s.kappa);
    case FlowKind::diff: return kI * xi * a * a / (a + s.kappa);
    case FlowKind::beta: return beta_sym(s.kappa);
    case FlowKind::phi: {
      cplx acc = 0.0;
      for (auto [c, k] : s.phi) acc += c * beta_sym(k);
      return acc;
    }
  }
  return 0.0;
}

CVec propagator(const Geometry& g, const FlowSpec& s, double h) {
  const int n = g.n;
  const double dxi = freq_step(g);
  CVec e(n);
  for (int i = 0; i < n; ++i) {
    int k = signed_mode(i, n);
    e[i] = k == -n / 2 ? cplx(0.0) : std::exp(linear_symbol(s, dxi * k) * h);
  }
  return e;
}

}  // namespace

RealField vector_field(const RealField& q, const FlowSpec& spec) {
  const Geometry& g = q.geom;
  switch (spec.kind) {
    case FlowKind::bo: return bo_field(q);
    case FlowKind::hk: return hk_field(q, spec.kappa);
    case FlowKind::beta: return beta_field(q, spec.kappa);
    case FlowKind::diff: {
      RealField a = bo_field(q), b = hk_field(q, spec.kappa);
      return RealField{g, a.coeffs - b.coeffs};
    }
    case FlowKind::phi: {
      RealField out = zero_field(g);
      for (auto [c, k] : spec.phi) out.coeffs += c * beta_field(q, k).coeffs;
      return out;
    }
  }
  return zero_field(g);
}

RealField step(const RealField& q, const FlowSpec& spec, double dt) {
  const Geometry& g = q.geom;
  auto F = [&](const CVec& c) { return vector_field(RealField{g, c}, spec).coeffs; };
  const CVec& u = q.coeffs;
  if (g.kind == Kind::line) {
    // No diagonal linear propagator on the line; only the bounded flows are stepped.
    if (spec.kind != FlowKind::beta && spec.kind != FlowKind::phi)
      throw ConfigError("the line geometry only time-steps the beta and phi flows");
    CVec k1 = F(u);
    CVec k2 = F(u + 0.5 * dt * k1);
    CVec k3 = F(u + 0.5 * dt * k2);
    CVec k4 = F(u + dt * k3);
    return RealField{g, u + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)};
  }
  // Lawson RK4 with nonlinear part N = F - Lambda.
  CVec lam(g.n);
  const double dxi = freq_step(g);
  for (int i = 0; i < g.n; ++i) {
    int k = signed_mode(i, g.n);
    lam[i] = k == -g.n / 2 ? cplx(0.0) : linear_symbol(spec, dxi * k);
  }
  auto N = [&](const CVec& c) -> CVec { return F(c) - lam.cwiseProduct(c); };
  CVec E1 = propagator(g, spec, 0.5 * dt);
  CVec E2 = E1.cwiseProduct(E1);
  CVec k1 = N(u);
  CVec eu = E1.cwiseProduct(u);
  CVec k2 = N(eu + 0.5 * dt * E1.cwiseProduct(k1));
  CVec k3 = N(eu + 0.5 * dt * k2);
  CVec k4 = N(E2.cwiseProduct(u) + dt * E1.cwiseProduct(k3));
  CVec out = E2.cwiseProduct(u) +
             dt / 6.0 * (E2.cwiseProduct(k1) + 2.0 * E1.cwiseProduct(k2 + k3) + k4);
  return band_limit(RealField{g, out}, band(g));
}

MonitorRecord monitor(const RealField& q, double t, const std::vector<double>& kappas) {
  MonitorRecord r;
  r.t = t;
  HamiltonianValue h = polynomial_hamiltonians(q);
  r.P = h.P;
  r.H_BO = h.H_BO;
  r.H_2 = h.H_2;
  r.mean = h.mean;
  const Geometry& g = q.geom;
  double cutoff = g.kind == Kind::line ? 10.0 / g.length : 0.5 * freq_step(g) * band(g);
  r.tail = tail_mass(q, NormSpec{0.0, 1.0}, cutoff);
  if (!kappas.empty()) {
    LaxMatrix L = build_lax(q);
    double kmin = admissibility(L).kappa_min;
    for (double k : kappas) {
      double use = k;
      if (use < kmin) {
        use = 2.0 * kmin;
        spdlog::warn("monitor kappa {} inadmissible at t={}, escalated to {}", k, t, use);
      }
      r.beta[use] = beta(GaugeContext(q, L, use));
    }
  }
  return r;
}

double Trajectory::drift(const std::string& what) const {
  if (monitors.empty()) return 0.0;
  auto pick = [&](const MonitorRecord& r) -> double {
    if (what == "P") return r.P;
    if (what == "H_BO") return r.H_BO;
    if (what == "H_2") return r.H_2;
    if (what == "mean") return r.mean;
    if (what.rfind("beta:", 0) == 0) {
      double k = std::stod(what.substr(5));
      auto it = r.beta.find(k);
      if (it == r.beta.end()) throw ConfigError("kappa " + what.substr(5) + " was not monitored");
      return it->second;
    }
    throw ConfigError("unknown monitor quantity '" + what + "'");
  };
  const double x0 = pick(monitors.front());
  double worst = 0.0;
  for (const auto& r : monitors) worst = std::max(worst, std::abs(pick(r) - x0));
  return std::abs(x0) > 0.0 ? worst / std::abs(x0) : worst;
}

namespace {

void preflight(const RealField& q0, const FlowSpec& spec) {
  if (!(spec.dt != 0.0) || !std::isfinite(spec.dt)) throw ConfigError("dt must be nonzero");
  if (!(spec.T >= 0.0)) throw ConfigError("horizon T must be nonnegative");
  if (spec.stride < 1) throw ConfigError("monitor stride must be positive");
  std::vector<double> ks;
  if (spec.kind == FlowKind::hk || spec.kind == FlowKind::beta || spec.kind == FlowKind::diff)
    ks.push_back(spec.kappa);
  for (auto [c, k] : spec.phi) ks.push_back(k);
  if (ks.empty()) return;
  double kmin = admissibility(build_lax(q0)).kappa_min;
  for (double k : ks)
    if (k < 2.0 * kmin) throw InadmissibleError(k, 2.0 * kmin);
}

bool finite(const RealField& q) { return q.coeffs.allFinite(); }

}  // namespace

Trajectory evolve(const RealField& q0, const FlowSpec& spec, const MonitorSink& sink) {
  preflight(q0, spec);
  const int steps = std::max(0, static_cast<int>(std::llround(spec.T / std::abs(spec.dt))));
  const double h = steps > 0 ? std::copysign(spec.T / steps, spec.dt) : spec.dt;
  Trajectory tr;
  RealField q = q0;
  auto record = [&](double t) {
    MonitorRecord r = monitor(q, t, spec.monitor_kappas);
    tr.t.push_back(t);
    tr.q.push_back(q);
    tr.monitors.push_back(r);
    if (sink) sink(r, q);
  };
  record(0.0);
  for (int s = 1; s <= steps; ++s) {
    RealField next = step(q, spec, h);
    if (!finite(next)) {
      std::ostringstream os;
      os << flow_name(spec.kind) << " flow produced a non-finite state at t=" << s * h;
      throw FlowAbort(os.str(), (s - 1) * h, q);
    }
    q = std::move(next);
    if (s % spec.stride == 0 || s == steps) record(s * h);
  }
  return tr;
}

RealField integrate_flow(const RealField& q0, const FlowSpec& spec) {
  preflight(q0, spec);
  const int steps = std::max(0, static_cast<int>(std::llround(spec.T / std::abs(spec.dt))));
  const double h = steps > 0 ? std::copysign(spec.T / steps, spec.dt) : spec.dt;
  RealField q = q0;
  for (int s = 1; s <= steps; ++s) {
    RealField next = step(q, spec, h);
    if (!finite(next)) throw FlowAbort("non-finite state", (s - 1) * h, q);
    q = std::move(next);
  }
  return q;
}

CommutingError commuting_flows_check(const RealField& q0, double kappa, double t, double dt) {
  FlowSpec bo{FlowKind::bo, 0.0, {}, dt, t, 1, {}};
  FlowSpec hk{FlowKind::hk, kappa, {}, dt, t, 1, {}};
  FlowSpec df{FlowKind::diff, kappa, {}, dt, t, 1, {}};
  RealField a = integrate_flow(q0, bo);
  RealField b = integrate_flow(integrate_flow(q0, hk), df);
  RealField e{q0.geom, a.coeffs - b.coeffs};
  return CommutingError{l2_norm(e), sobolev_norm(e, NormSpec{-2.0, 1.0})};
}

namespace {

HardyField bo_rhs_form1(const RealField& q, const HardyField& qp, const HardyField& n) {
  const Geometry& g = q.geom;
  const int K = n.modes() - 1;
  CVec qm = grid_values(q).cast<cplx>() - grid_values(qp);
  HardyField a = hardy_derivative(project_plus(g, qm.cwiseProduct(grid_values(n)), K));
  HardyField b = hardy_product(qp, hardy_derivative(n), K);
  HardyField n2 = hardy_derivative(hardy_derivative(n));
  return HardyField{g, -kI * n2.coeffs - 2.0 * a.coeffs - 2.0 * b.coeffs};
}

HardyField bo_rhs_form3(const RealField& q, const HardyField& qp, const LaxMatrix& L,
                        const HardyField& n) {
  const Geometry& g = q.geom;
  const int K = n.modes() - 1;
  CVec qs = grid_values(q).cast<cplx>();
  CVec qm = qs - grid_values(qp);
  CVec ns = grid_values(n);
  HardyField Ln = apply_lax(L, n);
  HardyField brace = Ln;
  brace.coeffs -= project_plus(g, qm.cwiseProduct(ns), K).coeffs;
  CVec qpv = grid_values(qp);
  CVec extra = -kI * qpv.cwiseProduct(grid_values(Ln)) +
               grid_values(hardy_derivative(qp)).cwiseProduct(ns) -
               kI * qpv.cwiseProduct(grid_values(project_plus(g, qs.cwiseProduct(ns), K)));
  HardyField out = hardy_derivative(brace);
  out.coeffs += project_plus(g, extra, K).coeffs;
  if (g.kind == Kind::circle) out.coeffs += integral(q) * hardy_derivative(n).coeffs;
  return out;
}

double hnorm(const HardyField& f) { return hardy_norm(f); }

}  // namespace

GaugeDynamics gauge_dynamics_check(const RealField& q0, FlowKind flow, double kappa,
                                   double varkappa, double dt) {
  if (flow != FlowKind::bo && flow != FlowKind::hk && flow != FlowKind::beta)
    throw ConfigError("gauge dynamics are checked for the bo, hk and beta flows");
  if (q0.geom.kind == Kind::box && flow != FlowKind::bo)
    throw ConfigError("kappa-flow gauge dynamics need the circle or line geometry");
  FlowSpec spec{flow, kappa, {}, dt / 4.0, dt, 1, {}};
  RealField qf = integrate_flow(q0, spec);
  spec.dt = -dt / 4.0;
  RealField qb = integrate_flow(q0, spec);
  GaugeContext c0(q0, varkappa), cf(qf, varkappa), cb(qb, varkappa);
  HardyField fd{q0.geom, (cf.m.coeffs - cb.m.coeffs) / (2.0 * dt)};

  GaugeDynamics out;
  HardyField rhs;
  if (flow == FlowKind::bo) {
    rhs = bo_rhs_form1(q0, c0.qplus, c0.m);
    HardyField alt = bo_rhs_form3(q0, c0.qplus, c0.L, c0.m);
    HardyField d{q0.geom, rhs.coeffs - alt.coeffs};
    out.form_agreement = hnorm(d) / std::max(hnorm(rhs), 1e-300);
  } else {
    GaugeContext ck(q0, c0.L, kappa);
    rhs = apply_peter(ck, c0.m, flow == FlowKind::hk ? Peter::Pk : Peter::Pbk);
  }
  HardyField d{q0.geom, fd.coeffs - rhs.coeffs};
  out.rhs_norm = hnorm(rhs);
  out.residual = out.rhs_norm > 0.0 ? hnorm(d) / out.rhs_norm : hnorm(d);
  return out;
}

}  // namespace bolab
