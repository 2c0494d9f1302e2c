#include <cmath>
#include <limits>

#include "bolab/flows.hpp"
#include "doctest.h"

using namespace bolab;

namespace {

RealField random_field(const Geometry& g, double amp, int kmax, std::uint64_t seed) {
  return make_initial(g, "random " + std::to_string(amp) + "," + std::to_string(kmax), seed);
}

double rel(const CVec& a, const CVec& b) { return (a - b).norm() / std::max(b.norm(), 1e-300); }

// Location of the maximum by a parabola through the three largest samples.
double peak(const RealField& q) {
  RVec f = grid_values(q);
  RVec x = nodes(q.geom);
  Eigen::Index j;
  f.maxCoeff(&j);
  double a = f[j - 1], b = f[j], c = f[j + 1];
  double h = x[1] - x[0];
  return x[j] + 0.5 * h * (a - c) / (a - 2 * b + c);
}

RealField shift(const RealField& q, double a) {
  RealField out = q;
  const double dxi = freq_step(q.geom);
  for (int i = 0; i < q.geom.n; ++i) out.coeffs[i] *= std::exp(-kI * (dxi * signed_mode(i, q.geom.n) * a));
  return out;
}

}  // namespace

TEST_CASE("constants are equilibria") {
  for (Geometry g : {make_circle(64), make_box(20.0, 64)}) {
    RealField q = make_initial(g, "constant 0.3");
    for (FlowKind k : {FlowKind::bo, FlowKind::hk, FlowKind::beta, FlowKind::diff}) {
      FlowSpec s{k, 8.0};
      CHECK(vector_field(q, s).coeffs.norm() < 1e-13);
    }
    FlowSpec phi{FlowKind::phi, 0.0, {{1.0, 6.0}, {-0.5, 9.0}}};
    CHECK(vector_field(q, phi).coeffs.norm() < 1e-13);
  }
  FlowSpec s{FlowKind::beta, 8.0, {}, 1e-2, 0.5, 10};
  Trajectory tr = evolve(make_initial(make_circle(64), "constant 0.3"), s);
  for (const auto& q : tr.q) CHECK(std::abs(q.coeffs[0] - 0.3) < 1e-14);
  CHECK(tr.drift("mean") < 1e-14);
}

TEST_CASE("BO field on the soliton is the traveling-wave derivative") {
  Geometry line = make_line(256);
  RVec v = grid_values(vector_field(make_initial(line, "soliton 1"), {FlowKind::bo}));
  RVec x = nodes(line);
  double err = 0.0;
  for (int j = 0; j < line.n; ++j)
    err = std::max(err, std::abs(v[j] - 4 * x[j] / std::pow(x[j] * x[j] + 1, 2)));
  CHECK(err < 1e-10);

  // The box is periodic; its error decays like L^-3 and is checked in the bulk.
  Geometry box = make_box(200.0, 4096);
  RVec vb = grid_values(vector_field(make_initial(box, "soliton 1"), {FlowKind::bo}));
  RVec xb = nodes(box);
  double eb = 0.0;
  for (int j = 0; j < box.n; ++j)
    if (std::abs(xb[j]) < 5.0) eb = std::max(eb, std::abs(vb[j] - 4 * xb[j] / std::pow(xb[j] * xb[j] + 1, 2)));
  CHECK(eb < 1e-6);
}

TEST_CASE("H_kappa field is the real part of P_kappa q+") {
  for (Geometry g : {make_circle(128), make_line(128)}) {
    RealField q = g.kind == Kind::circle ? random_field(g, 0.3, 8, 1) : make_initial(g, "soliton 1");
    const double k = 10.0;
    RealField v = vector_field(q, {FlowKind::hk, k});
    GaugeContext ctx(q, k);
    HardyField pk = apply_peter(ctx, ctx.qplus, Peter::Pk);
    HardyField cv = cauchy_szego(v, 1, ctx.L.M);
    const int K = ctx.L.M / 2;
    CHECK(rel(cv.coeffs.head(K), pk.coeffs.head(K)) < 1e-9);
  }
}

TEST_CASE("linear regime propagates exactly") {
  Geometry g = make_circle(64);
  RealField q = make_initial(g, "mode 1e-8,3");
  const double dt = 1e-2, xi = 2 * kPi * 3;
  RealField p = step(q, {FlowKind::bo}, dt);
  CHECK(std::abs(p.coeffs[3] - q.coeffs[3] * std::exp(kI * xi * xi * dt)) < 1e-12 * std::abs(q.coeffs[3]));
  CHECK(step(zero_field(g), {FlowKind::bo}, dt).coeffs.norm() == 0.0);
}

TEST_CASE("fourth-order convergence") {
  Geometry g = make_circle(64);
  RealField q = random_field(g, 0.5, 6, 2);
  auto run = [&](double dt) { return integrate_flow(q, FlowSpec{FlowKind::bo, 0.0, {}, dt, 0.05}); };
  RealField ref = run(1.25e-5);
  double e1 = (run(5e-4).coeffs - ref.coeffs).norm();
  double e2 = (run(2.5e-4).coeffs - ref.coeffs).norm();
  double order = std::log2(e1 / e2);
  CHECK(order > 3.6);
  CHECK(order < 4.4);
}

TEST_CASE("soliton translates at speed c") {
  Geometry box = make_box(50.0, 1024);
  RealField q0 = make_initial(box, "soliton 1");
  RealField q1 = integrate_flow(q0, FlowSpec{FlowKind::bo, 0.0, {}, 1e-3, 1.0});
  CHECK(std::abs(peak(q1) - peak(q0) - 1.0) < 1e-3 * 50.0);
}

TEST_CASE("time reversal, Galilei and scaling covariance") {
  Geometry g = make_circle(64);
  RealField q0 = random_field(g, 0.3, 5, 8);
  RealField f = integrate_flow(q0, FlowSpec{FlowKind::bo, 0.0, {}, 1e-4, 0.2});
  RealField b = integrate_flow(f, FlowSpec{FlowKind::bo, 0.0, {}, -1e-4, 0.2});
  CHECK(rel(b.coeffs, q0.coeffs) < 1e-8);

  const double c = 0.4, t = 0.2;
  RealField qc = q0;
  qc.coeffs[0] += c;
  RealField fc = integrate_flow(qc, FlowSpec{FlowKind::bo, 0.0, {}, 1e-4, t});
  RealField fs = shift(integrate_flow(q0, FlowSpec{FlowKind::bo, 0.0, {}, 1e-4, t}), 2 * c * t);
  fs.coeffs[0] += c;
  CHECK(rel(fc.coeffs, fs.coeffs) < 1e-8);

  const double lam = 2.0;
  Geometry box = make_box(40.0, 512);
  RealField q = make_initial(box, "gaussian 0.5,1.5");
  RealField ql{make_box(40.0 / lam, 512), lam * q.coeffs};
  RealField a = integrate_flow(q, FlowSpec{FlowKind::bo, 0.0, {}, 1e-3, 0.4});
  RealField al = integrate_flow(ql, FlowSpec{FlowKind::bo, 0.0, {}, 1e-3 / (lam * lam), 0.4 / (lam * lam)});
  CHECK(rel(al.coeffs, lam * a.coeffs) < 1e-10);
}

TEST_CASE("conservation along short flows") {
  SUBCASE("BO on the box") {
    RealField q = make_initial(make_box(50.0, 512), "soliton 1");
    Trajectory tr = evolve(q, FlowSpec{FlowKind::bo, 0.0, {}, 1e-3, 0.5, 100, {8.0, 16.0}});
    for (const char* w : {"P", "H_BO", "H_2", "beta:8", "beta:16", "mean"}) CHECK(tr.drift(w) < 1e-6);
    CHECK(tr.monitors.size() == 6);
  }
  SUBCASE("H_kappa on the circle") {
    RealField q = random_field(make_circle(64), 0.2, 6, 4);
    Trajectory tr = evolve(q, FlowSpec{FlowKind::hk, 16.0, {}, 1e-4, 0.02, 50, {8.0, 24.0}});
    for (const char* w : {"P", "H_BO", "beta:8", "beta:24", "mean"}) CHECK(tr.drift(w) < 1e-6);
  }
  SUBCASE("beta and phi flows on the line") {
    RealField q = make_initial(make_line(128), "soliton 1");
    Trajectory tr = evolve(q, FlowSpec{FlowKind::beta, 8.0, {}, 1e-2, 0.5, 10, {6.0, 12.0}});
    for (const char* w : {"P", "H_BO", "H_2", "beta:6", "beta:12", "mean"}) CHECK(tr.drift(w) < 1e-6);
    FlowSpec phi{FlowKind::phi, 0.0, {{1.0, 6.0}, {2.0, 9.0}}, 1e-2, 0.3, 10, {12.0}};
    Trajectory tp = evolve(q, phi);
    CHECK(tp.drift("beta:12") < 1e-6);
    CHECK_THROWS_AS(step(q, {FlowKind::bo}, 1e-3), ConfigError);
  }
}

TEST_CASE("commuting flows decomposition") {
  RealField q = make_initial(make_box(50.0, 512), "soliton 1");
  CommutingError z = commuting_flows_check(q, 16.0, 0.0, 1e-3);
  CHECK(z.l2 == 0.0);
  CommutingError a = commuting_flows_check(q, 16.0, 0.1, 4e-3);
  CommutingError b = commuting_flows_check(q, 16.0, 0.1, 2e-3);
  CHECK(a.hm2 / b.hm2 > 8.0);
}

TEST_CASE("gauge dynamics") {
  Geometry g = make_circle(128);
  RealField q = random_field(g, 0.2, 8, 3);
  GaugeDynamics a = gauge_dynamics_check(q, FlowKind::bo, 0.0, 6.0, 4e-5);
  GaugeDynamics b = gauge_dynamics_check(q, FlowKind::bo, 0.0, 6.0, 2e-5);
  CHECK(a.residual / b.residual == doctest::Approx(4.0).epsilon(0.05));
  CHECK(a.form_agreement < 1e-9);
  CHECK(gauge_dynamics_check(q, FlowKind::hk, 8.0, 8.0, 1e-5).residual < 1e-5);
  CHECK(gauge_dynamics_check(q, FlowKind::hk, 8.0, 6.0, 1e-5).residual < 1e-5);
  CHECK(gauge_dynamics_check(q, FlowKind::beta, 8.0, 6.0, 1e-4).residual < 1e-7);
  GaugeDynamics c = gauge_dynamics_check(make_initial(g, "constant 0.3"), FlowKind::bo, 0.0, 6.0, 1e-3);
  CHECK(c.rhs_norm < 1e-14);
  CHECK(c.residual < 1e-12);

  RealField s = make_initial(make_line(256), "soliton 1");
  CHECK(gauge_dynamics_check(s, FlowKind::beta, 8.0, 6.0, 1e-3).residual < 1e-7);
  RealField bx = make_initial(make_box(40.0, 256), "gaussian 0.5,1");
  CHECK(gauge_dynamics_check(bx, FlowKind::bo, 0.0, 6.0, 1e-3).residual < 1e-3);
  CHECK_THROWS_AS(gauge_dynamics_check(bx, FlowKind::hk, 8.0, 6.0, 1e-3), ConfigError);
}

TEST_CASE("errors") {
  RealField q = make_initial(make_box(50.0, 256), "soliton 1");
  CHECK_THROWS_AS(evolve(q, FlowSpec{FlowKind::hk, 0.5}), InadmissibleError);
  CHECK_THROWS_AS(evolve(q, FlowSpec{FlowKind::bo, 0.0, {}, 0.0}), ConfigError);
  RealField bad = q;
  bad.coeffs[3] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(evolve(bad, FlowSpec{FlowKind::bo, 0.0, {}, 1e-3, 0.01}), FlowAbort);
  CHECK(flow_from_name("diff") == FlowKind::diff);
  CHECK_THROWS_AS(flow_from_name("kdv"), ConfigError);
  MonitorRecord r = monitor(q, 0.0, {0.1});
  CHECK(r.beta.size() == 1);
  CHECK(r.beta.begin()->first > 0.1);
}
