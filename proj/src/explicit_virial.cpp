#include "bolab/explicit_virial.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <Eigen/LU>
#include <Eigen/QR>
#include <Eigen/SVD>
#include <Eigen/SparseLU>
#include <spdlog/spdlog.h>

namespace bolab {

namespace {

const double kSqrt2Pi = std::sqrt(2.0 * kPi);

CVec cx(const RVec& v) { return v.cast<cplx>(); }

double integrate(const Geometry& g, const RVec& f) { return integral_grid(g, cx(f)).real(); }

void require_line(const Geometry& g, const char* what) {
  if (g.kind != Kind::line) throw ConfigError(std::string(what) + " needs the line geometry");
}

void require_decaying(const RealField& q, const char* what) {
  if (q.geom.kind == Kind::circle)
    throw ConfigError(std::string(what) + " needs the box or line geometry");
  if (q.geom.kind == Kind::box && boundary_amplitude(q) > 1e-6)
    throw ConfigError(std::string(what) + ": data does not decay inside the box");
}

// Stencil of X = i d/dxi: interior central, one-sided second order at the ends.
template <class Emit>
void fd_x_stencil(const LineFreqGrid& grid, Emit emit) {
  const int n = grid.K + 1;
  if (n < 4) throw ConfigError("frequency grid needs at least four nodes");
  const cplx c = kI / (2.0 * grid.h);
  emit(0, 0, -3.0 * c);
  emit(0, 1, 4.0 * c);
  emit(0, 2, -c);
  for (int k = 1; k + 1 < n; ++k) {
    emit(k, k - 1, -c);
    emit(k, k + 1, c);
  }
  emit(n - 1, n - 1, 3.0 * c);
  emit(n - 1, n - 2, -4.0 * c);
  emit(n - 1, n - 3, c);
}

CMat fd_x_matrix(const LineFreqGrid& grid) {
  CMat X = CMat::Zero(grid.K + 1, grid.K + 1);
  fd_x_stencil(grid, [&](int i, int j, cplx v) { X(i, j) = v; });
  return X;
}

// Dense inverse of S + kappa.
CMat resolvent_matrix(const LaxMatrix& L, double kappa) {
  Resolvent R(L, kappa);
  CMat out(L.size(), L.size());
  for (int j = 0; j < L.size(); ++j) out.col(j) = R.solve(CVec::Unit(L.size(), j));
  return out;
}

CMat psi_of(const CMat& S, const PhiSpec& phi, const std::function<CMat(double)>& resolvent) {
  const Eigen::Index n = S.rows();
  CMat psi = phi.a * CMat::Identity(n, n) + 2.0 * phi.b * S;
  for (auto [c, k] : phi.terms) {
    CMat R = resolvent(k);
    psi += (c * k) * (R * R);
  }
  return psi;
}

void check_z(cplx z) {
  if (!(z.imag() > 0.0)) throw ConfigError("z must lie in the upper half-plane");
}

}  // namespace

RVec LineFreqGrid::nodes() const {
  RVec xi(K + 1);
  for (int k = 0; k <= K; ++k) xi[k] = k * h;
  return xi;
}

LineFreqGrid make_freq_grid(double h, double xi_max) {
  if (!(h > 0.0) || !(xi_max > 0.0)) throw ConfigError("frequency grid needs h > 0 and xi_max > 0");
  return LineFreqGrid{h, static_cast<int>(std::ceil(xi_max / h - 1e-9))};
}

LineFreqGrid freq_grid_for(const RealField& q, double h) {
  double peak = std::abs(fourier_hat(q, 0.0));
  for (double xi = h; xi < 200.0; xi += h) peak = std::max(peak, std::abs(fourier_hat(q, xi)));
  double xi = 1.0;
  while (xi < 200.0 && std::abs(fourier_hat(q, xi)) >= 1e-12 * peak) xi += 1.0;
  return make_freq_grid(h, xi);
}

cplx fourier_hat(const RealField& q, double xi) {
  const Geometry& g = q.geom;
  if (g.kind == Kind::line) return line_transform(g, q.coeffs, xi);
  if (g.kind != Kind::box) throw ConfigError("Fourier transform needs decaying data");
  RVec f = grid_values(q);
  RVec x = nodes(g);
  cplx acc = 0.0;
  for (int j = 0; j < g.n; ++j) acc += f[j] * std::exp(-kI * (xi * x[j]));
  return acc * (g.length / g.n) / kSqrt2Pi;
}

FreqField sample_freq(const LineFreqGrid& grid, const std::function<cplx(double)>& fhat) {
  FreqField out{grid, CVec(grid.K + 1)};
  for (int k = 0; k <= grid.K; ++k) out.f[k] = fhat(k * grid.h);
  return out;
}

FreqField positive_part(const LineFreqGrid& grid, const RealField& q) {
  return sample_freq(grid, [&](double xi) { return fourier_hat(q, xi); });
}

FreqField x_operator_apply(const FreqField& f) {
  FreqField out{f.grid, CVec::Zero(f.f.size())};
  fd_x_stencil(f.grid, [&](int i, int j, cplx v) { out.f[i] += v * f.f[j]; });
  return out;
}

FreqField x_resolvent(const FreqField& f, cplx z) {
  check_z(z);
  const int n = f.grid.K + 1;
  std::vector<Eigen::Triplet<cplx>> trip;
  fd_x_stencil(f.grid, [&](int i, int j, cplx v) { trip.emplace_back(i, j, v); });
  for (int k = 0; k < n; ++k) trip.emplace_back(k, k, -z);
  Eigen::SparseMatrix<cplx> A(n, n);
  A.setFromTriplets(trip.begin(), trip.end());
  Eigen::SparseLU<Eigen::SparseMatrix<cplx>> lu(A);
  if (lu.info() != Eigen::Success) throw NumericalError("X resolvent factorization failed");
  return {f.grid, lu.solve(f.f)};
}

IPlus i_plus(const FreqField& f) {
  if (f.grid.K < 3) throw ConfigError("I+ needs at least four nodes");
  IPlus out;
  cplx extrap = 3.0 * f.f[1] - 3.0 * f.f[2] + f.f[3];
  out.value = kSqrt2Pi * extrap;
  double scale = std::max(f.f.cwiseAbs().maxCoeff(), 1e-300);
  out.spread = std::abs(extrap - f.f[0]) / scale;
  out.flagged = out.spread > 1e-6;
  if (out.flagged) spdlog::warn("I+ extrapolation spread {:.2e}", out.spread);
  return out;
}

cplx i_plus_pairing(const FreqField& f, double y) {
  if (!(y > 0.0)) throw ConfigError("pairing height must be positive");
  const double h = f.grid.h;
  const double e = std::exp(-y * h);
  const double E0 = -std::expm1(-y * h) / y;
  const double E1 = (1.0 - e * (1.0 + y * h)) / (y * y);
  cplx acc = 0.0;
  for (int k = 0; k < f.grid.K; ++k) {
    cplx f0 = f.f[k], f1 = f.f[k + 1];
    acc += std::exp(-y * k * h) * (f0 * E0 + (f1 - f0) / h * E1);
  }
  return kSqrt2Pi * y * acc;
}

CMat x_matrix(const Geometry& line, int M) {
  require_line(line, "x_matrix");
  const double s = line.length;
  CMat X = CMat::Zero(M + 1, M + 1);
  for (int j = 0; j <= M; ++j) {
    X(j, j) = -kI * s;
    for (int k = j + 1; k <= M; ++k) X(j, k) = -2.0 * kI * s;
  }
  return X;
}

HardyField x_apply(const HardyField& f) {
  require_line(f.geom, "x_apply");
  const double s = f.geom.length;
  CVec out(f.modes());
  cplx tail = 0.0;
  for (int j = f.modes() - 1; j >= 0; --j) {
    out[j] = -kI * s * (f.coeffs[j] + 2.0 * tail);
    tail += f.coeffs[j];
  }
  return {f.geom, out};
}

cplx i_plus(const HardyField& f) {
  require_line(f.geom, "i_plus");
  return -kI * std::sqrt(4.0 * kPi * f.geom.length) * f.coeffs.sum();
}

cplx evaluate_upper(const HardyField& f, cplx z) {
  require_line(f.geom, "evaluate_upper");
  check_z(z);
  const double s = f.geom.length;
  const cplx w = (z - kI * s) / (z + kI * s);
  cplx basis = std::sqrt(s / kPi) / (z + kI * s);
  cplx acc = 0.0;
  for (int k = 0; k < f.modes(); ++k) {
    acc += f.coeffs[k] * basis;
    basis *= w;
  }
  return acc;
}

double PhiSpec::phi(double E) const {
  double v = a + b * E;
  for (auto [c, k] : terms) v += c / (E + k);
  return v;
}

double PhiSpec::psi(double E) const {
  double v = a + 2.0 * b * E;
  for (auto [c, k] : terms) v += c * k / ((E + k) * (E + k));
  return v;
}

PhiSpec phi_for_flow(const FlowSpec& flow) {
  const double k = flow.kappa;
  switch (flow.kind) {
    case FlowKind::bo: return {0.0, 1.0, {}};
    case FlowKind::beta: return {0.0, 0.0, {{1.0, k}}};
    case FlowKind::hk: return {k, 0.0, {{-k * k, k}}};
    case FlowKind::diff: return {-k, 1.0, {{k * k, k}}};
    case FlowKind::phi: return {0.0, 0.0, flow.phi};
  }
  throw ConfigError("unknown flow");
}

RealField line_from_box(const RealField& q, int n, double scale) {
  if (q.geom.kind != Kind::box) throw ConfigError("line_from_box needs box data");
  Geometry line = make_line(n, scale);
  RVec x = nodes(line);
  const double half = 0.5 * q.geom.length, dxi = freq_step(q.geom);
  const int N = q.geom.n;
  RVec v = RVec::Zero(n);
  for (int j = 0; j < n; ++j) {
    if (std::abs(x[j]) >= half) continue;
    cplx acc = 0.0;
    for (int i = 0; i < N; ++i) {
      int k = signed_mode(i, N);
      if (2 * std::abs(k) == N) continue;
      acc += q.coeffs[i] * std::exp(kI * (dxi * k * x[j]));
    }
    v[j] = acc.real();
  }
  return real_from_samples(line, v);
}

GerardValue gerard_solve(const RealField& q0_in, const PhiSpec& phi, double t, cplx z, int M) {
  check_z(z);
  if (q0_in.geom.kind == Kind::circle) throw ConfigError("the explicit formula is a line statement");
  RealField q0 = q0_in;
  if (q0.geom.kind == Kind::box) {
    require_decaying(q0, "gerard_solve");
    q0 = line_from_box(q0_in, 2 * q0_in.geom.n);
  }
  LaxMatrix L = build_lax(q0, M);
  M = L.M;
  if (!phi.terms.empty()) {
    Admissibility adm = admissibility(L);
    for (const auto& term : phi.terms)
      if (term.second <= adm.kappa_min) throw InadmissibleError(term.second, adm.kappa_min);
  }
  CVec u = cauchy_szego(q0, 1, M).coeffs;
  CMat A = x_matrix(q0.geom, M) - t * psi_of(L.S, phi, [&](double k) { return resolvent_matrix(L, k); });
  A.diagonal().array() -= z;
  CVec w = A.partialPivLu().solve(u);
  GerardValue out;
  out.residual = (A * w - u).norm() / std::max(u.norm(), 1e-300);
  if (!std::isfinite(out.residual) || out.residual > 1e-8)
    throw NumericalError("explicit-formula system is ill-conditioned");
  out.value = i_plus(HardyField{q0.geom, w}) / (2.0 * kPi * kI);
  return out;
}

GerardValue gerard_solve_grid(const RealField& q0, const PhiSpec& phi, double t, cplx z,
                              const LineFreqGrid& grid) {
  check_z(z);
  require_decaying(q0, "gerard_solve_grid");
  const int K = grid.K, n = K + 1;
  const double h = grid.h;
  std::vector<cplx> qhat(2 * K + 1);
  for (int d = -K; d <= K; ++d) qhat[d + K] = fourier_hat(q0, d * h);
  // L = xi - C+ q with the trapezoid rule in the convolution.
  CMat L = CMat::Zero(n, n);
  for (int j = 0; j < n; ++j) {
    for (int k = 0; k < n; ++k) {
      double w = (k == 0 || k == K) ? 0.5 * h : h;
      L(j, k) = -w * qhat[j - k + K] / kSqrt2Pi;
    }
    L(j, j) += j * h;
  }
  CVec u(n);
  for (int k = 0; k < n; ++k) u[k] = qhat[k + K];
  auto resolvent = [&](double k) {
    CMat A = L;
    A.diagonal().array() += k;
    return CMat(A.partialPivLu().inverse());
  };
  CMat A = fd_x_matrix(grid) - t * psi_of(L, phi, resolvent);
  A.diagonal().array() -= z;
  CVec w = A.partialPivLu().solve(u);
  GerardValue out;
  out.residual = (A * w - u).norm() / std::max(u.norm(), 1e-300);
  out.value = i_plus(FreqField{grid, w}).value / (2.0 * kPi * kI);
  return out;
}

cplx flow_reference(const RealField& q0, const FlowSpec& flow, double t, cplx z) {
  check_z(z);
  FlowSpec spec = flow;
  spec.T = t;
  RealField q = t == 0.0 ? q0 : integrate_flow(q0, spec);
  const Geometry& g = q.geom;
  if (g.kind == Kind::line) return evaluate_upper(cauchy_szego(q, 1, band(g)), z);
  if (g.kind != Kind::box) throw ConfigError("the explicit formula is a line statement");
  const double dxi = freq_step(g);
  cplx acc = 0.5 * q.coeffs[0];
  for (int k = 1; k < g.n / 2; ++k) acc += q.coeffs[k] * std::exp(kI * (dxi * k * z));
  return acc;
}

CommutatorReport commutator_checks(const RealField& q0, double kappa, int fields, std::uint64_t seed) {
  require_line(q0.geom, "commutator_checks");
  GaugeContext ctx(q0, kappa);
  const LaxMatrix& L = ctx.L;
  const int M = L.M, d = M / 4;
  const Geometry& g = q0.geom;
  CMat X = x_matrix(g, M);
  CMat T = L.potential();
  CVec qp = ctx.qplus.coeffs;
  CMat R = resolvent_matrix(L, kappa);

  CommutatorReport rep;
  CMat C = (X * T - T * X).leftCols(d + 1);
  Eigen::JacobiSVD<CMat> svd(C);
  RVec sv = svd.singularValues();
  rep.singular_values.assign(sv.data(), sv.data() + std::min<Eigen::Index>(sv.size(), 8));
  rep.rank_one_ratio = sv[0] > 0.0 ? sv[1] / sv[0] : 0.0;

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  for (int r = 0; r < fields; ++r) {
    CVec f = CVec::Zero(M + 1);
    for (int k = 0; k <= d; ++k) f[k] = cplx(nd(rng), nd(rng)) * std::exp(-4.0 * k / d);
    HardyField fh{g, f};
    const cplx ip = i_plus(fh);
    CVec rank1 = (kI / (2.0 * kPi)) * ip * qp;

    CVec c1 = X * (T * f) - T * (X * f);
    double s1 = std::max(rank1.norm(), 1e-300);
    rep.comm1_residual = std::max(rep.comm1_residual, (c1 - rank1).norm() / (q0.coeffs.norm() > 0 ? s1 : 1.0));

    CVec cl = X * (L.S * f) - L.S * (X * f);
    CVec el = kI * f - rank1;
    rep.lax_residual = std::max(rep.lax_residual, (cl - el).norm() / el.norm());

    HardyField pf = apply_peter(ctx, fh, Peter::Pbk);
    HardyField pxf = apply_peter(ctx, x_apply(fh), Peter::Pbk);
    CVec c2 = x_apply(pf).coeffs - pxf.coeffs;
    CVec e2 = -kappa * (R * (R * f));
    rep.comm2_residual = std::max(rep.comm2_residual, (c2 - e2).norm() / e2.norm());
  }
  return rep;
}

CentroidValues centroids(const RealField& q, double varkappa, int M) {
  require_decaying(q, "centroids");
  const Geometry& g = q.geom;
  RVec f = grid_values(q), x = nodes(g);
  RVec hq = hilbert_grid(g, ddx_grid(g, cx(f))).real();
  CentroidValues c;
  c.CofP = 0.5 * integrate(g, x.cwiseProduct(f.cwiseAbs2()));
  c.CofE = integrate(g, (0.5 * x.cwiseProduct(f).cwiseProduct(hq) -
                         x.cwiseProduct(f.array().cube().matrix()) / 3.0));
  c.VofP = 0.5 * integrate(g, x.cwiseAbs2().cwiseProduct(f.cwiseAbs2()));
  GaugeContext ctx(q, varkappa, M);
  RVec n = grid_values(ctx.m).real();
  c.Cofbeta = integrate(g, x.cwiseProduct(f).cwiseProduct(n));
  return c;
}

double cofbeta_derivative(const RealField& q, double varkappa, int M) {
  require_decaying(q, "cofbeta_derivative");
  const Geometry& g = q.geom;
  GaugeContext ctx(q, varkappa, M);
  RVec dn = -grid_values(ctx.R.apply(ctx.m)).real();
  RVec f = grid_values(q), x = nodes(g);
  return integrate(g, x.cwiseProduct(f).cwiseProduct(dn));
}

std::vector<CheckRecord> virial_checks(const RealField& q, double kappa, double varkappa, double tol,
                                       int M) {
  require_decaying(q, "virial_checks");
  const Geometry& g = q.geom;
  if (kappa == varkappa) throw ConfigError("virial checks need kappa != varkappa");
  GaugeContext ck(q, kappa, M), cv(q, varkappa, M);
  std::vector<double> b = beta_derivatives(ck, 1);
  const double bv = beta(cv);

  FunctionalGradient dB = functional_gradient(q, {Functional::beta, kappa}, M);
  auto pb = [&](Functional F, double k) {
    return poisson_bracket(functional_gradient(q, {F, k}, M), dB);
  };
  nlohmann::json p{{"kappa", kappa}, {"varkappa", varkappa}};
  std::vector<CheckRecord> out;
  out.push_back(make_record("virial.CofP", g, p, -pb(Functional::CofP, 0.0), -kappa * b[1], tol));
  out.push_back(make_record("virial.CofE", g, p, -pb(Functional::CofE, 0.0),
                            kappa * kappa * b[1] + kappa * b[0], tol));

  // -kappa <q+, R(k) R(vk) R(k) q+> in Hermitian coordinates.
  CVec rq = ck.R.solve(to_herm(ck.L, ck.qplus));
  const double rrr = -kappa * rq.dot(cv.R.solve(rq)).real();
  const double lhs_cb = pb(Functional::Cofbeta, varkappa);
  out.push_back(make_record("virial.Cofbeta", g, p, lhs_cb, rrr, tol));
  const double dk = kappa - varkappa;
  const double divided = -kappa * (b[1] * dk - (b[0] - bv)) / (dk * dk);
  out.push_back(make_record("virial.Cofbeta.divided", g, p, rrr, divided, tol));

  const double vofp = pb(Functional::VofP, 0.0);
  const double vrhs = 2.0 * kappa * cofbeta_derivative(q, kappa, M);
  // For even data both sides vanish; the CofP bracket sets the scale.
  const double floor = std::abs(vrhs) < 1e-12 * std::abs(kappa * b[1]) ? std::abs(kappa * b[1]) : 0.0;
  out.push_back(make_record("virial.VofP", g, p, vofp, vrhs, tol, floor));
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& c) { return a.id < c.id; });
  return out;
}

std::pair<double, double> cofbeta_expansion(const RealField& q, const std::vector<double>& vk, int M) {
  const int cols = 5;
  if (static_cast<int>(vk.size()) < cols) throw ConfigError("Cofbeta expansion needs at least 5 points");
  RMat A(vk.size(), cols);
  RVec y(vk.size());
  for (std::size_t i = 0; i < vk.size(); ++i) {
    for (int j = 0; j < cols; ++j) A(i, j) = std::pow(vk[i], -(j + 1));
    y[i] = centroids(q, vk[i], M).Cofbeta;
  }
  RVec c = A.colPivHouseholderQr().solve(y);
  return {c[0], c[1]};
}

VofPLaw vofp_time_law(const RealField& q0, double kappa, const std::vector<double>& times, double dt) {
  require_decaying(q0, "vofp_time_law");
  if (times.size() < 3) throw ConfigError("VofP law needs at least three times");
  VofPLaw law;
  std::vector<double> bd = beta_derivatives(q0, kappa, 3);
  law.predicted[0] = centroids(q0, kappa).VofP;
  law.predicted[1] = 2.0 * kappa * cofbeta_derivative(q0, kappa);
  law.predicted[2] = -kappa * kappa * bd[3] / 6.0;
  law.cofp_speed_predicted = kappa * bd[1];

  FlowSpec spec{FlowKind::beta, kappa, {}, dt, 0.0, 1, {}};
  std::vector<double> ts = times;
  std::sort(ts.begin(), ts.end());
  std::vector<double> cofp;
  RealField q = q0;
  double t = 0.0;
  for (double target : ts) {
    const long steps = std::lround((target - t) / dt);
    if (std::abs(steps * dt - (target - t)) > 1e-9 * std::max(1.0, target))
      throw ConfigError("VofP sample times must be multiples of dt");
    spec.T = steps * dt;
    if (steps > 0) q = integrate_flow(q, spec);
    t = target;
    CentroidValues c = centroids(q, kappa);
    law.t.push_back(t);
    law.vofp.push_back(c.VofP);
    cofp.push_back(c.CofP);
  }
  const int n = static_cast<int>(ts.size());
  RMat A(n, 3);
  RVec y(n), yc(n);
  for (int i = 0; i < n; ++i) {
    A(i, 0) = 1.0;
    A(i, 1) = law.t[i];
    A(i, 2) = law.t[i] * law.t[i];
    y[i] = law.vofp[i];
    yc[i] = cofp[i];
  }
  RVec c = A.colPivHouseholderQr().solve(y);
  for (int j = 0; j < 3; ++j) law.fit[j] = c[j];
  law.fit_residual = (A * c - y).cwiseAbs().maxCoeff() / std::abs(law.predicted[0]);
  law.cofp_speed = A.leftCols(2).colPivHouseholderQr().solve(yc)[1];
  return law;
}

}  // namespace bolab
