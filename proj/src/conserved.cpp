#include "bolab/conserved.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>

namespace bolab {

namespace {

RVec re(const CVec& v) { return v.real(); }

CVec cx(const RVec& v) { return v.cast<cplx>(); }

double integrate(const Geometry& g, const RVec& f) { return integral_grid(g, cx(f)).real(); }

// H(f') for real samples f.
RVec hilbert_of_derivative(const Geometry& g, const RVec& f) {
  return re(hilbert_grid(g, ddx_grid(g, cx(f))));
}

void require_decaying_geometry(const Geometry& g, const char* what) {
  if (g.kind == Kind::circle)
    throw ConfigError(std::string(what) + " needs the box or line geometry");
}

RVec beta_gradient(const GaugeContext& ctx) {
  CVec m = grid_values(ctx.m);
  return 2.0 * m.real() + m.cwiseAbs2();
}

}  // namespace

double beta(const GaugeContext& ctx) { return hardy_inner(ctx.qplus, ctx.m).real(); }

double beta(const RealField& q, double kappa, int M) { return beta(GaugeContext(q, kappa, M)); }

std::vector<double> beta_derivatives(const GaugeContext& ctx, int order) {
  if (order < 0 || order > 3) throw ConfigError("beta derivative order must be 0..3");
  const LaxMatrix& L = ctx.L;
  CVec u = to_herm(L, ctx.qplus);
  std::vector<CVec> v{ctx.R.solve(u)};
  for (int j = 1; j <= (order + 1) / 2; ++j) v.push_back(ctx.R.solve(v.back()));
  std::vector<double> out;
  double fact = 1.0;
  for (int j = 0; j <= order; ++j) {
    if (j > 0) fact *= j;
    // <u, R^{j+1} u> = <R^a u, R^b u> with a + b = j + 1.
    const int a = (j + 1) / 2, b = j + 1 - a;
    double val = a == 0 ? u.dot(v[b - 1]).real() : v[a - 1].dot(v[b - 1]).real();
    out.push_back((j % 2 ? -1.0 : 1.0) * fact * val);
  }
  return out;
}

std::vector<double> beta_derivatives(const RealField& q, double kappa, int order, int M) {
  return beta_derivatives(GaugeContext(q, kappa, M), order);
}

std::uint64_t fingerprint(const RealField& q) {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&](const void* p, std::size_t len) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < len; ++i) {
      h ^= b[i];
      h *= 1099511628211ull;
    }
  };
  int kind = static_cast<int>(q.geom.kind);
  mix(&kind, sizeof kind);
  mix(&q.geom.length, sizeof q.geom.length);
  mix(&q.geom.n, sizeof q.geom.n);
  mix(q.coeffs.data(), sizeof(cplx) * q.coeffs.size());
  return h;
}

BetaCurve beta_curve(const RealField& q, const std::vector<double>& kappas, int M) {
  if (!std::is_sorted(kappas.begin(), kappas.end()))
    throw ConfigError("kappa grid must be ascending");
  LaxMatrix L = build_lax(q, M);
  Admissibility adm = admissibility(L);
  BetaCurve c;
  c.fingerprint = fingerprint(q);
  for (double k : kappas) {
    if (k < adm.kappa_min) throw InadmissibleError(k, adm.kappa_min);
    c.kappa.push_back(k);
    c.beta.push_back(beta(GaugeContext(q, L, k)));
  }
  return c;
}

HamiltonianValue polynomial_hamiltonians(const RealField& q) {
  const Geometry& g = q.geom;
  RVec f = grid_values(q);
  RVec d = re(ddx_grid(g, cx(f)));
  RVec hd = hilbert_of_derivative(g, f);
  RVec f2 = f.cwiseAbs2();
  HamiltonianValue h;
  h.kind = g.kind;
  h.P = 0.5 * integrate(g, f2);
  h.H_BO = integrate(g, (0.5 * f.cwiseProduct(hd) - f2.cwiseProduct(f) / 3.0).eval());
  h.H_2 = integrate(g, (0.5 * d.cwiseAbs2() - 0.75 * f2.cwiseProduct(hd) +
                        0.25 * f2.cwiseAbs2()).eval());
  h.mean = integral(q);
  return h;
}

ExpansionFit beta_expansion_check(const RealField& q, const std::vector<double>& kappas, int M) {
  const int cols = 6;
  const int rows = static_cast<int>(kappas.size());
  if (rows < cols) throw ConfigError("expansion fit needs at least 6 kappa values");
  auto [lo, hi] = std::minmax_element(kappas.begin(), kappas.end());
  if (!(*hi >= 2.0 * *lo)) throw ConfigError("kappa grid too narrow for a stable expansion fit");
  std::vector<double> sorted = kappas;
  std::sort(sorted.begin(), sorted.end());
  BetaCurve curve = beta_curve(q, sorted, M);

  // Columns are scaled by kmin^j so the normal matrix stays well conditioned.
  const double k0 = *lo;
  RMat A(rows, cols);
  RVec b(rows);
  for (int i = 0; i < rows; ++i) {
    double t = k0 / curve.kappa[i];
    double p = 1.0;
    for (int j = 0; j < cols; ++j) {
      p *= t;
      A(i, j) = p;
    }
    b[i] = curve.beta[i];
  }
  RVec x = A.colPivHouseholderQr().solve(b);
  ExpansionFit fit;
  for (int j = 0; j < cols; ++j) fit.raw.push_back(x[j] * std::pow(k0, j + 1));
  double bmax = b.cwiseAbs().maxCoeff();
  fit.residual = bmax > 0.0 ? (A * x - b).norm() / std::sqrt(double(rows)) / bmax : 0.0;

  const double c1 = fit.raw[0], c2 = fit.raw[1], c3 = fit.raw[2];
  if (q.geom.kind == Kind::circle) {
    const double mu = integral(q);
    fit.P = c1 - 0.5 * mu * mu;
    fit.H_BO = -c2 + mu * fit.P + mu * mu * mu / 6.0;
    fit.H_2 = c3;  // no closed circle correction at this order
  } else {
    fit.P = c1;
    fit.H_BO = -c2;
    fit.H_2 = c3;
  }
  return fit;
}

double h_kappa(const GaugeContext& ctx) {
  const double k = ctx.kappa;
  const double P = 0.5 * integrate(ctx.q.geom, grid_values(ctx.q).cwiseAbs2());
  const double b = beta(ctx);
  if (ctx.q.geom.kind != Kind::circle) return k * P - k * k * b;
  const double mu = integral(ctx.q);
  return (k + mu) * P - k * k * b + 0.5 * k * mu * mu + mu * mu * mu / 6.0;
}

double h_kappa(const RealField& q, double kappa, int M) {
  return h_kappa(GaugeContext(q, kappa, M));
}

std::string functional_name(const FunctionalSpec& f) {
  auto with = [&](const char* s) { return std::string(s) + "(" + std::to_string(f.kappa) + ")"; };
  switch (f.kind) {
    case Functional::beta: return with("beta");
    case Functional::P: return "P";
    case Functional::H_BO: return "H_BO";
    case Functional::H_kappa: return with("H_kappa");
    case Functional::CofP: return "CofP";
    case Functional::CofE: return "CofE";
    case Functional::Cofbeta: return with("Cofbeta");
    case Functional::VofP: return "VofP";
  }
  return "?";
}

FunctionalGradient functional_gradient(const RealField& q, const FunctionalSpec& F, int M) {
  const Geometry& g = q.geom;
  RVec f = grid_values(q);
  RVec x = nodes(g);
  FunctionalGradient out{g, RVec()};
  switch (F.kind) {
    case Functional::beta:
      out.samples = beta_gradient(GaugeContext(q, F.kappa, M));
      break;
    case Functional::P:
      out.samples = f;
      break;
    case Functional::H_BO:
      out.samples = hilbert_of_derivative(g, f) - f.cwiseAbs2();
      break;
    case Functional::H_kappa: {
      GaugeContext ctx(q, F.kappa, M);
      const double k = F.kappa;
      out.samples = k * f - k * k * beta_gradient(ctx);
      if (g.kind == Kind::circle) {
        const double mu = integral(q);
        const double P = 0.5 * integrate(g, f.cwiseAbs2());
        out.samples += mu * f;
        out.samples.array() += P + k * mu + 0.5 * mu * mu;
      }
      break;
    }
    case Functional::CofP:
      require_decaying_geometry(g, "CofP");
      out.samples = x.cwiseProduct(f);
      break;
    case Functional::CofE: {
      require_decaying_geometry(g, "CofE");
      RVec hf = re(hilbert_grid(g, cx(f)));
      out.samples = x.cwiseProduct(hilbert_of_derivative(g, f) - f.cwiseAbs2()) + 0.5 * hf;
      break;
    }
    case Functional::Cofbeta: {
      require_decaying_geometry(g, "Cofbeta");
      GaugeContext ctx(q, F.kappa, M);
      CVec n = grid_values(ctx.m);
      // Adjoint of the gauge derivative: Re int x q dn(h) = int Re(conj(rho)(n+1)) h.
      HardyField rho = ctx.R.apply(project_plus(g, cx(x.cwiseProduct(f)), ctx.L.M));
      CVec r = grid_values(rho);
      out.samples = x.cwiseProduct(n.real()) +
                    (r.conjugate().array() * (n.array() + 1.0)).real().matrix();
      break;
    }
    case Functional::VofP:
      require_decaying_geometry(g, "VofP");
      out.samples = x.cwiseAbs2().cwiseProduct(f);
      break;
  }
  return out;
}

double poisson_bracket(const FunctionalGradient& dF, const FunctionalGradient& dG) {
  if (!(dF.geom == dG.geom)) throw ConfigError("gradients live on different grids");
  const Geometry& g = dF.geom;
  RVec dg = re(ddx_grid(g, cx(dG.samples)));
  return integrate(g, dF.samples.cwiseProduct(dg));
}

double poisson_bracket(const RealField& q, const FunctionalSpec& F, const FunctionalSpec& G,
                       int M) {
  return poisson_bracket(functional_gradient(q, F, M), functional_gradient(q, G, M));
}

BockKruskal bock_kruskal(const RealField& q, double kappa, int M) {
  const Geometry& g = q.geom;
  GaugeContext ctx(q, kappa, M);
  BockKruskal bk;
  bk.w_samples = kappa * beta_gradient(ctx);
  const RVec& w = bk.w_samples;
  bk.w = real_from_samples(g, w);
  RVec f = grid_values(q);
  RVec wp = re(ddx_grid(g, cx(w)));
  RVec den = w.array() + kappa;
  bk.min_kappa_plus_w = den.minCoeff();
  if (!(bk.min_kappa_plus_w > 0.0))
    throw NumericalError("kappa + w is not positive; transform undefined");
  RVec hwp = re(hilbert_grid(g, cx(wp)));
  RVec h2 = re(hilbert_grid(g, cx(wp.cwiseQuotient(den))));
  RVec res = 2.0 * f - hwp.cwiseQuotient(den) - h2 - 2.0 * kappa * w.cwiseQuotient(den);
  bk.residual = std::sqrt(integrate(g, res.cwiseAbs2()));
  bk.q_norm = std::sqrt(integrate(g, f.cwiseAbs2()));
  bk.integral_w = integrate(g, w);

  // 1 + w/kappa = (1+mu)(1+conj(mu)) with mu = exp(C+ log(1 + w/kappa)) - 1.
  RVec ell = (w / kappa).array().log1p();
  CVec half = grid_values(cauchy_szego(real_from_samples(g, ell), 1));
  CVec mu = half.array().exp() - 1.0;
  CVec m = grid_values(ctx.m);
  double mnorm = std::sqrt(integrate(g, m.cwiseAbs2()));
  double diff = std::sqrt(integrate(g, (mu - m).cwiseAbs2()));
  bk.wiener_hopf_error = mnorm > 0.0 ? diff / mnorm : diff;
  return bk;
}

namespace {

// R0^{1/2} T R0^{1/2} on circle/box, R0 T on the line. Same traces.
CMat alpha_kernel(const LaxMatrix& L, double kappa) {
  CMat T = L.potential();
  if (L.geom.kind != Kind::line) {
    RVec d = (L.free_diag.array() + kappa).rsqrt();
    return d.asDiagonal() * T * d.asDiagonal();
  }
  CMat A(T.rows(), T.cols());
  for (int j = 0; j < T.cols(); ++j) A.col(j) = apply_free_resolvent(L, kappa, T.col(j));
  return A;
}

// Exact second-order trace term on the circle over all Hardy modes:
// (1/2) sum_{j,k>=0} |c_{j-k}|^2 / ((kappa+xi_j)(kappa+xi_k)).
double circle_second_order(const RealField& q, double kappa) {
  const int n = q.geom.n;
  const double tp = 2.0 * kPi;
  double out = 0.5 * std::norm(q.coeffs[0]) * boost::math::trigamma(kappa / tp) / (tp * tp);
  double partial = 0.0;  // sum_{j<d} 1/(kappa + 2 pi j)
  for (int d = 1; d < n / 2; ++d) {
    partial += 1.0 / (kappa + tp * (d - 1));
    out += std::norm(q.coeffs[d]) * partial / (tp * d);
  }
  return out;
}

// sum_{j>=0} 1/((kappa + lam + 2 pi j)(kappa + 2 pi j))
double circle_pair_sum(double kappa, double lam) {
  const double tp = 2.0 * kPi;
  const double b = kappa / tp;
  if (std::abs(lam) < 1e-10 * kappa) return boost::math::trigamma(b) / (tp * tp);
  const double a = (kappa + lam) / tp;
  return (boost::math::digamma(a) - boost::math::digamma(b)) / (tp * lam);
}

}  // namespace

AlphaResult perturbation_determinant_alpha(const RealField& q, double kappa, int M) {
  const Geometry& g = q.geom;
  LaxMatrix L = build_lax(q, M);
  Admissibility adm = admissibility(L);
  if (kappa < adm.kappa_min) throw InadmissibleError(kappa, adm.kappa_min);
  AlphaResult out;

  CMat A = alpha_kernel(L, kappa);
  if (g.kind == Kind::line) {
    Eigen::ComplexEigenSolver<CMat> es(A, false);
    out.spectral_radius = es.eigenvalues().cwiseAbs().maxCoeff();
  } else {
    Eigen::SelfAdjointEigenSolver<CMat> es(A, Eigen::EigenvaluesOnly);
    out.spectral_radius = es.eigenvalues().cwiseAbs().maxCoeff();
  }
  if (!(out.spectral_radius < 1.0))
    throw NumericalError("alpha trace series is not contractive at this kappa");

  // On the circle the second-order term is summed over all modes in closed
  // form; the truncated matrix only supplies orders >= 3.
  const bool circle = g.kind == Kind::circle;
  double sum = circle ? circle_second_order(q, kappa) : 0.0;
  CMat P = A;
  int small = 0;
  int l = 1;
  while (small < 2 && l < 2000) {
    P = P * A;
    ++l;
    if (circle && l == 2) continue;
    double term = P.trace().real() / l;
    sum += term;
    small = std::abs(term) < 1e-14 * std::max(std::abs(sum), 1e-300) ? small + 1 : 0;
  }
  out.series = sum;
  out.terms = l;

  // beta(k) = sum_i w_i / (lam_i + k) from one eigendecomposition of S.
  Eigen::SelfAdjointEigenSolver<CMat> es(L.S);
  CVec u = to_herm(L, cauchy_szego(q, 1, L.M));
  RVec w = (es.eigenvectors().adjoint() * u).cwiseAbs2();
  const RVec& lam = es.eigenvalues();
  double bs = 0.0;
  for (int i = 0; i < w.size(); ++i) {
    if (circle) {
      bs += w[i] * circle_pair_sum(kappa, lam[i]);
    } else {
      // (1/2pi) int_0^inf beta(kappa+xi)/(kappa+xi) dxi, term by term.
      double x = lam[i] / kappa;
      double f = std::abs(x) < 1e-8 ? (1.0 - 0.5 * x) / kappa : std::log1p(x) / lam[i];
      bs += w[i] * f / (2.0 * kPi);
    }
  }
  out.beta_sum = bs;
  out.difference = out.series - out.beta_sum;
  return out;
}

CovarianceReport symmetry_covariance(const RealField& q, Transform t, double parameter,
                                     const std::vector<double>& kappas, int M) {
  CovarianceReport rep{t, parameter, {}, 0.0};
  const Geometry& g = q.geom;
  if (t == Transform::scale) {
    if (g.kind != Kind::box) throw ConfigError("scale covariance is checked on the box");
    if (!(parameter > 0.0)) throw ConfigError("scale factor must be positive");
    RealField ql{make_box(g.length / parameter, g.n), parameter * q.coeffs};
    for (double k : kappas) {
      double lhs = beta(ql, parameter * k, M);
      double rhs = beta(q, k, M);
      double err = std::abs(lhs - rhs) / std::max(std::abs(rhs), 1e-300);
      rep.rows.push_back({k, lhs, rhs, err});
    }
  } else {
    if (g.kind != Kind::circle) throw ConfigError("Galilei covariance is checked on the circle");
    const double c = parameter;
    RealField qc = q;
    qc.coeffs[0] += c;
    const double mu = integral(q);
    for (double k : kappas) {
      double lhs = beta(qc, k, M) + mu + c;
      double rhs = k * k / ((k - c) * (k - c)) * (beta(q, k - c, M) + mu) + c * k / (k - c);
      double err = std::abs(lhs - rhs) / std::max(std::abs(rhs), 1e-300);
      rep.rows.push_back({k, lhs, rhs, err});
    }
  }
  for (const auto& r : rep.rows) rep.max_rel_err = std::max(rep.max_rel_err, r.rel_err);
  return rep;
}

GaugeIdentity gauge_pair_identity(const RealField& q, double kappa, double varkappa, int M) {
  const Geometry& g = q.geom;
  LaxMatrix L = build_lax(q, M);
  Admissibility adm = admissibility(L);
  for (double k : {kappa, varkappa})
    if (k < adm.kappa_min) throw InadmissibleError(k, adm.kappa_min);
  GaugeContext cm(q, L, kappa), cn(q, L, varkappa);
  CVec m = grid_values(cm.m);
  CVec nb = grid_values(cn.m).conjugate();
  CVec f = cx(grid_values(q));
  CVec A = (m.array() * nb.array() + m.array() + nb.array()).matrix();
  CVec dm = ddx_grid(g, m), dnb = ddx_grid(g, nb);
  CVec m1 = m.array() + 1.0, n1 = nb.array() + 1.0;

  std::vector<CVec> terms{
      hilbert_grid(g, ddx_grid(g, A)),
      kI * m1.cwiseProduct(dnb),
      -kI * dm.cwiseProduct(n1),
      -2.0 * f.cwiseProduct(m1).cwiseProduct(n1),
      kI * (kappa - varkappa) * hilbert_grid(g, A),
      (kappa + varkappa) * A,
  };
  GaugeIdentity out;
  out.lhs = CVec::Zero(g.n);
  for (const auto& t : terms) {
    out.lhs += t;
    out.scale = std::max(out.scale, t.cwiseAbs().maxCoeff());
  }
  out.expected = 0.0;
  if (g.kind == Kind::circle)
    out.expected = varkappa * integral_grid(g, m) + kappa * integral_grid(g, nb);
  out.deviation = (out.lhs.array() - out.expected).abs().maxCoeff();
  cplx mean = out.lhs.mean();
  out.spread = std::sqrt((out.lhs.array() - mean).abs2().mean());
  return out;
}

}  // namespace bolab
