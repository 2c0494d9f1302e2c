#include "bolab/lax_gauge.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Eigenvalues>

namespace bolab {

namespace {

std::string inadmissible_message(double kappa, double kappa_min) {
  std::ostringstream os;
  os << "kappa=" << kappa << " is below the admissibility threshold kappa_min=" << kappa_min;
  return os.str();
}

// Solve (tridiag(off, diag + kappa, off)) x = b for real symmetric bands.
CVec thomas(const RVec& diag, const RVec& off, double kappa, const CVec& b) {
  const int n = static_cast<int>(b.size());
  RVec c(n);
  CVec d(n);
  double denom = diag[0] + kappa;
  c[0] = n > 1 ? off[0] / denom : 0.0;
  d[0] = b[0] / denom;
  for (int i = 1; i < n; ++i) {
    denom = diag[i] + kappa - off[i - 1] * c[i - 1];
    c[i] = i < n - 1 ? off[i] / denom : 0.0;
    d[i] = (b[i] - off[i - 1] * d[i - 1]) / denom;
  }
  for (int i = n - 2; i >= 0; --i) d[i] -= c[i] * d[i + 1];
  return d;
}

HardyField resize(const HardyField& f, int K) {
  HardyField out{f.geom, CVec::Zero(K + 1)};
  const int k = std::min(K + 1, f.modes());
  out.coeffs.head(k) = f.coeffs.head(k);
  return out;
}

}  // namespace

InadmissibleError::InadmissibleError(double k, double kmin)
    : std::runtime_error(inadmissible_message(k, kmin)), kappa(k), kappa_min(kmin) {}

int default_modes(const Geometry& g) { return band(g); }

CMat LaxMatrix::potential() const {
  CMat L0 = CMat::Zero(size(), size());
  L0.diagonal() = free_diag.cast<cplx>();
  for (int k = 0; k + 1 < size(); ++k) {
    L0(k, k + 1) = free_off[k];
    L0(k + 1, k) = free_off[k];
  }
  return L0 - S;
}

LaxMatrix build_lax(const RealField& q, int M) {
  const Geometry& g = q.geom;
  if (M < 0) M = default_modes(g);
  if (M > band(g)) throw ConfigError("Lax mode count exceeds the dealiasing band of the grid");
  LaxMatrix L;
  L.geom = g;
  L.M = M;
  const int K = M + 1;
  const int n = g.n;
  RVec w = hardy_weights(g, M);
  L.sqrtw = w.cwiseSqrt();
  L.free_diag.resize(K);
  L.free_off = RVec::Zero(K);
  CVec sym = symbol_coeffs(q);
  RVec omega = RVec::Ones(K);
  if (g.kind == Kind::line) {
    const double s = g.length;
    for (int k = 0; k < K; ++k) {
      L.free_diag[k] = (k + 0.5) / s;
      L.free_off[k] = -(k + 1.0) / (2.0 * s);
    }
  } else {
    const double dxi = freq_step(g);
    for (int k = 0; k < K; ++k) L.free_diag[k] = dxi * k;
    if (g.kind == Kind::box) omega[0] = std::sqrt(0.5);
  }
  L.S = CMat::Zero(K, K);
  for (int j = 0; j < K; ++j) {
    for (int k = 0; k < K; ++k) L.S(j, k) = -omega[j] * omega[k] * sym[((j - k) % n + n) % n];
  }
  for (int j = 0; j < K; ++j) {
    L.S(j, j) += L.free_diag[j];
    if (j + 1 < K) {
      L.S(j, j + 1) += L.free_off[j];
      L.S(j + 1, j) += L.free_off[j];
    }
  }
  return L;
}

CVec to_herm(const LaxMatrix& L, const HardyField& f) {
  return resize(f, L.M).coeffs.cwiseProduct(L.sqrtw.cast<cplx>());
}

HardyField from_herm(const LaxMatrix& L, const CVec& u) {
  return HardyField{L.geom, u.cwiseQuotient(L.sqrtw.cast<cplx>())};
}

HardyField apply_lax(const LaxMatrix& L, const HardyField& f) {
  return from_herm(L, L.S * to_herm(L, f));
}

CVec apply_free_resolvent(const LaxMatrix& L, double kappa, const CVec& u) {
  if (L.geom.kind == Kind::line) return thomas(L.free_diag, L.free_off, kappa, u);
  return u.cwiseQuotient((L.free_diag.array() + kappa).matrix().cast<cplx>());
}

Resolvent::Resolvent(const LaxMatrix& L, double kappa)
    : geom_(L.geom), sqrtw_(L.sqrtw), kappa_(kappa) {
  CMat A = L.S;
  A.diagonal().array() += kappa;
  llt_.compute(A);
  if (llt_.info() != Eigen::Success) {
    use_lu_ = true;
    lu_.compute(A);
    // A singular LU still "succeeds"; judge it by the reciprocal condition.
    if (!(lu_.rcond() > 1e-14)) {
      Eigen::SelfAdjointEigenSolver<CMat> es(L.S, Eigen::EigenvaluesOnly);
      const RVec& ev = es.eigenvalues();
      Eigen::Index idx = 0;
      (ev.array() + kappa).abs().minCoeff(&idx);
      std::ostringstream os;
      os << "singular resolvent at kappa=" << kappa << "; nearest eigenvalue " << ev[idx];
      throw NumericalError(os.str());
    }
  }
}

CVec Resolvent::solve(const CVec& u) const {
  if (use_lu_) return lu_.solve(u);
  return llt_.solve(u);
}

HardyField Resolvent::apply(const HardyField& f) const {
  const int K = static_cast<int>(sqrtw_.size()) - 1;
  CVec u = resize(f, K).coeffs.cwiseProduct(sqrtw_.cast<cplx>());
  return HardyField{geom_, solve(u).cwiseQuotient(sqrtw_.cast<cplx>())};
}

namespace {

// Row sums of |T R0| need T R0; T is Hermitian and R0 real symmetric, so
// these are the column sums of |R0 T|.
double proxy_from(const LaxMatrix& L, const CMat& T, const RMat& absT, double kappa) {
  if (L.geom.kind != Kind::line) {
    RVec inv = (L.free_diag.array() + kappa).inverse();
    return (absT * inv).maxCoeff();
  }
  double best = 0.0;
  for (int j = 0; j < L.size(); ++j) {
    CVec col = thomas(L.free_diag, L.free_off, kappa, T.col(j));
    best = std::max(best, col.cwiseAbs().sum());
  }
  return best;
}

}  // namespace

double admissibility_proxy(const LaxMatrix& L, double kappa) {
  CMat T = L.potential();
  RMat absT = T.cwiseAbs();
  return proxy_from(L, T, absT, kappa);
}

Admissibility admissibility(const LaxMatrix& L) {
  CMat T = L.potential();
  RMat absT = T.cwiseAbs();
  auto proxy = [&](double k) { return proxy_from(L, T, absT, k); };
  const double floor = 1e-12;
  if (proxy(floor) < 0.5) return Admissibility{0.0, proxy(floor)};
  double hi = 1.0;
  while (proxy(hi) >= 0.5) {
    hi *= 2.0;
    if (hi > 1e12) throw NumericalError("admissibility search did not terminate");
  }
  double lo = hi > 1.0 ? hi / 2.0 : floor;
  for (int it = 0; it < 200 && hi - lo > 1e-12 * hi; ++it) {
    double mid = 0.5 * (lo + hi);
    (proxy(mid) < 0.5 ? hi : lo) = mid;
  }
  return Admissibility{hi, proxy(hi)};
}

GaugeData gauge_m(const LaxMatrix& L, const HardyField& qplus, double kappa,
                  const Admissibility& adm) {
  if (!(kappa > 0.0) || kappa < adm.kappa_min) throw InadmissibleError(kappa, adm.kappa_min);
  Resolvent R(L, kappa);
  CVec u = to_herm(L, qplus);
  CVec v = R.solve(u);
  CVec res = L.S * v + kappa * v - u;

  GaugeData gd;
  gd.kappa = kappa;
  gd.m = from_herm(L, v);
  gd.residual = res.norm();

  // Neumann series sum_l (R0 T)^l R0 u as an independent evaluation.
  CMat T = L.potential();
  CVec term = apply_free_resolvent(L, kappa, u);
  CVec acc = term;
  double prev = term.norm();
  double ratio = 0.0;
  const double vnorm = std::max(v.norm(), 1e-300);
  for (int l = 1; l < 400 && prev > 1e-17 * vnorm; ++l) {
    term = apply_free_resolvent(L, kappa, T * term);
    double cur = term.norm();
    ratio = prev > 0.0 ? cur / prev : 0.0;
    acc += term;
    prev = cur;
    if (l >= 8 && ratio > 0.95) break;
  }
  gd.series_ratio = ratio;
  if (ratio < 0.5) gd.series_deviation = v.norm() > 0.0 ? (acc - v).norm() / v.norm() : acc.norm();
  return gd;
}

GaugeData gauge_m(const RealField& q, double kappa, int M) {
  LaxMatrix L = build_lax(q, M);
  return gauge_m(L, cauchy_szego(q, 1, L.M), kappa, admissibility(L));
}

GaugeContext::GaugeContext(const RealField& q_, double kappa_, int M, bool check)
    : GaugeContext(q_, build_lax(q_, M), kappa_) {
  if (check) {
    Admissibility adm = admissibility(L);
    if (kappa < adm.kappa_min) throw InadmissibleError(kappa, adm.kappa_min);
  }
}

GaugeContext::GaugeContext(const RealField& q_, const LaxMatrix& L_, double kappa_)
    : q(q_), L(L_), qplus(cauchy_szego(q_, 1, L_.M)), kappa(kappa_), R(L_, kappa_),
      m(R.apply(qplus)) {}

HardyField project_plus(const Geometry& g, const CVec& samples, int K) {
  return hardy_from_grid(g, samples, K);
}

HardyField hardy_product(const HardyField& a, const HardyField& b, int K) {
  return project_plus(a.geom, grid_values(a).cwiseProduct(grid_values(b)), K);
}

HardyField hardy_derivative(const HardyField& f) {
  const Geometry& g = f.geom;
  if (g.kind == Kind::line) return project_plus(g, ddx_grid(g, grid_values(f)), f.modes() - 1);
  HardyField out = f;
  const double dxi = freq_step(g);
  for (int k = 0; k < f.modes(); ++k) out.coeffs[k] *= kI * (dxi * k);
  return out;
}

HardyField gauge_directional_derivative(const RealField& q, double kappa, const RealField& g,
                                        int M) {
  GaugeContext ctx(q, kappa, M);
  CVec m1 = grid_values(ctx.m).array() + 1.0;
  CVec prod = m1.cwiseProduct(grid_values(g).cast<cplx>());
  return ctx.R.apply(project_plus(q.geom, prod, ctx.L.M));
}

namespace {

// (m+1) C+((conj(m)+1) f)
HardyField dressed(const GaugeContext& ctx, const HardyField& f) {
  const Geometry& g = ctx.L.geom;
  const int K = ctx.L.M;
  CVec m1 = grid_values(ctx.m).array() + 1.0;
  HardyField inner = project_plus(g, m1.conjugate().cwiseProduct(grid_values(f)), K);
  return project_plus(g, m1.cwiseProduct(grid_values(inner)), K);
}

// -i f'' - 2 (C+(q f))' + 2 q+' f
HardyField peter_free(const RealField& q, const HardyField& qplus, const HardyField& f) {
  const Geometry& g = q.geom;
  const int K = f.modes() - 1;
  HardyField f2 = hardy_derivative(hardy_derivative(f));
  CVec qf = grid_values(q).cast<cplx>().cwiseProduct(grid_values(f));
  HardyField cqf = hardy_derivative(project_plus(g, qf, K));
  HardyField qpf = hardy_product(hardy_derivative(qplus), f, K);
  return HardyField{g, -kI * f2.coeffs - 2.0 * cqf.coeffs + 2.0 * qpf.coeffs};
}

}  // namespace

HardyField apply_peter(const GaugeContext& ctx, const HardyField& f_in, Peter which) {
  const Geometry& g = ctx.L.geom;
  const int K = ctx.L.M;
  HardyField f = resize(f_in, K);
  CVec out;
  switch (which) {
    case Peter::P:
      out = peter_free(ctx.q, ctx.qplus, f).coeffs;
      break;
    case Peter::Pk: {
      const double k = ctx.kappa;
      double a = k, b = k;  // line: i k^2 [k] R + k d
      if (g.kind == Kind::circle) {
        double mean = integral(ctx.q);
        double beta = hardy_inner(ctx.qplus, ctx.m).real();
        a = k + beta + mean;
        b = k + mean;
      }
      out = kI * k * k * a * ctx.R.apply(f).coeffs - kI * k * k * dressed(ctx, f).coeffs +
            b * hardy_derivative(f).coeffs;
      break;
    }
    case Peter::Pbk: {
      double a = ctx.kappa;
      if (g.kind == Kind::circle)
        a += hardy_inner(ctx.qplus, ctx.m).real() + integral(ctx.q);
      out = -kI * a * ctx.R.apply(f).coeffs + kI * dressed(ctx, f).coeffs;
      break;
    }
  }
  return HardyField{g, out};
}

HardyField apply_peter(const RealField& q, const HardyField& f, Peter which, double kappa) {
  if (which == Peter::P) {
    const int K = default_modes(q.geom);
    return peter_free(q, cauchy_szego(q, 1, K), resize(f, K));
  }
  return apply_peter(GaugeContext(q, kappa), f, which);
}

std::vector<EigenPair> eigen_spectrum(const LaxMatrix& L, int k) {
  if (k < 0 || k > L.size()) throw ConfigError("eigenpair count outside matrix size");
  Eigen::SelfAdjointEigenSolver<CMat> es(L.S);
  if (es.info() != Eigen::Success) throw NumericalError("eigen solver failed");
  std::vector<EigenPair> out;
  for (int i = 0; i < k; ++i) {
    CVec u = es.eigenvectors().col(i);
    double top = u.cwiseAbs().maxCoeff();
    for (int j = 0; j < u.size(); ++j) {
      if (std::abs(u[j]) > 1e-8 * top) {
        u *= std::conj(u[j]) / std::abs(u[j]);
        break;
      }
    }
    out.push_back(EigenPair{es.eigenvalues()[i], from_herm(L, u)});
  }
  return out;
}

nlohmann::json dump_operator(const LaxMatrix& L) {
  nlohmann::json rows = nlohmann::json::array();
  for (int j = 0; j < L.size(); ++j) {
    nlohmann::json row = nlohmann::json::array();
    for (int k = 0; k < L.size(); ++k) row.push_back({L.S(j, k).real(), L.S(j, k).imag()});
    rows.push_back(std::move(row));
  }
  return {{"geometry", to_json(L.geom)}, {"modes", L.size()}, {"matrix", rows}};
}

double lax_pairing_residual(const RealField& q, const HardyField& f, const HardyField& h) {
  const Geometry& g = q.geom;
  if (g.kind != Kind::circle) throw ConfigError("the Lax pairing identity is checked on the circle");
  LaxMatrix L = build_lax(q);
  const int K = L.M;
  if (f.modes() - 1 > K / 2 || h.modes() - 1 > K / 2)
    throw ConfigError("test fields must sit in the lower half of the band");
  HardyField fk = resize(f, K), hk = resize(h, K);
  CVec fs = grid_values(fk), hs = grid_values(hk);
  CVec Lf = grid_values(apply_lax(L, fk)), Lh = grid_values(apply_lax(L, hk));
  HardyField lhs = project_plus(g, fs.cwiseProduct(Lh.conjugate()) - hs.conjugate().cwiseProduct(Lf), K);
  HardyField a = hardy_derivative(project_plus(g, fs.cwiseProduct(hs.conjugate()), K));
  // 1 - C- keeps the strictly positive modes.
  CVec c = to_spectral(g, grid_values(cauchy_szego(q, 1, K)).cwiseProduct(hs.conjugate()));
  for (int i = 0; i < g.n; ++i)
    if (signed_mode(i, g.n) <= 0) c[i] = 0.0;
  HardyField b = project_plus(g, fs.cwiseProduct(to_grid(g, c)), K);
  CVec rhs = kI * a.coeffs + b.coeffs;
  return (lhs.coeffs - rhs).norm() / std::max(rhs.norm(), 1e-300);
}

}  // namespace bolab
