#pragma once

#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/LU>

#include "bolab/spectral.hpp"

namespace bolab {

struct InadmissibleError : std::runtime_error {
  InadmissibleError(double kappa, double kappa_min);
  double kappa;
  double kappa_min;
};

// Truncated Lax operator L = -i d/dx - C+(q .) on Hardy modes 0..M.
// S is the Hermitian form in coordinates u = W^{1/2} F, where W are the
// Hardy quadrature weights (box: zero mode at half weight). The free part
// is diagonal on circle/box and tridiagonal on the line.
struct LaxMatrix {
  Geometry geom;
  int M = 0;
  CMat S;
  RVec sqrtw;
  RVec free_diag;
  RVec free_off;  // free_off[k] couples k and k+1 (line only)

  int size() const { return M + 1; }
  CMat potential() const;  // T = L0 - S
};

LaxMatrix build_lax(const RealField& q, int M = -1);
int default_modes(const Geometry& g);

CVec to_herm(const LaxMatrix& L, const HardyField& f);
HardyField from_herm(const LaxMatrix& L, const CVec& u);
HardyField apply_lax(const LaxMatrix& L, const HardyField& f);
// R0(kappa) u in Hermitian coordinates.
CVec apply_free_resolvent(const LaxMatrix& L, double kappa, const CVec& u);

// Factorization of S + kappa: Cholesky, with pivoted LU as fallback.
class Resolvent {
 public:
  Resolvent(const LaxMatrix& L, double kappa);
  double kappa() const { return kappa_; }
  CVec solve(const CVec& u) const;
  HardyField apply(const HardyField& f) const;

 private:
  Geometry geom_;
  RVec sqrtw_;
  double kappa_;
  bool use_lu_ = false;
  Eigen::LLT<CMat> llt_;
  Eigen::PartialPivLU<CMat> lu_;
};

struct Admissibility {
  double kappa_min = 0.0;
  double proxy = 0.0;  // proxy at kappa_min
};

// max row sum of |T R0(kappa)|, the operator-norm proxy for C+ q R0 C+.
double admissibility_proxy(const LaxMatrix& L, double kappa);
Admissibility admissibility(const LaxMatrix& L);

struct GaugeData {
  double kappa = 0.0;
  HardyField m;
  double residual = 0.0;
  double series_ratio = 0.0;
  double series_deviation = -1.0;  // relative gap series vs direct; -1 if not run
};

GaugeData gauge_m(const RealField& q, double kappa, int M = -1);
GaugeData gauge_m(const LaxMatrix& L, const HardyField& qplus, double kappa,
                  const Admissibility& adm);

// Everything derived from (q, kappa) that the Peter operators and the
// conserved quantities reuse.
struct GaugeContext {
  RealField q;
  LaxMatrix L;
  HardyField qplus;
  double kappa;
  Resolvent R;
  HardyField m;

  GaugeContext(const RealField& q, double kappa, int M = -1, bool check = true);
  GaugeContext(const RealField& q, const LaxMatrix& L, double kappa);
};

HardyField gauge_directional_derivative(const RealField& q, double kappa, const RealField& g,
                                        int M = -1);

// Hardy-side helpers on the context's mode count.
HardyField hardy_product(const HardyField& a, const HardyField& b, int K);
HardyField hardy_derivative(const HardyField& f);
HardyField project_plus(const Geometry& g, const CVec& samples, int K);

enum class Peter { P, Pk, Pbk };
HardyField apply_peter(const GaugeContext& ctx, const HardyField& f, Peter which);
HardyField apply_peter(const RealField& q, const HardyField& f, Peter which, double kappa);

struct EigenPair {
  double value;
  HardyField vector;
};
std::vector<EigenPair> eigen_spectrum(const LaxMatrix& L, int k);

nlohmann::json dump_operator(const LaxMatrix& L);

// Circle: relative gap between C+(f conj(Lh) - conj(h) Lf) and
// i C+(f conj(h))' + C+(f [1 - C-](q+ conj(h))) for Hardy f, h in the band.
double lax_pairing_residual(const RealField& q, const HardyField& f, const HardyField& h);

}  // namespace bolab
