#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bolab/lax_gauge.hpp"

namespace bolab {

struct HamiltonianValue {
  Kind kind = Kind::circle;
  double P = 0.0;
  double H_BO = 0.0;
  double H_2 = 0.0;
  double mean = 0.0;  // integral of q
};

struct BetaCurve {
  std::vector<double> kappa;
  std::vector<double> beta;
  std::uint64_t fingerprint = 0;
};

double beta(const GaugeContext& ctx);
double beta(const RealField& q, double kappa, int M = -1);
// d^j beta / d kappa^j for j = 0..order (order <= 3), from resolvent powers.
std::vector<double> beta_derivatives(const GaugeContext& ctx, int order);
std::vector<double> beta_derivatives(const RealField& q, double kappa, int order, int M = -1);
BetaCurve beta_curve(const RealField& q, const std::vector<double>& kappas, int M = -1);
std::uint64_t fingerprint(const RealField& q);

HamiltonianValue polynomial_hamiltonians(const RealField& q);

struct ExpansionFit {
  double P = 0.0, H_BO = 0.0, H_2 = 0.0;
  std::vector<double> raw;  // fitted coefficients of kappa^{-1..-k}
  double residual = 0.0;    // rms misfit relative to max |beta|
};
// Least squares of beta against kappa^{-1}, kappa^{-2}, kappa^{-3}, plus three
// higher nuisance powers that absorb the truncation bias.
ExpansionFit beta_expansion_check(const RealField& q, const std::vector<double>& kappas, int M = -1);

double h_kappa(const GaugeContext& ctx);
double h_kappa(const RealField& q, double kappa, int M = -1);

enum class Functional { beta, P, H_BO, H_kappa, CofP, CofE, Cofbeta, VofP };

struct FunctionalSpec {
  Functional kind = Functional::P;
  double kappa = 0.0;  // beta, H_kappa, Cofbeta
};

std::string functional_name(const FunctionalSpec& f);

// delta F / delta q as grid samples. VofP and the centroid gradients grow in
// x, so they are kept as samples rather than coefficients.
struct FunctionalGradient {
  Geometry geom;
  RVec samples;
  RealField field() const { return real_from_samples(geom, samples); }
};

FunctionalGradient functional_gradient(const RealField& q, const FunctionalSpec& f, int M = -1);
// {F, G} = int (dF/dq) (dG/dq)' dx.
double poisson_bracket(const FunctionalGradient& dF, const FunctionalGradient& dG);
double poisson_bracket(const RealField& q, const FunctionalSpec& F, const FunctionalSpec& G, int M = -1);

struct BockKruskal {
  RealField w;
  RVec w_samples;
  double residual = 0.0;       // L2 norm of the transform equation
  double q_norm = 0.0;
  double min_kappa_plus_w = 0.0;
  double wiener_hopf_error = 0.0;  // |mu - m| / |m| in L2
  double integral_w = 0.0;
};
BockKruskal bock_kruskal(const RealField& q, double kappa, int M = -1);

struct AlphaResult {
  double series = 0.0;
  double beta_sum = 0.0;
  double difference = 0.0;
  int terms = 0;
  double spectral_radius = 0.0;
};
AlphaResult perturbation_determinant_alpha(const RealField& q, double kappa, int M = -1);

enum class Transform { scale, galilei };

struct CovarianceRow {
  double kappa, lhs, rhs, rel_err;
};
struct CovarianceReport {
  Transform transform;
  double parameter;
  std::vector<CovarianceRow> rows;
  double max_rel_err = 0.0;
};
// scale: box only, beta(lambda kappa; q_lambda) = beta(kappa; q).
// galilei: circle only, boost q -> q + c.
CovarianceReport symmetry_covariance(const RealField& q, Transform t, double parameter,
                                     const std::vector<double>& kappas, int M = -1);

// Pointwise left side of the two-parameter gauge identity with m = m(kappa),
// n = m(varkappa). Zero on the line; the constant varkappa int m + kappa int conj(n)
// on the circle.
struct GaugeIdentity {
  CVec lhs;
  cplx expected;
  double deviation = 0.0;  // max |lhs - expected|
  double spread = 0.0;     // rms of lhs about its mean
  double scale = 0.0;      // max of the individual term magnitudes
};
GaugeIdentity gauge_pair_identity(const RealField& q, double kappa, double varkappa, int M = -1);

}  // namespace bolab
