#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "bolab/flows.hpp"
#include "bolab/report.hpp"

namespace bolab {

// Half-line frequency grid xi_k = k h, k = 0..K.
struct LineFreqGrid {
  double h = 0.05;
  int K = 0;
  double xi_max() const { return h * K; }
  RVec nodes() const;
};

LineFreqGrid make_freq_grid(double h, double xi_max);
// Smallest grid of spacing h on which |q^(xi_max)| < 1e-12 max |q^|.
LineFreqGrid freq_grid_for(const RealField& q, double h);

// Samples of f^(xi) on the grid; f^(0) is the one-sided value at 0+.
struct FreqField {
  LineFreqGrid grid;
  CVec f;
};

// Unitary transform hat f(xi) = (2pi)^{-1/2} int e^{-i x xi} f(x) dx of a
// decaying real field: exact from MT coefficients on the line, trapezoid
// quadrature on the box.
cplx fourier_hat(const RealField& q, double xi);
FreqField sample_freq(const LineFreqGrid& grid, const std::function<cplx(double)>& fhat);
FreqField positive_part(const LineFreqGrid& grid, const RealField& q);

// X = i d/dxi with second-order differences, one-sided at both ends.
FreqField x_operator_apply(const FreqField& f);
// Solves (X - z) w = f on the grid.
FreqField x_resolvent(const FreqField& f, cplx z);

struct IPlus {
  cplx value;
  double spread = 0.0;  // |extrapolated - sampled value at 0| / max|f^|
  bool flagged = false; // spread > 1e-6
};
// sqrt(2pi) times the quadratic extrapolation of f^ to 0+ from nodes 1..3.
IPlus i_plus(const FreqField& f);
// <chi_y, f> with chi_y = iy/(x+iy); tends to I+(f) as y grows.
cplx i_plus_pairing(const FreqField& f, double y);

// Line (MT) representation: X is exact and upper triangular, I+ is the
// coefficient sum times -i sqrt(4 pi s).
CMat x_matrix(const Geometry& line, int M);
HardyField x_apply(const HardyField& f);
cplx i_plus(const HardyField& f);
// Analytic continuation of a line Hardy field to Im z > 0.
cplx evaluate_upper(const HardyField& f, cplx z);

// phi(E) = a + b E + sum c_j / (E + kappa_j); psi(E) = phi + E phi'.
struct PhiSpec {
  double a = 0.0;
  double b = 0.0;
  std::vector<std::pair<double, double>> terms;  // (c_j, kappa_j)

  double phi(double E) const;
  double psi(double E) const;
};
PhiSpec phi_for_flow(const FlowSpec& flow);

// Decaying box data resampled onto a line grid (zero outside the box).
RealField line_from_box(const RealField& q, int n, double scale = 1.0);

struct GerardValue {
  cplx value;
  double residual = 0.0;  // relative residual of the linear solve
};
// q+(t, z) from (2 pi i)^{-1} I+((X - t psi(L) - z)^{-1} q0+). Box data is
// first moved to a line grid with n = 2 * q0.geom.n.
GerardValue gerard_solve(const RealField& q0, const PhiSpec& phi, double t, cplx z, int M = -1);
// The same on a frequency grid with finite differences for X.
GerardValue gerard_solve_grid(const RealField& q0, const PhiSpec& phi, double t, cplx z,
                              const LineFreqGrid& grid);
// Reference value: time-step the flow and evaluate C+ q(t) at z.
cplx flow_reference(const RealField& q0, const FlowSpec& flow, double t, cplx z);

struct CommutatorReport {
  std::vector<double> singular_values;  // of [X, C+ q] on the test span
  double rank_one_ratio = 0.0;          // second / first singular value
  double comm1_residual = 0.0;          // [X, C+q] f against (i/2pi) q+ I+(f)
  double lax_residual = 0.0;            // [X, L] f against i f - (i/2pi) q+ I+(f)
  double comm2_residual = 0.0;          // [X, Pbk] f against -kappa R^2 f
};
CommutatorReport commutator_checks(const RealField& q0, double kappa, int fields = 5,
                                   std::uint64_t seed = 7);

struct CentroidValues {
  double CofP = 0.0;
  double CofE = 0.0;
  double Cofbeta = 0.0;
  double VofP = 0.0;
};
CentroidValues centroids(const RealField& q, double varkappa, int M = -1);
// d/d varkappa of Cofbeta(varkappa).
double cofbeta_derivative(const RealField& q, double varkappa, int M = -1);

// Bracket identities for CofP, CofE, Cofbeta and VofP.
std::vector<CheckRecord> virial_checks(const RealField& q, double kappa, double varkappa,
                                       double tol = 1e-6, int M = -1);

// Fit of Cofbeta(varkappa) against varkappa^{-1..-5}; returns the first two
// coefficients, which should be CofP and -CofE.
std::pair<double, double> cofbeta_expansion(const RealField& q, const std::vector<double>& varkappas,
                                            int M = -1);

struct VofPLaw {
  std::vector<double> t, vofp;
  double fit[3] = {0, 0, 0};        // constant, linear, quadratic
  double predicted[3] = {0, 0, 0};
  double fit_residual = 0.0;        // max |fit - data| / |VofP(0)|
  double cofp_speed = 0.0;          // fitted slope of CofP(t)
  double cofp_speed_predicted = 0.0;
};
// VofP and CofP along the beta flow on the line; times must be multiples of dt.
VofPLaw vofp_time_law(const RealField& q0, double kappa, const std::vector<double>& times,
                      double dt = 1e-2);

}  // namespace bolab
