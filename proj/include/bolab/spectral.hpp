#pragma once

#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include "json.hpp"

namespace bolab {

using cplx = std::complex<double>;
using CVec = Eigen::VectorXcd;
using RVec = Eigen::VectorXd;
using CMat = Eigen::MatrixXcd;
using RMat = Eigen::MatrixXd;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr cplx kI{0.0, 1.0};

struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// circle: period 1. box: periodic window [-L/2, L/2). line: rational
// (Cayley) grid x = -s cot(phi/2) with Malmquist-Takenaka coefficients.
enum class Kind { circle, box, line };

struct Geometry {
  Kind kind = Kind::circle;
  double length = 1.0;  // period, box length, or line scale s
  int n = 256;

  bool operator==(const Geometry&) const = default;
};

Geometry make_circle(int n);
Geometry make_box(double length, int n);
Geometry make_line(int n, double scale = 1.0);
void validate(const Geometry& g);
std::string kind_name(Kind k);
Kind kind_from_name(const std::string& s);

// Signed mode of natural-order index i.
inline int signed_mode(int i, int n) { return i < n / 2 ? i : i - n; }
// Frequency spacing 2pi/length (circle and box only).
double freq_step(const Geometry& g);
// Dealiasing band: modes |k| <= n/3 survive products.
inline int band(const Geometry& g) { return g.n / 3; }
RVec nodes(const Geometry& g);

// Real field: natural-order coefficients, length n.
// circle/box: Fourier series q(x) = sum c_k e^{i xi_k x}.
// line: Malmquist-Takenaka coefficients, a_{-k-1} = conj(a_k).
struct RealField {
  Geometry geom;
  CVec coeffs;
};

// Hardy field: modes 0..K. On the box the zero mode is stored unhalved; the
// represented function is sum Omega_k F_k e^{i xi_k x} with Omega_0 = 1/2.
struct HardyField {
  Geometry geom;
  CVec coeffs;
  int modes() const { return static_cast<int>(coeffs.size()); }
};

struct NormSpec {
  double sigma = 0.0;
  double kappa = 1.0;
};

// grid <-> coefficients
CVec to_spectral(const Geometry& g, const CVec& samples);
CVec to_grid(const Geometry& g, const CVec& coeffs);

RealField real_from_samples(const Geometry& g, const RVec& samples);
RealField zero_field(const Geometry& g);
RVec grid_values(const RealField& f);
CVec grid_values(const HardyField& f);
RealField band_limit(const RealField& f, int B);

// C+ of complex grid samples, truncated to modes 0..K.
HardyField hardy_from_grid(const Geometry& g, const CVec& samples, int K);
HardyField zero_hardy(const Geometry& g, int K);
// 2 Re of the materialized Hardy function, as a real field.
RealField two_re(const HardyField& f);

// Hardy quadrature weights W_k with <f,g> = sum W_k conj(F_k) G_k.
RVec hardy_weights(const Geometry& g, int K);
cplx hardy_inner(const HardyField& f, const HardyField& g);
double hardy_norm(const HardyField& f);

CVec ddx_grid(const Geometry& g, const CVec& samples);
RealField derivative(const RealField& f);
cplx integral_grid(const Geometry& g, const CVec& samples);
double integral(const RealField& f);
double l2_norm(const RealField& f);

// sign = +1: C+ f. sign = -1: the Hardy field h with C- f = conj(h).
HardyField cauchy_szego(const RealField& f, int sign, int K = -1);
RealField hilbert_transform(const RealField& f);
CVec hilbert_grid(const Geometry& g, const CVec& samples);
double sobolev_norm(const RealField& f, const NormSpec& spec);
double sobolev_norm(const HardyField& f, const NormSpec& spec);
RealField dealiased_product(const RealField& f, const RealField& g);
double tail_mass(const RealField& f, const NormSpec& spec, double cutoff);

// Coefficients of the multiplication symbol of q: Fourier coefficients on
// circle/box, angle-variable Fourier coefficients of the samples on the line.
CVec symbol_coeffs(const RealField& q);

// Line Fourier transform hat f(xi) from MT coefficients.
cplx line_transform(const Geometry& g, const CVec& coeffs, double xi);

// max|q| on the outer 10% of the box relative to max|q|; warns above 1e-8.
double boundary_amplitude(const RealField& f, bool warn = true);

nlohmann::json to_json(const Geometry& g);
Geometry geometry_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RealField& f);
nlohmann::json to_json(const HardyField& f);
RealField real_field_from_json(const nlohmann::json& j);
HardyField hardy_field_from_json(const nlohmann::json& j);

// "soliton c=1 [x0=0]", "constant c=0.4", "mode a,k", "gaussian a,w[,x0]",
// "random a,k" (seeded, mean zero), or a path to a field JSON file.
RealField make_initial(const Geometry& g, const std::string& descriptor,
                       std::uint64_t seed = 0);

// Soliton profile 2c/(c^2 x^2 + 1).
double soliton(double c, double x);

}  // namespace bolab
