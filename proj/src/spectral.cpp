#include "bolab/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include <spdlog/spdlog.h>

#include "fft.hpp"
#include "quadrature.hpp"

namespace bolab {

using detail::dft;

Geometry make_circle(int n) { return Geometry{Kind::circle, 1.0, n}; }
Geometry make_box(double length, int n) { return Geometry{Kind::box, length, n}; }
Geometry make_line(int n, double scale) { return Geometry{Kind::line, scale, n}; }

void validate(const Geometry& g) {
  if (g.n < 8 || (g.n & (g.n - 1)) != 0)
    throw ConfigError("grid size must be a power of two >= 8, got " + std::to_string(g.n));
  if (!(g.length > 0.0) || !std::isfinite(g.length))
    throw ConfigError("geometry length must be positive");
  if (g.kind == Kind::circle && g.length != 1.0)
    throw ConfigError("circle geometry has period 1");
}

std::string kind_name(Kind k) {
  switch (k) {
    case Kind::circle: return "circle";
    case Kind::box: return "box";
    case Kind::line: return "line";
  }
  return "?";
}

Kind kind_from_name(const std::string& s) {
  if (s == "circle") return Kind::circle;
  if (s == "box") return Kind::box;
  if (s == "line") return Kind::line;
  throw ConfigError("unknown geometry kind '" + s + "'");
}

double freq_step(const Geometry& g) {
  if (g.kind == Kind::line) throw ConfigError("line geometry has no uniform frequency grid");
  return 2.0 * kPi / g.length;
}

RVec nodes(const Geometry& g) {
  RVec x(g.n);
  for (int j = 0; j < g.n; ++j) {
    switch (g.kind) {
      case Kind::circle: x[j] = double(j) / g.n; break;
      case Kind::box: x[j] = -0.5 * g.length + j * g.length / g.n; break;
      case Kind::line: {
        double phi = 2.0 * kPi * (j + 0.5) / g.n;
        x[j] = -g.length / std::tan(0.5 * phi);
        break;
      }
    }
  }
  return x;
}

namespace {

// Phase e^{-i k pi/n} relating the half-shifted angle grid to the DFT.
cplx shift_phase(int k, int n, int sign) {
  return std::polar(1.0, sign * kPi * k / n);
}

// Plain Fourier coefficients in the angle variable (line grid only).
CVec angle_coeffs(const Geometry& g, const CVec& samples) {
  CVec b = dft(samples, -1) / double(g.n);
  for (int i = 0; i < g.n; ++i) b[i] *= shift_phase(signed_mode(i, g.n), g.n, -1);
  return b;
}

CVec angle_synth(const Geometry& g, const CVec& b) {
  CVec t(g.n);
  for (int i = 0; i < g.n; ++i) t[i] = b[i] * shift_phase(signed_mode(i, g.n), g.n, 1);
  return dft(t, 1);
}

void check_same(const Geometry& a, const Geometry& b) {
  if (!(a == b)) throw ConfigError("geometry mismatch");
}

}  // namespace

CVec to_spectral(const Geometry& g, const CVec& samples) {
  if (samples.size() != g.n) throw ConfigError("sample count does not match geometry");
  switch (g.kind) {
    case Kind::circle: return dft(samples, -1) / double(g.n);
    case Kind::box: {
      CVec c = dft(samples, -1) / double(g.n);
      for (int i = 1; i < g.n; i += 2) c[i] = -c[i];
      return c;
    }
    case Kind::line: {
      const double s = g.length;
      RVec x = nodes(g);
      CVec G(g.n);
      for (int j = 0; j < g.n; ++j) G[j] = std::sqrt(kPi / s) * cplx(x[j], s) * samples[j];
      return angle_coeffs(g, G);
    }
  }
  return {};
}

CVec to_grid(const Geometry& g, const CVec& coeffs) {
  if (coeffs.size() != g.n) throw ConfigError("coefficient count does not match geometry");
  switch (g.kind) {
    case Kind::circle: return dft(coeffs, 1);
    case Kind::box: {
      CVec c = coeffs;
      for (int i = 1; i < g.n; i += 2) c[i] = -c[i];
      return dft(c, 1);
    }
    case Kind::line: {
      const double s = g.length;
      RVec x = nodes(g);
      CVec G = angle_synth(g, coeffs);
      for (int j = 0; j < g.n; ++j) G[j] /= std::sqrt(kPi / s) * cplx(x[j], s);
      return G;
    }
  }
  return {};
}

RealField real_from_samples(const Geometry& g, const RVec& samples) {
  validate(g);
  return RealField{g, to_spectral(g, samples.cast<cplx>())};
}

RealField zero_field(const Geometry& g) {
  validate(g);
  return RealField{g, CVec::Zero(g.n)};
}

RVec grid_values(const RealField& f) { return to_grid(f.geom, f.coeffs).real(); }

CVec grid_values(const HardyField& f) {
  const Geometry& g = f.geom;
  CVec full = CVec::Zero(g.n);
  full.head(f.modes()) = f.coeffs;
  if (g.kind == Kind::box) full[0] *= 0.5;
  return to_grid(g, full);
}

RealField band_limit(const RealField& f, int B) {
  RealField out = f;
  const int n = f.geom.n;
  for (int i = 0; i < n; ++i) {
    int k = signed_mode(i, n);
    bool keep = f.geom.kind == Kind::line ? (k <= B && k >= -B - 1) : std::abs(k) <= B;
    if (!keep) out.coeffs[i] = 0.0;
  }
  return out;
}

HardyField hardy_from_grid(const Geometry& g, const CVec& samples, int K) {
  if (K < 0 || K >= g.n / 2) throw ConfigError("Hardy mode count outside grid");
  CVec c = to_spectral(g, samples);
  return HardyField{g, c.head(K + 1)};
}

HardyField zero_hardy(const Geometry& g, int K) { return HardyField{g, CVec::Zero(K + 1)}; }

RealField two_re(const HardyField& f) {
  const Geometry& g = f.geom;
  const int n = g.n;
  CVec c = CVec::Zero(n);
  const int K = f.modes() - 1;
  if (g.kind == Kind::line) {
    for (int k = 0; k <= K; ++k) {
      c[k] += f.coeffs[k];
      c[n - k - 1] += std::conj(f.coeffs[k]);
    }
  } else {
    double w0 = g.kind == Kind::box ? 0.5 : 1.0;
    c[0] = 2.0 * w0 * f.coeffs[0].real();
    for (int k = 1; k <= K; ++k) {
      c[k] = f.coeffs[k];
      c[n - k] = std::conj(f.coeffs[k]);
    }
  }
  return RealField{g, c};
}

RVec hardy_weights(const Geometry& g, int K) {
  RVec w = RVec::Ones(K + 1);
  if (g.kind == Kind::box) {
    w *= g.length;
    w[0] *= 0.5;
  }
  return w;
}

cplx hardy_inner(const HardyField& f, const HardyField& g) {
  check_same(f.geom, g.geom);
  const int K = std::min(f.modes(), g.modes()) - 1;
  RVec w = hardy_weights(f.geom, K);
  cplx s = 0.0;
  for (int k = 0; k <= K; ++k) s += w[k] * std::conj(f.coeffs[k]) * g.coeffs[k];
  return s;
}

double hardy_norm(const HardyField& f) { return std::sqrt(hardy_inner(f, f).real()); }

CVec ddx_grid(const Geometry& g, const CVec& samples) {
  const int n = g.n;
  if (g.kind == Kind::line) {
    CVec b = angle_coeffs(g, samples);
    for (int i = 0; i < n; ++i) {
      int k = signed_mode(i, n);
      b[i] *= (k == -n / 2) ? cplx(0.0) : kI * double(k);
    }
    CVec d = angle_synth(g, b);
    RVec x = nodes(g);
    const double s = g.length;
    for (int j = 0; j < n; ++j) d[j] *= 2.0 * s / (x[j] * x[j] + s * s);
    return d;
  }
  CVec c = to_spectral(g, samples);
  const double dxi = freq_step(g);
  for (int i = 0; i < n; ++i) {
    int k = signed_mode(i, n);
    c[i] *= (k == -n / 2) ? cplx(0.0) : kI * (dxi * k);
  }
  return to_grid(g, c);
}

RealField derivative(const RealField& f) {
  const Geometry& g = f.geom;
  if (g.kind == Kind::line) return real_from_samples(g, ddx_grid(g, to_grid(g, f.coeffs)).real());
  RealField out = f;
  const double dxi = freq_step(g);
  for (int i = 0; i < g.n; ++i) {
    int k = signed_mode(i, g.n);
    out.coeffs[i] *= (k == -g.n / 2) ? cplx(0.0) : kI * (dxi * k);
  }
  return out;
}

cplx integral_grid(const Geometry& g, const CVec& samples) {
  switch (g.kind) {
    case Kind::circle: return samples.mean();
    case Kind::box: return samples.mean() * g.length;
    case Kind::line: {
      RVec x = nodes(g);
      const double s = g.length;
      cplx acc = 0.0;
      for (int j = 0; j < g.n; ++j) acc += samples[j] * (x[j] * x[j] + s * s);
      return acc * (kPi / (s * g.n));
    }
  }
  return 0.0;
}

double integral(const RealField& f) {
  if (f.geom.kind == Kind::circle) return f.coeffs[0].real();
  if (f.geom.kind == Kind::box) return f.coeffs[0].real() * f.geom.length;
  return integral_grid(f.geom, to_grid(f.geom, f.coeffs)).real();
}

double l2_norm(const RealField& f) { return sobolev_norm(f, NormSpec{0.0, 1.0}); }

HardyField cauchy_szego(const RealField& f, int sign, int K) {
  const Geometry& g = f.geom;
  const int n = g.n;
  if (K < 0) K = n / 2 - 1;
  if (K >= n / 2) throw ConfigError("Hardy mode count outside grid");
  if (sign != 1 && sign != -1) throw ConfigError("projection sign must be +1 or -1");
  CVec h(K + 1);
  for (int k = 0; k <= K; ++k) {
    if (sign > 0) {
      h[k] = f.coeffs[k];
    } else if (g.kind == Kind::line) {
      h[k] = std::conj(f.coeffs[n - k - 1]);
    } else {
      h[k] = std::conj(f.coeffs[(n - k) % n]);
    }
  }
  return HardyField{g, h};
}

RealField hilbert_transform(const RealField& f) {
  RealField out = f;
  const int n = f.geom.n;
  for (int i = 0; i < n; ++i) {
    int k = signed_mode(i, n);
    if (f.geom.kind == Kind::line) {
      out.coeffs[i] *= k >= 0 ? -kI : kI;
    } else {
      out.coeffs[i] *= k > 0 ? -kI : (k < 0 && k != -n / 2 ? kI : cplx(0.0));
    }
  }
  return out;
}

CVec hilbert_grid(const Geometry& g, const CVec& samples) {
  CVec c = to_spectral(g, samples);
  const int n = g.n;
  for (int i = 0; i < n; ++i) {
    int k = signed_mode(i, n);
    if (g.kind == Kind::line) {
      c[i] *= k >= 0 ? -kI : kI;
    } else {
      c[i] *= k > 0 ? -kI : (k < 0 && k != -n / 2 ? kI : cplx(0.0));
    }
  }
  return to_grid(g, c);
}

namespace {

// int_{xi_lo}^inf w(xi) |sum_k a_k hat phi_k(xi)|^2 d xi for MT coefficients
// a_0..a_K, done in t = 2 s xi where the integrand is e^{-t} |sum a_k L_k(t)|^2.
double laguerre_mass(const CVec& a, double s, const NormSpec& spec, double xi_lo) {
  int K = static_cast<int>(a.size()) - 1;
  while (K > 0 && a[K] == cplx(0.0)) --K;
  const double t_lo = 2.0 * s * std::max(xi_lo, 0.0);
  const double t_hi = std::max(t_lo, 0.0) + 4.0 * K + 12.0 * std::sqrt(K + 1.0) + 80.0;
  static const auto gl = detail::gauss_legendre(10);
  const double panel = 1.0;
  const int panels = static_cast<int>(std::ceil((t_hi - t_lo) / panel));
  double total = 0.0;
  for (int p = 0; p < panels; ++p) {
    const double a0 = t_lo + p * panel;
    for (std::size_t q = 0; q < gl.first.size(); ++q) {
      const double t = a0 + 0.5 * panel * (gl.first[q] + 1.0);
      const double wq = 0.5 * panel * gl.second[q];
      double lm1 = 0.0, l0 = 1.0, logscale = 0.0;
      cplx acc = a[0];
      for (int k = 0; k < K; ++k) {
        double l1 = ((2.0 * k + 1.0 - t) * l0 - k * lm1) / (k + 1.0);
        lm1 = l0;
        l0 = l1;
        acc += a[k + 1] * l0;
        if (std::abs(l0) > 1e150) {
          l0 *= 1e-150;
          lm1 *= 1e-150;
          acc *= 1e-150;
          logscale += 150.0 * std::log(10.0);
        }
      }
      const double mag = std::abs(acc);
      if (mag == 0.0) continue;
      const double val = std::exp(2.0 * (logscale + std::log(mag)) - t);
      const double xi = t / (2.0 * s);
      total += wq * std::pow(xi + spec.kappa, 2.0 * spec.sigma) * val;
    }
  }
  return total;
}

void split_line(const RealField& f, CVec& pos, CVec& neg) {
  const int n = f.geom.n;
  pos.resize(n / 2);
  neg.resize(n / 2);
  for (int j = 0; j < n / 2; ++j) {
    pos[j] = f.coeffs[j];
    neg[j] = f.coeffs[n - j - 1];
  }
}

double periodic_mass(const RealField& f, const NormSpec& spec, double cutoff) {
  const Geometry& g = f.geom;
  const double dxi = freq_step(g);
  double acc = 0.0;
  for (int i = 0; i < g.n; ++i) {
    double xi = std::abs(dxi * signed_mode(i, g.n));
    if (xi < cutoff) continue;
    acc += std::pow(xi + spec.kappa, 2.0 * spec.sigma) * std::norm(f.coeffs[i]);
  }
  return g.kind == Kind::box ? acc * g.length : acc;
}

double line_mass(const RealField& f, const NormSpec& spec, double cutoff) {
  CVec pos, neg;
  split_line(f, pos, neg);
  return laguerre_mass(pos, f.geom.length, spec, cutoff) +
         laguerre_mass(neg, f.geom.length, spec, cutoff);
}

}  // namespace

double sobolev_norm(const RealField& f, const NormSpec& spec) {
  if (f.geom.kind == Kind::line) return std::sqrt(line_mass(f, spec, 0.0));
  return std::sqrt(periodic_mass(f, spec, 0.0));
}

double sobolev_norm(const HardyField& f, const NormSpec& spec) {
  const Geometry& g = f.geom;
  if (g.kind == Kind::line) return std::sqrt(laguerre_mass(f.coeffs, g.length, spec, 0.0));
  RVec w = hardy_weights(g, f.modes() - 1);
  const double dxi = freq_step(g);
  double acc = 0.0;
  for (int k = 0; k < f.modes(); ++k)
    acc += w[k] * std::pow(dxi * k + spec.kappa, 2.0 * spec.sigma) * std::norm(f.coeffs[k]);
  return std::sqrt(acc);
}

RealField dealiased_product(const RealField& f, const RealField& g) {
  check_same(f.geom, g.geom);
  RVec p = grid_values(f).cwiseProduct(grid_values(g));
  return band_limit(real_from_samples(f.geom, p), band(f.geom));
}

double tail_mass(const RealField& f, const NormSpec& spec, double cutoff) {
  if (f.geom.kind == Kind::line) return line_mass(f, spec, cutoff);
  return periodic_mass(f, spec, cutoff);
}

CVec symbol_coeffs(const RealField& q) {
  if (q.geom.kind != Kind::line) return q.coeffs;
  return angle_coeffs(q.geom, to_grid(q.geom, q.coeffs));
}

cplx line_transform(const Geometry& g, const CVec& coeffs, double xi) {
  if (g.kind != Kind::line) throw ConfigError("line_transform needs line geometry");
  const int n = g.n;
  const double s = g.length;
  const double t = 2.0 * s * std::abs(xi);
  double lm1 = 0.0, l0 = 1.0;
  cplx acc = 0.0;
  for (int k = 0; k < n / 2; ++k) {
    if (k > 0) {
      double l1 = ((2.0 * k - 1.0 - t) * l0 - (k - 1.0) * lm1) / double(k);
      lm1 = l0;
      l0 = l1;
    }
    acc += (xi >= 0 ? coeffs[k] : coeffs[n - k - 1]) * l0;
  }
  cplx phase = xi >= 0 ? -kI : kI;
  return phase * std::sqrt(2.0 * s) * std::exp(-0.5 * t) * acc;
}

double boundary_amplitude(const RealField& f, bool warn) {
  if (f.geom.kind != Kind::box) return 0.0;
  RVec q = grid_values(f);
  RVec x = nodes(f.geom);
  double peak = q.cwiseAbs().maxCoeff();
  if (peak == 0.0) return 0.0;
  double edge = 0.0;
  for (int j = 0; j < q.size(); ++j)
    if (std::abs(x[j]) >= 0.4 * f.geom.length) edge = std::max(edge, std::abs(q[j]));
  double ratio = edge / peak;
  if (warn && ratio > 1e-8)
    spdlog::warn("box boundary amplitude {:.3e} of peak (box length {})", ratio, f.geom.length);
  return ratio;
}

nlohmann::json to_json(const Geometry& g) {
  return {{"kind", kind_name(g.kind)}, {"length", g.length}, {"n", g.n}};
}

Geometry geometry_from_json(const nlohmann::json& j) {
  for (auto it = j.begin(); it != j.end(); ++it)
    if (it.key() != "kind" && it.key() != "length" && it.key() != "n")
      throw ConfigError("unknown geometry key '" + it.key() + "'");
  Geometry g;
  g.kind = kind_from_name(j.at("kind").get<std::string>());
  g.n = j.at("n").get<int>();
  g.length = j.value("length", 1.0);
  validate(g);
  return g;
}

namespace {

nlohmann::json coeff_array(const CVec& c) {
  nlohmann::json a = nlohmann::json::array();
  for (Eigen::Index i = 0; i < c.size(); ++i) a.push_back({c[i].real(), c[i].imag()});
  return a;
}

CVec coeff_vector(const nlohmann::json& a) {
  CVec c(a.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    c[i] = cplx(a[i].at(0).get<double>(), a[i].at(1).get<double>());
  return c;
}

}  // namespace

nlohmann::json to_json(const RealField& f) {
  return {{"geometry", to_json(f.geom)}, {"coeffs", coeff_array(f.coeffs)}};
}

nlohmann::json to_json(const HardyField& f) {
  return {{"geometry", to_json(f.geom)}, {"coeffs", coeff_array(f.coeffs)}};
}

RealField real_field_from_json(const nlohmann::json& j) {
  Geometry g = geometry_from_json(j.at("geometry"));
  CVec c = coeff_vector(j.at("coeffs"));
  if (c.size() != g.n) throw ConfigError("real field needs n coefficients");
  // Project onto real fields so the stored object keeps its invariant.
  return real_from_samples(g, to_grid(g, c).real());
}

HardyField hardy_field_from_json(const nlohmann::json& j) {
  Geometry g = geometry_from_json(j.at("geometry"));
  CVec c = coeff_vector(j.at("coeffs"));
  if (c.size() < 1 || c.size() > g.n / 2) throw ConfigError("bad Hardy coefficient count");
  return HardyField{g, c};
}

double soliton(double c, double x) { return 2.0 * c / (c * c * x * x + 1.0); }

namespace {

std::vector<double> parse_numbers(const std::string& rest) {
  std::vector<double> out;
  std::string s = rest;
  std::replace(s.begin(), s.end(), ',', ' ');
  std::istringstream is(s);
  std::string tok;
  while (is >> tok) {
    auto eq = tok.find('=');
    if (eq != std::string::npos) tok = tok.substr(eq + 1);
    try {
      std::size_t used = 0;
      out.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw ConfigError("bad number '" + tok + "'");
    } catch (const std::logic_error&) {
      throw ConfigError("bad number '" + tok + "' in initial condition");
    }
  }
  return out;
}

void need_count(const std::vector<double>& v, std::size_t lo, std::size_t hi,
                const std::string& what) {
  if (v.size() < lo || v.size() > hi) throw ConfigError("initial condition '" + what + "' takes " +
                                                        std::to_string(lo) + ".." +
                                                        std::to_string(hi) + " numbers");
}

}  // namespace

RealField make_initial(const Geometry& g, const std::string& descriptor, std::uint64_t seed) {
  validate(g);
  std::istringstream is(descriptor);
  std::string head;
  is >> head;
  std::string rest;
  std::getline(is, rest);
  RVec x = nodes(g);
  RVec q(g.n);

  if (head == "soliton") {
    auto v = parse_numbers(rest);
    need_count(v, 1, 2, head);
    if (g.kind == Kind::circle) throw ConfigError("soliton data needs box or line geometry");
    double x0 = v.size() > 1 ? v[1] : 0.0;
    for (int j = 0; j < g.n; ++j) q[j] = soliton(v[0], x[j] - x0);
  } else if (head == "gaussian") {
    auto v = parse_numbers(rest);
    need_count(v, 2, 3, head);
    if (g.kind == Kind::circle) throw ConfigError("gaussian data needs box or line geometry");
    double x0 = v.size() > 2 ? v[2] : 0.0;
    for (int j = 0; j < g.n; ++j) {
      double y = (x[j] - x0) / v[1];
      q[j] = v[0] * std::exp(-y * y);
    }
  } else if (head == "constant" || head == "mode" || head == "random") {
    if (g.kind == Kind::line) throw ConfigError(head + " data does not decay on the line");
    auto v = parse_numbers(rest);
    const double dxi = freq_step(g);
    if (head == "constant") {
      need_count(v, 1, 1, head);
      q.setConstant(v[0]);
    } else if (head == "mode") {
      need_count(v, 2, 2, head);
      for (int j = 0; j < g.n; ++j) q[j] = 2.0 * v[0] * std::cos(v[1] * dxi * x[j]);
    } else {
      need_count(v, 2, 2, head);
      const int kmax = static_cast<int>(v[1]);
      if (kmax < 1 || kmax > band(g)) throw ConfigError("random data band outside grid");
      std::mt19937_64 rng(seed);
      std::uniform_real_distribution<double> u(-1.0, 1.0);
      CVec c = CVec::Zero(g.n);
      for (int k = 1; k <= kmax; ++k) {
        cplx z(u(rng), u(rng));
        c[k] = v[0] * z / double(k);
        c[g.n - k] = std::conj(c[k]);
      }
      return RealField{g, c};
    }
  } else {
    std::ifstream in(descriptor);
    if (!in) throw ConfigError("unknown initial condition '" + descriptor + "'");
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("cannot parse field file: " + std::string(e.what()));
    }
    RealField f = real_field_from_json(j);
    if (!(f.geom == g)) throw ConfigError("field file geometry differs from configured geometry");
    return f;
  }
  return real_from_samples(g, q);
}

}  // namespace bolab
