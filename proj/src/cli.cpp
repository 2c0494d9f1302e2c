#include "bolab/cli.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

#include <spdlog/spdlog.h>

namespace bolab {

namespace fs = std::filesystem;

namespace {

using json = nlohmann::json;

const std::vector<std::string> kConfigKeys = {
    "geometry", "box_length", "line_scale", "modes", "lax_modes", "flow", "kappa", "varkappa", "phi",
    "dt", "T", "stride", "kappas", "init", "out", "tol", "seed", "dump_operator", "z"};

std::string num(double x) {
  std::ostringstream os;
  os << std::setprecision(17) << x;
  return os.str();
}

std::string short_num(double x) {
  std::ostringstream os;
  os << x;
  return os.str();
}

double tol_or(const RunConfig& c, double fallback) { return c.tol > 0.0 ? c.tol : fallback; }

int lax_M(const RunConfig& c) { return c.lax_modes; }

// Parameters of a "soliton c [x0]" descriptor, if that is what init is.
bool soliton_params(const std::string& init, double& c, double& x0) {
  std::istringstream is(init);
  std::string head;
  if (!(is >> head) || head != "soliton") return false;
  std::string rest;
  std::getline(is, rest);
  std::replace(rest.begin(), rest.end(), ',', ' ');
  std::istringstream rs(rest);
  std::vector<double> v;
  std::string tok;
  while (rs >> tok) {
    auto eq = tok.find('=');
    v.push_back(std::stod(eq == std::string::npos ? tok : tok.substr(eq + 1)));
  }
  if (v.empty()) return false;
  c = v[0];
  x0 = v.size() > 1 ? v[1] : 0.0;
  return true;
}

json base_params(const RunConfig& c) {
  return json{{"kappa", c.kappa()}, {"varkappa", c.varkappa}, {"init", c.init}};
}

// Cauchy-Schwarz size of int dF (dG)'.
double bracket_scale(const FunctionalGradient& dF, const FunctionalGradient& dG) {
  const Geometry& g = dF.geom;
  CVec f = dF.samples.cast<cplx>();
  CVec dg = ddx_grid(g, dG.samples.cast<cplx>());
  const double nf = std::sqrt(integral_grid(g, f.cwiseAbs2().cast<cplx>()).real());
  const double ng = std::sqrt(integral_grid(g, dg.cwiseAbs2().cast<cplx>()).real());
  return nf * ng;
}

// int w against the beta expression it should equal.
double integral_w_target(const RealField& q, const GaugeContext& ctx) {
  std::vector<double> b = beta_derivatives(ctx, 1);
  const double k = ctx.kappa, mu = integral(q);
  if (q.geom.kind == Kind::circle) return 2.0 * b[0] - k * b[1] + 2.0 * mu;
  return b[0] - k * b[1] + mu;
}

std::vector<CheckTask> identities_tasks(const RunConfig& c, const RealField& q) {
  const Geometry g = q.geom;
  const double k = c.kappa(), vk = c.varkappa, tol = tol_or(c, 1e-8);
  const int M = lax_M(c);
  const json p = base_params(c);
  std::vector<CheckTask> tasks;

  if (g.kind == Kind::circle) {
    tasks.push_back([=] {
      GaugeContext ctx(q, k, M);
      const double b = beta(ctx), mu = integral(q);
      std::vector<CheckRecord> out;
      const double lhs3 = k * integral_grid(g, grid_values(ctx.m)).real();
      out.push_back(make_record("id.beta3", g, p, lhs3, b + mu, tol, std::abs(b)));
      HardyField one = zero_hardy(g, ctx.m.modes() - 1);
      one.coeffs[0] = 1.0;
      const double lhs4 = hardy_inner(one, ctx.R.apply(one)).real();
      out.push_back(make_record("id.beta4", g, p, lhs4, 1.0 / k + b / (k * k) + mu / (k * k), tol));
      RVec v = grid_values(q);
      if (v.maxCoeff() - v.minCoeff() <= 1e-14 * std::max(1.0, v.cwiseAbs().maxCoeff())) {
        const double cc = v.mean();
        out.push_back(make_record("id.beta.constant", g, p, b, cc * cc / (k - cc), tol));
      }
      return out;
    });
    tasks.push_back([=] {
      // Random Hardy fields inside half the band.
      LaxMatrix L = build_lax(q, M);
      const int K = std::max(1, L.M / 2);
      std::mt19937_64 rng(c.seed + 11);
      std::uniform_real_distribution<double> u(-1.0, 1.0);
      std::vector<CheckRecord> out;
      for (int trial = 0; trial < 3; ++trial) {
        HardyField f = zero_hardy(g, K), h = zero_hardy(g, K);
        for (int j = 0; j <= K; ++j) {
          f.coeffs[j] = cplx(u(rng), u(rng)) / double(1 + j * j);
          h.coeffs[j] = cplx(u(rng), u(rng)) / double(1 + j * j);
        }
        json pt = p;
        pt["trial"] = trial;
        out.push_back(make_record("id.lax_pairing." + std::to_string(trial), g, pt,
                                  lax_pairing_residual(q, f, h), 0.0, tol, 1.0));
      }
      return out;
    });
    tasks.push_back([=] {
      CovarianceReport r = symmetry_covariance(q, Transform::galilei, 0.3, {k, vk}, M);
      json pg = p;
      pg["c"] = 0.3;
      return std::vector<CheckRecord>{
          make_record("id.covariance.galilei", g, pg, r.max_rel_err, 0.0, tol, 1.0)};
    });
  }

  if (g.kind == Kind::box) {
    tasks.push_back([=] {
      CovarianceReport r = symmetry_covariance(q, Transform::scale, 2.0, {k, vk}, M);
      json ps = p;
      ps["lambda"] = 2.0;
      return std::vector<CheckRecord>{
          make_record("id.covariance.scale", g, ps, r.max_rel_err, 0.0, tol, 1.0)};
    });
  }

  tasks.push_back([=] {
    GaugeContext cm(q, k, M), cn(q, vk, M);
    const double bk = beta(cm), bv = beta(cn);
    const double lhs = hardy_inner(cm.m, cn.m).real();
    const double scale = hardy_norm(cm.m) * hardy_norm(cn.m);
    std::vector<CheckRecord> out;
    out.push_back(make_record("id.beta2", g, p, lhs, -(bk - bv) / (k - vk), tol, scale));
    if (g.kind != Kind::box) {
      out.push_back(make_record("id.betaX", g, p, bock_kruskal(q, k, M).integral_w,
                                integral_w_target(q, cm), tol, std::abs(bk)));
    }
    return out;
  });

  tasks.push_back([=] {
    GaugeIdentity gi = gauge_pair_identity(q, k, vk, M);
    const double scale = std::max(std::abs(gi.expected), gi.scale);
    std::vector<CheckRecord> out;
    out.push_back(make_record("id.m_ode.constancy", g, p, gi.spread, 0.0, tol, scale));
    // The box value is off by the O(1/L) zero-mode correction; only constancy is meaningful there.
    if (g.kind != Kind::box)
      out.push_back(make_record("id.m_ode.value", g, p, gi.deviation, 0.0, tol, scale));
    return out;
  });

  tasks.push_back([=] {
    FunctionalGradient bk = functional_gradient(q, {Functional::beta, k}, M);
    FunctionalGradient bv = functional_gradient(q, {Functional::beta, vk}, M);
    FunctionalGradient P = functional_gradient(q, {Functional::P, 0.0}, M);
    std::vector<CheckRecord> out;
    out.push_back(make_record("id.bracket.beta_beta", g, p, poisson_bracket(bk, bv), 0.0, tol,
                              bracket_scale(bk, bv)));
    out.push_back(make_record("id.bracket.P_beta", g, p, poisson_bracket(P, bv), 0.0, tol,
                              bracket_scale(P, bv)));
    return out;
  });
  return tasks;
}

std::vector<CheckTask> conservation_tasks(const RunConfig& c, const RealField& q) {
  return {[=] {
    FlowSpec spec = c.flow;
    if (spec.monitor_kappas.empty())
      spec.monitor_kappas = c.kappas.empty() ? std::vector<double>{8.0, 16.0} : c.kappas;
    Trajectory tr = evolve(q, spec);
    const double tol = tol_or(c, 1e-6);
    json p{{"flow", flow_name(spec.kind)}, {"kappa", spec.kappa}, {"dt", spec.dt},
           {"T", spec.T}, {"init", c.init}};
    std::vector<CheckRecord> out;
    std::vector<std::string> what{"P", "H_BO", "H_2"};
    if (q.geom.kind == Kind::circle) what.push_back("mean");
    for (const auto& [kk, v] : tr.monitors.front().beta) what.push_back("beta:" + num(kk));
    for (const auto& w : what)
      out.push_back(make_record("cons." + w, q.geom, p, tr.drift(w), 0.0, tol, 1.0));
    return out;
  }};
}

std::vector<CheckTask> virial_tasks(const RunConfig& c, const RealField& q) {
  const Geometry g = q.geom;
  const double k = c.kappa(), vk = c.varkappa, tol = tol_or(c, 1e-6);
  const int M = lax_M(c);
  const json p = base_params(c);
  std::vector<CheckTask> tasks;
  tasks.push_back([=] { return virial_checks(q, k, vk, tol, M); });

  double sc = 0.0, x0 = 0.0;
  if (soliton_params(c.init, sc, x0)) {
    tasks.push_back([=] {
      const double e = k - sc / 2.0, ev = vk - sc / 2.0;
      const double bv = kPi * sc / ev;
      CentroidValues cv = centroids(q, vk, M);
      const double P = kPi * sc, E = -kPi * sc * sc / 2.0;
      std::vector<CheckRecord> out;
      out.push_back(make_record("virial.soliton.CofP", g, p, cv.CofP, x0 * P, tol, P));
      out.push_back(make_record("virial.soliton.CofE", g, p, cv.CofE, x0 * E, tol, std::abs(E)));
      out.push_back(make_record("virial.soliton.Cofbeta", g, p, cv.Cofbeta, x0 * bv, tol, bv));
      out.push_back(make_record("virial.soliton.VofP", g, p, cv.VofP, kPi / sc + x0 * x0 * P, tol));
      std::vector<CheckRecord> rs = virial_checks(q, k, vk, tol, M);
      auto lhs_of = [&](const std::string& id) {
        for (const auto& r : rs)
          if (r.id == id) return r.lhs;
        throw NumericalError("missing virial row " + id);
      };
      out.push_back(make_record("virial.soliton.bracket.CofP", g, p, lhs_of("virial.CofP"),
                                k * kPi * sc / (e * e), tol));
      out.push_back(make_record("virial.soliton.bracket.CofE", g, p, lhs_of("virial.CofE"),
                                -k * k * kPi * sc / (e * e) + k * kPi * sc / e, tol));
      out.push_back(make_record("virial.soliton.bracket.Cofbeta", g, p, lhs_of("virial.Cofbeta"),
                                -k * kPi * sc / (e * e * ev), tol));
      return out;
    });
  }

  tasks.push_back([=] {
    const std::vector<double> times{0.0, 0.1, 0.2, 0.3, 0.4, 0.5};
    VofPLaw law = vofp_time_law(q, k, times);
    json pl{{"kappa", k}, {"times", times}, {"dt", 1e-2}, {"init", c.init}};
    std::vector<CheckRecord> out;
    const char* names[3] = {"constant", "linear", "quadratic"};
    const double scale = std::abs(law.predicted[0]);
    for (int j = 0; j < 3; ++j)
      out.push_back(make_record(std::string("virial.VofP_law.") + names[j], g, pl, law.fit[j],
                                law.predicted[j], std::max(tol, 1e-4), scale));
    out.push_back(make_record("virial.VofP_law.fit_residual", g, pl, law.fit_residual, 0.0, 1e-8, 1.0));
    out.push_back(make_record("virial.CofP_speed", g, pl, law.cofp_speed, law.cofp_speed_predicted,
                              std::max(tol, 1e-6), std::abs(kPi * sc) + std::abs(law.cofp_speed_predicted)));
    return out;
  });

  if (g.kind == Kind::line) {
    tasks.push_back([=] {
      CommutatorReport r = commutator_checks(q, k, 5, c.seed + 7);
      json pc{{"kappa", k}, {"fields", 5}};
      std::vector<CheckRecord> out;
      out.push_back(make_record("virial.commutator.rank_one", g, pc, r.rank_one_ratio, 0.0, tol, 1.0));
      out.push_back(make_record("virial.commutator.X_Cq", g, pc, r.comm1_residual, 0.0, tol, 1.0));
      out.push_back(make_record("virial.commutator.X_L", g, pc, r.lax_residual, 0.0, tol, 1.0));
      out.push_back(make_record("virial.commutator.X_Pbk", g, pc, r.comm2_residual, 0.0,
                                std::max(tol, 1e-6), 1.0));
      return out;
    });
  }

  tasks.push_back([=] {
    const std::vector<double> vks{16, 24, 32, 48, 64, 96, 128, 192};
    auto [c1, c2] = cofbeta_expansion(q, vks, M);
    CentroidValues cv = centroids(q, vks.front(), M);
    json pe{{"varkappas", vks}};
    const double s = std::abs(cv.CofP) + std::abs(cv.CofE) + std::abs(cv.VofP);
    std::vector<CheckRecord> out;
    out.push_back(make_record("virial.Cofbeta_expansion.CofP", g, pe, c1, cv.CofP, 1e-5, s));
    out.push_back(make_record("virial.Cofbeta_expansion.CofE", g, pe, c2, -cv.CofE, 1e-3, s));
    return out;
  });
  return tasks;
}

std::vector<CheckTask> gerard_tasks(const RunConfig& c, const RealField& q) {
  if (q.geom.kind == Kind::circle) throw ConfigError("the explicit formula needs box or line geometry");
  const Geometry g = q.geom;
  const std::vector<cplx> zs = c.z.empty() ? default_sample_points() : c.z;
  const PhiSpec phi = phi_for_flow(c.flow);
  const double t = c.flow.T, tol = tol_or(c, 1e-2);
  const int M = lax_M(c);
  double sc = 0.0, x0 = 0.0;
  const bool exact = soliton_params(c.init, sc, x0) && c.flow.kind == FlowKind::bo;

  std::vector<CheckTask> tasks;
  for (std::size_t j = 0; j < zs.size(); ++j) {
    const cplx z = zs[j];
    tasks.push_back([=] {
      json p{{"flow", flow_name(c.flow.kind)}, {"kappa", c.flow.kappa}, {"t", t},
             {"z", {z.real(), z.imag()}}, {"init", c.init}};
      const std::string tag = std::to_string(j);
      std::vector<CheckRecord> out;
      // t = 0 reproduces the Cauchy integral of the data.
      GerardValue g0 = gerard_solve(q, phi, 0.0, z, M);
      const cplx c0 = g.kind == Kind::line ? evaluate_upper(cauchy_szego(q, 1), z)
                                           : flow_reference(q, c.flow, 0.0, z);
      const double tol0 = g.kind == Kind::line ? std::min(tol, 1e-8) : tol;
      out.push_back(make_record("gerard.cauchy." + tag, g, p, std::abs(g0.value - c0), 0.0, tol0,
                                std::abs(c0)));
      GerardValue gt = gerard_solve(q, phi, t, z, M);
      cplx ref;
      if (exact) {
        ref = kI / (z - x0 - sc * t + kI / sc);
        p["reference"] = "exact translation";
      } else {
        ref = flow_reference(q, c.flow, t, z);
        p["reference"] = "time stepped";
      }
      out.push_back(make_record("gerard.flow." + tag, g, p, std::abs(gt.value - ref), 0.0, tol,
                                std::abs(ref)));
      return out;
    });
  }
  return tasks;
}

// The transform equation and the integral of w are line statements; on the box
// they carry the periodic-tail error and go to the diagnostics table instead.
Report bock_kruskal_report(const RunConfig& c, const RealField& q) {
  const Geometry g = q.geom;
  const double k = c.kappa(), tol = tol_or(c, 1e-8);
  const int M = lax_M(c);
  const json p = base_params(c);
  BockKruskal bk = bock_kruskal(q, k, M);
  GaugeContext ctx(q, k, M);
  const double target = integral_w_target(q, ctx);
  Report r;
  r.suite = "bock-kruskal";
  if (g.kind != Kind::circle)
    r.records.push_back(make_record("bk.wiener_hopf", g, p, bk.wiener_hopf_error, 0.0, tol, 1.0));
  if (g.kind == Kind::line)
    r.records.push_back(make_record("bk.residual", g, p, bk.residual, 0.0, tol, bk.q_norm));
  if (g.kind != Kind::box) {
    r.records.push_back(make_record("bk.integral_w", g, p, bk.integral_w, target, tol, std::abs(beta(ctx))));
  } else {
    r.tables["box_diagnostics"] = {{"residual_over_q_norm", bk.residual / bk.q_norm},
                                   {"integral_w", bk.integral_w}, {"integral_w_line_form", target}};
  }
  CheckRecord pos = make_record("bk.positivity", g, p, bk.min_kappa_plus_w, 0.0, tol, 1.0);
  pos.pass = bk.min_kappa_plus_w > 0.0;
  r.records.push_back(pos);
  r.sort();
  return r;
}

// Leading order of beta for "mode a,1" on the circle.
double alpha_leading(double a, double kappa) { return a * a / (2.0 * kPi * kappa); }

Report alpha_report(const RunConfig& c, const RealField& q) {
  const Geometry g = q.geom;
  if (g.kind != Kind::circle) throw ConfigError("the alpha suite runs on the circle");
  const double k = c.kappa(), tol = tol_or(c, 0.1);
  const int M = lax_M(c);
  const std::vector<double> amps{0.05, 0.1, 0.2};
  std::vector<AlphaResult> res(amps.size());
  std::vector<CheckTask> tasks;
  for (std::size_t i = 0; i < amps.size(); ++i) {
    tasks.push_back([&, i] {
      res[i] = perturbation_determinant_alpha(make_initial(g, "mode " + num(amps[i]) + ",1"), k, M);
      return std::vector<CheckRecord>{};
    });
  }
  AlphaResult own;
  tasks.push_back([&] {
    own = perturbation_determinant_alpha(q, k, M);
    return std::vector<CheckRecord>{};
  });
  run_pool(tasks, pool_size());

  Report r;
  r.suite = "alpha";
  json table = json::array();
  std::vector<double> resid(amps.size());
  for (std::size_t i = 0; i < amps.size(); ++i) {
    const double lead = alpha_leading(amps[i], k);
    resid[i] = std::abs(res[i].difference);
    json p{{"kappa", k}, {"amplitude", amps[i]}};
    r.records.push_back(make_record("alpha.leading." + short_num(amps[i]), g, p, res[i].beta_sum,
                                    lead, 1e-2));
    table.push_back({{"amplitude", amps[i]}, {"series", res[i].series}, {"beta_sum", res[i].beta_sum},
                     {"difference", res[i].difference}, {"leading", lead},
                     {"terms", res[i].terms},
                     {"spectral_radius", res[i].spectral_radius}});
  }
  for (std::size_t i = 0; i + 1 < amps.size(); ++i) {
    json p{{"kappa", k}, {"amplitudes", {amps[i], amps[i + 1]}}};
    r.records.push_back(make_record("alpha.ratio." + short_num(amps[i]) + "_" + short_num(amps[i + 1]),
                                    g, p, resid[i + 1] / resid[i], 16.0, tol));
  }
  r.tables["amplitude_sweep"] = table;
  r.tables["configured_field"] = {{"init", c.init}, {"series", own.series}, {"beta_sum", own.beta_sum},
                                  {"difference", own.difference}, {"terms", own.terms},
                                  {"spectral_radius", own.spectral_radius}};
  r.sort();
  return r;
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory '" + dir + "': " + ec.message());
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream f(path);
  if (!f) throw ConfigError("cannot write " + path.string());
  f << std::setprecision(17);
  return f;
}

void maybe_dump_operator(const RunConfig& c, const RealField& q) {
  if (c.dump_operator.empty()) return;
  std::ofstream f = open_out(c.dump_operator);
  f << dump_operator(build_lax(q, c.lax_modes)).dump() << "\n";
}

}  // namespace

Geometry RunConfig::geom() const {
  switch (kind_from_name(geometry)) {
    case Kind::circle: return make_circle(modes);
    case Kind::box: return make_box(box_length, modes);
    case Kind::line: return make_line(modes, line_scale);
  }
  throw ConfigError("unknown geometry");
}

RunConfig config_from_json(const json& j, RunConfig c) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& [key, v] : j.items()) {
    if (std::find(kConfigKeys.begin(), kConfigKeys.end(), key) == kConfigKeys.end())
      throw ConfigError("unknown config key '" + key + "'");
  }
  try {
    if (j.contains("geometry")) c.geometry = j["geometry"].get<std::string>();
    if (j.contains("box_length")) c.box_length = j["box_length"].get<double>();
    if (j.contains("line_scale")) c.line_scale = j["line_scale"].get<double>();
    if (j.contains("modes")) c.modes = j["modes"].get<int>();
    if (j.contains("lax_modes")) c.lax_modes = j["lax_modes"].get<int>();
    if (j.contains("flow")) c.flow.kind = flow_from_name(j["flow"].get<std::string>());
    if (j.contains("kappa")) c.flow.kappa = j["kappa"].get<double>();
    if (j.contains("varkappa")) c.varkappa = j["varkappa"].get<double>();
    if (j.contains("phi")) c.flow.phi = j["phi"].get<std::vector<std::pair<double, double>>>();
    if (j.contains("dt")) c.flow.dt = j["dt"].get<double>();
    if (j.contains("T")) c.flow.T = j["T"].get<double>();
    if (j.contains("stride")) c.flow.stride = j["stride"].get<int>();
    if (j.contains("kappas")) c.kappas = j["kappas"].get<std::vector<double>>();
    if (j.contains("init")) c.init = j["init"].get<std::string>();
    if (j.contains("out")) c.out = j["out"].get<std::string>();
    if (j.contains("tol")) c.tol = j["tol"].get<double>();
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("dump_operator")) c.dump_operator = j["dump_operator"].get<std::string>();
    if (j.contains("z")) {
      c.z.clear();
      for (const auto& p : j["z"].get<std::vector<std::pair<double, double>>>())
        c.z.emplace_back(p.first, p.second);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }
  c.flow.monitor_kappas = c.kappas;
  return c;
}

json to_json(const RunConfig& c) {
  json z = json::array();
  for (cplx v : c.z) z.push_back({v.real(), v.imag()});
  return json{{"geometry", c.geometry}, {"box_length", c.box_length}, {"line_scale", c.line_scale},
              {"modes", c.modes},       {"lax_modes", c.lax_modes},   {"flow", flow_name(c.flow.kind)},
              {"kappa", c.flow.kappa},  {"varkappa", c.varkappa},     {"phi", c.flow.phi},
              {"dt", c.flow.dt},        {"T", c.flow.T},              {"stride", c.flow.stride},
              {"kappas", c.kappas},     {"init", c.init},             {"out", c.out},
              {"tol", c.tol},           {"seed", c.seed},             {"dump_operator", c.dump_operator},
              {"z", z}};
}

RealField initial_field(const RunConfig& c) { return make_initial(c.geom(), c.init, c.seed); }

std::vector<cplx> default_sample_points() {
  return {{0.3, 0.5}, {-1.0, 1.0}, {1.0, 0.7}, {2.0, 1.0}, {-0.5, 0.3}};
}

int pool_size() {
  int n = static_cast<int>(std::thread::hardware_concurrency());
  if (const char* env = std::getenv("BOLAB_THREADS")) {
    try {
      n = std::stoi(env);
    } catch (const std::logic_error&) {
      throw ConfigError(std::string("BOLAB_THREADS is not an integer: ") + env);
    }
  }
  return std::max(1, n);
}

std::vector<CheckRecord> run_pool(const std::vector<CheckTask>& tasks, int threads) {
  std::vector<std::vector<CheckRecord>> results(tasks.size());
  std::vector<std::exception_ptr> errors(tasks.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < tasks.size(); i = next++) {
      try {
        results[i] = tasks[i]();
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const int n = std::clamp(threads, 1, std::max(1, static_cast<int>(tasks.size())));
  std::vector<std::thread> pool;
  for (int i = 1; i < n; ++i) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  std::vector<CheckRecord> out;
  for (auto& r : results) out.insert(out.end(), r.begin(), r.end());
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  return out;
}

const std::vector<std::string> kSuites = {"identities", "conservation", "virial",
                                          "gerard",     "bock-kruskal", "alpha"};

Report run_suite(const std::string& suite, const RunConfig& c) {
  if (std::find(kSuites.begin(), kSuites.end(), suite) == kSuites.end())
    throw ConfigError("unknown suite '" + suite + "'");
  const auto start = std::chrono::steady_clock::now();
  RealField q = initial_field(c);
  Report r;
  if (suite == "alpha") {
    r = alpha_report(c, q);
  } else if (suite == "bock-kruskal") {
    r = bock_kruskal_report(c, q);
  } else {
    std::vector<CheckTask> tasks;
    if (suite == "identities") tasks = identities_tasks(c, q);
    else if (suite == "conservation") tasks = conservation_tasks(c, q);
    else if (suite == "virial") tasks = virial_tasks(c, q);
    else tasks = gerard_tasks(c, q);
    r.suite = suite;
    r.records = run_pool(tasks, pool_size());
  }
  r.tables["config"] = to_json(c);
  r.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

int cmd_evolve(const RunConfig& c) {
  RealField q = initial_field(c);
  maybe_dump_operator(c, q);
  ensure_dir(c.out);
  std::ofstream traj = open_out(fs::path(c.out) / "trajectory.jsonl");
  std::ofstream mon = open_out(fs::path(c.out) / "monitors.csv");
  FlowSpec spec = c.flow;
  if (spec.monitor_kappas.empty()) spec.monitor_kappas = c.kappas;
  bool header = false;
  auto sink = [&](const MonitorRecord& r, const RealField& f) {
    if (!header) {
      mon << "t,P,H_BO,H_2,mean,tail";
      for (const auto& [k, v] : r.beta) mon << ",beta:" << num(k);
      mon << "\n";
      header = true;
    }
    mon << r.t << ',' << r.P << ',' << r.H_BO << ',' << r.H_2 << ',' << r.mean << ',' << r.tail;
    for (const auto& [k, v] : r.beta) mon << ',' << v;
    mon << "\n";
    traj << json{{"t", r.t}, {"field", to_json(f)}}.dump() << "\n";
  };
  try {
    evolve(q, spec, sink);
  } catch (const FlowAbort& e) {
    traj << json{{"t", e.t}, {"field", to_json(e.last)}, {"aborted", e.what()}}.dump() << "\n";
    throw;
  }
  spdlog::info("evolve: wrote {}", c.out);
  return kExitOk;
}

int cmd_verify(const std::string& suite, const RunConfig& c) {
  maybe_dump_operator(c, initial_field(c));
  Report r = run_suite(suite, c);
  ensure_dir(c.out);
  open_out(fs::path(c.out) / ("report_" + suite + ".json")) << to_json(r).dump(2) << "\n";
  open_out(fs::path(c.out) / ("report_" + suite + ".csv")) << to_csv(r);
  int failed = 0;
  for (const auto& rec : r.records) {
    if (!rec.pass) {
      ++failed;
      spdlog::error("{}: rel_err {:.3e} (lhs {:.17g}, rhs {:.17g})", rec.id, rec.rel_err, rec.lhs, rec.rhs);
    }
  }
  spdlog::info("{}: {} checks, {} failed, {:.2f} s", suite, r.records.size(), failed, r.wall_time);
  return failed == 0 ? kExitOk : kExitVerify;
}

int cmd_beta(const RunConfig& c) {
  RealField q = initial_field(c);
  maybe_dump_operator(c, q);
  std::vector<double> ks = c.kappas;
  if (ks.empty()) ks = {4, 5, 6, 8, 10, 12, 16, 20, 24, 32, 48, 64};
  std::sort(ks.begin(), ks.end());
  ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
  const int M = lax_M(c);

  struct Row {
    double kappa, b, db, d2b, hk;
  };
  std::vector<Row> rows;
  std::vector<double> used;
  for (double k : ks) {
    try {
      GaugeContext ctx(q, k, M);
      std::vector<double> d = beta_derivatives(ctx, 2);
      rows.push_back({k, d[0], d[1], d[2], h_kappa(ctx)});
      used.push_back(k);
    } catch (const InadmissibleError& e) {
      spdlog::warn("kappa {} skipped: below admissibility threshold {:.6g}", k, e.kappa_min);
    }
  }
  if (rows.empty()) throw ConfigError("no admissible kappa in the grid");

  ensure_dir(c.out);
  std::ofstream csv = open_out(fs::path(c.out) / "beta.csv");
  csv << "kappa,beta,dbeta,d2beta,H_kappa\n";
  bool monotone = true;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Row& r = rows[i];
    csv << r.kappa << ',' << r.b << ',' << r.db << ',' << r.d2b << ',' << r.hk << '\n';
    if (i > 0 && r.b > rows[i - 1].b) monotone = false;
  }

  HamiltonianValue h = polynomial_hamiltonians(q);
  json fit{{"kappas", used},
           {"direct", {{"P", h.P}, {"H_BO", h.H_BO}, {"H_2", h.H_2}, {"mean", h.mean}}},
           {"monotone", monotone}};
  if (used.size() >= 6 && used.back() >= 2.0 * used.front()) {
    ExpansionFit f = beta_expansion_check(q, used, M);
    fit["fit"] = {{"P", f.P}, {"H_BO", f.H_BO}, {"H_2", f.H_2}, {"raw", f.raw}, {"residual", f.residual}};
  } else {
    fit["fit"] = nullptr;
    fit["note"] = "expansion fit needs at least 6 admissible points spanning a factor 2";
  }
  open_out(fs::path(c.out) / "beta_fit.json") << fit.dump(2) << "\n";
  if (!monotone) {
    spdlog::error("beta is not decreasing in kappa on the grid");
    return kExitVerify;
  }
  return kExitOk;
}

int cmd_explicit(const RunConfig& c) {
  RealField q = initial_field(c);
  maybe_dump_operator(c, q);
  if (q.geom.kind == Kind::circle) throw ConfigError("the explicit formula needs box or line geometry");
  const std::vector<cplx> zs = c.z.empty() ? default_sample_points() : c.z;
  const PhiSpec phi = phi_for_flow(c.flow);
  double sc = 0.0, x0 = 0.0;
  const bool exact = soliton_params(c.init, sc, x0) && c.flow.kind == FlowKind::bo;
  const int steps = 4;

  struct Row {
    double t;
    cplx z, value, ref;
  };
  std::vector<Row> rows;
  for (int i = 0; i <= steps; ++i)
    for (cplx z : zs) rows.push_back({c.flow.T * i / steps, z, {}, {}});
  std::vector<CheckTask> tasks;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    tasks.push_back([&, i] {
      Row& r = rows[i];
      r.value = gerard_solve(q, phi, r.t, r.z, c.lax_modes).value;
      r.ref = exact ? kI / (r.z - x0 - sc * r.t + kI / sc) : flow_reference(q, c.flow, r.t, r.z);
      return std::vector<CheckRecord>{};
    });
  }
  run_pool(tasks, pool_size());

  ensure_dir(c.out);
  std::ofstream csv = open_out(fs::path(c.out) / "explicit.csv");
  csv << "t,re_z,im_z,re_qplus,im_qplus,ref_re,ref_im,abs_err\n";
  for (const Row& r : rows)
    csv << r.t << ',' << r.z.real() << ',' << r.z.imag() << ',' << r.value.real() << ','
        << r.value.imag() << ',' << r.ref.real() << ',' << r.ref.imag() << ','
        << std::abs(r.value - r.ref) << '\n';
  return kExitOk;
}

int guarded(const std::function<int()>& cmd) {
  try {
    return cmd();
  } catch (const InadmissibleError& e) {
    spdlog::error("kappa {} is below the admissibility threshold kappa_min = {:.6g}", e.kappa,
                  e.kappa_min);
    return kExitConfig;
  } catch (const ConfigError& e) {
    spdlog::error("config error: {}", e.what());
    return kExitConfig;
  } catch (const FlowAbort& e) {
    spdlog::error("flow aborted at t = {}: {}", e.t, e.what());
    return kExitNumerical;
  } catch (const NumericalError& e) {
    spdlog::error("numerical failure: {}", e.what());
    return kExitNumerical;
  } catch (const std::exception& e) {
    spdlog::error("failure: {}", e.what());
    return kExitNumerical;
  }
}

}  // namespace bolab
