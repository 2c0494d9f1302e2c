#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "bolab/cli.hpp"

using namespace bolab;

namespace {

// Parses "re,im;re,im;..." into sample points.
std::vector<cplx> parse_points(const std::string& s) {
  std::vector<cplx> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ';')) {
    auto comma = item.find(',');
    if (comma == std::string::npos) throw ConfigError("sample point needs re,im: '" + item + "'");
    try {
      out.emplace_back(std::stod(item.substr(0, comma)), std::stod(item.substr(comma + 1)));
    } catch (const std::logic_error&) {
      throw ConfigError("bad sample point '" + item + "'");
    }
  }
  return out;
}

struct Flags {
  std::string config, geometry, flow, init, out, dump_operator, z;
  double box_length = 0, line_scale = 0, kappa = 0, varkappa = 0, dt = 0, T = 0, tol = 0;
  int modes = 0, lax_modes = 0, stride = 0;
  std::uint64_t seed = 0;
  std::vector<double> kappas;
  std::vector<std::pair<double, double>> phi;
};

void add_flags(CLI::App& app, Flags& f) {
  app.add_option("--config", f.config, "JSON config file")->check(CLI::ExistingFile);
  app.add_option("--geometry", f.geometry, "circle | box | line");
  app.add_option("--box-length", f.box_length, "box length");
  app.add_option("--line-scale", f.line_scale, "line grid scale");
  app.add_option("--modes", f.modes, "grid size n (power of two)");
  app.add_option("--lax-modes", f.lax_modes, "Hardy modes of the Lax matrix");
  app.add_option("--flow", f.flow, "bo | hk | beta | diff | phi");
  app.add_option("--kappa", f.kappa, "flow spectral parameter");
  app.add_option("--varkappa", f.varkappa, "second spectral parameter");
  app.add_option("--phi", f.phi, "phi flow terms c,kappa (repeatable)")->delimiter(',');
  app.add_option("--kappas", f.kappas, "kappa grid / monitored kappas")->delimiter(',');
  app.add_option("--dt", f.dt, "time step");
  app.add_option("--T", f.T, "final time");
  app.add_option("--stride", f.stride, "steps between monitor records");
  app.add_option("--init", f.init, "initial condition descriptor or field file");
  app.add_option("--out", f.out, "output directory");
  app.add_option("--tol", f.tol, "check tolerance (default: per suite)");
  app.add_option("--seed", f.seed, "random seed");
  app.add_option("--dump-operator", f.dump_operator, "write the Lax matrix as JSON");
  app.add_option("--z", f.z, "sample points re,im;re,im;...");
}

// defaults < config file < flags given on the command line
RunConfig resolve(const CLI::App& app, const Flags& f) {
  RunConfig c;
  if (!f.config.empty()) {
    std::ifstream in(f.config);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("cannot parse " + f.config + ": " + e.what());
    }
    c = config_from_json(j, c);
  }
  auto given = [&](const char* name) { return app.count(name) > 0; };
  if (given("--geometry")) c.geometry = f.geometry;
  if (given("--box-length")) c.box_length = f.box_length;
  if (given("--line-scale")) c.line_scale = f.line_scale;
  if (given("--modes")) c.modes = f.modes;
  if (given("--lax-modes")) c.lax_modes = f.lax_modes;
  if (given("--flow")) c.flow.kind = flow_from_name(f.flow);
  if (given("--kappa")) c.flow.kappa = f.kappa;
  if (given("--varkappa")) c.varkappa = f.varkappa;
  if (given("--phi")) c.flow.phi = f.phi;
  if (given("--kappas")) c.kappas = f.kappas;
  if (given("--dt")) c.flow.dt = f.dt;
  if (given("--T")) c.flow.T = f.T;
  if (given("--stride")) c.flow.stride = f.stride;
  if (given("--init")) c.init = f.init;
  if (given("--out")) c.out = f.out;
  if (given("--tol")) c.tol = f.tol;
  if (given("--seed")) c.seed = f.seed;
  if (given("--dump-operator")) c.dump_operator = f.dump_operator;
  if (given("--z")) c.z = parse_points(f.z);
  c.flow.monitor_kappas = c.kappas;
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_pattern("[%l] %v");
  CLI::App app{"Benjamin-Ono Lax-operator laboratory"};
  app.require_subcommand(1);

  Flags f;
  std::string suite;
  CLI::App* evolve = app.add_subcommand("evolve", "time-step a flow and write the trajectory");
  CLI::App* verify = app.add_subcommand("verify", "run a verification suite");
  CLI::App* beta = app.add_subcommand("beta", "tabulate beta(kappa) and its expansion fit");
  CLI::App* expl = app.add_subcommand("explicit", "evaluate the explicit formula against a reference");
  verify->add_option("suite", suite, "suite name")->required()->check(CLI::IsMember(kSuites));
  for (CLI::App* sub : {evolve, verify, beta, expl}) add_flags(*sub, f);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  CLI::App* sub = app.get_subcommands().front();
  return guarded([&] {
    RunConfig c = resolve(*sub, f);
    if (sub == evolve) return cmd_evolve(c);
    if (sub == verify) return cmd_verify(suite, c);
    if (sub == beta) return cmd_beta(c);
    return cmd_explicit(c);
  });
}
