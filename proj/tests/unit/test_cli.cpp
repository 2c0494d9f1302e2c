#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "bolab/cli.hpp"
#include "doctest.h"

using namespace bolab;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("bolab_test_" + name);
  fs::remove_all(p);
  return p;
}

const CheckRecord& find(const Report& r, const std::string& id) {
  for (const auto& c : r.records)
    if (c.id == id) return c;
  throw std::runtime_error("missing record " + id);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("records and reports") {
  Geometry g = make_circle(16);
  CheckRecord r = make_record("a", g, {}, 1.0 + 1e-9, 1.0, 1e-8);
  CHECK(r.pass);
  CHECK(r.rel_err == doctest::Approx(1e-9).epsilon(1e-6));
  CHECK_FALSE(make_record("b", g, {}, 1.1, 1.0, 1e-8).pass);
  // A zero right side takes its scale from the caller.
  CHECK(make_record("c", g, {}, 1e-10, 0.0, 1e-8, 1.0).pass);
  CHECK_FALSE(make_record("d", g, {}, NAN, 0.0, 1e-8, 1.0).pass);

  Report rep;
  rep.suite = "s";
  rep.records = {make_record("z", g, {}, 0, 0, 1), make_record("a", g, {{"k", 1}}, 0, 0, 1)};
  rep.wall_time = 12.5;
  rep.sort();
  CHECK(rep.records.front().id == "a");
  nlohmann::json j = to_json(rep);
  CHECK(j.dump().find("wall") == std::string::npos);
  CHECK(j["pass"] == true);
  std::string csv = to_csv(rep);
  CHECK(csv.rfind("id,geometry,params,lhs,rhs,abs_err,rel_err,pass\n", 0) == 0);
  CHECK(csv.find("\"{\"\"k\"\":1}\"") != std::string::npos);
}

TEST_CASE("config json") {
  RunConfig c = config_from_json({{"geometry", "circle"}, {"modes", 128}, {"flow", "hk"}, {"kappa", 16},
                                  {"kappas", {8, 24}}, {"z", {{0.3, 0.5}}}, {"phi", {{1.0, 8.0}}}});
  CHECK(c.geom() == make_circle(128));
  CHECK(c.flow.kind == FlowKind::hk);
  CHECK(c.kappa() == 16.0);
  CHECK(c.flow.monitor_kappas == std::vector<double>{8, 24});
  CHECK(c.z.at(0) == cplx(0.3, 0.5));
  CHECK(c.flow.phi.at(0) == std::pair<double, double>(1.0, 8.0));

  RunConfig back = config_from_json(to_json(c));
  CHECK(to_json(back) == to_json(c));

  CHECK_THROWS_AS(config_from_json({{"modes", 64}, {"colour", "red"}}), ConfigError);
  CHECK_THROWS_AS(config_from_json({{"modes", "many"}}), ConfigError);
  CHECK_THROWS_AS(config_from_json(nlohmann::json::array()), ConfigError);
  CHECK_THROWS_AS(config_from_json({{"flow", "kdv"}}), ConfigError);
  // Values absent from the document keep the base.
  RunConfig base;
  base.varkappa = 33.0;
  CHECK(config_from_json({{"modes", 64}}, base).varkappa == 33.0);
}

TEST_CASE("work pool") {
  std::vector<CheckTask> tasks;
  Geometry g = make_circle(16);
  for (int i = 9; i >= 0; --i)
    tasks.push_back([=] { return std::vector<CheckRecord>{make_record("t" + std::to_string(i), g, {}, 0, 0, 1)}; });
  for (int threads : {1, 3, 16}) {
    std::vector<CheckRecord> out = run_pool(tasks, threads);
    REQUIRE(out.size() == 10);
    for (int i = 0; i < 10; ++i) CHECK(out[i].id == "t" + std::to_string(i));
  }
  tasks.push_back([]() -> std::vector<CheckRecord> { throw NumericalError("boom"); });
  CHECK_THROWS_AS(run_pool(tasks, 4), NumericalError);

  setenv("BOLAB_THREADS", "3", 1);
  CHECK(pool_size() == 3);
  setenv("BOLAB_THREADS", "0", 1);
  CHECK(pool_size() == 1);
  setenv("BOLAB_THREADS", "x", 1);
  CHECK_THROWS_AS(pool_size(), ConfigError);
  unsetenv("BOLAB_THREADS");
}

TEST_CASE("exit codes") {
  CHECK(guarded([] { return kExitOk; }) == 0);
  CHECK(guarded([]() -> int { throw ConfigError("x"); }) == 1);
  CHECK(guarded([]() -> int { throw InadmissibleError(1.0, 2.0); }) == 1);
  CHECK(guarded([]() -> int { throw NumericalError("x"); }) == 2);
  CHECK(guarded([]() -> int { throw FlowAbort("x", 0.5, zero_field(make_circle(8))); }) == 2);

  RunConfig c;
  c.geometry = "circle";
  c.modes = 64;
  c.init = "constant c=0.4";
  c.flow.kappa = 0.1;
  CHECK(guarded([&] { return cmd_verify("identities", c); }) == kExitConfig);
  c.flow.kappa = 6.0;
  c.init = "no such file";
  CHECK(guarded([&] { return cmd_verify("identities", c); }) == kExitConfig);
  CHECK_THROWS_AS(run_suite("everything", c), ConfigError);
}

TEST_CASE("identities suite on a constant") {
  RunConfig c;
  c.geometry = "circle";
  c.modes = 256;
  c.init = "constant c=0.4";
  c.flow.kappa = 6.0;
  c.varkappa = 20.0;
  Report r = run_suite("identities", c);
  CHECK(r.passed());
  CHECK(find(r, "id.beta.constant").rhs == doctest::Approx(0.16 / 5.6).epsilon(1e-15));
  CHECK(find(r, "id.beta.constant").rel_err < 1e-12);
  CHECK(find(r, "id.beta3").rel_err < 1e-12);
  CHECK(find(r, "id.beta4").rel_err < 1e-12);
  for (size_t i = 1; i < r.records.size(); ++i) CHECK(r.records[i - 1].id < r.records[i].id);
}

TEST_CASE("verify writes sorted reports") {
  RunConfig c;
  c.geometry = "line";
  c.modes = 128;
  c.init = "soliton 1";
  c.flow.kappa = 8.0;
  c.out = scratch("verify").string();
  CHECK(cmd_verify("bock-kruskal", c) == kExitOk);
  nlohmann::json j = nlohmann::json::parse(slurp(fs::path(c.out) / "report_bock-kruskal.json"));
  CHECK(j["suite"] == "bock-kruskal");
  CHECK(j["records"].size() == 4);
  CHECK(j["tables"]["config"]["init"] == "soliton 1");
  const std::string first = slurp(fs::path(c.out) / "report_bock-kruskal.csv");
  CHECK(cmd_verify("bock-kruskal", c) == kExitOk);
  CHECK(slurp(fs::path(c.out) / "report_bock-kruskal.csv") == first);

  // A tolerance below round-off fails the suite.
  c.tol = 1e-300;
  CHECK(cmd_verify("bock-kruskal", c) == kExitVerify);
  fs::remove_all(c.out);
}

TEST_CASE("beta command") {
  RunConfig c;
  c.geometry = "circle";
  c.modes = 64;
  c.init = "constant c=0";
  c.kappas = {1, 2, 4};
  c.out = scratch("beta0").string();
  CHECK(cmd_beta(c) == kExitOk);
  std::ifstream in(fs::path(c.out) / "beta.csv");
  std::string line;
  std::getline(in, line);
  CHECK(line == "kappa,beta,dbeta,d2beta,H_kappa");
  int rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    std::stringstream ss(line);
    std::string cell;
    std::getline(ss, cell, ',');
    while (std::getline(ss, cell, ',')) CHECK(std::stod(cell) == 0.0);
  }
  CHECK(rows == 3);

  // Soliton column against pi c/(kappa - c/2); 0.2 sits below the threshold and is skipped.
  c.geometry = "line";
  c.modes = 128;
  c.init = "soliton 1";
  c.kappas = {0.2, 4, 6, 8, 12, 16, 24, 32};
  c.out = scratch("beta1").string();
  CHECK(cmd_beta(c) == kExitOk);
  std::ifstream in2(fs::path(c.out) / "beta.csv");
  std::getline(in2, line);
  rows = 0;
  while (std::getline(in2, line)) {
    ++rows;
    double k = std::stod(line.substr(0, line.find(',')));
    double b = std::stod(line.substr(line.find(',') + 1));
    CHECK(b == doctest::Approx(kPi / (k - 0.5)).epsilon(1e-4));
  }
  CHECK(rows == 7);
  nlohmann::json fit = nlohmann::json::parse(slurp(fs::path(c.out) / "beta_fit.json"));
  CHECK(fit["monotone"] == true);
  CHECK(fit["fit"]["P"].get<double>() == doctest::Approx(kPi).epsilon(1e-2));
  fs::remove_all(scratch("beta0"));
  fs::remove_all(c.out);
}

TEST_CASE("evolve and explicit commands") {
  RunConfig c;
  c.geometry = "circle";
  c.modes = 64;
  c.init = "constant c=0.5";
  c.flow = FlowSpec{FlowKind::hk, 16.0, {}, 1e-3, 0.05, 10, {}};
  c.out = scratch("evolve").string();
  CHECK(cmd_evolve(c) == kExitOk);
  std::ifstream traj(fs::path(c.out) / "trajectory.jsonl");
  std::string line;
  int records = 0;
  nlohmann::json first, last;
  while (std::getline(traj, line)) {
    last = nlohmann::json::parse(line);
    if (records++ == 0) first = last;
  }
  CHECK(records == 6);
  RealField q0 = real_field_from_json(first["field"]), q1 = real_field_from_json(last["field"]);
  CHECK((q0.coeffs - q1.coeffs).norm() < 1e-14);
  CHECK(slurp(fs::path(c.out) / "monitors.csv").rfind("t,P,H_BO,H_2,mean,tail\n", 0) == 0);

  c.flow = FlowSpec{FlowKind::bo, 0.0, {}, 0.5, 5.0, 1, {}};
  c.init = "mode 1,3";
  CHECK(guarded([&] { return cmd_evolve(c); }) == kExitNumerical);

  c.geometry = "line";
  c.modes = 128;
  c.init = "soliton 1";
  c.flow = FlowSpec{FlowKind::bo, 0.0, {}, 1e-3, 0.7, 1, {}};
  c.z = {{0.3, 0.5}};
  c.out = scratch("explicit").string();
  CHECK(cmd_explicit(c) == kExitOk);
  std::ifstream csv(fs::path(c.out) / "explicit.csv");
  std::getline(csv, line);
  CHECK(line == "t,re_z,im_z,re_qplus,im_qplus,ref_re,ref_im,abs_err");
  int rows = 0;
  while (std::getline(csv, line)) {
    ++rows;
    CHECK(std::stod(line.substr(line.rfind(',') + 1)) < 1e-12);
  }
  CHECK(rows == 5);
  fs::remove_all(scratch("evolve"));
  fs::remove_all(c.out);
}
