#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <random>

#include "dualhom/coefficient.hpp"

using namespace dualhom;

namespace {

CoefficientField expr_field(const std::string& s, int dim = 2) {
  return CoefficientField::from_expression(Expression::parse(s, dim));
}

ProblemData basic_problem(int dim = 2) {
  ProblemData p;
  p.dim = dim;
  p.domain.dim = dim;
  p.domain.lo = {0.0, 0.0};
  p.domain.hi = {1.0, 1.0};
  p.horizon = 0.1;
  p.kappa[0] = expr_field("1 + 0.5*sin(2*pi*y1)", dim);
  p.kappa[1] = expr_field("1", dim);
  p.capacity[0] = expr_field("1", dim);
  p.capacity[1] = expr_field("1", dim);
  p.exchange = expr_field("sin(2*pi*y1)", dim);
  p.source = expr_field("1", dim);
  p.initial[0] = expr_field("0", dim);
  p.initial[1] = expr_field("0", dim);
  return p;
}

}  // namespace

TEST_CASE("constant and analytic field evaluation") {
  CoefficientField c = expr_field("3");
  CHECK(c.eval_xy({0.3, 0.4}, {0.1, 0.9}) == 3.0);
  CoefficientField s = expr_field("sin(2*pi*y1)");
  CHECK(s.eval_xy({0, 0}, {0.25, 0}) == doctest::Approx(1.0).epsilon(1e-15));
  CoefficientField f = expr_field("1 + 0.5*sin(2*pi*y1)");
  CHECK(f.eval_xy({0, 0}, {0.0, 0}) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("evaluation wraps the cell coordinate") {
  CoefficientField f = expr_field("sin(2*pi*y1) + cos(2*pi*y2)");
  const double a = f.eval_xy({0, 0}, {0.3, 0.8});
  const double b = f.eval_xy({0, 0}, {1.3, -0.2});
  CHECK(a == doctest::Approx(b).epsilon(1e-14));
  // an exactly representable offset wraps bitwise
  CHECK(f.eval_xy({0, 0}, {0.25, 0.5}) == f.eval_xy({0, 0}, {1.25, -0.5}));
}

TEST_CASE("sampled grid interpolation with periodic wrap") {
  // 1D in x and y: values v(ix, iy) = ix + iy picked to expose indexing
  std::vector<double> vals;
  const int nx = 3, ny = 4;
  for (int ix = 0; ix < nx; ++ix) {
    for (int iy = 0; iy < ny; ++iy) vals.push_back(ix + 10.0 * iy);
  }
  Box box;
  box.dim = 1;
  box.lo = {0.0, 0.0};
  box.hi = {2.0, 0.0};
  SampledGrid g(1, {nx, 1}, {ny, 1}, box, vals);
  // at a sample point
  CHECK(g.eval({1.0, 0}, {0.25, 0}) == doctest::Approx(1.0 + 10.0).epsilon(1e-14));
  // halfway in x
  CHECK(g.eval({0.5, 0}, {0.0, 0}) == doctest::Approx(0.5).epsilon(1e-14));
  // wrap in y: between iy=3 (0.75) and iy=0 (1.0)
  CHECK(g.eval({0.0, 0}, {0.875, 0}) == doctest::Approx(15.0).epsilon(1e-14));
  // periodic invariance (bitwise at representable offsets)
  CHECK(g.eval({0.7, 0}, {0.25, 0}) == g.eval({0.7, 0}, {2.25, 0}));
  CHECK(g.eval({0.7, 0}, {0.3, 0}) == doctest::Approx(g.eval({0.7, 0}, {2.3, 0})).epsilon(1e-13));
  // x clamps outside the box
  CHECK(g.eval({-5.0, 0}, {0.0, 0}) == 0.0);
}

TEST_CASE("grid binary and csv round trip") {
  std::vector<double> vals = {1.0, 2.5, -3.0, 4.0, 0.125, 6.0};
  Box box;
  box.dim = 2;
  box.lo = {0.0, -1.0};
  box.hi = {2.0, 1.0};
  SampledGrid g(2, {1, 3}, {2, 1}, box, vals);
  g.save("/tmp/dh_grid_test.bin");
  SampledGrid r = SampledGrid::load("/tmp/dh_grid_test.bin");
  CHECK(r.values() == g.values());
  CHECK(r.nx() == g.nx());
  CHECK(r.ny() == g.ny());
  g.save_csv("/tmp/dh_grid_test.csv");
  SampledGrid rc = SampledGrid::load_csv("/tmp/dh_grid_test.csv");
  CHECK(rc.values() == g.values());
  std::remove("/tmp/dh_grid_test.bin");
  std::remove("/tmp/dh_grid_test.csv");
}

TEST_CASE("cell mean quadrature is exact for multilinear fields") {
  CoefficientField f = expr_field("0.25 + 0.5*y1*y2 + 0.125*y1 - y2");
  // exact mean over Y: 0.25 + 0.5/4 + 0.125/2 - 0.5 = -0.0625
  const double m = cell_mean(f, {0, 0}, 16);
  CHECK(std::fabs(m - (-0.0625)) <= 1e-13);
}

TEST_CASE("validation passes analytic zero-mean exchange") {
  ProblemData p = basic_problem();
  ValidationReport r = validate(p);
  CHECK(r.all_passed());
  // worst exchange mean is quadrature-level zero
  for (const auto& c : r.checks) {
    if (c.name == "exchange zero cell mean") {
      CHECK(std::fabs(c.worst_value) < 1e-12);
    }
  }
}

TEST_CASE("validation rejects nonzero-mean exchange") {
  ProblemData p = basic_problem();
  p.exchange = expr_field("1");
  ValidationReport r = validate(p);
  CHECK_FALSE(r.all_passed());
  bool found = false;
  for (const auto& c : r.checks) {
    if (c.name == "exchange zero cell mean") {
      found = true;
      CHECK_FALSE(c.passed);
      CHECK(c.worst_value == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
  CHECK(found);
  CHECK_THROWS_AS(require_valid(p), ConfigError);
}

TEST_CASE("validation rejects sign-changing diffusion") {
  ProblemData p = basic_problem();
  p.kappa[0] = expr_field("cos(2*pi*y1)");
  ValidationReport r = validate(p);
  CHECK_FALSE(r.all_passed());
  for (const auto& c : r.checks) {
    if (c.name == "kappa_1 coercivity") {
      CHECK_FALSE(c.passed);
      CHECK(c.worst_value <= -1.0 + 1e-2);  // min of cos on the sample lattice
    }
  }
}

TEST_CASE("validation accepts an analytic corpus at resolution 32") {
  const char* kappas[] = {"1", "2 + sin(2*pi*y1)*cos(2*pi*y2)", "1 + 0.5*x1",
                          "0.5 + 0.25*cos(2*pi*y2)", "1 + 0.3*sin(2*pi*x1)*sin(2*pi*y1)"};
  const char* exchanges[] = {"0", "sin(2*pi*y1)", "cos(2*pi*y2)",
                             "sin(2*pi*y1)*cos(2*pi*y2)", "x1*sin(4*pi*y2)"};
  for (const char* k : kappas) {
    for (const char* q : exchanges) {
      ProblemData p = basic_problem();
      p.kappa[0] = expr_field(k);
      p.exchange = expr_field(q);
      ValidationOptions opts;
      opts.sample_resolution = 32;
      ValidationReport r = validate(p, opts);
      CHECK_MESSAGE(r.all_passed(), "kappa=", k, " Q=", q, "\n", r.to_string());
    }
  }
}

TEST_CASE("problem hash is stable and content sensitive") {
  ProblemData a = basic_problem();
  ProblemData b = basic_problem();
  CHECK(a.content_hash() == b.content_hash());
  b.kappa[0] = expr_field("2");
  CHECK(a.content_hash() != b.content_hash());
}
