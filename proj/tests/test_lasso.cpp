#include <catch2/catch_amalgamated.hpp>

#include <array>
#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "sae/lasso.hpp"
#include "sae/rng.hpp"

using namespace sae;

namespace {

ArealRow lrow(const std::string& id, double y, std::vector<double> x) {
  ArealRow row;
  row.area_id = id;
  row.n_total = 20;
  row.n_sampled = 10;
  row.frac_sampled = 0.5;
  row.ybar_s = y;
  row.xbar_s = std::move(x);
  row.xbar = row.xbar_s;
  row.xbar_ns = row.xbar_s;
  return row;
}

// Rows whose two covariates are orthonormal under the 1/m inner product
// (non-constant Hadamard columns), with y = 2 h1 + 0.1 h2, so the OLS
// coefficients are exactly (2, 0.1).
std::vector<ArealRow> hadamard_rows() {
  const std::array<std::array<double, 3>, 8> h{{
      {+1, +1, +1},
      {-1, +1, -1},
      {+1, -1, -1},
      {-1, -1, +1},
      {+1, +1, -1},
      {-1, +1, +1},
      {+1, -1, +1},
      {-1, -1, -1},
  }};
  // columns 0 and 1 are orthogonal with zero mean and unit variance
  std::vector<ArealRow> rows;
  for (std::size_t i = 0; i < 8; ++i) {
    const double y = 2.0 * h[i][0] + 0.1 * h[i][1];
    rows.push_back(lrow("a" + std::to_string(i), y, {h[i][0], h[i][1]}));
  }
  return rows;
}

}  // namespace

TEST_CASE("penalty at or above lambda_max zeroes every coefficient", "[lasso]") {
  Rng rng(5);
  std::vector<ArealRow> rows;
  double ysum = 0.0;
  for (int i = 0; i < 20; ++i) {
    const double y = rng.normal(3.0, 1.0);
    ysum += y;
    rows.push_back(lrow("a" + std::to_string(i), y, {rng.normal(), rng.normal()}));
  }
  const auto model = lasso_fit_fixed(rows, 1e6);
  for (double b : model.beta) CHECK(b == 0.0);
  CHECK(model.intercept == Catch::Approx(ysum / 20.0));
  CHECK(lasso_predict(model, std::vector<double>{5.0, -2.0}) ==
        Catch::Approx(ysum / 20.0));
}

TEST_CASE("orthonormal design reproduces the soft-threshold solution", "[lasso]") {
  const auto rows = hadamard_rows();
  const auto model = lasso_fit_fixed(rows, 0.5);
  CHECK(model.beta[0] == Catch::Approx(oracle::soft_threshold(2.0, 0.5)).margin(1e-6));
  CHECK(model.beta[0] == Catch::Approx(1.5).margin(1e-6));
  CHECK(model.beta[1] == 0.0);

  // random responses, several penalties, coefficient-wise oracle
  Rng rng(8);
  auto rows2 = hadamard_rows();
  std::vector<double> y(8);
  double mean_y = 0.0;
  for (std::size_t i = 0; i < 8; ++i) {
    y[i] = rng.normal(0, 2);
    mean_y += y[i] / 8.0;
  }
  for (std::size_t i = 0; i < 8; ++i) rows2[i].ybar_s = y[i];
  for (double lambda : {0.05, 0.3, 1.0}) {
    const auto m2 = lasso_fit_fixed(rows2, lambda);
    for (std::size_t j = 0; j < 2; ++j) {
      double ols = 0.0;
      for (std::size_t i = 0; i < 8; ++i)
        ols += rows2[i].xbar_s[j] * (y[i] - mean_y) / 8.0;
      CHECK(m2.beta[j] ==
            Catch::Approx(oracle::soft_threshold(ols, lambda)).margin(1e-6));
    }
  }
}

TEST_CASE("lambda = 0 recovers least squares", "[lasso]") {
  // single covariate: slope = cov(x, y) / var(x)
  Rng rng(9);
  std::vector<ArealRow> rows;
  std::vector<double> xs, ys;
  for (int i = 0; i < 25; ++i) {
    const double x = rng.normal(1.0, 2.0);
    const double y = 0.7 * x + rng.normal(0, 0.3);
    xs.push_back(x);
    ys.push_back(y);
    rows.push_back(lrow("a" + std::to_string(i), y, {x}));
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int i = 0; i < 25; ++i) {
    sx += xs[i]; sy += ys[i]; sxx += xs[i] * xs[i]; sxy += xs[i] * ys[i];
  }
  const double slope = (sxy - sx * sy / 25.0) / (sxx - sx * sx / 25.0);
  const auto model = lasso_fit_fixed(rows, 0.0);
  CHECK(model.beta[0] == Catch::Approx(slope).margin(1e-8));

  // full-rank p = 3 against the oracle normal equations
  std::vector<ArealRow> rows3;
  std::vector<std::vector<double>> z;
  std::vector<double> y3, w;
  for (int i = 0; i < 30; ++i) {
    const std::vector<double> x{rng.normal(), rng.normal(2, 1), rng.normal(-1, 3)};
    const double y = 1.0 + 2.0 * x[0] - x[1] + 0.5 * x[2] + rng.normal(0, 0.2);
    rows3.push_back(lrow("b" + std::to_string(i), y, x));
    z.push_back({1.0, x[0], x[1], x[2]});
    y3.push_back(y);
    w.push_back(1.0);
  }
  const auto ols = oracle::wls(z, y3, w);
  const auto m3 = lasso_fit_fixed(rows3, 0.0);
  CHECK(m3.intercept == Catch::Approx(ols[0]).margin(1e-6));
  for (int j = 0; j < 3; ++j)
    CHECK(m3.beta[j] == Catch::Approx(ols[j + 1]).margin(1e-6));
}

TEST_CASE("lasso_predict basics", "[lasso]") {
  LassoModel model;
  model.intercept = 1.0;
  model.beta = {2.0, 0.0};
  CHECK(lasso_predict(model, std::vector<double>{3.0, 7.0}) == Catch::Approx(7.0));
  model.intercept += 4.0;
  CHECK(lasso_predict(model, std::vector<double>{3.0, 7.0}) == Catch::Approx(11.0));
  CHECK_THROWS_AS(lasso_predict(model, std::vector<double>{1.0}),
                  std::invalid_argument);
}

TEST_CASE("fitted coefficients are a local minimum of the objective", "[lasso]") {
  // standardised design so the objective matches ||y - Xb||^2/(2m) + l |b|_1
  const auto rows = hadamard_rows();
  const double lambda = 0.3;
  const auto model = lasso_fit_fixed(rows, lambda);
  const auto objective = [&](const std::vector<double>& beta) {
    double sse = 0.0;
    double mean_y = 0.0;
    for (const auto& row : rows) mean_y += *row.ybar_s / 8.0;
    for (const auto& row : rows) {
      double fit = mean_y;
      for (std::size_t j = 0; j < beta.size(); ++j) fit += beta[j] * row.xbar_s[j];
      sse += (*row.ybar_s - fit) * (*row.ybar_s - fit);
    }
    double l1 = 0.0;
    for (double b : beta) l1 += std::fabs(b);
    return sse / 16.0 + lambda * l1;
  };
  const double at_fit = objective(model.beta);
  CHECK(at_fit <= objective({0.0, 0.0}) + 1e-12);
  for (std::size_t j = 0; j < 2; ++j)
    for (double delta : {1e-4, -1e-4}) {
      auto perturbed = model.beta;
      perturbed[j] += delta;
      CHECK(at_fit <= objective(perturbed) + 1e-12);
    }
}

TEST_CASE("cross-validated fit finds the support of a sparse signal", "[lasso]") {
  Rng rng(13);
  std::vector<ArealRow> rows;
  for (int i = 0; i < 60; ++i) {
    std::vector<double> x(10);
    for (auto& v : x) v = rng.normal();
    const double y = 5.0 + 3.0 * x[0] - 2.0 * x[3] + 1.5 * x[7] + rng.normal(0, 0.2);
    rows.push_back(lrow("a" + std::to_string(i), y, x));
  }
  const auto model = lasso_fit(rows, 100, 10, 77);
  CHECK(model.cv_curve.size() == 100);
  bool on_grid = false;
  for (const auto& [lambda, err] : model.cv_curve)
    if (lambda == model.lambda_star) on_grid = true;
  CHECK(on_grid);
  CHECK(model.beta[0] != 0.0);
  CHECK(model.beta[3] != 0.0);
  CHECK(model.beta[7] != 0.0);
  CHECK(std::fabs(model.beta[0] - 3.0) < 0.3);
  // prediction error is small on the training range
  const double yhat =
      lasso_predict(model, std::vector<double>(10, 0.0));
  CHECK(std::fabs(yhat - 5.0) < 0.3);
}

TEST_CASE("a forced covariate escapes the penalty", "[lasso]") {
  Rng rng(15);
  std::vector<ArealRow> rows;
  for (int i = 0; i < 30; ++i) {
    const double x0 = rng.normal();
    const double x1 = rng.normal();
    rows.push_back(lrow("a" + std::to_string(i), 0.4 * x0 + rng.normal(0, 0.1),
                        {x0, x1}));
  }
  const auto model = lasso_fit_fixed(rows, 10.0, std::size_t{0});
  CHECK(model.beta[0] != 0.0);  // unpenalised despite the huge lambda
  CHECK(model.beta[1] == 0.0);
}

TEST_CASE("constant columns keep a zero coefficient", "[lasso]") {
  Rng rng(19);
  std::vector<ArealRow> rows;
  for (int i = 0; i < 12; ++i)
    rows.push_back(lrow("a" + std::to_string(i), rng.normal(), {1.0, rng.normal()}));
  const auto model = lasso_fit_fixed(rows, 0.01);
  CHECK(model.beta[0] == 0.0);
}

TEST_CASE("lasso validation errors", "[lasso]") {
  const auto rows = hadamard_rows();
  CHECK_THROWS_AS(lasso_fit(rows, 100, 10, 1), std::invalid_argument);  // m < folds
  CHECK_THROWS_AS(lasso_fit(rows, 0, 2, 1), std::invalid_argument);
  CHECK_THROWS_AS(lasso_fit_fixed(rows, -1.0), std::invalid_argument);
}
