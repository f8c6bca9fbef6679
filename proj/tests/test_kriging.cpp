#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "errors.hpp"
#include "grid.hpp"
#include "kriging.hpp"

using namespace condsim;

namespace {

ObservationSet three_obs() {
  ObservationSet o;
  o.locs = {{0, 0}, {2, 1}, {1, 3}};
  o.values = Eigen::Vector3d(1.0, -0.5, 0.25);
  o.noise_var = Eigen::Vector3d(0.01, 0.04, 0.0);
  return o;
}

const CovarianceModel kModel{1.3, 2.5, 0.5};

} // namespace

TEST_CASE("kriging reproduces an external reference solve") {
  ObservationSet o = three_obs();
  std::vector<Point> t = {{0.7, 0.9}, {10, 10}, {1, 3}};
  Eigen::VectorXd pred = krige_predict(o, kModel, t);
  Eigen::VectorXd var = exact_cond_variance(o, kModel, t);
  REQUIRE(pred.size() == 3);

  CHECK(pred[0] == doctest::Approx(0.3226607665488316).epsilon(1e-12));
  CHECK(pred[1] == doctest::Approx(-0.001083935232494).epsilon(1e-9));
  CHECK(var[0] == doctest::Approx(0.5823495608832431).epsilon(1e-12));
  CHECK(var[1] == doctest::Approx(1.2998350514265211).epsilon(1e-12));

  // noise-free observation site: exact interpolation, zero variance
  CHECK(pred[2] == doctest::Approx(0.25).epsilon(1e-10));
  CHECK(var[2] == doctest::Approx(0.0).scale(1.0).epsilon(1e-10));
}

TEST_CASE("zero observations give the prior") {
  ObservationSet o;
  o.values.resize(0);
  o.noise_var.resize(0);
  std::vector<Point> t = {{1, 2}, {3, 4}};
  Eigen::VectorXd pred = krige_predict(o, kModel, t);
  Eigen::VectorXd var = exact_cond_variance(o, kModel, t);
  CHECK(pred[0] == 0.0);
  CHECK(pred[1] == 0.0);
  CHECK(var[0] == doctest::Approx(1.3));
  CHECK(var[1] == doctest::Approx(1.3));
}

TEST_CASE("prediction is linear in the observed values") {
  ObservationSet o = three_obs();
  std::vector<Point> t = {{0.7, 0.9}, {4.4, 2.1}};
  Eigen::VectorXd p1 = krige_predict(o, kModel, t);

  ObservationSet o2 = o;
  o2.values *= -2.5;
  Eigen::VectorXd p2 = krige_predict(o2, kModel, t);
  CHECK((p2 + 2.5 * p1).cwiseAbs().maxCoeff() < 1e-12);

  ObservationSet sum = o;
  sum.values = o.values + o2.values;
  Eigen::VectorXd p3 = krige_predict(sum, kModel, t);
  CHECK((p3 - (p1 + p2)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("observation order does not matter") {
  ObservationSet o = three_obs();
  ObservationSet perm;
  perm.locs = {o.locs[2], o.locs[0], o.locs[1]};
  perm.values = Eigen::Vector3d(o.values[2], o.values[0], o.values[1]);
  perm.noise_var =
      Eigen::Vector3d(o.noise_var[2], o.noise_var[0], o.noise_var[1]);

  std::vector<Point> t = {{0.7, 0.9}, {3.3, 0.4}};
  CHECK((krige_predict(o, kModel, t) - krige_predict(perm, kModel, t))
            .cwiseAbs()
            .maxCoeff() < 1e-12);
  CHECK((exact_cond_variance(o, kModel, t) -
         exact_cond_variance(perm, kModel, t))
            .cwiseAbs()
            .maxCoeff() < 1e-12);
}

TEST_CASE("far targets revert to the prior") {
  ObservationSet o = three_obs();
  std::vector<Point> t = {{500, 500}};
  CHECK(std::abs(krige_predict(o, kModel, t)[0]) < 1e-10);
  CHECK(exact_cond_variance(o, kModel, t)[0] ==
        doctest::Approx(1.3).epsilon(1e-10));
}

TEST_CASE("conditional variance shrinks with more data") {
  ObservationSet o1;
  o1.locs = {{0, 0}};
  o1.values = Eigen::VectorXd::Constant(1, 0.5);
  o1.noise_var = Eigen::VectorXd::Constant(1, 0.01);

  ObservationSet o2 = o1;
  o2.locs.push_back({1.0, 0.5});
  o2.values = Eigen::Vector2d(0.5, 0.2);
  o2.noise_var = Eigen::Vector2d(0.01, 0.01);

  std::vector<Point> t = {{0.4, 0.2}};
  CHECK(exact_cond_variance(o2, kModel, t)[0] <
        exact_cond_variance(o1, kModel, t)[0]);
  CHECK(exact_cond_variance(o2, kModel, t)[0] > 0.0);
}

TEST_CASE("dense cap is enforced") {
  ObservationSet o = three_obs();
  std::vector<Point> t = {{0.7, 0.9}, {1.1, 0.3}};
  CHECK_THROWS_AS(krige_predict(o, kModel, t, 4), Error);
  try {
    krige_predict(o, kModel, t, 4);
  } catch (const Error &e) {
    CHECK(e.code() == CS_ECAP);
  }
  CHECK_NOTHROW(krige_predict(o, kModel, t, 5));
}

TEST_CASE("exact_se_grid matches pointwise variances") {
  RegularGrid g{0, 0, 1, 1, 5, 4};
  ObservationSet o = three_obs();
  Eigen::VectorXd se = exact_se_grid(g, o, kModel);
  REQUIRE(se.size() == 20);

  std::vector<Point> nodes;
  for (int64_t k = 0; k < g.nodes(); ++k) nodes.push_back(g.node(k));
  Eigen::VectorXd var = exact_cond_variance(o, kModel, nodes);
  for (int64_t k = 0; k < 20; ++k)
    CHECK(se[k] == doctest::Approx(std::sqrt(var[k])).epsilon(1e-10));
}

TEST_CASE("observation validation") {
  ObservationSet bad;
  bad.locs = {{0, 0}, {1, 1}};
  bad.values = Eigen::Vector2d(1.0, 2.0);
  bad.noise_var = Eigen::Vector2d(0.01, -0.01);
  CHECK_THROWS_AS(bad.validate(), Error);

  bad.noise_var = Eigen::Vector2d(0.01, 0.01);
  bad.values[1] = std::nan("");
  CHECK_THROWS_AS(bad.validate(), Error);

  bad.values[1] = 2.0;
  bad.values.conservativeResize(1); // length mismatch
  CHECK_THROWS_AS(bad.validate(), Error);
}
