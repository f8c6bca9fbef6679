#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "errors.hpp"
#include "kriging.hpp"
#include "offgrid_local.hpp"

using namespace condsim;

namespace {

const CovarianceModel kModel{1.0, 3.0, 0.5};

Eigen::MatrixXd grid_cov(const RegularGrid &g, const CovarianceModel &m) {
  std::vector<Point> nodes;
  for (int64_t k = 0; k < g.nodes(); ++k) nodes.push_back(g.node(k));
  return cov_matrix(m, nodes, nodes);
}

ObservationSet obs_from(const std::vector<Point> &locs, double noise_var) {
  ObservationSet o;
  o.locs = locs;
  o.values = Eigen::VectorXd::Zero(int64_t(locs.size()));
  for (size_t i = 0; i < locs.size(); ++i)
    o.values[int64_t(i)] = std::sin(double(i) + 1.0);
  o.noise_var = Eigen::VectorXd::Constant(int64_t(locs.size()), noise_var);
  return o;
}

} // namespace

TEST_CASE("on-node observations take one-hot weights and zero gamma") {
  RegularGrid g{0, 0, 1, 1, 12, 12};
  std::vector<Point> locs = {{4.0, 5.0}, {7.0, 8.0}};
  LocalSampler s = build_local_sampler(g, locs, kModel, 2);

  for (int i = 0; i < 2; ++i) {
    CHECK(s.gamma[i] == doctest::Approx(0.0).scale(1.0).epsilon(1e-10));
    const auto &idx = s.neighborhoods.indices[size_t(i)];
    const int64_t self = g.flat(int64_t(locs[size_t(i)].x),
                                int64_t(locs[size_t(i)].y));
    for (size_t k = 0; k < idx.size(); ++k) {
      const double expect = idx[k] == self ? 1.0 : 0.0;
      CHECK(s.weights(Eigen::Index(k), i) ==
            doctest::Approx(expect).scale(1.0).epsilon(1e-8));
    }
  }
}

TEST_CASE("weights and gamma match the dense neighborhood solve") {
  RegularGrid g{0, 0, 1, 1, 14, 12};
  std::vector<Point> locs = {{3.7, 4.2}, {9.9, 5.1}, {6.5, 6.5}};
  for (int np : {1, 2, 3}) {
    LocalSampler s = build_local_sampler(g, locs, kModel, np);
    for (size_t i = 0; i < locs.size(); ++i) {
      const auto &idx = s.neighborhoods.indices[i];
      std::vector<Point> nb;
      for (int64_t k : idx) nb.push_back(g.node(k));
      Eigen::MatrixXd Knn = cov_matrix(kModel, nb, nb);
      Eigen::VectorXd kt = cov_matrix(kModel, nb, {locs[i]});
      Eigen::VectorXd w = Knn.ldlt().solve(kt);
      for (size_t k = 0; k < idx.size(); ++k)
        CHECK(s.weights(Eigen::Index(k), int(i)) ==
              doctest::Approx(w[Eigen::Index(k)]).epsilon(1e-8));
      const double gamma = kModel.sigma2 - kt.dot(w);
      CHECK(s.gamma[int64_t(i)] == doctest::Approx(gamma).epsilon(1e-8));
    }
  }
}

TEST_CASE("weight rows sum to one in the smooth-field limit") {
  RegularGrid g{0, 0, 1, 1, 16, 16};
  CovarianceModel flat{1.0, 100.0, 0.5};
  LocalSampler s = build_local_sampler(g, {{7.3, 8.6}}, flat, 2);
  CHECK(s.weights.col(0).sum() == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("gamma is non-increasing in the neighborhood order") {
  RegularGrid g{0, 0, 1, 1, 20, 20};
  std::vector<Point> locs = {{9.4, 10.7}};
  double prev = kModel.sigma2;
  for (int np : {1, 2, 3, 4}) {
    LocalSampler s = build_local_sampler(g, locs, kModel, np);
    CHECK(s.gamma[0] <= prev + 1e-12);
    CHECK(s.gamma[0] >= 0.0);
    prev = s.gamma[0];
  }
}

TEST_CASE("sample_offgrid is deterministic in the stream address") {
  RegularGrid g{0, 0, 1, 1, 12, 12};
  std::vector<Point> locs = {{3.7, 4.2}, {8.1, 6.6}};
  LocalSampler s = build_local_sampler(g, locs, kModel, 2);
  Eigen::VectorXd noise = Eigen::VectorXd::Constant(2, 0.01);

  std::vector<double> field(size_t(g.nodes()));
  for (size_t k = 0; k < field.size(); ++k)
    field[k] = std::cos(0.13 * double(k));

  RandomStream s1(11, StreamPurpose::OffGrid, 0);
  RandomStream s2(11, StreamPurpose::OffGrid, 0);
  RandomStream s3(11, StreamPurpose::OffGrid, 1);
  Eigen::VectorXd a = sample_offgrid(s, field.data(), noise, s1);
  Eigen::VectorXd b = sample_offgrid(s, field.data(), noise, s2);
  Eigen::VectorXd c = sample_offgrid(s, field.data(), noise, s3);
  CHECK(a == b);
  CHECK(a != c);
}

TEST_CASE("sampled moments match W1 field and gamma + noise (Monte Carlo)") {
  RegularGrid g{0, 0, 1, 1, 12, 12};
  std::vector<Point> locs = {{3.7, 4.2}, {8.1, 6.6}};
  LocalSampler s = build_local_sampler(g, locs, kModel, 2);
  const double noise_var = 0.04;
  Eigen::VectorXd noise = Eigen::VectorXd::Constant(2, noise_var);

  std::vector<double> field(size_t(g.nodes()));
  for (size_t k = 0; k < field.size(); ++k)
    field[k] = std::sin(0.31 * double(k));

  const int n = 20000;
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(2);
  Eigen::VectorXd sum2 = Eigen::VectorXd::Zero(2);
  for (int r = 0; r < n; ++r) {
    RandomStream st(3, StreamPurpose::OffGrid, uint32_t(r));
    Eigen::VectorXd z = sample_offgrid(s, field.data(), noise, st);
    sum += z;
    sum2 += z.cwiseProduct(z);
  }
  for (int i = 0; i < 2; ++i) {
    const double mean_ref = s.apply_row(i, field.data());
    const double var_ref = s.gamma[i] + noise_var;
    const double mean = sum[i] / n;
    const double var = sum2[i] / n - mean * mean;
    CHECK(std::abs(mean - mean_ref) < 5.0 * std::sqrt(var_ref / n));
    CHECK(std::abs(var - var_ref) < 5.0 * var_ref * std::sqrt(2.0 / n));
  }
}

TEST_CASE("co-boxed observations are sampled jointly with the right "
          "covariance") {
  RegularGrid g{0, 0, 1, 1, 12, 12};
  // both points fall in box (5, 6)
  std::vector<Point> locs = {{5.2, 6.3}, {5.8, 6.7}};
  LocalSampler s = build_local_sampler(g, locs, kModel, 2);
  REQUIRE(s.groups.size() == 1);
  REQUIRE(s.groups[0].members.size() == 2);
  CHECK(s.group_of[0] == 0);
  CHECK(s.group_of[1] == 0);

  // reference joint conditional covariance given the union neighborhood
  const auto &idx = s.neighborhoods.indices[0];
  CHECK(s.neighborhoods.indices[1] == idx); // same box, same stencil
  std::vector<Point> nb;
  for (int64_t k : idx) nb.push_back(g.node(k));
  Eigen::MatrixXd Knn = cov_matrix(kModel, nb, nb);
  Eigen::MatrixXd kt = cov_matrix(kModel, nb, locs); // stencil x 2
  Eigen::MatrixXd S = cov_matrix(kModel, locs, locs) -
                      kt.transpose() * Knn.ldlt().solve(kt);

  Eigen::MatrixXd chol = s.groups[0].chol;
  Eigen::MatrixXd Shat = chol * chol.transpose();
  CHECK((Shat - S).cwiseAbs().maxCoeff() < 1e-8);

  // Monte Carlo cross-covariance of the sampled pair
  std::vector<double> field(size_t(g.nodes()), 0.0);
  Eigen::VectorXd noise = Eigen::VectorXd::Zero(2);
  const int n = 20000;
  double s0 = 0, s1 = 0, s01 = 0;
  for (int r = 0; r < n; ++r) {
    RandomStream st(5, StreamPurpose::OffGrid, uint32_t(r));
    Eigen::VectorXd z = sample_offgrid(s, field.data(), noise, st);
    s0 += z[0];
    s1 += z[1];
    s01 += z[0] * z[1];
  }
  const double cov = s01 / n - (s0 / n) * (s1 / n);
  const double se = std::sqrt((S(0, 0) * S(1, 1) + S(0, 1) * S(0, 1)) / n);
  CHECK(std::abs(cov - S(0, 1)) < 5.0 * se);
}

namespace {

// generic dense reference for the streamed SE evaluator: any W1 (n x M)
Eigen::VectorXd dense_se_reference(const RegularGrid &g,
                                   const ObservationSet &o,
                                   const CovarianceModel &m,
                                   const Eigen::MatrixXd &W1) {
  const int64_t M = g.nodes(), n = o.n();
  Eigen::MatrixXd K11 = grid_cov(g, m);
  std::vector<Point> nodes;
  for (int64_t k = 0; k < M; ++k) nodes.push_back(g.node(k));
  Eigen::MatrixXd K1o = cov_matrix(m, nodes, o.locs); // M x n

  Eigen::MatrixXd A = cov_matrix(m, o.locs, o.locs);
  A.diagonal() += o.noise_var;
  Eigen::MatrixXd W2 = A.ldlt().solve(K1o.transpose()).transpose(); // M x n

  Eigen::MatrixXd T1 = W1 * K11 * W1.transpose();
  Eigen::VectorXd phi(n);
  for (int64_t i = 0; i < n; ++i) {
    double gm = std::min(std::max(m.sigma2 - T1(i, i), 0.0), m.sigma2);
    phi[i] = gm + o.noise_var[i];
  }
  Eigen::VectorXd se(M);
  for (int64_t t = 0; t < M; ++t) {
    Eigen::VectorXd w2 = W2.row(t);
    Eigen::VectorXd at = W1 * K11.col(t);
    double v = m.sigma2 - 2.0 * w2.dot(at) + w2.dot(T1 * w2) +
               (w2.array().square() * phi.array()).sum();
    se[t] = std::sqrt(std::max(v, 0.0));
  }
  return se;
}

} // namespace

TEST_CASE("SE_L matches a dense evaluation of the same formula") {
  RegularGrid g{0, 0, 1, 1, 9, 8};
  ObservationSet o = obs_from({{2.6, 3.1}, {5.4, 4.8}, {3.9, 2.2}}, 0.01);
  const int np = 2;
  Eigen::VectorXd se = local_se_grid(g, o, kModel, np);

  // W1 rows scattered into full M columns
  LocalSampler s = build_local_sampler(g, o.locs, kModel, np);
  Eigen::MatrixXd W1 = Eigen::MatrixXd::Zero(o.n(), g.nodes());
  for (int i = 0; i < o.n(); ++i) {
    const auto &idx = s.neighborhoods.indices[size_t(i)];
    for (size_t k = 0; k < idx.size(); ++k)
      W1(i, idx[k]) = s.weights(Eigen::Index(k), i);
  }
  Eigen::VectorXd ref = dense_se_reference(g, o, kModel, W1);
  for (int64_t t = 0; t < g.nodes(); ++t)
    CHECK(se[t] == doctest::Approx(ref[t]).epsilon(1e-8));
}

TEST_CASE("full-neighborhood variant matches its dense reference") {
  RegularGrid g{0, 0, 1, 1, 9, 8};
  ObservationSet o = obs_from({{2.6, 3.1}, {5.4, 4.8}, {3.9, 2.2}}, 0.01);
  Eigen::VectorXd se_full = local_se_grid_full(g, o, kModel);

  // W1 = K_oT K_T^-1: conditioning on the entire grid
  Eigen::MatrixXd K11 = grid_cov(g, kModel);
  std::vector<Point> nodes;
  for (int64_t k = 0; k < g.nodes(); ++k) nodes.push_back(g.node(k));
  Eigen::MatrixXd KoT = cov_matrix(kModel, o.locs, nodes); // n x M
  Eigen::MatrixXd W1 = K11.ldlt().solve(KoT.transpose()).transpose();
  Eigen::VectorXd ref = dense_se_reference(g, o, kModel, W1);
  for (int64_t t = 0; t < g.nodes(); ++t)
    CHECK(se_full[t] == doctest::Approx(ref[t]).epsilon(1e-6));

  // supplying the cached grid factor changes nothing
  Eigen::LLT<Eigen::MatrixXd> fac = grid_cov_factor(g, kModel, 20000);
  Eigen::VectorXd se_cached = local_se_grid_full(g, o, kModel, 20000, &fac);
  CHECK((se_cached - se_full).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("on-node observations make SE_L exact") {
  RegularGrid g{0, 0, 1, 1, 12, 12};
  ObservationSet o = obs_from({{4.0, 5.0}, {7.0, 8.0}, {5.0, 5.0}}, 0.01);
  Eigen::VectorXd se_l = local_se_grid(g, o, kModel, 2);
  Eigen::VectorXd se_e = exact_se_grid(g, o, kModel);
  CHECK((se_l - se_e).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("margin violations and bad orders are rejected") {
  RegularGrid g{0, 0, 1, 1, 10, 10};
  CHECK_THROWS_AS(build_local_sampler(g, {{0.4, 5.0}}, kModel, 2), Error);
  CHECK_THROWS_AS(build_local_sampler(g, {{5.0, 5.0}}, kModel, 0), Error);
}
