#include <cmath>
#include <stdexcept>
#include <vector>

#include <doctest.h>
#include <Eigen/Dense>

#include "pcar/graph.hpp"
#include "pcar/rng.hpp"
#include "support/synthetic.hpp"

using namespace pcar;
using pcar::testing::random_coords;
using pcar::testing::random_tensor;

namespace {

Eigen::MatrixXd to_eigen(const Tensor2<double>& t) {
  Eigen::MatrixXd m(t.rows(), t.cols());
  for (Index i = 0; i < t.rows(); ++i)
    for (Index j = 0; j < t.cols(); ++j) m(i, j) = t(i, j);
  return m;
}

std::vector<Tensor2<double>> random_thetas(Index k, Index c_in, Index c_out,
                                           Rng& rng) {
  std::vector<Tensor2<double>> theta;
  for (Index i = 0; i < k; ++i)
    theta.push_back(random_tensor<double>(c_in, c_out, rng));
  return theta;
}

}  // namespace

// ---- adjacency and Laplacian ---------------------------------------------------

TEST_CASE("adjacency is symmetric with zero diagonal and Gaussian weights") {
  Rng rng(41);
  const auto coords = random_coords(12, rng).cast<double>();
  const auto graph = build_adjacency(coords);
  REQUIRE(graph.n == 12);
  for (Index i = 0; i < 12; ++i) {
    CHECK(graph.adjacency(i, i) == 0.0);
    for (Index j = 0; j < 12; ++j) {
      CHECK(graph.adjacency(i, j) == graph.adjacency(j, i));  // bitwise
      if (i != j) {
        double d2 = 0;
        for (Index c = 0; c < 3; ++c) {
          const double d = coords(i, c) - coords(j, c);
          d2 += d * d;
        }
        CHECK(graph.adjacency(i, j) ==
              doctest::Approx(std::exp(-d2)).epsilon(1e-12));
      }
    }
    double deg = 0;
    for (Index j = 0; j < 12; ++j) deg += graph.adjacency(i, j);
    CHECK(graph.degrees(i, 0) == doctest::Approx(deg).epsilon(1e-12));
  }
}

TEST_CASE("normalized Laplacian is symmetric PSD with spectrum in [0,2]") {
  Rng rng(42);
  const auto coords = random_coords(16, rng).cast<double>();
  const auto graph = build_graph(coords);
  const auto L = to_eigen(graph.laplacian);
  CHECK((L - L.transpose()).cwiseAbs().maxCoeff() < 1e-12);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(L);
  REQUIRE(es.info() == Eigen::Success);
  CHECK(es.eigenvalues().minCoeff() > -1e-10);
  CHECK(es.eigenvalues().maxCoeff() < 2.0 + 1e-10);
  // the constant-ish vector D^{1/2} 1 is in the kernel
  CHECK(std::abs(es.eigenvalues()(0)) < 1e-10);
}

TEST_CASE("laplacian diagonal is one for a connected Gaussian graph") {
  Rng rng(43);
  const auto coords = random_coords(8, rng).cast<double>();
  const auto graph = build_graph(coords);
  for (Index i = 0; i < 8; ++i)
    CHECK(graph.laplacian(i, i) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("single-point graph degenerates to a zero operator") {
  auto coords = Tensor2<double>::from_rows({{0.3, 0.4, 0.5}});
  const auto graph = build_graph(coords);
  REQUIRE(graph.n == 1);
  REQUIRE(graph.laplacian.rows() == 1);
  CHECK(graph.laplacian(0, 0) == 0.0);
}

TEST_CASE("normalized_laplacian rejects zero degrees") {
  auto adjacency = Tensor2<double>(2, 2);  // all zero
  auto degrees = Tensor2<double>(2, 1);
  CHECK_THROWS_AS(normalized_laplacian(adjacency, degrees),
                  std::invalid_argument);
}

// ---- power iteration and rescaling ----------------------------------------------

TEST_CASE("power iteration finds the top eigenvalue of the Laplacian") {
  Rng rng(44);
  for (int trial = 0; trial < 5; ++trial) {
    const auto coords = random_coords(10 + 3 * trial, rng).cast<double>();
    const auto graph = build_graph(coords);
    const double lam = power_iteration_lambda_max(graph.laplacian);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(to_eigen(graph.laplacian));
    CAPTURE(trial);
    CHECK(lam == doctest::Approx(es.eigenvalues().maxCoeff()).epsilon(1e-5));
  }
}

TEST_CASE("rescaled operator has spectrum within [-1, 1]") {
  Rng rng(45);
  const auto coords = random_coords(14, rng).cast<double>();
  const auto graph = build_graph(coords, /*rescale=*/true);
  REQUIRE(graph.lambda_max.has_value());
  const auto op = cheb_operator(graph);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(to_eigen(op));
  CHECK(es.eigenvalues().minCoeff() > -1.0 - 1e-6);
  CHECK(es.eigenvalues().maxCoeff() < 1.0 + 1e-6);
}

TEST_CASE("default operator is the Laplacian itself") {
  Rng rng(46);
  const auto coords = random_coords(9, rng).cast<double>();
  const auto graph = build_graph(coords);
  CHECK_FALSE(graph.lambda_max.has_value());
  const auto op = cheb_operator(graph);
  CHECK(op == graph.laplacian);
}

// ---- Chebyshev filtering vs the spectral oracle ----------------------------------

TEST_CASE("cheb_apply matches the eigendecomposition oracle") {
  Rng rng(47);
  for (int trial = 0; trial < 25; ++trial) {
    const Index n = 2 + rng.uniform_int(15);
    const Index k = 1 + rng.uniform_int(5);
    const Index c_in = 1 + rng.uniform_int(4);
    const Index c_out = 1 + rng.uniform_int(4);
    const auto coords = random_coords(n, rng).cast<double>();
    const auto graph = build_graph(coords);
    const auto h = random_tensor<double>(n, c_in, rng);
    const auto theta = random_thetas(k, c_in, c_out, rng);

    const auto fast = cheb_apply<double>(graph.laplacian, h, theta);
    const auto slow = spectral_filter_oracle<double>(graph.laplacian, h, theta);
    REQUIRE(fast.same_shape(slow));
    double max_err = 0;
    for (Index i = 0; i < fast.size(); ++i)
      max_err = std::max(max_err, std::abs(fast.data()[i] - slow.data()[i]));
    CAPTURE(trial);
    CHECK(max_err < 1e-8);
  }
}

TEST_CASE("K=1 filtering is a plain feature transform") {
  Rng rng(48);
  const auto coords = random_coords(6, rng).cast<double>();
  const auto graph = build_graph(coords);
  const auto h = random_tensor<double>(6, 3, rng);
  const auto theta = random_thetas(1, 3, 2, rng);
  const auto out = cheb_apply<double>(graph.laplacian, h, theta);
  const auto expect = matmul(h, theta[0]);
  for (Index i = 0; i < out.size(); ++i)
    CHECK(out.data()[i] == doctest::Approx(expect.data()[i]).epsilon(1e-12));
}

TEST_CASE("K=2 filtering adds the Laplacian term") {
  Rng rng(49);
  const auto coords = random_coords(7, rng).cast<double>();
  const auto graph = build_graph(coords);
  const auto h = random_tensor<double>(7, 2, rng);
  const auto theta = random_thetas(2, 2, 3, rng);
  const auto out = cheb_apply<double>(graph.laplacian, h, theta);
  const auto expect =
      add(matmul(h, theta[0]), matmul(matmul(graph.laplacian, h), theta[1]));
  for (Index i = 0; i < out.size(); ++i)
    CHECK(out.data()[i] == doctest::Approx(expect.data()[i]).epsilon(1e-12));
}

TEST_CASE("cheb_apply is linear in the features") {
  Rng rng(50);
  const auto coords = random_coords(9, rng).cast<double>();
  const auto graph = build_graph(coords);
  const auto h1 = random_tensor<double>(9, 3, rng);
  const auto h2 = random_tensor<double>(9, 3, rng);
  const auto theta = random_thetas(3, 3, 3, rng);
  const auto sum_in =
      cheb_apply<double>(graph.laplacian, add(h1, h2), theta);
  const auto sum_out = add(cheb_apply<double>(graph.laplacian, h1, theta),
                           cheb_apply<double>(graph.laplacian, h2, theta));
  for (Index i = 0; i < sum_in.size(); ++i)
    CHECK(sum_in.data()[i] ==
          doctest::Approx(sum_out.data()[i]).epsilon(1e-10));
}

TEST_CASE("spectral oracle rejects asymmetric and oversized inputs") {
  auto asym = Tensor2<double>::from_rows({{0, 1}, {0.5, 0}});
  const auto h = Tensor2<double>::full(2, 1, 1.0);
  std::vector<Tensor2<double>> theta{Tensor2<double>::full(1, 1, 1.0)};
  CHECK_THROWS_AS(spectral_filter_oracle<double>(asym, h, theta),
                  std::invalid_argument);

  Rng rng(51);
  const auto big_coords = random_coords(65, rng).cast<double>();
  const auto big = build_graph(big_coords);
  const auto big_h = random_tensor<double>(65, 1, rng);
  CHECK_THROWS_AS(spectral_filter_oracle<double>(big.laplacian, big_h, theta),
                  std::invalid_argument);
}

// ---- tape route -------------------------------------------------------------------

TEST_CASE("cheb_apply_node reproduces the eager computation") {
  Rng rng(52);
  const Index n = 8, c_in = 3, c_out = 2, k = 4;
  const auto coords = random_coords(n, rng).cast<double>();
  const auto graph = build_graph(coords);
  const auto h_val = random_tensor<double>(n, c_in, rng);
  const auto theta_vals = random_thetas(k, c_in, c_out, rng);

  Tape<double> tape;
  const NodeId lap = tape.input("lap", n, n);
  const NodeId h = tape.input("h", n, c_in);
  std::vector<NodeId> theta_nodes;
  NamedTensors<double> params;
  for (Index i = 0; i < k; ++i) {
    const std::string name = "t" + std::to_string(i);
    theta_nodes.push_back(tape.param(name, c_in, c_out));
    params.emplace(name, theta_vals[static_cast<std::size_t>(i)]);
  }
  tape.mark_output("y", cheb_apply_node<double>(tape, lap, h, theta_nodes));

  NamedTensors<double> inputs{{"lap", graph.laplacian}, {"h", h_val}};
  const auto tape_out = evaluate(tape, inputs, params).at("y");
  const auto eager = cheb_apply<double>(graph.laplacian, h_val, theta_vals);
  REQUIRE(tape_out.same_shape(eager));
  for (Index i = 0; i < tape_out.size(); ++i)
    CHECK(tape_out.data()[i] ==
          doctest::Approx(eager.data()[i]).epsilon(1e-12));
}

TEST_CASE("cheb_apply_node theta gradients match finite differences") {
  Rng rng(53);
  const Index n = 6, c = 2, k = 3;
  const auto coords = random_coords(n, rng).cast<double>();
  const auto graph = build_graph(coords);

  Tape<double> tape;
  const NodeId lap = tape.input("lap", n, n);
  const NodeId h = tape.input("h", n, c);
  std::vector<NodeId> theta_nodes;
  NamedTensors<double> params;
  for (Index i = 0; i < k; ++i) {
    const std::string name = "t" + std::to_string(i);
    theta_nodes.push_back(tape.param(name, c, c));
    params.emplace(name, random_tensor<double>(c, c, rng));
  }
  const NodeId y = cheb_apply_node<double>(tape, lap, h, theta_nodes);
  const NodeId ones_row = tape.input("ones_row", 1, n);
  const NodeId ones_col = tape.input("ones_col", c, 1);
  tape.mark_output("loss",
                   tape.matmul(ones_row, tape.matmul(y, ones_col)));

  NamedTensors<double> inputs{
      {"lap", graph.laplacian},
      {"h", random_tensor<double>(n, c, rng)},
      {"ones_row", Tensor2<double>::full(1, n, 1.0)},
      {"ones_col", Tensor2<double>::full(c, 1, 1.0)}};

  const auto analytic = loss_and_gradients(tape, "loss", inputs, params);
  NamedTensors<double> perturbed = params;
  const double step = 1e-6;
  for (const auto& [name, tensor] : params) {
    for (Index i = 0; i < tensor.size(); ++i) {
      auto& t = perturbed.at(name);
      const double saved = t.data()[i];
      t.data()[i] = saved + step;
      const double plus = evaluate(tape, inputs, perturbed).at("loss")(0, 0);
      t.data()[i] = saved - step;
      const double minus = evaluate(tape, inputs, perturbed).at("loss")(0, 0);
      t.data()[i] = saved;
      const double fd = (plus - minus) / (2 * step);
      const double an = analytic.grads.at(name).data()[i];
      CAPTURE(name);
      CHECK(std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1.0}) <
            1e-7);
    }
  }
}
