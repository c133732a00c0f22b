#include <gtest/gtest.h>

#include "attncausal/errors.hpp"
#include "attncausal/json_io.hpp"
#include "attncausal/scm.hpp"
#include "support/brute.hpp"
#include "support/fixtures.hpp"

using namespace attncausal;

TEST(Dag, RejectsCyclesAndSelfLoops) {
  EXPECT_THROW(Dag(2, {{1}, {0}}), ArgumentError);
  EXPECT_THROW(Dag(1, {{0}}), ArgumentError);
  EXPECT_THROW(Dag(2, {{5}, {}}), ArgumentError);
  const Dag d(3, {{}, {0}, {1}});
  EXPECT_TRUE(d.has_edge(0, 1));
  EXPECT_FALSE(d.has_edge(1, 0));
  const int z[] = {2};
  const auto anc = d.ancestors_of(z);
  EXPECT_TRUE(anc[0] && anc[1] && anc[2]);
}

TEST(ScmModel, ValidatesStructure) {
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(2, 2);
  g(0, 1) = 0.5;  // 1 -> 0, but order says 0 first
  EXPECT_THROW(ScmModel({0, 1}, g, Eigen::VectorXd::Ones(2)), StructuralError);
  EXPECT_NO_THROW(ScmModel({1, 0}, g, Eigen::VectorXd::Ones(2)));
  EXPECT_THROW(ScmModel({0, 0}, Eigen::MatrixXd::Zero(2, 2), Eigen::VectorXd::Ones(2)), ArgumentError);
  EXPECT_THROW(ScmModel({0, 1}, Eigen::MatrixXd::Zero(2, 2), Eigen::VectorXd::Zero(2)), ArgumentError);
  EXPECT_THROW(ScmModel({0, 1}, Eigen::MatrixXd::Zero(2, 2), Eigen::VectorXd::Ones(2), std::nullopt, {0, 1}),
               ArgumentError);
  Eigen::MatrixXd bad_cu(2, 2);
  bad_cu << 1, 2, 2, 1;
  EXPECT_THROW(ScmModel({0, 1}, Eigen::MatrixXd::Zero(2, 2), Eigen::VectorXd::Ones(2), bad_cu), ArgumentError);
}

TEST(ScmModel, ChainTotalEffects) {
  const auto m = total_effect_matrix(fixtures::chain3());
  Eigen::MatrixXd expected(3, 3);
  expected << 1, 0, 0, 1, 1, 0, 1, 1, 1;
  EXPECT_LT((m - expected).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(ScmModel, CovarianceOfChain) {
  const auto c = analytic_covariance(fixtures::chain3());
  Eigen::MatrixXd expected(3, 3);
  expected << 1, 1, 1, 1, 2, 2, 1, 2, 3;
  EXPECT_LT((c - expected).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(ScmModel, SeriesIdentityProperty) {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    RandomScmParams p;
    p.n = 2 + static_cast<int>(seed % 7);
    p.edge_density = 0.5;
    p.seed = seed;
    const auto scm = random_scm(p);
    const Eigen::MatrixXd series = brute::series_inverse(scm.weights()) * scm.lambda().asDiagonal();
    EXPECT_LT((total_effect_matrix(scm) - series).cwiseAbs().maxCoeff(), 1e-10) << "seed " << seed;
  }
}

TEST(ScmModel, SamplingIsDeterministic) {
  const auto scm = fixtures::chain3();
  EXPECT_EQ(sample(scm, 50, 7), sample(scm, 50, 7));
  EXPECT_NE(sample(scm, 50, 7), sample(scm, 50, 8));
  EXPECT_THROW(sample(scm, 0, 1), ArgumentError);
}

TEST(ScmModel, SamplingHonoursNoiseCovariance) {
  Eigen::MatrixXd cu(2, 2);
  cu << 1.0, 0.6, 0.6, 1.0;
  const ScmModel scm({0, 1}, Eigen::MatrixXd::Zero(2, 2), Eigen::VectorXd::Ones(2), cu);
  const auto x = sample(scm, 40000, 3);
  const Eigen::MatrixXd centered = x.rowwise() - x.colwise().mean();
  const Eigen::MatrixXd emp = centered.transpose() * centered / (x.rows() - 1.0);
  EXPECT_NEAR(emp(0, 1), 0.6, 0.03);
}

TEST(DSeparation, TextbookCases) {
  const Dag chain(3, {{}, {0}, {1}});
  const Dag collider(3, {{}, {}, {0, 1}});
  const int none[] = {0};
  const int mid[] = {1};
  const int col[] = {2};
  EXPECT_FALSE(d_separated(chain, 0, 2, std::span<const int>(none, 0)));
  EXPECT_TRUE(d_separated(chain, 0, 2, mid));
  EXPECT_TRUE(d_separated(collider, 0, 1, std::span<const int>(none, 0)));
  EXPECT_FALSE(d_separated(collider, 0, 1, col));
  EXPECT_THROW(d_separated(chain, 0, 0, std::span<const int>(none, 0)), ArgumentError);
  EXPECT_THROW(d_separated(chain, 0, 2, none), ArgumentError);
}

TEST(DSeparation, DescendantOfColliderOpensPath) {
  const Dag g(4, {{}, {}, {0, 1}, {2}});
  const int z[] = {3};
  EXPECT_FALSE(d_separated(g, 0, 1, z));
}

TEST(DSeparation, AgreesWithPathEnumeration) {
  for (std::uint64_t seed = 0; seed < 60; ++seed) {
    RandomScmParams p;
    p.n = 6;
    p.edge_density = 0.4;
    p.seed = seed;
    const Dag dag = random_scm(p).dag();
    for (int i = 0; i < 6; ++i)
      for (int j = i + 1; j < 6; ++j)
        for (unsigned mask = 0; mask < 64; ++mask) {
          if (mask & ((1u << i) | (1u << j))) continue;
          if (__builtin_popcount(mask) > 3) continue;
          std::vector<int> z;
          for (int b = 0; b < 6; ++b)
            if (mask & (1u << b)) z.push_back(b);
          ASSERT_EQ(d_separated(dag, i, j, z), brute::path_d_separated(dag, i, j, z))
              << "seed " << seed << " pair " << i << "," << j;
        }
  }
}

TEST(RandomScm, RespectsGeneratorBounds) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    RandomScmParams p;
    p.n = 7;
    p.edge_density = 0.5;
    p.n_latent = 2;
    p.seed = seed;
    const auto scm = random_scm(p);
    const Dag dag = scm.dag();
    for (int i = 0; i < 7; ++i) {
      EXPECT_GE(scm.lambda()(i), 0.5);
      EXPECT_LE(scm.lambda()(i), 1.5);
      for (int j = 0; j < 7; ++j) {
        const double w = std::abs(scm.weights()(i, j));
        if (w != 0.0) {
          EXPECT_GE(w, kMinGeneratedWeight);
          EXPECT_LE(w, 1.0);
        }
      }
    }
    EXPECT_LE(scm.latent().size(), 2u);
    for (int l : scm.latent()) EXPECT_GE(dag.children(l).size(), 2u);
  }
  RandomScmParams bad;
  bad.weight_min = 0.1;
  EXPECT_THROW(random_scm(bad), ArgumentError);
}

TEST(RandomScm, SameSeedSameModel) {
  RandomScmParams p;
  p.seed = 42;
  const auto a = random_scm(p);
  const auto b = random_scm(p);
  EXPECT_EQ(a.weights(), b.weights());
  EXPECT_EQ(a.order(), b.order());
}

TEST(ScmJson, RoundTrip) {
  const auto scm = fixtures::hidden_confounder_scm();
  const auto back = scm_from_json(scm_to_json(scm));
  EXPECT_EQ(back.weights(), scm.weights());
  EXPECT_EQ(back.order(), scm.order());
  EXPECT_EQ(back.latent(), scm.latent());
  EXPECT_TRUE(back.has_identity_noise());
  EXPECT_TRUE(scm_to_json(scm)["cu"].is_null());
}

TEST(ScmJson, RejectsBadShapes) {
  auto j = scm_to_json(fixtures::chain3());
  j["lambda"] = {1.0, 1.0};
  EXPECT_THROW(scm_from_json(j), ArgumentError);
}
