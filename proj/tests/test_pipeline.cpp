#include "dcl/pipeline.hpp"
#include "test_support.hpp"

#include "dcl/metrics.hpp"

using namespace dcl;
using namespace dcl::testing;

namespace {
// Raw-scale chain with noise variances (4, 1, 1, 1, 1) and weights +-0.5,
// so marginal variances decrease along the chain. With free noise precision
// the likelihood cannot orient a chain; the l1 term prefers the true
// direction here because every reversed coefficient is larger. After column
// standardization all orientations tie exactly.
Dataset chain_data(int p, int n, std::uint64_t seed) {
  GroundTruthModel m;
  m.p = p;
  m.B = Matrix::Zero(p, p);
  for (int i = 0; i + 1 < p; ++i) m.B(i, i + 1) = (i % 2 == 0) ? 0.5 : -0.5;
  m.W = Vector::Ones(p);
  m.W(0) = 4.0;
  m.V = Matrix::Zero(p, 0);
  m.U = Matrix::Zero(p, 0);
  m.seed = seed;
  Rng rng(seed);
  return generate(m, n, rng);
}

int rank_above(const SymMatrix& m, double frac) {
  const SymEigen e = eig_sym(m);
  if (!(e.values(0) > 0.0)) return 0;
  return static_cast<int>((e.values.array() > frac * e.values(0)).count());
}
}  // namespace

TEST(SampleCovariance, CentersAndScales) {
  Matrix x(4, 2);
  x << 1, 10, 2, 20, 3, 30, 4, 40;
  const SymMatrix c = sample_covariance(x, true);
  EXPECT_NEAR(c(0, 0), 1.0, 1e-12);
  EXPECT_NEAR(c(0, 1), 1.0, 1e-12);
  const SymMatrix raw = sample_covariance(x, false);
  EXPECT_NEAR(raw(0, 0), 1.25, 1e-12);
  Matrix flat = x;
  flat.col(1).setConstant(3.0);
  EXPECT_THROW(sample_covariance(flat, true), DegenerateInput);
}

TEST(Pipeline, UnconfoundedChain) {
  const Dataset d = chain_data(5, 10000, 1);
  PipelineConfig cfg;
  cfg.standardize_input = false;
  cfg.decor.refine_orientation = true;
  const PipelineReport r = run_pipeline(d, cfg);
  EXPECT_LE(r.split.L_x.mat().norm(), 0.05 * r.split.S_x.mat().norm());
  EXPECT_EQ(score(r.estimate.B_hat, d.model->B, 0.3).f1, 1.0);
  EXPECT_TRUE(check_spd(r.sigma_cond_hat).is_spd);
}

TEST(Pipeline, PurePervasiveModelHasRankOneLatentPart) {
  SimConfig c;
  c.p = 10;
  c.r_S = 0;
  c.q_P = 1;
  c.U_d = 2.0;
  c.n = 10000;
  c.seed = 2;
  const PipelineReport r = run_pipeline(simulate(c), PipelineConfig{});
  EXPECT_EQ(rank_above(r.split.L_x, 0.05), 1);
}

TEST(Pipeline, IdentityCovarianceGivesEmptyGraph) {
  const PipelineReport r = run_pipeline_covariance(SymMatrix::identity(5), PipelineConfig{});
  EXPECT_EQ(r.estimate.B_hat.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Pipeline, OutputContractAndDeterminism) {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const GroundTruthModel m = small_model(10, seed, 2, 1.5, 2, 3);
    Rng rng(seed);
    const Dataset d = generate(m, 500, rng);
    const PipelineReport a = run_pipeline(d, PipelineConfig{});
    const PipelineReport b = run_pipeline(d, PipelineConfig{});
    EXPECT_EQ(a.estimate.B_hat, b.estimate.B_hat);
    EXPECT_EQ(a.estimate.Gamma_hat.mat(), b.estimate.Gamma_hat.mat());
    EXPECT_EQ(a.split.S_x.mat(), b.split.S_x.mat());
    EXPECT_LE(acyclicity_value(a.estimate.B_hat), 1e-8);
    EXPECT_TRUE(is_acyclic_support(a.estimate.B_hat));
    for (Index i = 0; i < 10; ++i)
      for (Index j = 0; j < 10; ++j)
        if (i != j && a.estimate.B_hat(i, j) != 0.0) {
          EXPECT_EQ(a.estimate.Gamma_hat(i, j), 0.0);
        }
  }
}

TEST(Pipeline, RejectsDegenerateData) {
  Dataset d;
  d.X = Matrix::Zero(1, 3);
  EXPECT_THROW(run_pipeline(d, PipelineConfig{}), DegenerateInput);
  d.X = Matrix::Ones(5, 3);
  d.X(0, 0) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(run_pipeline(d, PipelineConfig{}), DegenerateInput);
}

TEST(InversionStability, Examples) {
  const SymMatrix s = SymMatrix::identity(4);
  const InversionBound same = inversion_stability(s, s);
  EXPECT_EQ(same.bound, 0.0);
  EXPECT_EQ(same.actual, 0.0);

  Matrix delta = Matrix::Zero(4, 4);
  delta(0, 0) = 0.1;
  const InversionBound r = inversion_stability(SymMatrix(Matrix(s.mat() + delta)), s);
  EXPECT_NEAR(r.bound, 0.1 / 0.9, 1e-12);
  EXPECT_LE(r.actual, r.bound);

  EXPECT_THROW(inversion_stability(SymMatrix(Matrix(2.0 * s.mat())), s), PreconditionViolated);
}

TEST(InversionStability, RandomPerturbations) {
  Rng rng(3);
  for (int t = 0; t < 100; ++t) {
    const SymMatrix s = random_spd(8, rng, 0.2);
    const SymMatrix e = random_symmetric(8, rng);
    const double scale = 0.5 * min_eigenvalue(s) / spectral_norm_sym(e.mat());
    const SymMatrix s_hat(Matrix(s.mat() + scale * e.mat()));
    const InversionBound r = inversion_stability(s_hat, s);
    EXPECT_NEAR(r.delta, 0.5 * min_eigenvalue(s), 1e-10);
    EXPECT_LE(r.actual, r.bound + 1e-10);
  }
}

TEST(Methods, NamesRoundTrip) {
  for (Method m : {Method::DclDecor, Method::DecorGl, Method::Notears}) EXPECT_EQ(parse_method(method_name(m)), m);
  EXPECT_FALSE(parse_method("golem").has_value());
}
