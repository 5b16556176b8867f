#include <gtest/gtest.h>

#include <bit>
#include <cmath>
#include <random>
#include <set>
#include <sstream>
#include <vector>

#include "stabent/policies.hpp"
#include "stabent/simulation.hpp"
#include "stabent/stabilization_entropy.hpp"
#include "stabent/system_model.hpp"

using namespace stabent;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

// Scalar instance: D on the state, no E coordinates, F = whole line.
SpanningInstance scalar_instance(std::size_t horizon, SetFamily d, std::vector<double> r, double rho = 0.5) {
  return SpanningInstance{horizon, 1, std::move(d), SetFamily::whole(0), SetFamily::whole(1), rho, std::move(r)};
}

Scenario quiet_scenario(double x0, std::size_t horizon) { return Scenario{vec({x0}), Matrix::Zero(1, horizon)}; }

// Exhaustive minimum over all 2^n candidate subsets.
std::optional<std::size_t> brute_force_cover(const SatisfactionMatrix& m, double rho) {
  const std::size_t need = required_coverage(m.scenarios, rho);
  std::optional<std::size_t> best;
  for (std::uint32_t mask = 0; mask < (1u << m.candidates()); ++mask) {
    std::size_t covered = 0;
    for (std::size_t s = 0; s < m.scenarios; ++s) {
      bool hit = false;
      for (std::size_t c = 0; c < m.candidates() && !hit; ++c) hit = ((mask >> c) & 1u) && m.at(c, s);
      covered += hit;
    }
    const auto size = static_cast<std::size_t>(std::popcount(mask));
    if (covered >= need && (!best || size < *best)) best = size;
  }
  return best;
}

SatisfactionMatrix random_matrix(std::mt19937_64& rng, std::size_t candidates, std::size_t scenarios, double p) {
  auto m = SatisfactionMatrix::empty(candidates, scenarios);
  std::bernoulli_distribution hit(p);
  for (std::size_t c = 0; c < candidates; ++c)
    for (std::size_t s = 0; s < scenarios; ++s)
      if (hit(rng)) m.set(c, s);
  return m;
}

ZoomPolicy zoom_on(const SystemModel& m, std::size_t alphabet) {
  return ZoomPolicy(alphabet, ZoomParams{}, CancelRule(m, Vector::Zero(1), Vector::Zero(1)), 1);
}

}  // namespace

TEST(SetFamily, GridAndMembership) {
  const auto f = SetFamily::grid(vec({-1}), vec({1}), {2});
  EXPECT_EQ(f.size(), 2u);
  EXPECT_EQ(f.index_of(vec({-1.0})), 0u);
  EXPECT_EQ(f.index_of(vec({0.0})), 1u);
  EXPECT_FALSE(f.index_of(vec({1.0})).has_value());
  EXPECT_EQ(SetFamily::whole(1).index_of(vec({1e300})), 0u);
  EXPECT_EQ(SetFamily::whole(0).index_of(Vector(0)), 0u);
  EXPECT_THROW(SetFamily(1, {vec({0}), vec({0.5})}, {vec({1}), vec({2})}), PreconditionError);
  EXPECT_NO_THROW(SetFamily(1, {vec({0}), vec({1})}, {vec({1}), vec({2})}));
  EXPECT_THROW(SetFamily(1, {vec({1})}, {vec({1})}), PreconditionError);
  EXPECT_THROW(SetFamily(2, {vec({0})}, {vec({1})}), DimensionError);
}

TEST(Thresholds, EpsilonRuleCases) {
  Matrix q(1, 3);
  q << 0.9, 0.1, 0.0;
  const auto r = build_R_epsilon(q, {1.0}, 0.05);
  ASSERT_EQ(r.size(), 3u);
  EXPECT_NEAR(r[0], 0.105, 1e-15);
  EXPECT_NEAR(r[1], 0.945, 1e-15);
  EXPECT_EQ(r[2], 1.0);
  Matrix full(1, 1);
  full << 1.0;
  EXPECT_EQ(build_R_epsilon(full, {1.0}, 0.3), std::vector<double>{0.3});
  EXPECT_NO_THROW(SpanningInstance::validate_thresholds(r, 3));
}

TEST(Thresholds, NoiseCellsMultiplyIn) {
  Matrix q(1, 1);
  q << 1.0;
  const auto r = build_R_epsilon(q, {0.5, 0.5}, 0.5);
  EXPECT_EQ(r, (std::vector<double>{0.75, 0.75}));
}

TEST(Thresholds, EpsilonTooLargeIsRejected) {
  Matrix q(1, 2);
  q << 0.5, 0.5;
  EXPECT_THROW(build_R_epsilon(q, {1.0}, 1.0), PreconditionError);
  EXPECT_NO_THROW(build_R_epsilon(q, {1.0}, 0.99));
  try {
    build_R_epsilon(q, {1.0}, 1.5);
    FAIL();
  } catch (const PreconditionError& e) {
    EXPECT_NE(std::string(e.what()).find("mass 0.5"), std::string::npos);
  }
  EXPECT_THROW(build_R_epsilon(q, {1.0}, 0.0), PreconditionError);
  EXPECT_THROW(SpanningInstance::validate_thresholds({0.2, 0.5}, 2), PreconditionError);
  EXPECT_THROW(SpanningInstance::validate_thresholds({1.2}, 1), PreconditionError);
  EXPECT_THROW(SpanningInstance::validate_thresholds({1.0}, 2), DimensionError);
}

TEST(Thresholds, CellMassesFromPathsAndNoise) {
  Trajectory t;
  t.horizon = 4;
  t.states.resize(1, 5);
  t.states << 0.5, -0.5, 0.5, 5.0, 0.5;
  t.noise = Matrix::Zero(1, 4);
  t.controls = Matrix::Zero(1, 4);
  t.symbols.assign(4, 1);
  const Matrix q = joint_cell_masses({t}, SetFamily::grid(vec({-1}), vec({1}), {2}), SetFamily::whole(0), 1, 0);
  EXPECT_EQ(q(0, 0), 0.25);
  EXPECT_EQ(q(1, 0), 0.5);
  const auto nu = noise_cell_masses(NoiseSpec::gaussian(Vector::Zero(1), Vector::Ones(1)),
                                    SetFamily(1, {vec({-INFINITY}), vec({0})}, {vec({0}), vec({INFINITY})}));
  EXPECT_DOUBLE_EQ(nu[0], 0.5);
  EXPECT_DOUBLE_EQ(nu[1], 0.5);
}

TEST(Frequencies, HandComputedOrbit) {
  // Doubling from 0.1 with zero noise and control: 0.1, 0.2, 0.4, 0.8.
  const SystemModel m = catalog_model("scalar_doubling");
  const SetFamily d(1, {vec({-1}), vec({0}), vec({0.5})}, {vec({0}), vec({0.5}), vec({1})});
  const Scenario sc = quiet_scenario(0.1, 4);
  const Matrix u = Matrix::Zero(1, 4);
  EXPECT_EQ(occupancy_counts(m, u, sc, scalar_instance(4, d, {1, 1, 1})), (std::vector<std::size_t>{0, 3, 1}));
  EXPECT_TRUE(satisfies_frequencies(m, u, sc, scalar_instance(4, d, {1, 0.25, 1})));
  EXPECT_FALSE(satisfies_frequencies(m, u, sc, scalar_instance(4, d, {1, 0.2, 1})));
  EXPECT_TRUE(satisfies_frequencies(m, u, sc, scalar_instance(4, d, {1, 0.25, 0.75})));
  EXPECT_FALSE(satisfies_frequencies(m, u, sc, scalar_instance(4, d, {1, 0.5, 0.5})));
  // Pulling the state down each step keeps it in the middle cell.
  const Matrix pull = Matrix::Constant(1, 4, -0.1);
  EXPECT_TRUE(satisfies_frequencies(m, pull, sc, scalar_instance(4, d, {1, 0.0, 1})));
}

TEST(Frequencies, AgreeWithDirectSimulation) {
  const SystemModel m = catalog_model("stable_ar1");
  const auto d = SetFamily::grid(vec({-2}), vec({2}), {4});
  const auto f = SetFamily::grid(vec({-1}), vec({1}), {2});
  SpanningInstance inst{6, 1, d, SetFamily::whole(0), f, 0.5, vacuous_thresholds(8)};
  const auto scenarios = draw_scenarios(InitSpec::uniform(-2 * Vector::Ones(1), 2 * Vector::Ones(1)),
                                        NoiseSpec::uniform(-Vector::Ones(1), Vector::Ones(1)), 6, 50, 3);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> ctl(-1, 1);
  for (const auto& sc : scenarios) {
    Matrix u(1, 6);
    for (int t = 0; t < 6; ++t) u(0, t) = ctl(rng);
    std::vector<std::size_t> expected(8, 0);
    double x = sc.x0(0);
    for (int t = 0; t < 6; ++t) {
      const double w = sc.noise(0, t);
      if (x >= -2 && x < 2 && w >= -1 && w < 1) ++expected[static_cast<std::size_t>(std::floor(x + 2)) * 2 + (w >= 0)];
      x = 0.5 * x + w + u(0, t);
    }
    EXPECT_EQ(occupancy_counts(m, u, sc, inst), expected);
  }
}

TEST(Frequencies, InstanceValidation) {
  const SystemModel m = catalog_model("stable_ar1");
  auto inst = scalar_instance(3, SetFamily::whole(1), {1.0});
  EXPECT_NO_THROW(inst.validate(m));
  inst.rho = 1.0;
  EXPECT_THROW(inst.validate(m), PreconditionError);
  inst.rho = 0.5;
  inst.horizon = 0;
  EXPECT_THROW(inst.validate(m), PreconditionError);
  inst.horizon = 3;
  inst.split = 2;
  EXPECT_THROW(inst.validate(m), DimensionError);
}

TEST(Spanning, EmptySetSpansNothing) {
  const SystemModel m = catalog_model("stable_ar1");
  const auto inst = scalar_instance(3, SetFamily::whole(1), {1.0});
  std::vector<Scenario> scenarios{quiet_scenario(0, 3), quiet_scenario(1, 3)};
  const auto check = is_spanning(m, CandidateControls{}, inst, scenarios);
  EXPECT_FALSE(check.spanning);
  EXPECT_EQ(check.covered_fraction, 0.0);
  const auto one = grid_candidates({vec({0})}, 3);
  EXPECT_TRUE(is_spanning(m, one, inst, scenarios).spanning);
}

TEST(Spanning, RequiredCoverage) {
  EXPECT_EQ(required_coverage(200, 0.5), 100u);
  EXPECT_EQ(required_coverage(3, 0.5), 2u);
  EXPECT_EQ(required_coverage(10, 0.7), 3u);
  EXPECT_EQ(required_coverage(1, 0.99), 1u);
}

TEST(SetCover, ExactMatchesBruteForce) {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<std::size_t> nc(1, 12), ns(1, 130);
  std::uniform_real_distribution<double> rho(0.05, 0.95), dens(0.02, 0.5);
  for (int trial = 0; trial < 300; ++trial) {
    const auto m = random_matrix(rng, nc(rng), ns(rng), dens(rng));
    const double r = rho(rng);
    const auto oracle = brute_force_cover(m, r);
    const auto exact = min_spanning_estimate(m, r, CoverMode::kExact);
    const auto greedy = min_spanning_estimate(m, r, CoverMode::kGreedy);
    ASSERT_EQ(exact.feasible, oracle.has_value()) << "trial " << trial;
    ASSERT_EQ(greedy.feasible, oracle.has_value()) << "trial " << trial;
    if (!oracle) continue;
    EXPECT_EQ(exact.cardinality, *oracle) << "trial " << trial;
    EXPECT_GE(greedy.cardinality, exact.cardinality);
    EXPECT_TRUE(coverage(m, exact.chosen, r).spanning);
    EXPECT_TRUE(coverage(m, greedy.chosen, r).spanning);
    EXPECT_EQ(exact.chosen.size(), exact.cardinality);
  }
}

TEST(SetCover, GreedyCanExceedExact) {
  // Classic instance: greedy grabs the big middle set first.
  auto m = SatisfactionMatrix::empty(3, 6);
  for (std::size_t s : {0, 1, 2}) m.set(0, s);
  for (std::size_t s : {3, 4, 5}) m.set(1, s);
  for (std::size_t s : {1, 2, 3, 4}) m.set(2, s);
  EXPECT_EQ(min_spanning_estimate(m, 0.01, CoverMode::kExact).cardinality, 2u);
  EXPECT_EQ(min_spanning_estimate(m, 0.01, CoverMode::kGreedy).cardinality, 3u);
  EXPECT_EQ(min_spanning_estimate(m, 0.01, CoverMode::kGreedy).chosen.front(), 2u);
}

TEST(SetCover, MonotoneInCandidatesAndRho) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    auto m = random_matrix(rng, 10, 40, 0.25);
    auto smaller = m;
    smaller.covers.pop_back();
    for (double rho : {0.2, 0.5, 0.8}) {
      const auto big = min_spanning_estimate(m, rho, CoverMode::kExact);
      const auto small = min_spanning_estimate(smaller, rho, CoverMode::kExact);
      if (small.feasible) {
        ASSERT_TRUE(big.feasible);
        EXPECT_LE(big.cardinality, small.cardinality);
      }
    }
    const auto loose = min_spanning_estimate(m, 0.8, CoverMode::kExact);
    const auto tight = min_spanning_estimate(m, 0.2, CoverMode::kExact);
    if (tight.feasible) {
      EXPECT_LE(loose.cardinality, tight.cardinality);
    }
  }
}

TEST(SetCover, ExactModeLimitAndInfeasibility) {
  std::mt19937_64 rng(1);
  const auto wide = random_matrix(rng, kExactCandidateLimit + 1, 10, 0.5);
  EXPECT_THROW(min_spanning_estimate(wide, 0.5, CoverMode::kExact), PreconditionError);
  const auto none = SatisfactionMatrix::empty(3, 10);
  EXPECT_FALSE(min_spanning_estimate(none, 0.5, CoverMode::kExact).feasible);
  EXPECT_FALSE(min_spanning_estimate(none, 0.5, CoverMode::kGreedy).feasible);
}

TEST(Candidates, PolicyCandidatesNeverExceedAlphabetPower) {
  const SystemModel m = catalog_model("stable_ar1");
  const auto zoom = zoom_on(m, 2);
  for (std::size_t horizon = 1; horizon <= 8; ++horizon) {
    const auto scenarios = draw_scenarios(InitSpec::uniform(-Vector::Ones(1), Vector::Ones(1)),
                                          NoiseSpec::gaussian(Vector::Zero(1), Vector::Ones(1)), horizon, 500, 9);
    const auto c = policy_candidates(m, zoom, scenarios, horizon);
    EXPECT_TRUE(at_most_power(c.size(), 2, horizon)) << horizon;
    if (horizon >= 2) {
      EXPECT_GT(c.size(), 1u);
    }
    std::set<std::vector<Symbol>> distinct(c.symbols.begin(), c.symbols.end());
    EXPECT_EQ(distinct.size(), c.size());
    for (const auto& q : c.symbols) EXPECT_EQ(q.size(), horizon);
  }
}

TEST(Candidates, ControlsAreTheClosedLoopOnes) {
  const SystemModel m = catalog_model("scalar_doubling");
  const auto zoom = zoom_on(m, 4);
  const auto scenarios = draw_scenarios(InitSpec::uniform(-Vector::Ones(1), Vector::Ones(1)),
                                        NoiseSpec::gaussian(Vector::Zero(1), Vector::Ones(1)), 5, 30, 4);
  const auto c = policy_candidates(m, zoom, scenarios, 5);
  for (std::size_t i = 0; i < c.size(); ++i) {
    auto ctl = zoom.make_controller();
    for (std::size_t t = 0; t < 5; ++t) EXPECT_EQ(ctl->control(c.symbols[i][t])(0), c.sequences[i](0, t));
  }
}

TEST(Candidates, GridEnumeration) {
  const auto c = grid_candidates({vec({-1}), vec({1})}, 3);
  ASSERT_EQ(c.size(), 8u);
  std::set<std::vector<double>> distinct;
  for (const auto& u : c.sequences) distinct.insert({u(0, 0), u(0, 1), u(0, 2)});
  EXPECT_EQ(distinct.size(), 8u);
  EXPECT_THROW(grid_candidates({vec({-1}), vec({1})}, 21, 1u << 20), PreconditionError);
  EXPECT_THROW(grid_candidates({}, 3), PreconditionError);
}

TEST(Candidates, ScenariosArePrefixStable) {
  const auto init = InitSpec::uniform(-Vector::Ones(1), Vector::Ones(1));
  const auto noise = NoiseSpec::gaussian(Vector::Zero(1), Vector::Ones(1));
  const auto a = draw_scenarios(init, noise, 4, 10, 5);
  const auto b = draw_scenarios(init, noise, 4, 20, 5);
  for (std::size_t i = 0; i < 10; ++i) {
    EXPECT_EQ(a[i].x0, b[i].x0);
    EXPECT_EQ(a[i].noise, b[i].noise);
  }
}

TEST(AtMostPower, Boundaries) {
  EXPECT_TRUE(at_most_power(8, 2, 3));
  EXPECT_FALSE(at_most_power(9, 2, 3));
  EXPECT_TRUE(at_most_power(1, 7, 0));
  EXPECT_FALSE(at_most_power(2, 1, 100));
  EXPECT_TRUE(at_most_power(std::numeric_limits<std::size_t>::max(), 4096, 8));
}

TEST(EntropyRate, VacuousThresholdsGiveOne) {
  const SystemModel m = catalog_model("stable_ar1");
  EntropyTemplate tmpl;
  tmpl.d_sets = SetFamily::whole(1);
  tmpl.e_sets = SetFamily::whole(0);
  tmpl.f_sets = SetFamily::whole(1);
  tmpl.vacuous = true;
  tmpl.scenarios = 50;
  const auto curve = entropy_rate(m, zoom_on(m, 2), NoiseSpec::gaussian(Vector::Zero(1), Vector::Ones(1)),
                                  InitSpec::uniform(-Vector::Ones(1), Vector::Ones(1)), tmpl, {1, 3, 5}, 1);
  ASSERT_EQ(curve.points.size(), 3u);
  for (const auto& p : curve.points) {
    EXPECT_TRUE(p.feasible);
    EXPECT_EQ(p.s_estimate, 1u);
    EXPECT_EQ(p.rate, 0.0);
    EXPECT_EQ(p.covered_fraction, 1.0);
  }
  EXPECT_EQ(curve.limsup_estimate(), 0.0);
}

TEST(EntropyRate, BoundedByCapacityAndDeterministic) {
  const SystemModel m = catalog_model("scalar_doubling");
  EntropyTemplate tmpl;
  tmpl.d_sets = SetFamily::grid(vec({-6}), vec({6}), {1});
  tmpl.e_sets = SetFamily::whole(0);
  tmpl.f_sets = SetFamily::whole(1);
  tmpl.epsilon = 0.5;
  tmpl.scenarios = 100;
  tmpl.mode = CoverMode::kExact;
  const auto zoom = zoom_on(m, 4);
  const auto noise = NoiseSpec::gaussian(Vector::Zero(1), Vector::Ones(1));
  const auto init = InitSpec::uniform(-Vector::Ones(1), Vector::Ones(1));
  const auto a = entropy_rate(m, zoom, noise, init, tmpl, {1, 2, 4, 6}, 11);
  const auto b = entropy_rate(m, zoom, noise, init, tmpl, {1, 2, 4, 6}, 11);
  EXPECT_EQ(a.capacity, 2.0);
  for (std::size_t i = 0; i < a.points.size(); ++i) {
    const auto& p = a.points[i];
    EXPECT_TRUE(p.feasible) << p.horizon;
    EXPECT_TRUE(p.within_capacity);
    EXPECT_LE(p.rate, a.capacity + 1e-12);
    EXPECT_GE(p.covered_fraction, 0.5);
    EXPECT_EQ(p.s_estimate, b.points[i].s_estimate);
    EXPECT_EQ(p.matrix.covers, b.points[i].matrix.covers);
  }
  std::ostringstream csv;
  write_entropy_csv(csv, a);
  EXPECT_EQ(csv.str().substr(0, csv.str().find('\n')), "T,s_estimate,rate,capacity,candidates,covered_fraction");
}

TEST(EntropyCurve, EnvelopeAndLimsup) {
  EntropyCurve c;
  for (auto [t, r] : std::vector<std::pair<std::size_t, double>>{{1, 1.0}, {2, 0.5}, {4, 0.75}, {8, 0.25}}) {
    EntropyPoint p;
    p.horizon = t;
    p.rate = r;
    c.points.push_back(p);
  }
  EXPECT_EQ(c.envelope(), (std::vector<double>{1.0, 0.75, 0.75, 0.25}));
  EXPECT_EQ(c.limsup_estimate(), 0.75);
  EntropyPoint inf;
  inf.horizon = 3;
  c.points.push_back(inf);
  std::ostringstream csv;
  write_entropy_csv(csv, c);
  EXPECT_NE(csv.str().find("3,inf,inf,"), std::string::npos);
}

TEST(Export, SatisfactionCsv) {
  auto m = SatisfactionMatrix::empty(2, 3);
  m.set(0, 1);
  m.set(1, 2);
  std::ostringstream out;
  write_satisfaction_csv(out, m);
  EXPECT_EQ(out.str(), "scenario,u0,u1\n0,0,0\n1,1,0\n2,0,1\n");
}
