#include <cmath>

#include "doctest.h"
#include "qedet/montecarlo.hpp"

using namespace qedet;

namespace {

double empirical_fano(const Counts& c) { return *summarize(c).fano; }

}  // namespace

TEST_CASE("StreamRng streams are reproducible and distinct") {
  StreamRng a(42, 1, 7), b(42, 1, 7), c(42, 1, 8), d(42, 2, 7), e(43, 1, 7);
  const auto va = a();
  CHECK(va == b());
  CHECK(va != c());
  CHECK(va != d());
  CHECK(va != e());
  for (int i = 0; i < 1000; ++i) {
    const double u = a.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
}

TEST_CASE("summarize") {
  Counts c(4);
  c << 1, 2, 3, 4;
  const auto s = summarize(c);
  CHECK(s.mean == 2.5);
  CHECK(s.variance == doctest::Approx(5.0 / 3.0));
  CHECK(*s.fano == doctest::Approx(2.0 / 3.0));
  CHECK(s.windows == 4);

  Counts flat = Counts::Constant(5, 7);
  const auto f = summarize(flat);
  CHECK(f.variance == 0.0);
  CHECK_FALSE(f.fano.has_value());
  CHECK_FALSE(f.snr.has_value());
}

TEST_CASE("generate_counts deterministic train") {
  const auto c = generate_counts(SourceSpec::deterministic(5.0), 4, 1);
  CHECK((c == 5).all());
}

TEST_CASE("generate_counts Poisson") {
  const auto c = generate_counts(SourceSpec::poisson(100.0), 100000, 2);
  CHECK(summarize(c).mean == doctest::Approx(100.0).epsilon(0.005));
  CHECK(std::abs(empirical_fano(c) - 1.0) <= 0.02);
}

TEST_CASE("generate_counts sub-Poissonian") {
  const auto b = binomial_source(100.0, 0.2);
  CHECK(b.trials == 125);
  CHECK(b.p == 0.8);
  const auto c = generate_counts(SourceSpec::with_fano(100.0, 0.2), 100000, 3);
  CHECK(std::abs(empirical_fano(c) - 0.2) <= 0.02);
  CHECK(summarize(c).mean == doctest::Approx(100.0).epsilon(0.002));
}

TEST_CASE("generate_counts super-Poissonian") {
  const auto c = generate_counts(SourceSpec::with_fano(50.0, 3.0), 100000, 4);
  CHECK(summarize(c).mean == doctest::Approx(50.0).epsilon(0.01));
  CHECK(std::abs(empirical_fano(c) - 3.0) <= 0.1);
}

TEST_CASE("generate_counts rejects a source with no trials") {
  CHECK_THROWS_AS(generate_counts(SourceSpec::with_fano(0.3, 0.2), 10, 1), std::domain_error);
}

TEST_CASE("thin identity and annihilator") {
  const auto c = generate_counts(SourceSpec::poisson(20.0), 1000, 5);
  CHECK((thin(c, 1.0, 9) == c).all());
  CHECK((thin(c, 0.0, 9) == 0).all());
}

TEST_CASE("thin a deterministic train") {
  const auto c = generate_counts(SourceSpec::deterministic(100.0), 100000, 6);
  const auto t = thin(c, 0.5, 6);
  CHECK(std::abs(summarize(t).mean - 50.0) <= 0.5);
  CHECK(std::abs(empirical_fano(t) - 0.5) <= 0.02);
}

TEST_CASE("dark counts and dead time") {
  const Counts zeros = Counts::Zero(100000);
  CHECK((apply_dark_and_deadtime(zeros, 0.0, 0.0, 1) == zeros).all());

  const auto dark = apply_dark_and_deadtime(zeros, 3.0, 0.0, 7);
  CHECK(std::abs(summarize(dark).mean - 3.0) <= 0.02);
  CHECK(std::abs(empirical_fano(dark) - 1.0) <= 0.03);

  const Counts tens = Counts::Constant(10000, 10);
  const auto capped = apply_dark_and_deadtime(tens, 0.0, 0.2, 8);
  CHECK((capped <= 5).all());
  CHECK((capped >= 1).all());
}

TEST_CASE("recorded mean is nonincreasing in dead time") {
  const auto c = generate_counts(SourceSpec::poisson(8.0), 5000, 9);
  double prev = summarize(apply_dark_and_deadtime(c, 1.0, 0.0, 10)).mean;
  for (double dt : {0.001, 0.01, 0.05, 0.1, 0.2, 0.3, 0.5, 0.9}) {
    const auto r = apply_dark_and_deadtime(c, 1.0, dt, 10);
    const double m = summarize(r).mean;
    CHECK(m <= prev);
    prev = m;
  }
}

TEST_CASE("gain models") {
  const Counts c = Counts::Constant(1000, 3);
  SUBCASE("deterministic gain has F = 1 exactly") {
    const auto g = apply_gain(c, GainModel::deterministic(50.0), 1);
    CHECK(*g.empirical_enf == 1.0);
    CHECK((g.charges == 150.0).all());
    CHECK(g.draws == 3000);
  }
  SUBCASE("no gain passes counts through") {
    const auto g = apply_gain(c, GainModel::none(), 1);
    CHECK(*g.empirical_enf == 1.0);
    CHECK((g.charges == 3.0).all());
  }
  SUBCASE("exponential gain has F = 2") {
    const Counts big = Counts::Constant(1000, 1000);
    const auto g = apply_gain(big, GainModel::exponential(50.0), 2);
    CHECK(g.draws == 1000000);
    CHECK(std::abs(*g.empirical_enf - 2.0) <= 0.01);
  }
  SUBCASE("no photoelectrons, no ENF") {
    const auto g = apply_gain(Counts::Zero(10), GainModel::exponential(5.0), 3);
    CHECK_FALSE(g.empirical_enf.has_value());
  }
}

TEST_CASE("run: thinned deterministic train") {
  SimulationConfig cfg;
  cfg.source = SourceSpec::deterministic(1e4);
  cfg.eta_effective = 0.9;
  cfg.windows = 10000;
  cfg.seed = 11;
  const auto r = run(cfg);
  CHECK(std::abs(*r.counts.fano - 0.1) <= 0.01);
  // Exact binomial law: SNR = eta N / sqrt(eta (1 - eta) N) = 300.
  CHECK(*r.counts.snr == doctest::Approx(300.0).epsilon(0.03));
}

TEST_CASE("run: thinned Poisson source") {
  SimulationConfig cfg;
  cfg.source = SourceSpec::poisson(1e4);
  cfg.eta_effective = 0.9;
  cfg.windows = 10000;
  cfg.seed = 12;
  const auto r = run(cfg);
  CHECK(std::abs(*r.counts.fano - 1.0) <= 0.03);
  CHECK(*r.counts.snr == doctest::Approx(std::sqrt(0.9e4)).epsilon(0.03));
}

TEST_CASE("run: thinned sub-Poissonian source") {
  SimulationConfig cfg;
  cfg.source = SourceSpec::with_fano(1e4, 0.2);
  cfg.eta_effective = 0.5;
  cfg.windows = 10000;
  cfg.seed = 13;
  const auto r = run(cfg);
  CHECK(std::abs(*r.counts.fano - 0.6) <= 0.02);
}

TEST_CASE("thinned Fano law holds within 3 standard errors") {
  int cells = 0;
  int within = 0;
  for (const auto& src : {SourceSpec::deterministic(2000.0), SourceSpec::with_fano(2000.0, 0.2),
                          SourceSpec::poisson(2000.0), SourceSpec::with_fano(2000.0, 2.0)}) {
    for (int k = 1; k <= 9; ++k) {
      SimulationConfig cfg;
      cfg.source = src;
      cfg.eta_effective = k / 10.0;
      cfg.windows = 10000;
      cfg.seed = 100 + std::uint64_t(k);
      const auto r = run(cfg);
      const double expected = predict(cfg).fano;
      ++cells;
      if (std::abs(*r.counts.fano - expected) <= 3.0 * *r.counts.standard_error_of_fano) ++within;
    }
  }
  // 36 cells at 3 sigma: expect essentially all inside.
  CHECK(within >= cells - 1);
}

TEST_CASE("run is bit-identical across thread counts") {
  SimulationConfig cfg;
  cfg.source = SourceSpec::with_fano(500.0, 0.3);
  cfg.eta_effective = 0.7;
  cfg.dark_rate_per_window = 2.0;
  cfg.dead_time_windows = 0.001;
  cfg.gain = GainModel::exponential(20.0);
  cfg.windows = 4000;
  cfg.seed = 42;
  cfg.threads = 1;
  const auto a = run(cfg);
  cfg.threads = 8;
  const auto b = run(cfg);
  CHECK(a.counts.mean == b.counts.mean);
  CHECK(a.counts.variance == b.counts.variance);
  CHECK(a.charge.variance == b.charge.variance);
  CHECK(*a.empirical_enf == *b.empirical_enf);
  cfg.seed = 43;
  CHECK(run(cfg).counts.variance != a.counts.variance);
}

TEST_CASE("brute_force_oracle") {
  auto o = brute_force_oracle(1, 0.3);
  CHECK(o.mean == doctest::Approx(0.3).epsilon(1e-15));
  CHECK(o.variance == doctest::Approx(0.21).epsilon(1e-14));
  o = brute_force_oracle(12, 1.0);
  CHECK(o.mean == 12.0);
  CHECK(o.variance == 0.0);
  o = brute_force_oracle(10, 0.5);
  CHECK(o.mean == doctest::Approx(5.0).epsilon(1e-15));
  CHECK(o.variance == doctest::Approx(2.5).epsilon(1e-14));
  CHECK_THROWS_AS(brute_force_oracle(13, 0.5), std::domain_error);
}

TEST_CASE("brute_force_oracle agrees with the binomial moments") {
  for (int k = 0; k <= 12; ++k) {
    for (int i = 0; i <= 10; ++i) {
      const double eta = i / 10.0;
      const auto o = brute_force_oracle(k, eta);
      CHECK(std::abs(o.mean - k * eta) <= 1e-12);
      CHECK(std::abs(o.variance - k * eta * (1.0 - eta)) <= 1e-12);
    }
  }
}

TEST_CASE("config validation") {
  SimulationConfig cfg;
  cfg.eta_effective = 1.5;
  CHECK_THROWS_AS(run(cfg), std::domain_error);
  cfg.eta_effective = 0.5;
  cfg.windows = 0;
  CHECK_THROWS_AS(run(cfg), std::domain_error);
}
