#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "wigner/fr.hpp"
#include "wigner/hilbert.hpp"
#include "wigner/measurement.hpp"

using namespace wigner;

namespace {

SpacePtr coin_spin() {
  return make_product_space({make_factor("coin", {"heads", "tails"}),
                             make_factor("spin", {"down", "up"})});
}

StateVector random_state(SpacePtr space, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  StateVector st{space, std::vector<Complex>(space->dim()), std::nullopt};
  for (auto& a : st.amps) a = Complex(g(rng), g(rng));
  double n = st.norm();
  for (auto& a : st.amps) a /= n;
  return st;
}

}  // namespace

TEST_CASE("product space dimensions and indexing") {
  auto s = coin_spin();
  CHECK(s->dim() == 4);
  auto fr = fr_space(false);
  CHECK(fr->dim() == 2 * 3 * 2 * 3 * 3 * 3);
  CHECK(fr->dim() == 324);
  // index <-> digits is a bijection
  for (std::size_t i = 0; i < fr->dim(); ++i)
    CHECK(fr->index(fr->digits(i)) == i);
  CHECK_THROWS(make_product_space({make_factor("coin", {"a", "b"}),
                                   make_factor("coin", {"c", "d"})}));
  CHECK_THROWS(make_factor("x", {"only"}));
  CHECK_THROWS(make_factor("x", {"a", "a"}));
}

TEST_CASE("basis states") {
  auto s = coin_spin();
  auto e0 = basis_state(s, {"heads", "down"});
  CHECK(e0.amps[0] == Complex(1.0));
  for (std::size_t i = 1; i < 4; ++i) CHECK(e0.amps[i] == Complex(0.0));
  CHECK_THROWS_WITH(basis_state(s, {"sideways", "down"}),
                    doctest::Contains("coin"));
}

TEST_CASE("superpose matches the coin preparation") {
  auto s = coin_spin();
  std::vector<SuperposeTerm> terms;
  terms.push_back({ExactAmp::sqrt_of(Rational(1, 3)), {"heads", "down"}});
  terms.push_back({ExactAmp::sqrt_of(Rational(2, 3)), {"tails", "down"}});
  auto st = superpose(s, terms);
  CHECK(st.amps[0].real() == doctest::Approx(0.5773502691896258));
  CHECK(st.amps[2].real() == doctest::Approx(0.816496580927726));
  CHECK(st.norm() == doctest::Approx(1.0).epsilon(1e-12));

  // single term is a basis state
  auto one = superpose(s, {{ExactAmp(1), {"heads", "down"}}});
  CHECK(one.amps[0] == Complex(1.0));

  // cancellation is a zero-vector error
  std::vector<SuperposeTerm> zero;
  zero.push_back({ExactAmp::sqrt_of(Rational(1, 2)), {"heads", "down"}});
  zero.push_back({-ExactAmp::sqrt_of(Rational(1, 2)), {"heads", "down"}});
  CHECK_THROWS(superpose(s, zero));
}

TEST_CASE("apply_unitary embeds local operators") {
  auto s = coin_spin();
  auto st = basis_state(s, {"heads", "down"});

  Matrix id{{1.0, 0.0}, {0.0, 1.0}};
  auto same = apply_unitary(st, id, {"spin"});
  for (std::size_t i = 0; i < 4; ++i)
    CHECK(std::abs(same.amps[i] - st.amps[i]) < 1e-15);

  double r = 1.0 / std::sqrt(2.0);
  Matrix rot{{r, r}, {r, -r}};
  auto t = apply_unitary(st, rot, {"spin"});
  CHECK(t.amps[0].real() == doctest::Approx(r));
  CHECK(t.amps[1].real() == doctest::Approx(r));
  CHECK(t.norm() == doctest::Approx(1.0).epsilon(1e-12));

  Matrix bad{{0.5, 0.0}, {0.0, 1.0}};
  CHECK_THROWS_WITH(apply_unitary(st, bad, {"spin"}),
                    doctest::Contains("not unitary"));
}

TEST_CASE("norm preservation for random unitaries and states") {
  std::mt19937_64 rng(7);
  auto s = coin_spin();
  for (int trial = 0; trial < 25; ++trial) {
    auto st = random_state(s, rng);
    // random 2x2 unitary from a random phase rotation composition
    std::uniform_real_distribution<double> u(0, 2 * 3.14159265358979);
    double a = u(rng), b = u(rng), c = u(rng);
    Complex e1 = std::polar(1.0, b), e2 = std::polar(1.0, c);
    Matrix m{{std::cos(a) * e1, -std::sin(a) * e2},
             {std::sin(a) * std::conj(e2), std::cos(a) * std::conj(e1)}};
    auto out = apply_unitary(st, m, {"spin"});
    CHECK(std::abs(out.norm() - 1.0) < 1e-10);
    // identity off-target: coin marginal unchanged
    auto coin_basis = ObservableBasis::computational(*s, "coin");
    auto before = born_distribution(st, coin_basis);
    auto after = born_distribution(out, coin_basis);
    for (const auto& [k, v] : before)
      CHECK(after.at(k).p == doctest::Approx(v.p).epsilon(1e-10));
  }
}

TEST_CASE("inner products") {
  auto s = coin_spin();
  auto h = basis_state(s, {"heads", "down"});
  auto t = basis_state(s, {"tails", "down"});
  CHECK(inner_product(h, h) == Complex(1.0));
  CHECK(inner_product(h, t) == Complex(0.0));

  // the two entangled outcome vectors are orthogonal
  auto fr = fr_space(false);
  auto basis = complete_basis(wbar_basis(), *fr);
  Complex ip = 0.0;
  for (std::size_t k = 0; k < 6; ++k)
    ip += std::conj(basis.outcomes[0].amps[k]) * basis.outcomes[1].amps[k];
  CHECK(std::abs(ip) < 1e-15);
}

TEST_CASE("superpose then computational expansion round-trips") {
  std::mt19937_64 rng(11);
  auto s = coin_spin();
  std::vector<SuperposeTerm> terms;
  terms.push_back({ExactAmp::sqrt_of(Rational(1, 12)), {"heads", "down"}});
  terms.push_back({-ExactAmp::sqrt_of(Rational(1, 12)), {"heads", "up"}});
  terms.push_back({ExactAmp::sqrt_of(Rational(1, 12)), {"tails", "down"}});
  terms.push_back({ExactAmp::sqrt_of(Rational(3, 4)), {"tails", "up"}});
  auto st = superpose(s, terms);
  for (const auto& f : {"coin", "spin"}) {
    auto comps = expand_in_basis(st, ObservableBasis::computational(*s, f));
    double sum = 0.0;
    for (const auto& c : comps) sum += c.weight;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }
  // amplitudes recovered exactly
  CHECK(st.amps[0].real() == doctest::Approx(std::sqrt(1.0 / 12.0)));
  CHECK(st.amps[3].real() == doctest::Approx(std::sqrt(3.0) / 2.0));
  REQUIRE(st.has_exact());
  CHECK((*st.exact)[3].squared().as_rational() == Rational(3, 4));
}

TEST_CASE("state dump format") {
  auto s = coin_spin();
  std::vector<SuperposeTerm> terms;
  terms.push_back({ExactAmp::sqrt_of(Rational(1, 3)), {"heads", "down"}});
  terms.push_back({ExactAmp::sqrt_of(Rational(2, 3)), {"tails", "down"}});
  auto st = superpose(s, terms);
  std::string d = dump_state(st);
  CHECK(d ==
        "heads⊗down 0.57735026919 0 [1/3*sqrt(3)]\n"
        "tails⊗down 0.816496580928 0 [1/3*sqrt(6)]\n");
}
