#include <doctest.h>

#include <array>
#include <vector>

#include "nqs/lattice.hpp"
#include "nqs/spin.hpp"

using namespace nqs;

TEST_CASE("bond counts match hand counts") {
  CHECK(build_lattice(1, 1, Boundary::open).bonds.size() == 0);
  CHECK(build_lattice(1, 4, Boundary::open).bonds.size() == 3);
  CHECK(build_lattice(1, 4, Boundary::periodic).bonds.size() == 4);
  CHECK(build_lattice(2, 2, Boundary::open).bonds.size() == 4);
  // Wrap bonds along a dimension of size <= 2 would duplicate open bonds.
  CHECK(build_lattice(2, 2, Boundary::periodic).bonds.size() == 4);
  CHECK(build_lattice(3, 3, Boundary::open).bonds.size() == 12);
  CHECK(build_lattice(3, 3, Boundary::periodic).bonds.size() == 18);
  CHECK(build_lattice(4, 4, Boundary::open).bonds.size() == 24);
  CHECK(build_lattice(4, 4, Boundary::periodic).bonds.size() == 32);
  CHECK(build_lattice(2, 3, Boundary::open).bonds.size() == 7);
}

TEST_CASE("bond ordering is horizontal then vertical, row-major") {
  const Lattice lat = build_lattice(2, 3, Boundary::open);
  const std::vector<std::array<int, 2>> expected = {
      {0, 1}, {1, 2}, {3, 4}, {4, 5},  // horizontal
      {0, 3}, {1, 4}, {2, 5},          // vertical
  };
  REQUIRE(lat.bonds.size() == expected.size());
  for (std::size_t i = 0; i < expected.size(); ++i) {
    CHECK(lat.bonds[i][0] == expected[i][0]);
    CHECK(lat.bonds[i][1] == expected[i][1]);
  }
}

TEST_CASE("site zero is the most significant bit and bit 0 means spin up") {
  // 4 sites: site index counts down from the top bit.
  CHECK(config_spin(0b0000, 0, 4) == 1.0);
  CHECK(config_spin(0b1000, 0, 4) == -1.0);
  CHECK(config_spin(0b1000, 1, 4) == 1.0);
  CHECK(config_spin(0b0001, 3, 4) == -1.0);
  CHECK(SpinConfig(0b0110, 4).flipped(0).bits == 0b1110);
}

TEST_CASE("critical couplings") {
  CHECK(k_gc_square == 3.044);
  CHECK(k_gc_chain == 1.0);
}

TEST_CASE("schedules resolve couplings over time") {
  const auto c = QuenchSchedule::constant(1.5, 0.7);
  CHECK(c.at(0.0).J == 1.5);
  CHECK(c.at(3.0).g == 0.7);
  CHECK(c.g_scale() == doctest::Approx(0.7));

  const auto s = QuenchSchedule::sudden(1.0, 6.0);
  CHECK(s.at(0.0).J == 1.0);
  CHECK(s.at(0.0).g == 6.0);
  CHECK(s.at(2.0).g == 6.0);
  CHECK(s.g_scale() == doctest::Approx(6.0));

  const auto r = QuenchSchedule::linear_ramp(2.0, 3.044, 0.5);
  CHECK(r.at(0.0).J == doctest::Approx(2.0));
  CHECK(r.at(0.0).g == doctest::Approx(3.044));
  CHECK(r.at(0.25).J == doctest::Approx(1.0));
  CHECK(r.at(0.25).g == doctest::Approx(1.5 * 3.044));
  CHECK(r.at(0.5).J == doctest::Approx(0.0));
  CHECK(r.at(0.5).g == doctest::Approx(2.0 * 3.044));
  CHECK(r.g_scale() == doctest::Approx(2.0 * 3.044));
  CHECK(r.t_end_hint() == doctest::Approx(0.5));
}

TEST_CASE("connected elements list one diagonal and one entry per flip") {
  const Lattice lat = build_lattice(2, 2, Boundary::open);
  std::vector<ConnectedEntry> row;
  connected_elements(lat, 1.0, 0.5, 0b0000, row);
  REQUIRE(row.size() == 5);
  // All-up diagonal: every bond aligned, -J * 4.
  CHECK(row[0].config == 0b0000);
  CHECK(row[0].amplitude == doctest::Approx(-4.0));
  double offdiag = 0.0;
  for (std::size_t i = 1; i < row.size(); ++i) offdiag += row[i].amplitude;
  CHECK(offdiag == doctest::Approx(4 * 0.5));
  CHECK(ising_diagonal(lat, 0b0000) == doctest::Approx(4.0));

  // One anti-aligned pair on an up-down configuration.
  connected_elements(lat, 2.0, 0.0, 0b1000, row);
  REQUIRE(row.size() == 1);  // no flips at g = 0
  CHECK(row[0].amplitude == doctest::Approx(-2.0 * (2 - 2)));
}
