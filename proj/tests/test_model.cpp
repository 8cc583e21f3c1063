// Copyright 2026 The eocp Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <catch2/catch.hpp>

#include <cmath>
#include <random>

#include "eocp/model.hpp"
#include "eocp/params.hpp"
#include "test_support.hpp"

using namespace eocp;

namespace {

// single-segment tables everywhere: the model becomes smooth, which the
// integrator-order tests need
VehicleParams smooth_params() {
  VehicleParams p = default_params();
  p.p_ice_max_map = PiecewiseLinear({0.0, 500.0}, {40.0, 90.0});
  p.omega_min_map = PiecewiseLinear({0.0, 60.0}, {100.0, 220.0});
  p.omega_max_map = PiecewiseLinear({0.0, 60.0}, {250.0, 450.0});
  p.p_fr_max_map = PiecewiseLinear({0.0, 60.0}, {20.0, 300.0});
  p.eta_ed_map[0] = PiecewiseLinear({0.0, 1800.0}, {0.85, 0.85});
  p.eta_ed_map[1] = PiecewiseLinear({0.0, 1800.0}, {0.84, 0.84});
  p.p_ed_in_max_map = PiecewiseLinear({0.0, 1800.0}, {20.0, 30.0});
  p.eta_ice_map = BilinearMap({0.0, 90.0}, {0.0, 60.0}, {{0.3, 0.3}, {0.38, 0.38}});
  return p;
}

Eigen::Vector3d plant_field(const VehicleState& x, const ControlVector& u0,
                            const ControlVector& u1, double v, double grade,
                            const VehicleParams& prm) {
  return detail::embedded_rate(x, u0, u1, v, grade, prm, SgnMode::Exact, nullptr);
}

}  // namespace

TEST_CASE("engine speed blends the envelope", "[model]") {
  VehicleParams p = default_params();
  p.omega_min_map = PiecewiseLinear({0.0, 60.0}, {100.0, 100.0});
  p.omega_max_map = PiecewiseLinear({0.0, 60.0}, {300.0, 300.0});
  CHECK(engine_speed(10.0, 0.0, p) == 100.0);
  CHECK(engine_speed(10.0, 1.0, p) == 300.0);
  CHECK(engine_speed(10.0, 0.5, p) == Approx(200.0));

  const VehicleParams d = default_params();
  for (double v : {0.0, 7.5, 22.0, 41.0}) {
    CHECK(engine_speed(v, 0.0, d) == Approx(d.omega_min_map(v)));
    CHECK(engine_speed(v, 1.0, d) == Approx(d.omega_max_map(v)));
  }
}

TEST_CASE("ice dynamics decay and drive terms", "[model]") {
  VehicleParams p = default_params();
  p.tau_ice_s = 0.5;

  SECTION("pure decay at zero command") {
    VehicleState x{40.0, 0.6, 20.0};
    CHECK(ice_dynamics(x, 0.0, p) == Approx(-80.0));
  }

  SECTION("full command from rest power") {
    // flat tables make the available power exactly 80 kW
    p.p_ice_max_map = PiecewiseLinear({0.0, 500.0}, {80.0, 80.0});
    p.omega_min_map = PiecewiseLinear({0.0, 60.0}, {150.0, 150.0});
    p.omega_max_map = PiecewiseLinear({0.0, 60.0}, {300.0, 300.0});
    VehicleState x{0.0, 0.6, 20.0};
    CHECK(ice_dynamics(x, 1.0, p) == Approx(160.0));
  }

  SECTION("equilibrium power equals available power times command") {
    p.p_ice_max_map = PiecewiseLinear({0.0, 500.0}, {80.0, 80.0});
    VehicleState x{0.0, 0.6, 25.0};
    const double u = 0.55;
    // integrate long enough to settle
    IntegrationResult r = integrate_plant(x, {u, 0.0, 0.0}, {u, 0.0, 0.0},
                                          ModeSignal::constant(0.0), 0.0, 10.0,
                                          [](double) { return 0.0; }, p);
    CHECK(r.end_state.p_ice_kw == Approx(80.0 * u).epsilon(1e-6));
  }
}

TEST_CASE("soc dynamics formula and signs", "[model]") {
  const VehicleParams p = default_params();

  SECTION("all terms vanish") {
    VehicleParams q = p;
    q.battery[0].d3 = 0.0;
    CHECK(soc_dynamics({0.0, 0.5, 0.0}, 0.0, 0, q) == 0.0);
  }

  SECTION("mode 0 discharge decreases soc") {
    CHECK(soc_dynamics({0.0, 0.6, 0.0}, 10.0, 0, p) < 0.0);
  }

  SECTION("mode 1 charging increases soc") {
    CHECK(soc_dynamics({0.0, 0.6, 0.0}, -10.0, 1, p) > 0.0);
  }

  SECTION("hand evaluation with default coefficients") {
    // oracle: direct arithmetic on the SOC law at soc=0.6, p_bat=10 kW
    const BatteryCoeffs& d = p.battery[0];
    const double bracket = std::log(d.d2 + d.d1 * 0.6) + 2.0 * d.d3 * 10.0 + d.d4;
    const double expected = d.d3 * 100.0 / p.w_bat_max_kj - bracket * 10.0 / p.w_bat_max_kj;
    const double got = soc_dynamics({0.0, 0.6, 0.0}, 10.0, 0, p);
    CHECK(got == Approx(expected).epsilon(1e-14));
    CHECK(got == Approx(-0.0006350902184235518).epsilon(1e-12));
  }

  SECTION("logarithm domain violation throws") {
    VehicleParams q = p;
    q.battery[0].d1 = -2.0;
    q.battery[0].d2 = 1.0;
    CHECK_THROWS_AS(soc_dynamics({0.0, 0.6, 0.0}, 5.0, 0, q), std::domain_error);
  }
}

TEST_CASE("vehicle dynamics force balance", "[model]") {
  const VehicleParams p = default_params();

  SECTION("everything at rest") {
    CHECK(vehicle_dynamics({0.0, 0.6, 0.0}, 0.0, 0.0, 0.0, p, SgnMode::Exact) == 0.0);
  }

  SECTION("hand evaluation at 20 m/s with 40 kW at the wheels") {
    const double got = vehicle_dynamics({0.0, 0.6, 20.0}, 40.0, 0.0, 0.0, p, SgnMode::Exact);
    const double expected = -(0.4 / 1700.0 * 400.0 + 0.08) + 1000.0 / (1700.0 * 20.1) * 40.0;
    CHECK(got == Approx(expected).epsilon(1e-14));
    CHECK(got == Approx(0.9964998536728125).epsilon(1e-12));
  }

  SECTION("downhill gravity accelerates") {
    const double got = vehicle_dynamics({0.0, 0.6, 10.0}, 0.0, 0.0, -0.05, p, SgnMode::Exact);
    const double resist = -(0.4 / 1700.0 * 100.0 + 0.08 * std::cos(0.05));
    CHECK(got > resist);  // gravity term is positive
    CHECK(-p.g_mps2 * std::sin(-0.05) > 0.0);
  }

  SECTION("smooth surrogate approaches exact sign away from zero") {
    const double ex = vehicle_dynamics({0.0, 0.6, 25.0}, 30.0, 0.0, 0.01, p, SgnMode::Exact);
    const double sm = vehicle_dynamics({0.0, 0.6, 25.0}, 30.0, 0.0, 0.01, p, SgnMode::Smooth);
    CHECK(sm == Approx(ex).margin(2e-3));
  }
}

TEST_CASE("friction power modulates the table", "[model]") {
  VehicleParams p = default_params();
  CHECK(friction_power(12.0, 0.0, p) == 0.0);
  CHECK(friction_power(12.0, 1.0, p) == Approx(p.p_fr_max_map(12.0)));
  p.p_fr_max_map = PiecewiseLinear({0.0, 60.0}, {60.0, 60.0});
  CHECK(friction_power(30.0, 0.5, p) == Approx(30.0));
}

TEST_CASE("ed power at the rotor speed", "[model]") {
  VehicleParams p = default_params();
  SECTION("zero and full modulation") {
    const EdPower z = ed_power(15.0, 0.0, 0, p);
    CHECK(z.in_kw == 0.0);
    CHECK(z.out_kw == 0.0);
    const double omega = p.beta_rad_per_m * 15.0;
    const EdPower f = ed_power(15.0, 1.0, 0, p);
    CHECK(f.in_kw == Approx(p.p_ed_in_max_map(omega)));
    CHECK(f.out_kw == Approx(p.eta_ed_map[0](omega) * f.in_kw));
  }
  SECTION("known arithmetic") {
    p.eta_ed_map[0] = PiecewiseLinear({0.0, 1800.0}, {0.9, 0.9});
    p.p_ed_in_max_map = PiecewiseLinear({0.0, 1800.0}, {30.0, 30.0});
    const EdPower e = ed_power(10.0, 0.5, 0, p);
    CHECK(e.in_kw == Approx(15.0));
    CHECK(e.out_kw == Approx(13.5));
  }
}

TEST_CASE("drivetrain flows per mode", "[model]") {
  const VehicleParams p = default_params();

  SECTION("all zero") {
    const PowerFlows f = drivetrain_flows({0.0, 0.6, 0.0}, {0.0, 0.0, 0.0}, 0, p);
    CHECK(f.p_cvt_out_kw == 0.0);
    CHECK(f.p_cdd_wh_kw == 0.0);
    CHECK(f.p_ed_out_kw == 0.0);
    CHECK(f.p_bat_kw == 0.0);
    CHECK(f.p_fuel_kw == 0.0);
  }

  SECTION("lossless driveline sums exactly") {
    VehicleParams q = p;
    q.eta_cvt = q.eta_cdd1 = q.eta_cdd2 = 1.0;
    const VehicleState x{30.0, 0.6, 18.0};
    const ControlVector u{0.2, 0.0, 0.7};
    const PowerFlows f = drivetrain_flows(x, u, 0, q);
    CHECK(f.p_cdd_wh_kw == Approx(x.p_ice_kw + f.p_ed_out_kw).epsilon(1e-14));
  }

  SECTION("mode-1 balance re-substitutes to machine precision") {
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    for (int i = 0; i < 50; ++i) {
      const VehicleState x{U(rng) * 80.0, 0.3 + 0.5 * U(rng), U(rng) * 30.0};
      const ControlVector u{U(rng), U(rng), U(rng)};
      const PowerFlows f = drivetrain_flows(x, u, 1, p);
      // coupling-device equation: p_ed_in = eta_cdd2 * p_cvt - eta_cdd2 * p_cdd_wh
      const double lhs = f.p_ed_in_kw;
      const double rhs = p.eta_cdd2 * f.p_cvt_out_kw - p.eta_cdd2 * f.p_cdd_wh_kw;
      CHECK(lhs == Approx(rhs).margin(1e-12));
      CHECK(f.p_bat_kw <= 0.0);
      CHECK(f.p_bat_kw == Approx(-f.p_ed_out_kw));
    }
  }

  SECTION("mode-0 battery power is never negative") {
    std::mt19937 rng(8);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    for (int i = 0; i < 50; ++i) {
      const PowerFlows f = drivetrain_flows({U(rng) * 80.0, 0.5, U(rng) * 30.0},
                                            {U(rng), U(rng), U(rng)}, 0, p);
      CHECK(f.p_bat_kw >= 0.0);
      CHECK(f.p_bat_kw == Approx(f.p_ed_in_kw));
      CHECK(f.p_fr_kw >= 0.0);
    }
  }
}

TEST_CASE("mode dynamics assembly", "[model]") {
  const VehicleParams p = default_params();

  SECTION("rest state leaves only the soc drift") {
    const ModeEval e = mode_dynamics({0.0, 0.6, 0.0}, {0.0, 0.0, 0.0}, 0, 0.0, p, SgnMode::Exact);
    CHECK(e.rate.p_ice_kw_s == 0.0);
    CHECK(e.rate.v_mps2 == 0.0);
    const double drift = p.battery[0].d3 * 100.0 / p.w_bat_max_kj;
    CHECK(e.rate.soc_per_s == Approx(drift));
  }

  SECTION("idle-ED modes differ only through battery coefficients and the CDD path") {
    const VehicleState x{25.0, 0.55, 16.0};
    const ControlVector u{0.4, 0.1, 0.0};
    const ModeEval e0 = mode_dynamics(x, u, 0, 0.01, p);
    const ModeEval e1 = mode_dynamics(x, u, 1, 0.01, p);
    CHECK(e0.rate.p_ice_kw_s == Approx(e1.rate.p_ice_kw_s));
    // the coupling device applies eta_cdd1 to CVT power when motoring; the
    // generating-mode balance routes CVT power without it
    CHECK(e0.flows.p_cdd_wh_kw == Approx(p.eta_cdd1 * e1.flows.p_cdd_wh_kw));
    const double dv = e1.rate.v_mps2 - e0.rate.v_mps2;
    const double want =
        1000.0 / (p.m_c_kg * (x.v_mps + p.eps_v_mps)) * (1.0 - p.eta_cdd1) * e1.flows.p_cvt_out_kw;
    CHECK(dv == Approx(want).margin(1e-12));
    // default nominal powers are symmetric, so the idle drift coincides; a
    // per-mode d3 splits it
    CHECK(e0.rate.soc_per_s == Approx(e1.rate.soc_per_s));
    VehicleParams q = p;
    q.battery[1].d3 = 2e-3;
    CHECK(mode_dynamics(x, u, 0, 0.01, q).rate.soc_per_s !=
          mode_dynamics(x, u, 1, 0.01, q).rate.soc_per_s);
  }

  SECTION("superposition: both vector fields are affine in the controls") {
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    for (int i = 0; i < 300; ++i) {
      const VehicleState x{U(rng) * 85.0, 0.2 + 0.6 * U(rng), U(rng) * 29.0};
      const ControlVector ua{U(rng), U(rng), U(rng)};
      const ControlVector ub{U(rng), U(rng), U(rng)};
      const double al = U(rng);
      const ControlVector umix{al * ua.ice + (1 - al) * ub.ice, al * ua.fr + (1 - al) * ub.fr,
                               al * ua.mode + (1 - al) * ub.mode};
      for (int mode = 0; mode < 2; ++mode) {
        const Eigen::Vector3d fa = mode_dynamics(x, ua, mode, 0.02, p).rate.vec();
        const Eigen::Vector3d fb = mode_dynamics(x, ub, mode, 0.02, p).rate.vec();
        const Eigen::Vector3d fm = mode_dynamics(x, umix, mode, 0.02, p).rate.vec();
        const Eigen::Vector3d want = al * fa + (1 - al) * fb;
        for (int k = 0; k < 3; ++k) {
          CHECK(fm[k] == Approx(want[k]).epsilon(1e-9).margin(1e-12));
        }
      }
    }
  }

  SECTION("engine power stays in its invariant interval") {
    // inward-pointing derivative at both endpoints, densely sampled
    const double p_hi = p.p_ice_box_max_kw();
    for (double v = 0.0; v <= 30.0; v += 1.5) {
      for (double u = 0.0; u <= 1.0; u += 0.125) {
        CHECK(ice_dynamics({0.0, 0.5, v}, u, p) >= 0.0);
        CHECK(ice_dynamics({p_hi, 0.5, v}, u, p) <= 1e-12);
      }
    }
  }
}

TEST_CASE("plant integration", "[model]") {
  const auto flat = [](double) { return 0.0; };

  SECTION("frozen dynamics keep the state") {
    VehicleParams p = default_params();
    p.battery[0].d3 = 0.0;  // no drift
    const VehicleState x0{0.0, 0.5, 0.0};
    const IntegrationResult r = integrate_plant(x0, {}, {}, ModeSignal::constant(0.0), 0.0, 2.0,
                                                flat, p);
    CHECK(r.end_state.p_ice_kw == 0.0);
    CHECK(r.end_state.soc == 0.5);
    CHECK(r.end_state.v_mps == 0.0);
  }

  SECTION("engine decay matches the closed form") {
    const VehicleParams p = default_params();
    const VehicleState x0{40.0, 0.6, 20.0};
    const IntegrationResult r = integrate_plant(x0, {}, {}, ModeSignal::constant(0.0), 0.0, 3.0,
                                                flat, p, 0.01);
    CHECK(r.end_state.p_ice_kw == Approx(40.0 * std::exp(-3.0 / p.tau_ice_s)).epsilon(1e-6));
  }

  SECTION("rk4 tracks the adaptive reference to 1e-4 over 10 s") {
    const VehicleParams p = default_params();
    const VehicleState x0{10.0, 0.6, 12.0};
    const ControlVector u0{0.5, 0.0, 0.4};
    const ControlVector u1{0.5, 0.0, 0.4};
    const double v = 0.3;
    const IntegrationResult r =
        integrate_plant(x0, u0, u1, ModeSignal::constant(v), 0.0, 10.0, flat, p);
    const Eigen::Vector3d ref = eocp_test::integrate_reference(
        [&](double, const Eigen::VectorXd& s) -> Eigen::VectorXd {
          return plant_field(VehicleState::from_vec(s), u0, u1, v, 0.0, p);
        },
        x0.vec(), 0.0, 10.0);
    CHECK((r.end_state.vec() - ref).lpNorm<Eigen::Infinity>() < 1e-4);
  }

  SECTION("halving the substep cuts the error at fourth order") {
    const VehicleParams p = smooth_params();
    const VehicleState x0{20.0, 0.55, 15.0};
    const ControlVector u0{0.55, 0.02, 0.45};
    const ControlVector u1{0.55, 0.02, 0.45};
    const double v = 0.25;
    const Eigen::Vector3d ref = eocp_test::integrate_reference(
        [&](double, const Eigen::VectorXd& s) -> Eigen::VectorXd {
          return plant_field(VehicleState::from_vec(s), u0, u1, v, 0.0, p);
        },
        x0.vec(), 0.0, 10.0, 1e-12, 1e-14);
    auto err = [&](double sub) {
      const IntegrationResult r =
          integrate_plant(x0, u0, u1, ModeSignal::constant(v), 0.0, 10.0, flat, p, sub);
      return (r.end_state.vec() - ref).lpNorm<Eigen::Infinity>();
    };
    const double e1 = err(0.05);
    const double e2 = err(0.025);
    CHECK(e1 / e2 >= 8.0);
  }

  SECTION("mode switches split the integration grid") {
    const VehicleParams p = default_params();
    const ModeSignal sig({1.0, 2.5}, {0.0, 1.0, 0.0});
    const IntegrationResult r = integrate_plant({20.0, 0.6, 15.0}, {0.5, 0.0, 0.5},
                                                {0.3, 0.0, 0.6}, sig, 0.0, 4.0, flat, p);
    bool saw_switch_time = false;
    for (const auto& s : r.segment.samples) {
      if (s.t_s == 2.5) saw_switch_time = true;
    }
    CHECK(saw_switch_time);
    CHECK(r.segment.samples.front().v_mode == 0.0);
  }

  SECTION("clamping is logged") {
    const VehicleParams p = default_params();
    // friction hard on at rest drives V negative; the clamp catches it
    const IntegrationResult r = integrate_plant({0.0, 0.6, 0.5}, {0.0, 1.0, 0.0}, {0.0, 1.0, 0.0},
                                                ModeSignal::constant(0.0), 0.0, 2.0, flat, p);
    CHECK(r.segment.clamp_events > 0);
    CHECK(r.end_state.v_mps >= 0.0);
  }

  SECTION("non-finite states abort with a diagnostic") {
    const VehicleParams p = default_params();
    const auto nan_grade = [](double t) {
      return t > 0.5 ? std::numeric_limits<double>::quiet_NaN() : 0.0;
    };
    CHECK_THROWS_AS(integrate_plant({10.0, 0.6, 10.0}, {0.5, 0.0, 0.2}, {}, ModeSignal::constant(0.0),
                                    0.0, 2.0, nan_grade, p),
                    std::runtime_error);
  }

  SECTION("duration must be positive") {
    CHECK_THROWS_AS(integrate_plant({}, {}, {}, ModeSignal::constant(0.0), 0.0, 0.0, flat,
                                    default_params()),
                    std::invalid_argument);
  }
}
