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

#include <random>

#include "eocp/cost.hpp"
#include "eocp/model.hpp"

using namespace eocp;

TEST_CASE("stage cost terms", "[cost]") {
  const VehicleParams p = default_params();
  const CostWeights w = default_weights();

  SECTION("all residuals zero") {
    const VehicleState x{0.0, 0.6, 17.0};
    const ControlVector u{0.0, 0.0, 0.0};
    const PowerFlows f = drivetrain_flows(x, u, 0, p);
    CHECK(stage_cost(x, u, 0, 17.0, f, w) == 0.0);
  }

  SECTION("unit tracking error costs c_v") {
    const VehicleState x{0.0, 0.6, 18.0};
    const PowerFlows f = drivetrain_flows(x, {0.0, 0.0, 0.0}, 0, p);
    CHECK(stage_cost(x, {0.0, 0.0, 0.0}, 0, 17.0, f, w) == Approx(10.0));
  }

  SECTION("fuel term with the efficiency table") {
    // eta(40 kW, 20 m/s) is exactly the 0.40 table node
    const VehicleState x{40.0, 0.6, 20.0};
    const ControlVector u{0.0, 0.0, 0.0};
    const PowerFlows f = drivetrain_flows(x, u, 0, p);
    CHECK(f.p_fuel_kw == Approx(100.0));
    CHECK(stage_cost(x, u, 0, 20.0, f, w) == Approx(10.0));
  }

  SECTION("identical integrand in both modes") {
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    for (int i = 0; i < 30; ++i) {
      const VehicleState x{U(rng) * 80.0, 0.3 + 0.4 * U(rng), U(rng) * 25.0};
      const ControlVector u{U(rng), U(rng), U(rng)};
      const double vdes = U(rng) * 25.0;
      const double l0 = stage_cost(x, u, 0, vdes, drivetrain_flows(x, u, 0, p), w);
      const double l1 = stage_cost(x, u, 1, vdes, drivetrain_flows(x, u, 1, p), w);
      CHECK(l0 == Approx(l1).margin(1e-12));
      CHECK(l0 >= 0.0);
    }
  }
}

TEST_CASE("embedded stage cost", "[cost]") {
  const VehicleParams p = default_params();
  const CostWeights w = default_weights();
  const VehicleState x{30.0, 0.55, 14.0};
  const ControlVector u0{0.4, 0.1, 0.6};
  const ControlVector u1{0.2, 0.3, 0.5};
  const double vdes = 15.0;

  const double l0 = stage_cost(x, u0, 0, vdes, drivetrain_flows(x, u0, 0, p), w);
  const double l1 = stage_cost(x, u1, 1, vdes, drivetrain_flows(x, u1, 1, p), w);

  SECTION("endpoints are the single-mode integrands") {
    CHECK(embedded_stage_cost(x, u0, u1, 0.0, vdes, p, w) == l0);
    CHECK(embedded_stage_cost(x, u0, u1, 1.0, vdes, p, w) == l1);
  }

  SECTION("convex midpoint") {
    CHECK(embedded_stage_cost(x, u0, u1, 0.5, vdes, p, w) == Approx(0.5 * (l0 + l1)));
  }

  SECTION("affine in the mode variable: zero second difference") {
    for (double v = 0.1; v < 0.95; v += 0.2) {
      const double lm = embedded_stage_cost(x, u0, u1, v - 0.05, vdes, p, w);
      const double lc = embedded_stage_cost(x, u0, u1, v, vdes, p, w);
      const double lp = embedded_stage_cost(x, u0, u1, v + 0.05, vdes, p, w);
      CHECK(std::abs(lp - 2.0 * lc + lm) <= 1e-12 * std::max(1.0, std::abs(lc)));
    }
  }
}

TEST_CASE("terminal cost", "[cost]") {
  const CostWeights w = default_weights();
  CHECK(terminal_cost(w.soc_nom, 1e5, w) == 0.0);
  CHECK(terminal_cost(0.55, 1e5, w) == Approx(250.0));
  CHECK(terminal_cost(0.1, 0.0, w) == 0.0);
}

TEST_CASE("stage integrands are convex in the controls", "[cost]") {
  const VehicleParams p = default_params();
  const CostWeights w = default_weights();
  std::mt19937 rng(17);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    const VehicleState x{U(rng) * 85.0, 0.2 + 0.6 * U(rng), U(rng) * 28.0};
    const double vdes = U(rng) * 25.0;
    const ControlVector ua{U(rng), U(rng), U(rng)};
    const ControlVector ub{U(rng), U(rng), U(rng)};
    const double al = U(rng);
    const ControlVector um{al * ua.ice + (1 - al) * ub.ice, al * ua.fr + (1 - al) * ub.fr,
                           al * ua.mode + (1 - al) * ub.mode};
    for (int mode = 0; mode < 2; ++mode) {
      const double la = stage_cost(x, ua, mode, vdes, drivetrain_flows(x, ua, mode, p), w);
      const double lb = stage_cost(x, ub, mode, vdes, drivetrain_flows(x, ub, mode, p), w);
      const double lm = stage_cost(x, um, mode, vdes, drivetrain_flows(x, um, mode, p), w);
      CHECK(lm <= al * la + (1 - al) * lb + 1e-9);
    }
  }
}

TEST_CASE("soc band penalty", "[cost]") {
  const CostWeights w = default_weights();

  SECTION("zero inside the band") {
    CHECK(soc_band_penalty(0.5, w) == 0.0);
    CHECK(soc_band_penalty(w.soc_min, w) == 0.0);
    CHECK(soc_band_penalty(w.soc_max, w) == 0.0);
  }

  SECTION("quadratic escalation outside") {
    CHECK(soc_band_penalty(0.35, w) == Approx(10.0 * w.c_bat_nom * 0.05 * 0.05));
    CHECK(soc_band_penalty(0.9, w) == Approx(10.0 * w.c_bat_nom * 0.1 * 0.1));
  }

  SECTION("gradient matches finite differences") {
    for (double soc : {0.3, 0.39, 0.45, 0.85, 0.95}) {
      double g;
      soc_band_penalty(soc, w, &g);
      const double h = 1e-7;
      const double fd = (soc_band_penalty(soc + h, w) - soc_band_penalty(soc - h, w)) / (2 * h);
      CHECK(g == Approx(fd).margin(1e-2));
    }
  }
}
