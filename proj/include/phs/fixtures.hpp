#pragma once

// Built-in fixture configurations. The same texts ship as fixtures/<name>.toml;
// a unit test keeps the two copies identical.

#include <string>
#include <string_view>
#include <vector>

#include "phs/config.hpp"

namespace phs {

struct Fixture {
  std::string_view name;
  std::string_view text;
};

inline const std::vector<Fixture>& fixtures() {
  static const std::vector<Fixture> list{
      {"weighted-transport", R"toml(# x_t = -(h x)' on [0, inf) with h = 1/(1 + xi); one boundary condition (h x)(0) = u
name = "weighted-transport"
description = "scalar weighted transport moving away from 0, boundary input (h x)(0) = u"

[system]
P1 = [[-1]]
scale = 1.0

[[system.H.entry]]
row = 0
col = 0
kind = "affine_reciprocal"
c = 1.0
a = 1.0

[boundary]
W_B1 = [[1]]

[grid]
layout = "uniform"
R_max = 6.0
nodes = 1201

[simulation]
T = 1.0
snapshot_every = 50

[[simulation.initial]]
component = 0
a = 0.5
b = 2.0
amplitude = 1.0

[simulation.input]
knots = [0.0, 0.25, 0.5, 0.75, 1.0]
values = [[0.0, 0.2, 0.5, 0.2, 0.0]]

[certificate]
tau = 1.0
trials = 8

[seeds]
properties = 1
)toml"},
      {"transport-network-5", R"toml(# Five unit-speed transport equations meeting at a node: edges 1-3 carry mass
# into the node, edges 4 and 5 carry it away with x4(0) = x2(0) - x3(0) and
# x5(0) = x2(0) - x1(0). Both coupling rows act as inputs; u = 0 is the closed network.
name = "transport-network-5"
description = "network of five transport equations coupled at a central node"

[system]
P1 = [[1, 0, 0, 0, 0], [0, 1, 0, 0, 0], [0, 0, 1, 0, 0], [0, 0, 0, -1, 0], [0, 0, 0, 0, -1]]
scale = 1.0

[system.H]
matrix = [[1, 0, 0, 0, 0], [0, 1, 0, 0, 0], [0, 0, 1, 0, 0], [0, 0, 0, 1, 0], [0, 0, 0, 0, 1]]

[boundary]
W_B1 = [[1, -1, 0, 0, 1], [0, -1, 1, 1, 0]]
W_C = [[1, 0, 0, 0, 0], [0, 1, 0, 0, 0], [0, 0, 1, 0, 0]]

[grid]
layout = "uniform"
R_max = 4.0
nodes = 801

[simulation]
T = 1.0
snapshot_every = 20

[[simulation.initial]]
component = 1
a = 0.2
b = 0.9
amplitude = 1.0

[certificate]
tau = 1.0
trials = 32

[seeds]
properties = 1
)toml"},
      {"vibrating-string-constant", R"toml(# Undamped string with rho = T = 1: x1 = rho w_t (momentum), x2 = w_xi (strain).
# Input: velocity at 0, output: force at 0.
name = "vibrating-string-constant"
description = "vibrating string with constant coefficients, velocity input and force output"

[system]
P1 = [[0, 1], [1, 0]]
scale = 0.5

[system.H]
matrix = [[1, 0], [0, 1]]

[boundary]
W_B1 = [[1, 0]]
W_C = [[0, 1]]

[grid]
layout = "uniform"
R_max = 6.0
nodes = 1201

[simulation]
T = 2.0
snapshot_every = 50

[[simulation.initial]]
component = 0
a = 0.5
b = 2.0
amplitude = 1.0

[[simulation.initial]]
component = 1
a = 1.0
b = 3.0
amplitude = -0.5

[certificate]
tau = 1.0
trials = 8

[seeds]
properties = 1
)toml"},
      {"vibrating-string-case3", R"toml(# String with rho = 1/xi and T = 1/xi^3 for xi >= 1 and C^1 blends on [0, 1).
# H = diag(1/rho, T); force input T x2 at 0, velocity output.
name = "vibrating-string-case3"
description = "vibrating string whose density and tension decay at infinity"

[system]
P1 = [[0, 1], [1, 0]]
scale = 0.5

[[system.H.entry]]
row = 0
col = 0
kind = "power_tail"
c = 1.0
alpha = 1.0
value0 = 1.0
slope0 = 0.0

[[system.H.entry]]
row = 1
col = 1
kind = "power_tail"
c = 1.0
alpha = -3.0
value0 = 1.0
slope0 = 0.0

[boundary]
W_B1 = [[0, 1]]
W_C = [[1, 0]]

[grid]
layout = "uniform"
R_max = 5.0
nodes = 1001

[simulation]
T = 1.0
snapshot_every = 50

[[simulation.initial]]
component = 0
a = 1.5
b = 3.0
amplitude = 1.0

[[simulation.initial]]
component = 1
a = 1.2
b = 2.5
amplitude = 1.0

[certificate]
tau = 1.0
trials = 8

[seeds]
properties = 1
)toml"},
  };
  return list;
}

inline const Fixture* find_fixture(std::string_view name) {
  for (const auto& f : fixtures())
    if (f.name == name) return &f;
  return nullptr;
}

inline SystemConfig load_fixture(std::string_view name) {
  const Fixture* f = find_fixture(name);
  if (!f) throw ConfigError("unknown fixture '" + std::string(name) + "'", "fixtures");
  return parse_config(std::string(f->text));
}

}  // namespace phs
