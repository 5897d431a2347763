#pragma once

#include "phs/coeffs.hpp"
#include "phs/characteristics.hpp"
#include "phs/statespace.hpp"
#include "phs/scalar_semigroups.hpp"
#include "phs/diagonal_system.hpp"
#include "phs/hamiltonian.hpp"
#include "phs/control_sim.hpp"
#include "phs/config.hpp"
#include "phs/fixtures.hpp"
#include "phs/properties.hpp"
#include "phs/report.hpp"
