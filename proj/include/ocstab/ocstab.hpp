/// @file
/// Umbrella header.
#pragma once

#include "ocstab/errors.hpp"
#include "ocstab/grid.hpp"
#include "ocstab/io.hpp"
#include "ocstab/linops.hpp"
#include "ocstab/ode.hpp"
#include "ocstab/oracle.hpp"
#include "ocstab/problem.hpp"
#include "ocstab/solver.hpp"
#include "ocstab/subdiff.hpp"
