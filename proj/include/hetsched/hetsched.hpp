#pragma once

// Umbrella header for the heterogeneous SoC scheduling workbench.

#include "hetsched/charts.hpp"
#include "hetsched/drm.hpp"
#include "hetsched/harness.hpp"
#include "hetsched/heuristics.hpp"
#include "hetsched/model.hpp"
#include "hetsched/nn.hpp"
#include "hetsched/rng.hpp"
#include "hetsched/sim.hpp"
#include "hetsched/spec_io.hpp"
