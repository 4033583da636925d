#pragma once

#include "carsim/types.hpp"
#include "carsim/kolmo_map.hpp"
#include "carsim/registry.hpp"
#include "carsim/spectral.hpp"
#include "carsim/assumptions.hpp"
#include "carsim/simplex_grid.hpp"
#include "carsim/metrics.hpp"
#include "carsim/radial.hpp"
#include "carsim/graph_transform.hpp"
#include "carsim/carrying_simplex.hpp"
#include "carsim/io.hpp"
#include "carsim/commands.hpp"
