#pragma once

#include "sledge/assignment.hpp"
#include "sledge/bench.hpp"
#include "sledge/error.hpp"
#include "sledge/geometry.hpp"
#include "sledge/lanegraph.hpp"
#include "sledge/metrics.hpp"
#include "sledge/raster.hpp"
#include "sledge/scene.hpp"
#include "sledge/scene_io.hpp"
#include "sledge/sim.hpp"
#include "sledge/skeleton.hpp"
#include "sledge/suite.hpp"
#include "sledge/svg.hpp"
#include "sledge/world.hpp"
#include "sledge/worldgen.hpp"
