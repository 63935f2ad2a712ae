#pragma once

#include "hdvr/central_solver.hpp"
#include "hdvr/errors.hpp"
#include "hdvr/feeder.hpp"
#include "hdvr/harness.hpp"
#include "hdvr/hierarchy.hpp"
#include "hdvr/opf.hpp"
#include "hdvr/physics.hpp"
#include "hdvr/plant.hpp"
#include "hdvr/run.hpp"
#include "hdvr/saddle.hpp"
