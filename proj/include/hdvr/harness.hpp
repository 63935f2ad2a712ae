#pragma once

#include "hdvr/harness/feeder_io.hpp"
#include "hdvr/harness/generator.hpp"
#include "hdvr/harness/scenario.hpp"
#include "hdvr/harness/trace_io.hpp"
