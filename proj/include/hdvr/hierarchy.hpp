#pragma once

#include "hdvr/hierarchy/messages.hpp"
#include "hdvr/hierarchy/partition.hpp"
#include "hdvr/hierarchy/solver.hpp"
#include "hdvr/hierarchy/views.hpp"
