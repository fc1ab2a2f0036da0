#pragma once

#include "asyncopt/model_core.hpp"
#include "asyncopt/rng.hpp"
#include "asyncopt/hypergraph_stats.hpp"
#include "asyncopt/objectives.hpp"
#include "asyncopt/serial_solvers.hpp"
#include "asyncopt/async_engine.hpp"
#include "asyncopt/perturbed_sim.hpp"
#include "asyncopt/data_io.hpp"
#include "asyncopt/bench.hpp"
