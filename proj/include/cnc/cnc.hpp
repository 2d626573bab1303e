#pragma once

#include "cnc/bench.hpp"
#include "cnc/common.hpp"
#include "cnc/config.hpp"
#include "cnc/dqn.hpp"
#include "cnc/ledger.hpp"
#include "cnc/mlp.hpp"
#include "cnc/policies.hpp"
#include "cnc/random.hpp"
#include "cnc/routing.hpp"
#include "cnc/simulation.hpp"
#include "cnc/tasks.hpp"
#include "cnc/topology.hpp"
