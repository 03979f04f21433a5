#pragma once

#include "greendc/config.hpp"
#include "greendc/engine.hpp"
#include "greendc/error.hpp"
#include "greendc/ledger.hpp"
#include "greendc/metrics.hpp"
#include "greendc/network.hpp"
#include "greendc/power.hpp"
#include "greendc/report.hpp"
#include "greendc/scheduler.hpp"
#include "greendc/state.hpp"
#include "greendc/topology.hpp"
#include "greendc/workload.hpp"
