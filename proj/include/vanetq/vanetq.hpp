#pragma once

#include "category.hpp"
#include "channel.hpp"
#include "edge_server.hpp"
#include "metrics.hpp"
#include "mobility.hpp"
#include "rl.hpp"
#include "runner.hpp"
#include "scenario.hpp"
#include "sim_core.hpp"
#include "simulation.hpp"
#include "text_io.hpp"
