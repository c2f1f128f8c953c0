#pragma once

#include "lqteam/errors.hpp"
#include "lqteam/linalg.hpp"
#include "lqteam/team_model.hpp"
#include "lqteam/riccati.hpp"
#include "lqteam/tree_solver.hpp"
#include "lqteam/info_graph.hpp"
#include "lqteam/delayed_solver.hpp"
#include "lqteam/policy.hpp"
#include "lqteam/moments.hpp"
#include "lqteam/rng.hpp"
#include "lqteam/simulator.hpp"
