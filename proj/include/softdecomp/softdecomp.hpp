#pragma once

#include "vertex_set.hpp"
#include "hypergraph.hpp"
#include "decomposition.hpp"
#include "candidate_bags.hpp"
#include "ctd_solver.hpp"
#include "cost_model.hpp"
#include "constraints.hpp"
#include "oracles.hpp"
#include "cq.hpp"
#include "gallery.hpp"
