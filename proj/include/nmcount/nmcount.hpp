#pragma once

#include "nmcount/atom_models.hpp"
#include "nmcount/detection.hpp"
#include "nmcount/errors.hpp"
#include "nmcount/ld_solver.hpp"
#include "nmcount/linalg.hpp"
#include "nmcount/n_resolved.hpp"
#include "nmcount/rng.hpp"
#include "nmcount/trajectory.hpp"
