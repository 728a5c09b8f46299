#pragma once

// Numerical laboratory for distances between closed sets and the mild
// solutions of deterministic and stochastic evolution equations.

#include "setdist/bounds.hpp"
#include "setdist/errors.hpp"
#include "setdist/evolution.hpp"
#include "setdist/grid.hpp"
#include "setdist/interp.hpp"
#include "setdist/io.hpp"
#include "setdist/linalg.hpp"
#include "setdist/models.hpp"
#include "setdist/nagumo.hpp"
#include "setdist/parallel.hpp"
#include "setdist/rng.hpp"
#include "setdist/sets.hpp"
#include "setdist/spaces.hpp"
#include "setdist/stochastic.hpp"
