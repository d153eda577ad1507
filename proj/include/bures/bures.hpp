#pragma once

#include "bures/error.hpp"
#include "bures/spd.hpp"
#include "bures/random.hpp"
#include "bures/parallel.hpp"
#include "bures/geometry.hpp"
#include "bures/solvers.hpp"
#include "bures/diagnostics.hpp"
#include "bures/experiments.hpp"
#include "bures/io.hpp"
