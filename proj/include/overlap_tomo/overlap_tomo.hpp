#pragma once

// Umbrella header for the library. The command-line layer lives in
// overlap_tomo/cli.hpp and is not included here.

#include "overlap_tomo/analytic.hpp"
#include "overlap_tomo/config.hpp"
#include "overlap_tomo/errors.hpp"
#include "overlap_tomo/estimator.hpp"
#include "overlap_tomo/io.hpp"
#include "overlap_tomo/linalg.hpp"
#include "overlap_tomo/montecarlo.hpp"
#include "overlap_tomo/parallel.hpp"
#include "overlap_tomo/random.hpp"
#include "overlap_tomo/so3.hpp"
