#pragma once

// Umbrella header for the whole library.

#include "lwsat/cnf.hpp"
#include "lwsat/dpll.hpp"
#include "lwsat/error.hpp"
#include "lwsat/eval.hpp"
#include "lwsat/gen.hpp"
#include "lwsat/optim.hpp"
#include "lwsat/parallel.hpp"
#include "lwsat/policy.hpp"
#include "lwsat/rng.hpp"
#include "lwsat/sls.hpp"
#include "lwsat/sweep.hpp"
#include "lwsat/trainer.hpp"
