#pragma once

#include "latre/baselines.hpp"
#include "latre/errors.hpp"
#include "latre/identification.hpp"
#include "latre/model.hpp"
#include "latre/propensity.hpp"
#include "latre/rng.hpp"
#include "latre/simgen.hpp"
#include "latre/stats.hpp"
#include "latre/weights.hpp"
