#pragma once

#include "causalglm/basis.hpp"
#include "causalglm/bench.hpp"
#include "causalglm/dataset.hpp"
#include "causalglm/disptest.hpp"
#include "causalglm/edf.hpp"
#include "causalglm/fit.hpp"
#include "causalglm/parallel.hpp"
#include "causalglm/report.hpp"
#include "causalglm/rng.hpp"
#include "causalglm/search.hpp"
#include "causalglm/simulate.hpp"
#include "causalglm/special.hpp"
#include "causalglm/version.hpp"
