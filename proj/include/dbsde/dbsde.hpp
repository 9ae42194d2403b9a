#pragma once

#include "csv.hpp"
#include "delayed_bsde.hpp"
#include "errors.hpp"
#include "feynman_kac.hpp"
#include "finance.hpp"
#include "forward_sde.hpp"
#include "generators.hpp"
#include "log.hpp"
#include "oracles.hpp"
#include "parallel.hpp"
#include "paths.hpp"
#include "regression.hpp"
#include "rng.hpp"
