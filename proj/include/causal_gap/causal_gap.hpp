#pragma once

#include "causal_gap/error.hpp"
#include "causal_gap/hsic.hpp"
#include "causal_gap/npreg.hpp"
#include "causal_gap/pairs.hpp"
#include "causal_gap/population.hpp"
#include "causal_gap/quadrature.hpp"
#include "causal_gap/rng.hpp"
#include "causal_gap/scoring.hpp"
#include "causal_gap/sem.hpp"
#include "causal_gap/specfun.hpp"
