#pragma once

#include "opelab/analysis.hpp"
#include "opelab/errors.hpp"
#include "opelab/estimators.hpp"
#include "opelab/exact.hpp"
#include "opelab/harness.hpp"
#include "opelab/mdp.hpp"
#include "opelab/numerics.hpp"
#include "opelab/plot.hpp"
#include "opelab/rng.hpp"
#include "opelab/sampler.hpp"
#include "opelab/synth.hpp"
