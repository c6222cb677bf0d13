#pragma once

#include "hotspot/enkf.hpp"
#include "hotspot/ensemble.hpp"
#include "hotspot/environment.hpp"
#include "hotspot/harness.hpp"
#include "hotspot/io.hpp"
#include "hotspot/plume.hpp"
#include "hotspot/qlearning.hpp"
#include "hotspot/rng.hpp"
#include "hotspot/scoring.hpp"
