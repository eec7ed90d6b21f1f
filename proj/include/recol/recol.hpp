#pragma once

// Umbrella header for the whole library.

#include "recol/core.hpp"
#include "recol/engine.hpp"
#include "recol/experiment.hpp"
#include "recol/feature_matrix.hpp"
#include "recol/fusion.hpp"
#include "recol/metrics.hpp"
#include "recol/od.hpp"
#include "recol/regressors.hpp"
#include "recol/serialize.hpp"
#include "recol/table.hpp"
#include "recol/version.hpp"
