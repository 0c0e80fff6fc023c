#pragma once

#include "fleetmig/config.hpp"
#include "fleetmig/econ_kernel.hpp"
#include "fleetmig/error.hpp"
#include "fleetmig/fleet.hpp"
#include "fleetmig/ingest.hpp"
#include "fleetmig/montecarlo.hpp"
#include "fleetmig/patch_model.hpp"
#include "fleetmig/pipeline.hpp"
#include "fleetmig/report.hpp"
#include "fleetmig/rng.hpp"
#include "fleetmig/simulator.hpp"
#include "fleetmig/stage1.hpp"
#include "fleetmig/stage2.hpp"
