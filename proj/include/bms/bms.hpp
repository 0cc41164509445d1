#pragma once

// Umbrella header.

#include "bms/core.hpp"
#include "bms/detect.hpp"
#include "bms/errors.hpp"
#include "bms/expressiveness.hpp"
#include "bms/generate.hpp"
#include "bms/gnn.hpp"
#include "bms/graphbuild.hpp"
#include "bms/graphmetrics.hpp"
#include "bms/ingest.hpp"
#include "bms/manifest.hpp"
#include "bms/numerics.hpp"
#include "bms/predict.hpp"
