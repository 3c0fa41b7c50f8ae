#pragma once

// Umbrella header for the core library (no networking).

#include "occlusim/analysis.hpp"
#include "occlusim/detector.hpp"
#include "occlusim/error.hpp"
#include "occlusim/metrics.hpp"
#include "occlusim/occluder.hpp"
#include "occlusim/protocol.hpp"
#include "occlusim/session.hpp"
#include "occlusim/simulator.hpp"
#include "occlusim/store.hpp"
#include "occlusim/telemetry.hpp"
