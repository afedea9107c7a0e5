#pragma once

#include "auction_sim.hpp"
#include "bandit_core.hpp"
#include "config.hpp"
#include "event_log.hpp"
#include "feedback_pipeline.hpp"
#include "metrics.hpp"
#include "normalization.hpp"
#include "presets.hpp"
#include "rng.hpp"
#include "runner.hpp"
#include "snapshot.hpp"
