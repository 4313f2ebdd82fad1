#pragma once

#include "versatune/client.hpp"
#include "versatune/config.hpp"
#include "versatune/core.hpp"
#include "versatune/detector.hpp"
#include "versatune/errors.hpp"
#include "versatune/io.hpp"
#include "versatune/metrics.hpp"
#include "versatune/mixer.hpp"
#include "versatune/rng.hpp"
#include "versatune/scheduler.hpp"
#include "versatune/serialize.hpp"
#include "versatune/simulator.hpp"
