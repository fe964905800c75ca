#pragma once

#include "rtgen/engine.hpp"
#include "rtgen/error.hpp"
#include "rtgen/latencydb.hpp"
#include "rtgen/metrics.hpp"
#include "rtgen/oracle.hpp"
#include "rtgen/policies.hpp"
#include "rtgen/time.hpp"
#include "rtgen/types.hpp"
#include "rtgen/workload.hpp"
