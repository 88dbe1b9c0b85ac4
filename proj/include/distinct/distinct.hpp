#pragma once

#include "cohort.hpp"
#include "config.hpp"
#include "csv.hpp"
#include "eval.hpp"
#include "metrics.hpp"
#include "parallel.hpp"
#include "report.hpp"
#include "rng.hpp"
#include "sampler.hpp"
#include "synth.hpp"

namespace distinct {
inline constexpr const char* version = "0.1.0";
}
