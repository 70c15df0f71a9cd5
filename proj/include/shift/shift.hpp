#pragma once

#include "shift/analysis.hpp"
#include "shift/baseline_scores.hpp"
#include "shift/error.hpp"
#include "shift/grpo.hpp"
#include "shift/matrix.hpp"
#include "shift/pool_io.hpp"
#include "shift/rirs.hpp"
#include "shift/select.hpp"
#include "shift/synth.hpp"
