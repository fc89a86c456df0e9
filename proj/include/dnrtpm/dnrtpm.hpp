#pragma once

#include "dnrtpm/baseline.hpp"
#include "dnrtpm/dtw.hpp"
#include "dnrtpm/engine.hpp"
#include "dnrtpm/error.hpp"
#include "dnrtpm/eval.hpp"
#include "dnrtpm/io.hpp"
#include "dnrtpm/prefix_norm.hpp"
#include "dnrtpm/reporting.hpp"
#include "dnrtpm/synth.hpp"
