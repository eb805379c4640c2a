#pragma once

#include "ccgen/baselines.hpp"
#include "ccgen/config.hpp"
#include "ccgen/core.hpp"
#include "ccgen/dataset.hpp"
#include "ccgen/embed.hpp"
#include "ccgen/error.hpp"
#include "ccgen/explain.hpp"
#include "ccgen/interchange.hpp"
#include "ccgen/io.hpp"
#include "ccgen/listlm.hpp"
#include "ccgen/lm_pipeline.hpp"
#include "ccgen/metrics.hpp"
#include "ccgen/rng.hpp"
#include "ccgen/serialize.hpp"
#include "ccgen/synth.hpp"
