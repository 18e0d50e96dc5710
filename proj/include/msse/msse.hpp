#pragma once

#include "msse/corpus.hpp"
#include "msse/embed.hpp"
#include "msse/emotion.hpp"
#include "msse/error.hpp"
#include "msse/eval.hpp"
#include "msse/graph.hpp"
#include "msse/graph_io.hpp"
#include "msse/metrics.hpp"
#include "msse/mlp.hpp"
#include "msse/pipeline.hpp"
#include "msse/propagate.hpp"
#include "msse/rng.hpp"
#include "msse/stats.hpp"
#include "msse/synth.hpp"
