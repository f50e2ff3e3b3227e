#pragma once

#include "dagprobe/error.hpp"
#include "dagprobe/feature_store.hpp"
#include "dagprobe/graph.hpp"
#include "dagprobe/graph_io.hpp"
#include "dagprobe/ingest.hpp"
#include "dagprobe/io_util.hpp"
#include "dagprobe/matrix.hpp"
#include "dagprobe/metrics.hpp"
#include "dagprobe/metrics_io.hpp"
#include "dagprobe/pipeline.hpp"
#include "dagprobe/probe.hpp"
#include "dagprobe/probe_io.hpp"
#include "dagprobe/proofwriter.hpp"
#include "dagprobe/random.hpp"
#include "dagprobe/reconstruct.hpp"
#include "dagprobe/synth.hpp"
#include "dagprobe/train.hpp"
