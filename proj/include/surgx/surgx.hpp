#pragma once

#include "surgx/ablation.hpp"
#include "surgx/analysis.hpp"
#include "surgx/annotation.hpp"
#include "surgx/attribution.hpp"
#include "surgx/binary_io.hpp"
#include "surgx/concepts.hpp"
#include "surgx/container.hpp"
#include "surgx/error.hpp"
#include "surgx/evaluation.hpp"
#include "surgx/matrix.hpp"
#include "surgx/parallel.hpp"
#include "surgx/pipeline.hpp"
#include "surgx/report.hpp"
#include "surgx/rng.hpp"
#include "surgx/selection.hpp"
#include "surgx/synth.hpp"
