#pragma once

// Umbrella header for the single-slice CT body-composition toolkit.

#include "bodycomp/core.hpp"
#include "bodycomp/fcm.hpp"
#include "bodycomp/io.hpp"
#include "bodycomp/metrics.hpp"
#include "bodycomp/phantom.hpp"
#include "bodycomp/pipeline.hpp"
#include "bodycomp/postprocess.hpp"
#include "bodycomp/segmentation.hpp"
#include "bodycomp/stats.hpp"
