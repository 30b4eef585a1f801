#pragma once

#include "lanekit/calibration.hpp"
#include "lanekit/calibration_io.hpp"
#include "lanekit/config.hpp"
#include "lanekit/error.hpp"
#include "lanekit/geometry.hpp"
#include "lanekit/image.hpp"
#include "lanekit/io.hpp"
#include "lanekit/lane_detect.hpp"
#include "lanekit/overlay.hpp"
#include "lanekit/parallel.hpp"
#include "lanekit/perspective.hpp"
#include "lanekit/pipeline.hpp"
#include "lanekit/point.hpp"
#include "lanekit/segmentation.hpp"
#include "lanekit/synth.hpp"
