#pragma once

#include "friquee/channels.hpp"
#include "friquee/color.hpp"
#include "friquee/dataset.hpp"
#include "friquee/error.hpp"
#include "friquee/evaluation.hpp"
#include "friquee/feature_maps.hpp"
#include "friquee/features.hpp"
#include "friquee/histogram.hpp"
#include "friquee/image_io.hpp"
#include "friquee/metrics.hpp"
#include "friquee/parallel.hpp"
#include "friquee/pipeline.hpp"
#include "friquee/plane.hpp"
#include "friquee/stat_models.hpp"
#include "friquee/steerable.hpp"
#include "friquee/svr.hpp"
