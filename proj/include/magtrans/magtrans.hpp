#pragma once

#include "magtrans/physcore.hpp"
#include "magtrans/models.hpp"
#include "magtrans/regression.hpp"
#include "magtrans/levmar.hpp"
#include "magtrans/hall.hpp"
#include "magtrans/fit.hpp"
#include "magtrans/collapse.hpp"
#include "magtrans/sweep.hpp"
#include "magtrans/synth.hpp"
#include "magtrans/pipeline.hpp"
