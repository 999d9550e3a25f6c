#pragma once

#include "accessprice/admissibility.hpp"
#include "accessprice/calibration.hpp"
#include "accessprice/config.hpp"
#include "accessprice/dynamics.hpp"
#include "accessprice/error.hpp"
#include "accessprice/fixed_points.hpp"
#include "accessprice/model.hpp"
#include "accessprice/regions.hpp"
#include "accessprice/scenarios.hpp"
#include "accessprice/stability.hpp"
#include "accessprice/types.hpp"
#include "accessprice/vector_field.hpp"
