#pragma once

#include "slsmeso/common.hpp"
#include "slsmeso/config.hpp"
#include "slsmeso/constraints.hpp"
#include "slsmeso/equality_qp.hpp"
#include "slsmeso/io.hpp"
#include "slsmeso/lqr.hpp"
#include "slsmeso/meso.hpp"
#include "slsmeso/plant.hpp"
#include "slsmeso/render.hpp"
#include "slsmeso/simulate.hpp"
#include "slsmeso/spectral.hpp"
#include "slsmeso/synthesis.hpp"
