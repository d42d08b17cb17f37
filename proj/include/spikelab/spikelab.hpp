#pragma once

// Umbrella header.

#include "spikelab/auxiliary.hpp"
#include "spikelab/errors.hpp"
#include "spikelab/expansion.hpp"
#include "spikelab/expression.hpp"
#include "spikelab/geometry.hpp"
#include "spikelab/ground_state.hpp"
#include "spikelab/math_util.hpp"
#include "spikelab/ode.hpp"
#include "spikelab/predictor.hpp"
#include "spikelab/scaled_state.hpp"
