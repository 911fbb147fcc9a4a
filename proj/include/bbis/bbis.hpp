#pragma once

//! Umbrella header.

#include "baselines.hpp"
#include "errors.hpp"
#include "harness.hpp"
#include "io.hpp"
#include "kernels.hpp"
#include "samplers.hpp"
#include "score_target.hpp"
#include "simplex_qp.hpp"
#include "stein.hpp"
#include "targets.hpp"
