#pragma once

/// @brief Umbrella header for the nnrecover library.

#include "activations.hpp"
#include "assignment.hpp"
#include "cp_decomposition.hpp"
#include "errors.hpp"
#include "harness.hpp"
#include "hessian.hpp"
#include "init.hpp"
#include "io.hpp"
#include "linalg.hpp"
#include "model.hpp"
#include "moments.hpp"
#include "power_method.hpp"
#include "properties.hpp"
#include "quadrature.hpp"
#include "rng.hpp"
#include "tensor3.hpp"
#include "train.hpp"
